"""Figure rendering for the CLI report path.

Each CLI subcommand writes delimited data first; these helpers render a
companion PNG next to it. The CSVs remain the canonical artifacts; figures
are for eyeballing runs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _new_axes():
    plt.rcParams.update(_STYLE)
    fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_profiles(path: str, curves: list[tuple[str, np.ndarray]], title: str = "") -> str:
    fig, ax = _new_axes()
    for label, probs in curves:
        ax.plot(range(len(probs)), probs, marker="o", ms=3, label=label)
    ax.set_xlabel("number of triplet outcomes $m_t$")
    ax.set_ylabel("probability")
    if title:
        ax.set_title(title)
    if len(curves) > 1:
        ax.legend(fontsize=7)
    return _save(fig, path)


def plot_distinguish(path: str, ns, columns: dict[str, list[float]],
                     d1_grid, repeats: dict[float, list[int]]) -> str:
    plt.rcParams.update(_STYLE)
    fig, (ax, inset) = plt.subplots(1, 2, figsize=(9.2, 4.0))
    styles = {"d1q": "--", "d1": "-"}
    for name, vals in columns.items():
        ls = styles["d1q"] if name.startswith("d1q") else styles["d1"]
        ax.plot(ns, vals, ls, marker="o", ms=3, label=name)
    ax.set_xlabel("chain length N")
    ax.set_ylabel("single-shot distinguishability")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=7)
    for target, rs in repeats.items():
        inset.semilogy(d1_grid, rs, label=f"target {target:g}")
    inset.set_xlabel("$D_1$")
    inset.set_ylabel("repeats r")
    inset.legend(fontsize=7)
    return _save(fig, path)


def plot_tracked_scan(path: str, per_n: dict[int, tuple[list[float], list[float]]],
                      track: str) -> str:
    fig, ax = _new_axes()
    for n, (xs, ys) in sorted(per_n.items()):
        ax.plot(xs, ys, marker="o", ms=3, label=f"N={n}")
    ax.axvline(0.2412, color="k", lw=0.8, alpha=0.6)
    ax.set_xlabel("$J_2 / J_1$")
    ax.set_ylabel(f"normalized p({track})")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_localize(path: str, per_model: dict[str, tuple[list[int], list[float]]]) -> str:
    fig, ax = _new_axes()
    for label, (ns, q0s) in per_model.items():
        ax.semilogy(ns, q0s, marker="o", ms=3, label=label)
    ax.set_xlabel("chain length N")
    ax.set_ylabel("all-singlet probability $q(m_t{=}0)$")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_noise_profiles(path: str, curves: dict[float, np.ndarray], xname: str) -> str:
    fig, ax = _new_axes()
    cmap = plt.get_cmap("viridis")
    keys = sorted(curves)
    span = max(keys[-1] - keys[0], 1e-12)
    for val in keys:
        ax.plot(range(len(curves[val])), curves[val],
                color=cmap((val - keys[0]) / span), label=f"{xname}={val:g}")
    ax.set_xlabel("number of triplet outcomes $m_t$")
    ax.set_ylabel("probability")
    if len(keys) <= 10:
        ax.legend(fontsize=6)
    return _save(fig, path)


def plot_scalar_curve(path: str, xs, ys, yerr=None, xlabel: str = "", ylabel: str = "") -> str:
    fig, ax = _new_axes()
    if yerr is not None:
        ax.errorbar(xs, ys, yerr=yerr, marker="o", ms=3, capsize=2)
    else:
        ax.plot(xs, ys, marker="o", ms=3)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return _save(fig, path)
