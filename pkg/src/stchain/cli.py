"""Command line front end: figure-style scans with CSV + manifest output.

Every subcommand writes one or more CSV files (fixed schema: header row,
'.' decimal separator, 17 significant digits), a JSON run manifest listing
every output file, and by default a companion PNG rendering. Identical
argv and seed reproduce the CSV bytes exactly.

Exit codes: 0 success, 2 invalid arguments, 3 solver/capacity failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import required_repeats, total_variation, trace_distance
from .eigen import first_excited_singlet, ground_state, thermal_state
from .errors import CapacityError, ConvergenceError, EnsembleError, SearchExhaustedError
from .hamiltonians import ModelSpec, build_model
from .noisekit import DisorderConfig, ensemble_average, thermal_scan
from .spinspace import maximally_mixed, neel_state
from .stmeasure import (binomial_profile, middle_layout, standard_layout,
                        triplet_profile, triplet_profile_bruteforce)

DEFAULT_SEED = 20177
MANIFEST_SCHEMA = "stchain-manifest/1"

_MODEL_CHOICES = ("ring", "open", "j1j2", "j1j2_ring", "end_weakened", "alternating")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[tuple]) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _parse_grid(text: str, integer: bool = False) -> list:
    """'a:b:s' (inclusive within half a step), 'x,y,z', or a single value."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid syntax is start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        count = int(np.floor((stop - start) / step + 0.5)) + 1
        values = [start + k * step for k in range(max(count, 1))]
    else:
        values = [float(p) for p in text.split(",") if p != ""]
    if integer:
        out = []
        for v in values:
            if abs(v - round(v)) > 1e-9:
                raise ValueError(f"expected integer grid values, got {v}")
            out.append(int(round(v)))
        return out
    return [float(v) for v in values]


def _model_from_args(args) -> ModelSpec:
    variant = "j1j2_ring" if args.model == "j1j2" else args.model
    params = {"J1": args.j1}
    if getattr(args, "j2", None) is not None:
        params["J2"] = args.j2
    if getattr(args, "je", None) is not None:
        params["Je"] = args.je
    if getattr(args, "delta", None) is not None:
        params["delta"] = args.delta
    return build_model(variant, args.n, params)


def _parse_localize_models(text: str):
    """'h0,he:0.5,ha:0.1' -> list of (label, builder(n))."""
    entries = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        name, _, value = token.partition(":")
        if name == "h0":
            entries.append(("h0", lambda n: build_model("open", n)))
        elif name == "he":
            je = float(value) if value else 0.5
            entries.append((f"he:{je:g}",
                            lambda n, je=je: build_model("end_weakened", n, {"Je": je})))
        elif name == "ha":
            delta = float(value) if value else 0.1
            entries.append((f"ha:{delta:g}",
                            lambda n, d=delta: build_model("alternating", n, {"delta": d})))
        else:
            raise ValueError(f"unknown localization model {name!r} (use h0, he:<Je>, ha:<delta>)")
    if not entries:
        raise ValueError("no localization models given")
    return entries


class _Run:
    """Tracks output files and writes the manifest when the command is done."""

    def __init__(self, args, argv: list[str]):
        self.args = args
        self.argv = argv
        self.out = Path(args.out)
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.t0 = time.time()

    def sibling(self, suffix: str) -> Path:
        return self.out.with_name(self.out.stem + suffix)

    def record(self, path: Path) -> Path:
        self.outputs.append(str(path))
        return path

    def manifest(self) -> Path:
        params = {k: v for k, v in vars(self.args).items() if k != "func"}
        payload = {
            "schema": MANIFEST_SCHEMA,
            "command": self.args.command,
            "argv": self.argv,
            "params": params,
            "master_seed": getattr(self.args, "seed", DEFAULT_SEED),
            "tool_version": __version__,
            "wall_time_s": round(time.time() - self.t0, 3),
            "created_utc": datetime.now(timezone.utc).isoformat(),
            "outputs": list(self.outputs),
        }
        path = self.sibling(".manifest.json")
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
        return path


# -- subcommands ---------------------------------------------------------------


def _cmd_profile(args, run: _Run) -> None:
    layout = standard_layout(args.n) if args.layout == "standard" else middle_layout(args.n)
    meta = {"n_sites": args.n, "layout": args.layout, "seed": args.seed, "state": args.state}
    if args.state == "neel":
        state = neel_state(args.n)
        meta["model"] = "neel"
    elif args.state == "mixed":
        state = maximally_mixed(args.n)
        meta["model"] = "maximally_mixed"
    else:
        model = _model_from_args(args)
        meta["model"] = model.label
        if args.kt is not None or args.beta is not None:
            beta = args.beta if args.beta is not None else 1.0 / args.kt
            meta["beta"] = beta
            state = thermal_state(model, beta)
        else:
            state = ground_state(model, seed=args.seed).vector
    profile = triplet_profile(state, layout, meta=meta)
    if args.oracle:
        if len(layout.pairs) > 10:
            raise ValueError("--oracle cross-check requires at most 10 measured pairs")
        reference = triplet_profile_bruteforce(state, layout)
        dev = float(np.abs(profile.probs - reference.probs).max())
        if dev > 1e-10:
            raise ConvergenceError(f"oracle mismatch: recursion vs brute force {dev:.3e}")
        print(f"oracle check passed (max deviation {dev:.3e})")
    rows = [(m, p) for m, p in enumerate(profile.probs)]
    run.record(_write_csv(run.out, ["m_t", "probability"], rows))
    profile.to_json(str(run.sibling(".json")))
    run.record(run.sibling(".json"))
    if not args.no_plot:
        from .plotting import plot_profiles

        run.record(Path(plot_profiles(str(run.sibling(".png")),
                                      [(meta["model"], profile.probs)])))


def _cmd_distinguish(args, run: _Run) -> None:
    ns = _parse_grid(args.n, integer=True)
    targets = [float(t) for t in args.targets.split(",")]
    rows = []
    columns: dict[str, list[float]] = {
        "d1_gs_neel": [], "d1q_gs_neel": [],
        "d1_gs_excited": [], "d1q_gs_excited": [],
        "d1_gs_mixed": [], "d1q_gs_mixed": [],
    }
    for n in ns:
        model = build_model("ring", n, {"J1": args.j1})
        gs = ground_state(model, seed=args.seed)
        layout = standard_layout(n)
        p_gs = triplet_profile(gs.vector, layout).probs
        p_neel = binomial_profile(n // 2, 0.5).probs
        excited = first_excited_singlet(model, seed=args.seed)
        p_exc = triplet_profile(excited.vector, layout).probs
        p_mixed = binomial_profile(n // 2, 0.75).probs
        d = 2 ** n
        columns["d1_gs_neel"].append(total_variation(p_gs, p_neel))
        columns["d1q_gs_neel"].append(trace_distance(gs.vector, neel_state(n)))
        columns["d1_gs_excited"].append(total_variation(p_gs, p_exc))
        columns["d1q_gs_excited"].append(trace_distance(gs.vector, excited.vector))
        columns["d1_gs_mixed"].append(total_variation(p_gs, p_mixed))
        columns["d1q_gs_mixed"].append((d - 1) / d)  # pure state vs 1/d
        rows.append((n, *(columns[k][-1] for k in columns)))
    run.record(_write_csv(run.out, ["n", *columns.keys()], rows))

    d1_grid = [min(v, 1.0) for v in _parse_grid(args.d1_grid)]
    repeat_rows = []
    repeats = {t: [] for t in targets}
    for d1 in d1_grid:
        rs = [required_repeats(d1, t) for t in targets]
        for t, r in zip(targets, rs):
            repeats[t].append(r)
        repeat_rows.append((d1, *rs))
    header = ["d1"] + [f"r_{t:g}" for t in targets]
    run.record(_write_csv(run.sibling("_repeats.csv"), header, repeat_rows))
    if not args.no_plot:
        from .plotting import plot_distinguish

        run.record(Path(plot_distinguish(str(run.sibling(".png")), ns, columns,
                                         d1_grid, repeats)))


def _cmd_scan_j2(args, run: _Run) -> None:
    ns = _parse_grid(args.n, integer=True)
    j2s = _parse_grid(args.j2)
    track = args.track
    if track is not None:
        if not track.startswith("m") or not track[1:].isdigit():
            raise ValueError(f"--track expects m<k>, e.g. m3; got {track!r}")
        k_track = int(track[1:])
    rows = []
    per_n: dict[int, tuple[list[float], list[float]]] = {}
    for n in ns:
        layout = standard_layout(n)
        raw_vals = []
        for j2 in j2s:
            model = build_model("j1j2_ring", n, {"J1": args.j1, "J2": j2})
            gs = ground_state(model, seed=args.seed)
            probs = triplet_profile(gs.vector, layout).probs
            if track is None:
                rows.extend((n, j2, m, p) for m, p in enumerate(probs))
            else:
                if k_track >= len(probs):
                    raise ValueError(f"track index {k_track} exceeds pair count {len(probs) - 1}")
                raw_vals.append(float(probs[k_track]))
        if track is not None:
            base = raw_vals[0]
            if abs(j2s[0]) > 1e-12:
                raise ValueError("tracked scans need the grid to start at J2 = 0 "
                                 "(normalization reference)")
            normed = [v / base for v in raw_vals]
            per_n[n] = (j2s, normed)
            rows.extend((n, j2, v, vn) for j2, v, vn in zip(j2s, raw_vals, normed))
    if track is None:
        run.record(_write_csv(run.out, ["n", "j2", "m_t", "probability"], rows))
    else:
        run.record(_write_csv(run.out, ["n", "j2", f"p_{track}", f"p_{track}_normalized"], rows))
        if not args.no_plot:
            from .plotting import plot_tracked_scan

            run.record(Path(plot_tracked_scan(str(run.sibling(".png")), per_n, track)))


def _cmd_localize(args, run: _Run) -> None:
    from .analysis import concurrence
    from .stmeasure import herald_all_singlet

    models = _parse_localize_models(args.models)
    ns = _parse_grid(args.n, integer=True)
    rows = []
    per_model: dict[str, tuple[list[int], list[float]]] = {}
    for label, builder in models:
        q0s = []
        for n in ns:
            gs = ground_state(builder(n), seed=args.seed)
            q0, end = herald_all_singlet(gs.vector, middle_layout(n))
            c = float("nan") if end is None else concurrence(end)
            rows.append((label, n, q0, c))
            q0s.append(q0)
        per_model[label] = (ns, q0s)
    run.record(_write_csv(run.out, ["model", "n", "q0", "concurrence"], rows))
    if not args.no_plot:
        from .plotting import plot_localize

        run.record(Path(plot_localize(str(run.sibling(".png")), per_model)))


def _cmd_noise_thermal(args, run: _Run) -> None:
    model = _model_from_args(args)
    kts = _parse_grid(args.kt)
    if any(kt <= 0 for kt in kts):
        raise ValueError("kT values must be positive")
    observables = set(args.observables.split(","))
    results = thermal_scan(model, [1.0 / kt for kt in kts], observables)
    if "profile" in observables:
        rows = []
        curves = {}
        for kt, entry in zip(kts, results):
            probs = entry["profile"].probs
            curves[kt] = probs
            rows.extend((kt, entry["beta"], m, p) for m, p in enumerate(probs))
        run.record(_write_csv(run.out, ["kT", "beta", "m_t", "probability"], rows))
        if not args.no_plot:
            from .plotting import plot_noise_profiles

            run.record(Path(plot_noise_profiles(str(run.sibling(".png")), curves, "kT")))
    if "localization" in observables:
        rows = [(kt, e["beta"], e["q0"], e["concurrence"]) for kt, e in zip(kts, results)]
        path = run.out if "profile" not in observables else run.sibling("_localization.csv")
        run.record(_write_csv(path, ["kT", "beta", "q0", "concurrence"], rows))
        if not args.no_plot:
            from .plotting import plot_scalar_curve

            run.record(Path(plot_scalar_curve(
                str(run.sibling("_localization.png")), kts,
                [e["concurrence"] for e in results], xlabel="kT",
                ylabel="heralded end-pair concurrence")))


def _run_ensembles(args, run: _Run, kind: str, grid: list[float], xname: str) -> None:
    model = _model_from_args(args)
    observables = set(args.observables.split(","))
    profile_rows, scalar_rows, ensemble_payload = [], [], []
    curves = {}
    for strength in grid:
        config = DisorderConfig(kind=kind, strength=strength, samples=args.samples,
                                master_seed=args.seed, convergence_tol=args.tol)
        result = ensemble_average(config, model, observables, workers=args.threads)
        ensemble_payload.append({xname: strength, **result.to_json()})
        if result.mean_profile is not None:
            curves[strength] = result.mean_profile.probs
            profile_rows.extend(
                (strength, m, p, s) for m, (p, s) in enumerate(
                    zip(result.mean_profile.probs, result.stderr_profile)))
        scalar = [strength]
        if "localization" in observables:
            scalar += [result.mean_q0, result.stderr_q0,
                       result.mean_concurrence, result.stderr_concurrence]
        if "fidelity" in observables:
            scalar += [result.mean_fidelity, result.stderr_fidelity]
        scalar.append(result.samples_used)
        scalar_rows.append(tuple(scalar))

    wrote_main = False
    if profile_rows:
        run.record(_write_csv(run.out, [xname, "m_t", "mean_probability", "stderr"],
                              profile_rows))
        wrote_main = True
        if not args.no_plot:
            from .plotting import plot_noise_profiles

            run.record(Path(plot_noise_profiles(str(run.sibling(".png")), curves, xname)))
    if len(scalar_rows[0]) > 2:
        header = [xname]
        if "localization" in observables:
            header += ["mean_q0", "stderr_q0", "mean_concurrence", "stderr_concurrence"]
        if "fidelity" in observables:
            header += ["mean_fidelity", "stderr_fidelity"]
        header.append("samples_used")
        path = run.sibling("_scalars.csv") if wrote_main else run.out
        run.record(_write_csv(path, header, scalar_rows))
        if not args.no_plot and ("fidelity" in observables or "localization" in observables):
            from .plotting import plot_scalar_curve

            ycol = "mean_fidelity" if "fidelity" in observables else "mean_concurrence"
            idx = header.index(ycol)
            run.record(Path(plot_scalar_curve(
                str(run.sibling("_scalars.png")), grid,
                [r[idx] for r in scalar_rows],
                yerr=[r[idx + 1] for r in scalar_rows],
                xlabel=xname, ylabel=ycol)))
    with open(run.sibling("_ensemble.json"), "w") as fh:
        json.dump(ensemble_payload, fh, indent=2)
    run.record(run.sibling("_ensemble.json"))


def _cmd_noise_nuclear(args, run: _Run) -> None:
    _run_ensembles(args, run, "nuclear_fields", _parse_grid(args.bn), "bn")


def _cmd_noise_couplings(args, run: _Run) -> None:
    _run_ensembles(args, run, "random_couplings", _parse_grid(args.sigma), "sigma_j")


# -- parser ---------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="primary CSV output path")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed")
    p.add_argument("--threads", type=int, default=1, help="parallel worker cap")
    p.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    p.add_argument("--j1", type=float, default=1.0, help="nearest-neighbour coupling")


def _add_model_args(p: argparse.ArgumentParser, default: str = "ring") -> None:
    p.add_argument("--model", choices=_MODEL_CHOICES, default=default)
    p.add_argument("--n", type=int, required=True, help="chain length (even)")
    p.add_argument("--j2", type=float, default=None, help="next-nearest coupling")
    p.add_argument("--je", type=float, default=None, help="end-bond coupling")
    p.add_argument("--delta", type=float, default=None, help="alternation strength")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stchain",
        description="Heisenberg-chain states characterized through singlet-triplet "
                    "pair measurements")
    parser.add_argument("--version", action="version", version=f"stchain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="triplet profile of one state")
    _add_model_args(p)
    p.add_argument("--layout", choices=("standard", "middle"), default="standard")
    p.add_argument("--state", choices=("gs", "neel", "mixed"), default="gs")
    p.add_argument("--kt", type=float, default=None, help="temperature (thermal state)")
    p.add_argument("--beta", type=float, default=None, help="inverse temperature")
    p.add_argument("--oracle", action="store_true",
                   help="cross-check against the brute-force outcome sum")
    _add_common(p)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("distinguish", help="single-shot distinguishability vs N")
    p.add_argument("--n", required=True, help="chain length grid, e.g. 8:16:2")
    p.add_argument("--targets", default="0.9,0.99", help="success targets for repeats")
    p.add_argument("--d1-grid", default="0.05:1.0:0.05", help="D1 grid for repeat counts")
    _add_common(p)
    p.set_defaults(func=_cmd_distinguish)

    p = sub.add_parser("scan-j2", help="profiles across the frustrated-coupling scan")
    p.add_argument("--n", required=True, help="chain length(s), e.g. 14 or 10:16:2")
    p.add_argument("--j2", required=True, help="J2 grid, e.g. 0:0.5:0.05")
    p.add_argument("--track", default=None, help="track one bin, e.g. m3 (normalized at J2=0)")
    _add_common(p)
    p.set_defaults(func=_cmd_scan_j2)

    p = sub.add_parser("localize", help="heralded end-to-end entanglement vs N")
    p.add_argument("--models", default="h0,he:0.5,ha:0.1",
                   help="comma list: h0, he:<Je>, ha:<delta>")
    p.add_argument("--n", required=True, help="chain length grid, e.g. 4:16:2")
    _add_common(p)
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("noise-thermal", help="thermal-state profiles / localization")
    _add_model_args(p)
    p.add_argument("--kt", required=True, help="temperature grid, e.g. 0.1:5:0.1")
    p.add_argument("--observables", default="profile",
                   help="comma subset of profile,localization")
    _add_common(p)
    p.set_defaults(func=_cmd_noise_thermal)

    p = sub.add_parser("noise-nuclear", help="random static field ensembles")
    _add_model_args(p)
    p.add_argument("--bn", required=True, help="field strength grid")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-3, help="early-stop tolerance")
    p.add_argument("--observables", default="profile",
                   help="comma subset of profile,localization,fidelity")
    _add_common(p)
    p.set_defaults(func=_cmd_noise_nuclear)

    p = sub.add_parser("noise-couplings", help="random coupling ensembles")
    _add_model_args(p)
    p.add_argument("--sigma", required=True, help="coupling noise grid")
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-3, help="early-stop tolerance")
    p.add_argument("--observables", default="fidelity",
                   help="comma subset of profile,localization,fidelity")
    _add_common(p)
    p.set_defaults(func=_cmd_noise_couplings)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if "STCHAIN_THREADS" in os.environ and hasattr(args, "threads"):
        args.threads = min(args.threads, int(os.environ["STCHAIN_THREADS"]))
    run = _Run(args, argv)
    try:
        args.func(args, run)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (CapacityError, ConvergenceError, EnsembleError, SearchExhaustedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    run.manifest()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
