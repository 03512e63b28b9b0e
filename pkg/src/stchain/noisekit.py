"""Disorder sampling, ensemble averaging, and thermal scans.

Noise is quasi-static: each sample draws one fixed realization (random
per-site fields or random bond couplings), solves its ground state, and
evaluates the requested observables; results are averaged over samples.
Per-sample randomness comes from a counter-based stream keyed by
(master_seed, sample_index), so results are reproducible and independent
of worker count and execution order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import concurrence, fidelity
from .eigen import full_spectrum, ground_state, thermal_state
from .errors import ConvergenceError, EnsembleError
from .hamiltonians import ModelSpec, with_random_couplings, with_random_fields
from .spinspace import StateVector, build_basis
from .stmeasure import (TripletProfile, herald_all_singlet, middle_layout,
                        standard_layout, triplet_profile)

log = logging.getLogger(__name__)

_KINDS = ("nuclear_fields", "random_couplings")
_OBSERVABLES = ("profile", "localization", "fidelity")
DEFAULT_PROFILE_SAMPLES = 200
DEFAULT_SCALAR_SAMPLES = 500


def rng_stream(master_seed: int, sample_index: int) -> np.random.Generator:
    """Counter-based per-sample generator keyed by (master_seed, sample_index)."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=[master_seed, sample_index])))


def sample_nuclear_fields(n_sites: int, bn: float, rng: np.random.Generator) -> np.ndarray:
    """Per-site field 3-vectors with independent N(0, bn) Cartesian components.

    `bn` enters as the per-component standard deviation (the scale appearing
    in the Gaussian exponent), even though prose often calls it a variance.
    """
    if bn < 0:
        raise ValueError("bn must be nonnegative")
    if bn == 0:
        return np.zeros((n_sites, 3))
    return rng.normal(0.0, bn, size=(n_sites, 3))


@dataclass(frozen=True)
class DisorderConfig:
    kind: str
    strength: float
    samples: int
    master_seed: int
    convergence_tol: float = 1e-3

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}")
        if self.samples < 1:
            raise ValueError("samples must be at least 1")
        if self.strength < 0:
            raise ValueError("strength must be nonnegative")


@dataclass
class EnsembleResult:
    mean_profile: TripletProfile | None = None
    stderr_profile: np.ndarray | None = None
    mean_q0: float | None = None
    stderr_q0: float | None = None
    mean_concurrence: float | None = None
    stderr_concurrence: float | None = None
    mean_fidelity: float | None = None
    stderr_fidelity: float | None = None
    samples_used: int = 0
    config: DisorderConfig | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "samples_used": self.samples_used,
            "config": None if self.config is None else {
                "kind": self.config.kind,
                "strength": self.config.strength,
                "samples": self.config.samples,
                "master_seed": self.config.master_seed,
                "convergence_tol": self.config.convergence_tol,
            },
            "meta": self.meta,
        }
        if self.mean_profile is not None:
            out["mean_profile"] = [float(p) for p in self.mean_profile.probs]
            out["stderr_profile"] = [float(s) for s in self.stderr_profile]
        for name in ("q0", "concurrence", "fidelity"):
            m = getattr(self, f"mean_{name}")
            if m is not None:
                out[f"mean_{name}"] = float(m)
                out[f"stderr_{name}"] = float(getattr(self, f"stderr_{name}"))
        return out


def _perturbed_model(base: ModelSpec, kind: str, strength: float,
                     rng: np.random.Generator) -> ModelSpec:
    if kind == "nuclear_fields":
        return with_random_fields(base, sample_nuclear_fields(base.n_sites, strength, rng))
    return with_random_couplings(base, strength, rng)


def _evaluate_sample(args) -> dict | None:
    (base, kind, strength, master_seed, index, observables, clean_amps,
     clean_sector) = args
    rng = rng_stream(master_seed, index)
    model = _perturbed_model(base, kind, strength, rng)
    try:
        gs = ground_state(model)
    except ConvergenceError as exc:
        log.warning("sample %d failed to converge: %s", index, exc)
        return None
    out: dict = {}
    if "profile" in observables:
        out["profile"] = triplet_profile(gs.vector, standard_layout(base.n_sites)).probs
    if "localization" in observables:
        q0, end = herald_all_singlet(gs.vector, middle_layout(base.n_sites))
        out["q0"] = q0
        out["concurrence"] = 0.0 if end is None else concurrence(end)
    if "fidelity" in observables:
        clean = StateVector(build_basis(base.n_sites, clean_sector), clean_amps)
        out["fidelity"] = fidelity(clean, gs.vector)
    return out


def ensemble_average(config: DisorderConfig, base_model: ModelSpec,
                     observables, workers: int = 1) -> EnsembleResult:
    """Average the requested observables over the disorder ensemble.

    Samples are evaluated in fixed index order in batches of one tenth of
    the budget; averaging stops early once every requested running mean
    moves by less than `config.convergence_tol` between batches.
    """
    observables = set(observables)
    if not observables or not observables.issubset(_OBSERVABLES):
        raise ValueError(f"observables must be a nonempty subset of {_OBSERVABLES}")
    if not base_model.field_free:
        raise ValueError("the ensemble base model must be field-free")

    clean_amps, clean_sector = None, None
    if "fidelity" in observables:
        clean = ground_state(base_model)
        clean_amps = clean.vector.amps
        clean_sector = clean.vector.basis.sector

    batch = max(1, -(-config.samples // 10))
    rows: list[dict] = []
    failures = 0
    prev_means: dict | None = None
    index = 0
    while index < config.samples:
        hi = min(index + batch, config.samples)
        tasks = [
            (base_model, config.kind, config.strength, config.master_seed, i,
             tuple(sorted(observables)), clean_amps, clean_sector)
            for i in range(index, hi)
        ]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_evaluate_sample, tasks))
        else:
            results = [_evaluate_sample(t) for t in tasks]
        for r in results:
            if r is None:
                failures += 1
            else:
                rows.append(r)
        index = hi
        if failures > 0.05 * config.samples:
            raise EnsembleError(
                f"{failures} of {config.samples} samples failed to converge")
        means = _running_means(rows, observables)
        if prev_means is not None and _converged(prev_means, means, config.convergence_tol):
            break
        prev_means = means

    if not rows:
        raise EnsembleError("all samples failed")
    return _reduce(rows, observables, config, base_model)


def _running_means(rows: list[dict], observables) -> dict:
    means = {}
    if "profile" in observables:
        means["profile"] = np.mean([r["profile"] for r in rows], axis=0)
    if "localization" in observables:
        means["q0"] = float(np.mean([r["q0"] for r in rows]))
        means["concurrence"] = float(np.mean([r["concurrence"] for r in rows]))
    if "fidelity" in observables:
        means["fidelity"] = float(np.mean([r["fidelity"] for r in rows]))
    return means


def _converged(prev: dict, cur: dict, tol: float) -> bool:
    for key, value in cur.items():
        old = prev[key]
        if key == "profile":
            if 0.5 * np.abs(value - old).sum() >= tol:
                return False
        else:
            if abs(value - old) >= tol * max(abs(old), 1e-12):
                return False
    return True


def _stderr(values: np.ndarray) -> np.ndarray | float:
    values = np.asarray(values)
    n = values.shape[0]
    if n < 2:
        return np.zeros(values.shape[1:]) if values.ndim > 1 else 0.0
    return values.std(axis=0, ddof=1) / np.sqrt(n)


def _reduce(rows: list[dict], observables, config: DisorderConfig,
            base_model: ModelSpec) -> EnsembleResult:
    res = EnsembleResult(samples_used=len(rows), config=config,
                         meta={"model": base_model.label, "n_sites": base_model.n_sites})
    if "profile" in observables:
        profs = np.stack([r["profile"] for r in rows])
        mean = profs.mean(axis=0)
        res.mean_profile = TripletProfile(mean / mean.sum(), dict(res.meta))
        res.stderr_profile = np.asarray(_stderr(profs))
    if "localization" in observables:
        q0s = np.array([r["q0"] for r in rows])
        cs = np.array([r["concurrence"] for r in rows])
        res.mean_q0, res.stderr_q0 = float(q0s.mean()), float(_stderr(q0s))
        res.mean_concurrence = float(cs.mean())
        res.stderr_concurrence = float(_stderr(cs))
    if "fidelity" in observables:
        fids = np.array([r["fidelity"] for r in rows])
        res.mean_fidelity, res.stderr_fidelity = float(fids.mean()), float(_stderr(fids))
    return res


def thermal_scan(model: ModelSpec, betas, observables) -> list[dict]:
    """Thermal-state observables at each inverse temperature in `betas`.

    observables is a subset of {"profile", "localization"}; localization
    projects and traces the exact (truncated) spectral thermal state.
    """
    observables = set(observables)
    if not observables or not observables.issubset({"profile", "localization"}):
        raise ValueError("observables must be a nonempty subset of {profile, localization}")
    spectrum = full_spectrum(model)
    results = []
    for beta in betas:
        rho = thermal_state(model, float(beta), spectrum=spectrum)
        entry: dict = {"beta": float(beta),
                       "kT": float("inf") if beta == 0 else 1.0 / float(beta)}
        if "profile" in observables:
            entry["profile"] = triplet_profile(rho, standard_layout(model.n_sites))
        if "localization" in observables:
            q0, end = herald_all_singlet(rho, middle_layout(model.n_sites))
            entry["q0"] = q0
            entry["concurrence"] = 0.0 if end is None else concurrence(end)
        results.append(entry)
    return results
