"""Distinguishability and entanglement metrics.

``total_variation`` is the single-shot distinguishability of two outcome
distributions: guessing the more likely source succeeds with probability
``(1 + D1) / 2``. ``trace_distance`` is its quantum ceiling over all
measurements (Helstrom bound).
"""

from __future__ import annotations

import numpy as np
from scipy.stats import binom

from .errors import CapacityError
from .spinspace import DensityOp, StateVector
from .stmeasure import TripletProfile

_PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])


def _as_probs(p) -> np.ndarray:
    if isinstance(p, TripletProfile):
        return p.probs
    return np.asarray(p, dtype=float)


def total_variation(p, q) -> float:
    """D1 = 1/2 sum |p - q|, zero-padding the shorter distribution."""
    pa, qa = _as_probs(p), _as_probs(q)
    n = max(len(pa), len(qa))
    pa = np.pad(pa, (0, n - len(pa)))
    qa = np.pad(qa, (0, n - len(qa)))
    return float(0.5 * np.abs(pa - qa).sum())


def _spectral(state: StateVector | DensityOp) -> DensityOp:
    if isinstance(state, StateVector):
        return DensityOp.pure(state)
    return state


def trace_distance(rho: StateVector | DensityOp, sigma: StateVector | DensityOp) -> float:
    """Half the trace norm of rho - sigma, via their joint spectral span."""
    if isinstance(rho, StateVector) and isinstance(sigma, StateVector):
        ov = abs(rho.dot(sigma)) ** 2
        return float(np.sqrt(max(0.0, 1.0 - ov)))
    a, b = _spectral(rho), _spectral(sigma)
    if a.n_sites != b.n_sites:
        raise ValueError("states live on different chain lengths")
    d = 1 << a.n_sites
    if a.uniform and b.uniform:
        return 0.0
    if a.uniform or b.uniform:
        spec = b if a.uniform else a
        mu = np.asarray(spec.weights)
        r = len(mu)
        return float(0.5 * (np.abs(1.0 / d - mu).sum() + (d - r) / d))
    vecs = list(a.vectors) + list(b.vectors)
    if len(vecs) > 4096:
        raise CapacityError(
            f"combined spectral rank {len(vecs)} too large for exact trace distance")
    gram_cols = np.stack([v.to_full().amps.astype(complex) for v in vecs], axis=1)
    q, _ = np.linalg.qr(gram_cols)
    ca = q.conj().T @ gram_cols[:, : len(a.vectors)]
    cb = q.conj().T @ gram_cols[:, len(a.vectors):]
    delta = (ca * np.asarray(a.weights)) @ ca.conj().T - (cb * np.asarray(b.weights)) @ cb.conj().T
    evals = np.linalg.eigvalsh(delta)
    return float(0.5 * np.abs(evals).sum())


def required_repeats(d1: float, target: float, r_cap: int = 10_000_000) -> int:
    """Smallest repeat count distinguishing two sources of distinguishability d1.

    Each repeat is summarized by its (binary) more-likely-state guess, so r
    repeats face Binom(r, (1+d1)/2) against Binom(r, (1-d1)/2); the decision
    succeeds with probability (1 + TV of the two binomials) / 2. Likelihood
    ties split evenly, which the TV form already encodes. Success is
    nondecreasing in r (extra repeats can be ignored), so the threshold is
    located by doubling plus bisection.
    """
    if not 0.0 < d1 <= 1.0:
        raise ValueError("d1 must lie in (0, 1]; d1 = 0 admits no finite repeat count")
    if not 0.5 < target < 1.0:
        raise ValueError("target success probability must lie in (0.5, 1)")
    p_hi, p_lo = (1.0 + d1) / 2.0, (1.0 - d1) / 2.0

    def success(r: int) -> float:
        k = np.arange(r + 1)
        tv = 0.5 * np.abs(binom.pmf(k, r, p_hi) - binom.pmf(k, r, p_lo)).sum()
        return 0.5 * (1.0 + tv)

    hi = 1
    while success(hi) < target:
        hi *= 2
        if hi > r_cap:
            raise ValueError(f"no repeat count up to {r_cap} reaches target {target}")
    lo = hi // 2  # success(lo) < target <= success(hi), or hi == 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if success(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def concurrence(pair_state: DensityOp | np.ndarray) -> float:
    """Two-qubit mixed-state entanglement: max(0, l1 - l2 - l3 - l4), the l_i
    being the square roots of the eigenvalues of rho (YxY) rho* (YxY).

    Computed in l-space as the singular values of the spectral matrix
    S_ij = sqrt(w_i w_j) <v_i| YxY |v_j*>, which avoids the sqrt(eps) noise
    floor of eigensolving the non-Hermitian product for near-pure states.
    """
    yy = np.kron(_PAULI_Y, _PAULI_Y).real
    if isinstance(pair_state, DensityOp):
        if pair_state.n_sites != 2:
            raise ValueError("concurrence needs a two-site state")
        if pair_state.uniform:
            weights = np.full(4, 0.25)
            cols = np.eye(4, dtype=complex)
        else:
            weights = np.asarray(pair_state.weights)
            cols = np.stack([v.to_full().amps.astype(complex)
                             for v in pair_state.vectors], axis=1)
    else:
        rho = np.asarray(pair_state, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("expected a 4x4 density matrix")
        evals, evecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        keep = evals > 1e-14
        weights = evals[keep]
        cols = evecs[:, keep]
    root = np.sqrt(np.clip(weights, 0.0, None))
    s = (root[:, None] * root[None, :]) * (cols.conj().T @ yy @ cols.conj())
    lam = np.zeros(4)
    sv = np.linalg.svd(s, compute_uv=False)
    lam[: len(sv)] = sv
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity(a: StateVector, b: StateVector) -> float:
    """Squared overlap |<a|b>|^2."""
    if a.n_sites != b.n_sites:
        raise ValueError("states live on different chain lengths")
    return float(abs(a.dot(b)) ** 2)
