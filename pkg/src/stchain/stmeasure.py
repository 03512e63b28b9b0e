"""Singlet-triplet pair measurements and the triplet profile.

A single measurement on a pair (a, b) discriminates the two-qubit singlet
``(|ud> - |du>)/sqrt(2)`` from the 3-dimensional triplet rest. Measuring a
disjoint set of pairs simultaneously and recording only the total number of
triplet outcomes produces the triplet profile ``p[0..M]``.

The profile is computed exactly, no sampling: the default path carries
``M + 1`` coefficient vectors (one per running triplet count) through the
pairs; a streaming fallback evaluates the profile generating polynomial at
the ``M + 1`` roots of unity with a single work vector and recovers the
coefficients by an inverse transform.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from itertools import product
from math import comb

import numpy as np

from .errors import CapacityError
from .spinspace import (DensityOp, SpinBasis, State, StateVector,
                        _reduced_matrix, build_basis, density_from_matrix,
                        maximally_mixed)

log = logging.getLogger(__name__)

_CLAMP_LIMIT = 1e-9
PROFILE_MEM_CAP_BYTES = 1_500_000_000  # override with STCHAIN_PROFILE_MEM_CAP
_BATCH_COLS = 128


def _profile_mem_cap() -> int:
    env = os.environ.get("STCHAIN_PROFILE_MEM_CAP")
    return int(env) if env else PROFILE_MEM_CAP_BYTES

BELL_SYMBOLS = "0123"  # 0: psi-, 1: psi+, 2: phi+, 3: phi-


@dataclass(frozen=True)
class PairingLayout:
    """Disjoint measured pairs plus the sites left unmeasured."""

    n_sites: int
    pairs: tuple[tuple[int, int], ...]
    unmeasured: tuple[int, ...]

    def __post_init__(self):
        seen: set[int] = set()
        for (a, b) in self.pairs:
            if not (1 <= a <= self.n_sites and 1 <= b <= self.n_sites) or a == b:
                raise ValueError(f"invalid pair ({a},{b})")
            if a in seen or b in seen:
                raise ValueError("pairs must be disjoint")
            seen.update((a, b))
        expected = set(range(1, self.n_sites + 1)) - seen
        if set(self.unmeasured) != expected:
            raise ValueError("unmeasured sites must be exactly the unpaired ones")


def pairing_layout(n_sites: int, pairs) -> PairingLayout:
    pairs = tuple((int(a), int(b)) for a, b in pairs)
    covered = {s for p in pairs for s in p}
    unmeasured = tuple(s for s in range(1, n_sites + 1) if s not in covered)
    return PairingLayout(n_sites, pairs, unmeasured)


def standard_layout(n_sites: int) -> PairingLayout:
    """All consecutive pairs (1,2), (3,4), ..., (N-1,N)."""
    if n_sites % 2 != 0:
        raise ValueError("standard layout needs an even number of sites")
    return pairing_layout(n_sites, [(2 * i - 1, 2 * i) for i in range(1, n_sites // 2 + 1)])


def middle_layout(n_sites: int) -> PairingLayout:
    """Pairs (2,3), (4,5), ..., (N-2,N-1); the two end sites stay unmeasured."""
    if n_sites % 2 != 0:
        raise ValueError("middle layout needs an even number of sites")
    if n_sites < 4:
        raise ValueError("middle layout needs at least 4 sites")
    return pairing_layout(n_sites, [(2 * i, 2 * i + 1) for i in range(1, (n_sites - 2) // 2 + 1)])


@dataclass(frozen=True)
class TripletProfile:
    """p[m] = probability of exactly m triplet outcomes."""

    probs: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_pairs(self) -> int:
        return len(self.probs) - 1

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m_t", "probability"])
            for m, p in enumerate(self.probs):
                writer.writerow([m, f"{p:.17g}"])

    def to_json(self, path: str | None = None):
        payload = {
            "m_t": list(range(len(self.probs))),
            "probability": [float(p) for p in self.probs],
            "meta": self.meta,
        }
        if path is None:
            return payload
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
        return payload


def binomial_profile(n_pairs: int, p_triplet: float, meta: dict | None = None) -> TripletProfile:
    probs = np.array([comb(n_pairs, m) * p_triplet ** m * (1 - p_triplet) ** (n_pairs - m)
                      for m in range(n_pairs + 1)])
    return TripletProfile(probs, meta or {})


# -- pair projector application ----------------------------------------------

def _pair_indexing(basis: SpinBasis, pair: tuple[int, int]):
    """Index arrays of the (up,down) codes and their bit-swapped partners."""
    a, b = pair
    ba = basis.site_bits(a)
    bb = basis.site_bits(b)
    mask = np.uint32((1 << (a - 1)) | (1 << (b - 1)))
    ud = np.flatnonzero((ba == 1) & (bb == 0))
    du = basis.index_of(basis.states[ud] ^ mask)
    return ud, du


def apply_singlet_projector(basis: SpinBasis, pair: tuple[int, int], amps: np.ndarray) -> np.ndarray:
    """P_s acting on amplitudes (works on (dim,) vectors and (dim, k) blocks)."""
    ud, du = _pair_indexing(basis, pair)
    out = np.zeros_like(amps)
    s = 0.5 * (amps[ud] - amps[du])
    out[ud] = s
    out[du] = -s
    return out


def _pair_aligned_indexing(basis: SpinBasis, pair: tuple[int, int]):
    a, b = pair
    ba = basis.site_bits(a)
    bb = basis.site_bits(b)
    mask = np.uint32((1 << (a - 1)) | (1 << (b - 1)))
    uu = np.flatnonzero((ba == 1) & (bb == 1))
    dd = basis.index_of(basis.states[uu] ^ mask)
    return uu, dd


def apply_bell_projector(basis: SpinBasis, pair: tuple[int, int], symbol: str,
                         amps: np.ndarray) -> np.ndarray:
    """Projector onto one Bell state of `pair`; symbol from BELL_SYMBOLS."""
    out = np.zeros_like(amps)
    if symbol in ("0", "1"):
        ud, du = _pair_indexing(basis, pair)
        sign = -1.0 if symbol == "0" else 1.0
        s = 0.5 * (amps[ud] + sign * amps[du])
        out[ud] = s
        out[du] = sign * s
    elif symbol in ("2", "3"):
        uu, dd = _pair_aligned_indexing(basis, pair)
        sign = 1.0 if symbol == "2" else -1.0
        s = 0.5 * (amps[uu] + sign * amps[dd])
        out[uu] = s
        out[dd] = sign * s
    else:
        raise ValueError(f"unknown Bell symbol {symbol!r}")
    return out


# -- outcome strings ----------------------------------------------------------

def _validate_outcome(layout: PairingLayout, x) -> str:
    s = "".join(x)
    if len(s) != len(layout.pairs):
        raise ValueError(f"outcome string length {len(s)} != {len(layout.pairs)} pairs")
    if any(c not in "st" for c in s):
        raise ValueError("outcome symbols must be 's' or 't'")
    return s


def outcome_probability(state: State, layout: PairingLayout, x) -> float:
    """Probability of one full outcome string under simultaneous measurement."""
    s = _validate_outcome(layout, x)
    if layout.n_sites != state.n_sites:
        raise ValueError("layout does not match the state's chain length")
    if isinstance(state, DensityOp):
        if state.uniform:
            return (0.25 ** s.count("s")) * (0.75 ** s.count("t"))
        return float(sum(w * outcome_probability(v, layout, s)
                         for w, v in zip(state.weights, state.vectors)))
    amps = state.amps
    for pair, c in zip(layout.pairs, s):
        ps = apply_singlet_projector(state.basis, pair, amps)
        amps = ps if c == "s" else amps - ps
    return float(np.real(np.vdot(amps, amps)))


# -- triplet profile ----------------------------------------------------------

def _profile_recursion(basis: SpinBasis, pairs, amps: np.ndarray) -> np.ndarray:
    """Carry M+1 coefficient blocks v_k; per pair, v_k <- P_s v_k + P_t v_{k-1}."""
    m_pairs = len(pairs)
    blocks = [amps] + [np.zeros_like(amps) for _ in range(m_pairs)]
    for j, pair in enumerate(pairs):
        top = min(j + 1, m_pairs)
        s_hi = apply_singlet_projector(basis, pair, blocks[top])
        for k in range(top, 0, -1):
            s_lo = apply_singlet_projector(basis, pair, blocks[k - 1])
            blocks[k] = s_hi + (blocks[k - 1] - s_lo)
            s_hi = s_lo
        blocks[0] = s_hi
    if amps.ndim == 1:
        return np.array([np.real(np.vdot(amps, b)) for b in blocks])
    # column blocks: per-column profile, shape (M+1, ncols)
    return np.stack([np.real(np.einsum("ij,ij->j", amps.conj(), b)) for b in blocks])


def _profile_streaming(basis: SpinBasis, pairs, amps: np.ndarray) -> np.ndarray:
    """Evaluate the profile polynomial at roots of unity, one work vector."""
    m_pairs = len(pairs)
    n_eval = m_pairs + 1
    roots = np.exp(2j * np.pi * np.arange(n_eval) / n_eval)
    vals = np.empty(n_eval, dtype=complex)
    for k, z in enumerate(roots):
        w = amps.astype(complex, copy=True)
        for pair in pairs:
            ps = apply_singlet_projector(basis, pair, w)
            w = z * w + (1.0 - z) * ps
        vals[k] = np.vdot(amps, w)
    coeffs = np.fft.fft(vals) / n_eval
    return np.real(coeffs)


def _finalize_profile(raw: np.ndarray, meta: dict) -> TripletProfile:
    clamp = float(-min(raw.min(), 0.0))
    if clamp > _CLAMP_LIMIT:
        raise RuntimeError(f"profile clamping {clamp:.3e} exceeds {_CLAMP_LIMIT}")
    if clamp > 0:
        log.debug("clamped negative profile mass %.3e", clamp)
    probs = np.clip(raw, 0.0, None)
    probs = probs / probs.sum()
    return TripletProfile(probs, meta)


def _profile_pure(state: StateVector, layout: PairingLayout, method: str) -> np.ndarray:
    cap = _profile_mem_cap()
    mem = (len(layout.pairs) + 2) * state.basis.dim * state.amps.itemsize
    if method == "auto":
        method = "recursion" if mem <= cap else "streaming"
    elif method == "recursion" and mem > cap:
        raise CapacityError(
            f"recursion would need ~{mem/1e9:.1f} GB; use method='streaming' "
            "(evaluation at roots of unity) instead")
    if method == "recursion":
        return _profile_recursion(state.basis, layout.pairs, state.amps)
    if method == "streaming":
        return _profile_streaming(state.basis, layout.pairs, state.amps)
    raise ValueError(f"unknown method {method!r}")


def triplet_profile(state: State, layout: PairingLayout, method: str = "auto",
                    meta: dict | None = None) -> TripletProfile:
    """Exact distribution of the number of triplet outcomes over `layout`.

    DensityOp inputs are evaluated per spectral vector and weight-summed;
    the implicit maximally mixed state yields Binomial(M, 3/4) analytically.
    """
    meta = dict(meta or {})
    meta.setdefault("layout", "custom")
    m_pairs = len(layout.pairs)
    if layout.n_sites != state.n_sites:
        raise ValueError("layout does not match the state's chain length")
    if isinstance(state, DensityOp):
        if state.uniform:
            return binomial_profile(m_pairs, 0.75, meta)
        raw = np.zeros(m_pairs + 1)
        groups: dict[tuple, list[int]] = {}
        for i, v in enumerate(state.vectors):
            groups.setdefault((v.basis.n_sites, v.basis.sector), []).append(i)
        for key, idxs in groups.items():
            basis = state.vectors[idxs[0]].basis
            for start in range(0, len(idxs), _BATCH_COLS):
                chunk = idxs[start:start + _BATCH_COLS]
                cols = np.stack([state.vectors[i].amps for i in chunk], axis=1)
                per_col = _profile_recursion(basis, layout.pairs, cols)
                raw += per_col @ np.asarray(state.weights)[chunk]
        return _finalize_profile(raw, meta)
    raw = _profile_pure(state, layout, method)
    return _finalize_profile(raw, meta)


def triplet_profile_bruteforce(state: State, layout: PairingLayout) -> TripletProfile:
    """Literal sum over all 2^M outcome strings; test oracle only."""
    m_pairs = len(layout.pairs)
    if m_pairs > 13:
        raise CapacityError(f"brute force capped at 13 pairs, got {m_pairs}")
    probs = np.zeros(m_pairs + 1)
    for symbols in product("st", repeat=m_pairs):
        x = "".join(symbols)
        probs[x.count("t")] += outcome_probability(state, layout, x)
    return _finalize_profile(probs, {"oracle": "bruteforce"})


# -- heralded localization ----------------------------------------------------

def _herald_pure(state: StateVector, layout: PairingLayout):
    amps = state.amps
    for pair in layout.pairs:
        amps = apply_singlet_projector(state.basis, pair, amps)
    q0 = float(np.real(np.vdot(amps, amps)))
    return q0, amps


def herald_all_singlet(state: State, layout: PairingLayout):
    """All-singlet postselection on the measured pairs.

    Returns ``(q0, end_state)`` where q0 is the probability of the all-singlet
    record and end_state the normalized two-site reduced state of the
    unmeasured pair (None when q0 is numerically zero).
    """
    if len(layout.unmeasured) != 2:
        raise ValueError("heralding needs a layout with exactly 2 unmeasured sites")
    keep = sorted(layout.unmeasured)
    if isinstance(state, DensityOp):
        if state.uniform:
            return 0.25 ** len(layout.pairs), maximally_mixed(2)
        q0 = 0.0
        rho = np.zeros((4, 4), dtype=complex)
        for w, v in zip(state.weights, state.vectors):
            qk, projected = _herald_pure(v, layout)
            q0 += w * qk
            if qk > 0:
                rho += w * _reduced_matrix(StateVector(v.basis, projected), keep)
        if q0 < 1e-14:
            return q0, None
        return q0, density_from_matrix(2, rho / q0)
    if layout.n_sites != state.n_sites:
        raise ValueError("layout does not match the state's chain length")
    q0, projected = _herald_pure(state, layout)
    if q0 < 1e-14:
        return q0, None
    rho = _reduced_matrix(StateVector(state.basis, projected), keep) / q0
    return q0, density_from_matrix(2, rho)


def bell_localize(state: StateVector, layout: PairingLayout):
    """Full Bell-basis measurement of the pairs; end-pair state per outcome.

    Outcome strings use one symbol per pair from ``BELL_SYMBOLS``
    ('0' psi-, '1' psi+, '2' phi+, '3' phi-), in that fixed order.
    Returns a list of (outcome_string, probability, end_state | None).
    """
    if len(layout.unmeasured) != 2:
        raise ValueError("localization needs exactly 2 unmeasured sites")
    m_pairs = len(layout.pairs)
    if m_pairs > 10:
        raise CapacityError(f"Bell enumeration capped at 10 pairs, got {m_pairs}")
    psi = state.to_full()  # phi+/- projections mix Sz sectors
    basis = psi.basis
    keep = sorted(layout.unmeasured)
    results = []

    def recurse(amps, depth, prefix):
        if depth == m_pairs:
            prob = float(np.real(np.vdot(amps, amps)))
            if prob < 1e-14:
                results.append((prefix, prob, None))
            else:
                rho = _reduced_matrix(StateVector(basis, amps), keep) / prob
                results.append((prefix, prob, density_from_matrix(2, rho)))
            return
        for symbol in BELL_SYMBOLS:
            nxt = apply_bell_projector(basis, layout.pairs[depth], symbol, amps)
            recurse(nxt, depth + 1, prefix + symbol)

    recurse(psi.amps.astype(complex), 0, "")
    return results


# -- two-qubit structure -------------------------------------------------------

def singlet_pair_state() -> StateVector:
    """(|ud> - |du>)/sqrt(2) on a 2-site chain (site 1 = low bit)."""
    basis = build_basis(2, None)
    amps = np.zeros(4)
    amps[1] = 1.0 / np.sqrt(2.0)  # code 1: site 1 up, site 2 down
    amps[2] = -1.0 / np.sqrt(2.0)
    return StateVector(basis, amps)


def werner_fraction(pair_state: DensityOp | np.ndarray):
    """Singlet weight alpha = Tr(P_s rho) and the trace-norm residual from
    the closest state of the form alpha P_s + (1 - alpha) P_t / 3."""
    if isinstance(pair_state, DensityOp):
        if pair_state.n_sites != 2:
            raise ValueError("werner_fraction needs a two-site state")
        rho = pair_state.to_matrix()
    else:
        rho = np.asarray(pair_state, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("expected a 4x4 density matrix")
    s = singlet_pair_state().amps.astype(complex)
    ps = np.outer(s, s.conj())
    alpha = float(np.real(s.conj() @ rho @ s))
    werner = alpha * ps + (1.0 - alpha) * (np.eye(4) - ps) / 3.0
    residual = float(np.abs(np.linalg.eigvalsh(rho - werner)).sum())
    return alpha, residual
