"""Bit-coded Hilbert space for chains of spin-1/2 sites.

Conventions, fixed once for the whole package:

* sites are numbered 1..N and site ``s`` lives on bit ``s - 1`` of a basis
  code (so site 1 is the least significant bit);
* bit value 1 means spin up, 0 means spin down;
* a basis is either the full space (dimension ``2**N``) or the fixed
  total-Sz sector with ``n_up`` set bits (dimension ``C(N, n_up)``), stored
  as a strictly increasing array of codes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from math import comb
from typing import BinaryIO, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError

MAX_SITES = 28
DIM_CAP = 1 << 26
DENSE_CAP_SITES = 14  # anything needing explicit 2^N-sized spectra
_LOOKUP_MAX_SITES = 24  # above this, index_of falls back to searchsorted

_STATE_MAGIC = b"STV1"


def _popcount(codes: np.ndarray) -> np.ndarray:
    return np.bitwise_count(codes)


@dataclass(frozen=True)
class SpinBasis:
    """Ordered basis of bit codes, optionally restricted to fixed n_up."""

    n_sites: int
    sector: int | None
    states: np.ndarray  # uint32, strictly increasing, read-only

    _lookup_cache: list = field(default_factory=list, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def is_full(self) -> bool:
        return self.sector is None

    def site_bits(self, site: int) -> np.ndarray:
        """Bit of every basis code at `site` (1 = up), as uint32 array."""
        if not 1 <= site <= self.n_sites:
            raise ValueError(f"site {site} outside 1..{self.n_sites}")
        return (self.states >> np.uint32(site - 1)) & np.uint32(1)

    def _lookup(self) -> np.ndarray | None:
        if self.n_sites > _LOOKUP_MAX_SITES:
            return None
        if not self._lookup_cache:
            table = np.full(1 << self.n_sites, -1, dtype=np.int32)
            table[self.states] = np.arange(self.dim, dtype=np.int32)
            self._lookup_cache.append(table)
        return self._lookup_cache[0]

    def index_of(self, codes: np.ndarray) -> np.ndarray:
        """Positions of `codes` in the basis. Codes must belong to it."""
        if self.is_full:
            return np.asarray(codes, dtype=np.int64)
        table = self._lookup()
        if table is not None:
            return table[codes].astype(np.int64, copy=False)
        idx = np.searchsorted(self.states, codes)
        return idx

    def index_of_one(self, code: int) -> int:
        return int(self.index_of(np.asarray([code], dtype=np.uint32))[0])


def build_basis(n_sites: int, sector: int | None = None) -> SpinBasis:
    """Construct the bit-coded basis, optionally in a fixed-n_up sector.

    Parameters
    ----------
    n_sites : int
        Number of spin-1/2 sites, 1..28.
    sector : int, optional
        Number of up spins; fixes total Sz = sector - n_sites/2.

    Raises
    ------
    CapacityError
        If the resulting dimension exceeds the implementation cap.
    """
    if not 1 <= n_sites <= MAX_SITES:
        raise ValueError(f"n_sites must be in 1..{MAX_SITES}, got {n_sites}")
    if sector is not None and not 0 <= sector <= n_sites:
        raise ValueError(f"sector must be in 0..{n_sites}, got {sector}")
    dim = comb(n_sites, sector) if sector is not None else 1 << n_sites
    if dim > DIM_CAP:
        raise CapacityError(
            f"basis dimension {dim} exceeds cap {DIM_CAP} (n_sites={n_sites}, sector={sector})"
        )
    if sector is None:
        states = np.arange(1 << n_sites, dtype=np.uint32)
    else:
        chunk = 1 << min(n_sites, 24)
        parts = []
        for start in range(0, 1 << n_sites, chunk):
            codes = np.arange(start, start + chunk, dtype=np.uint32)
            parts.append(codes[_popcount(codes) == sector])
        states = np.concatenate(parts)
    states.setflags(write=False)
    return SpinBasis(n_sites=n_sites, sector=sector, states=states)


@dataclass(frozen=True)
class StateVector:
    """Normalized amplitude vector over a SpinBasis."""

    basis: SpinBasis
    amps: np.ndarray

    def __post_init__(self):
        if len(self.amps) != self.basis.dim:
            raise ValueError("amplitude length does not match basis dimension")

    @property
    def n_sites(self) -> int:
        return self.basis.n_sites

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def dot(self, other: "StateVector") -> complex:
        """<self|other>, tolerating different sectors of the same chain."""
        if self.n_sites != other.n_sites:
            raise ValueError("states live on different chain lengths")
        if self.basis.sector == other.basis.sector:
            return complex(np.vdot(self.amps, other.amps))
        if self.basis.sector is not None and other.basis.sector is not None:
            return 0.0 + 0.0j  # distinct Sz sectors are orthogonal
        full, restricted = (self, other) if self.basis.is_full else (other, self)
        gathered = full.amps[restricted.basis.states]
        if full is self:
            return complex(np.vdot(gathered, restricted.amps))
        return complex(np.vdot(restricted.amps, gathered))

    def to_full(self) -> "StateVector":
        """Embed a sector state into the full 2^N space."""
        if self.basis.is_full:
            return self
        full = build_basis(self.n_sites, None)
        amps = np.zeros(full.dim, dtype=self.amps.dtype)
        amps[self.basis.states] = self.amps
        return StateVector(full, amps)


def make_state(basis: SpinBasis, amps: np.ndarray, normalize: bool = False) -> StateVector:
    """Wrap amplitudes as a StateVector, checking (or fixing) the norm."""
    amps = np.asarray(amps)
    nrm = np.linalg.norm(amps)
    if normalize:
        if nrm == 0:
            raise ValueError("cannot normalize a zero vector")
        amps = amps / nrm
    elif abs(nrm - 1.0) > 1e-10:
        raise ValueError(f"state norm {nrm} deviates from 1 beyond 1e-10")
    return StateVector(basis, amps)


@dataclass(frozen=True)
class DensityOp:
    """Mixed state in spectral form: weights over orthonormal pure states.

    The maximally mixed state is kept implicit (`uniform` flag) and only
    expanded where an operation genuinely needs matrix elements.
    """

    n_sites: int
    weights: np.ndarray
    vectors: tuple
    uniform: bool = False

    @classmethod
    def pure(cls, state: StateVector) -> "DensityOp":
        return cls(state.n_sites, np.array([1.0]), (state,))

    @classmethod
    def uniform_mixed(cls, n_sites: int) -> "DensityOp":
        return cls(n_sites, np.empty(0), (), uniform=True)

    def __post_init__(self):
        if self.uniform:
            return
        if len(self.weights) != len(self.vectors):
            raise ValueError("weights and vectors length mismatch")
        if np.any(np.asarray(self.weights) < -1e-12):
            raise ValueError("negative spectral weight")
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-10:
            raise ValueError("spectral weights must sum to 1 within 1e-10")
        for v in self.vectors:
            if v.n_sites != self.n_sites:
                raise ValueError("spectral vector on wrong chain length")

    @property
    def dim(self) -> int:
        return 1 << self.n_sites

    def to_matrix(self) -> np.ndarray:
        """Dense matrix in the full computational basis (small N only)."""
        if self.n_sites > DENSE_CAP_SITES:
            raise CapacityError(f"dense expansion refused for n_sites={self.n_sites}")
        d = self.dim
        if self.uniform:
            return np.eye(d, dtype=complex) / d
        rho = np.zeros((d, d), dtype=complex)
        for w, v in zip(self.weights, self.vectors):
            amps = v.to_full().amps.astype(complex)
            rho += w * np.outer(amps, amps.conj())
        return rho


State = Union[StateVector, DensityOp]


def neel_state(n_sites: int) -> StateVector:
    """Classical antiferromagnetic product state, site 1 up."""
    if n_sites % 2 != 0:
        raise ValueError("Neel state needs an even number of sites")
    basis = build_basis(n_sites, n_sites // 2)
    code = sum(1 << (s - 1) for s in range(1, n_sites + 1, 2))
    amps = np.zeros(basis.dim)
    amps[basis.index_of_one(code)] = 1.0
    return StateVector(basis, amps)


def maximally_mixed(n_sites: int) -> DensityOp:
    """Infinite-temperature state 1/2^N, represented implicitly.

    The implicit form never materializes 2^N anything, so it is available at
    every supported chain length; operations that genuinely expand it (dense
    matrices, spectral decompositions) enforce the dense cap themselves.
    """
    if not 1 <= n_sites <= MAX_SITES:
        raise ValueError(f"n_sites must be in 1..{MAX_SITES}, got {n_sites}")
    return DensityOp.uniform_mixed(n_sites)


def _extract_bits(codes: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """Pack the bits of `sites` (ascending rank order) into compact integers."""
    out = np.zeros(len(codes), dtype=np.int64)
    for rank, site in enumerate(sites):
        out |= (((codes >> np.uint32(site - 1)) & np.uint32(1)).astype(np.int64)) << rank
    return out


def _reduced_matrix(state: StateVector, keep: list[int]) -> np.ndarray:
    env_sites = [s for s in range(1, state.n_sites + 1) if s not in keep]
    keep_idx = _extract_bits(state.basis.states, keep)
    env_idx = _extract_bits(state.basis.states, env_sites)
    k = len(keep)
    amps = state.amps.astype(complex, copy=False)
    a = sp.csr_matrix((amps, (keep_idx, env_idx)), shape=(1 << k, 1 << len(env_sites)))
    return np.asarray((a @ a.getH()).todense())


def partial_trace(state: State, keep: Sequence[int]) -> DensityOp:
    """Reduced density operator on the `keep` sites.

    The result lives on a fresh chain whose site r corresponds to the r-th
    smallest kept site of the original chain.
    """
    keep = sorted(int(s) for s in keep)
    if not keep:
        raise ValueError("keep must be nonempty")
    if len(set(keep)) != len(keep):
        raise ValueError("keep contains duplicate sites")
    n = state.n_sites if isinstance(state, StateVector) else state.n_sites
    if keep[0] < 1 or keep[-1] > n:
        raise ValueError(f"keep sites must lie in 1..{n}")
    k = len(keep)
    if 1 << k > (1 << 12):
        raise CapacityError(f"reduced dimension 2^{k} exceeds the 2^12 cap")

    if isinstance(state, DensityOp):
        if state.uniform:
            return maximally_mixed(k)
        rho = np.zeros((1 << k, 1 << k), dtype=complex)
        for w, v in zip(state.weights, state.vectors):
            rho += w * _reduced_matrix(v, keep)
    else:
        rho = _reduced_matrix(state, keep)

    return density_from_matrix(k, rho)


def density_from_matrix(n_sites: int, rho: np.ndarray, tol: float = 1e-12) -> DensityOp:
    """Spectral DensityOp from a Hermitian PSD matrix with unit trace."""
    rho = 0.5 * (rho + rho.conj().T)
    evals, evecs = np.linalg.eigh(rho)
    evals = np.clip(evals.real, 0.0, None)
    total = evals.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("density matrix has nonpositive trace")
    evals /= total
    order = np.argsort(evals)[::-1]
    basis = build_basis(n_sites, None)
    weights, vectors = [], []
    for i in order:
        if evals[i] <= tol:
            break
        weights.append(evals[i])
        vectors.append(StateVector(basis, np.ascontiguousarray(evecs[:, i])))
    w = np.asarray(weights)
    return DensityOp(n_sites, w / w.sum(), tuple(vectors))


def save_state(state: StateVector, fh: BinaryIO | str) -> None:
    """Binary dump: magic, endian tag, N, sector, dim, complex doubles."""
    close = False
    if isinstance(fh, str):
        fh = open(fh, "wb")
        close = True
    try:
        sector = -1 if state.basis.sector is None else state.basis.sector
        fh.write(_STATE_MAGIC)
        fh.write(b"<")
        fh.write(struct.pack("<IiQ", state.n_sites, sector, state.basis.dim))
        fh.write(np.ascontiguousarray(state.amps, dtype="<c16").tobytes())
    finally:
        if close:
            fh.close()


def load_state(fh: BinaryIO | str) -> StateVector:
    close = False
    if isinstance(fh, str):
        fh = open(fh, "rb")
        close = True
    try:
        if fh.read(4) != _STATE_MAGIC:
            raise ValueError("not a state-vector file (bad magic)")
        if fh.read(1) != b"<":
            raise ValueError("unsupported endianness tag")
        n_sites, sector, dim = struct.unpack("<IiQ", fh.read(16))
        basis = build_basis(n_sites, None if sector < 0 else sector)
        if basis.dim != dim:
            raise ValueError(f"header dimension {dim} does not match basis {basis.dim}")
        amps = np.frombuffer(fh.read(16 * dim), dtype="<c16").astype(np.complex128)
        return make_state(basis, amps)
    finally:
        if close:
            fh.close()
