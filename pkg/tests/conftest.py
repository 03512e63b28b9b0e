"""Shared test oracles, independent of the package's own operator paths.

The Kronecker-product builders below construct dense operators directly from
2x2 Pauli blocks in the package's bit convention (site s on bit s-1, index 0
of a single site = down, index 1 = up), without touching the matrix-free
application code they are used to check.
"""

import numpy as np
import pytest
import scipy.sparse as sp

from stchain.spinspace import build_basis

I2 = np.eye(2, dtype=complex)
# single-site basis ordering (|down>, |up>) to match bit value 0/1
SIG_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIG_Y = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SIG_Z = np.array([[-1, 0], [0, 1]], dtype=complex)


def site_operator(n_sites: int, ops: dict[int, np.ndarray]) -> sp.csr_matrix:
    """Sparse kron product with `ops[s]` at site s; site 1 is the fastest index."""
    out = sp.identity(1, dtype=complex, format="csr")
    for s in range(n_sites, 0, -1):
        out = sp.kron(out, sp.csr_matrix(ops.get(s, I2)), format="csr")
    return out


def kron_hamiltonian(model, dense: bool = True):
    """Full-space H assembled bond by bond from Pauli kron products."""
    n = model.n_sites
    dim = 1 << n
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for (i, j, J) in model.bonds:
        for sig in (SIG_X, SIG_Y, SIG_Z):
            h = h + J * site_operator(n, {i: sig, j: sig})
    if model.fields is not None:
        for s in range(1, n + 1):
            bx, by, bz = model.fields[s - 1]
            for coeff, sig in ((bx, SIG_X), (by, SIG_Y), (bz, SIG_Z)):
                if coeff:
                    h = h + coeff * site_operator(n, {s: sig})
    return h.toarray() if dense else h


def sector_restrict(h_full, n_sites: int, n_up: int) -> np.ndarray:
    codes = build_basis(n_sites, n_up).states
    if sp.issparse(h_full):
        return h_full.tocsr()[codes][:, codes].toarray()
    return h_full[np.ix_(codes, codes)]


def dense_sector_spectrum(model, n_up):
    """Eigendecomposition of the sector block of the Kronecker Hamiltonian."""
    h = sector_restrict(kron_hamiltonian(model, dense=False), model.n_sites, n_up)
    return np.linalg.eigh(h)


def singlet_projector_dense(n_sites: int, pair) -> np.ndarray:
    """P_s = (1 - sigma_i . sigma_j) / 4 on the full space."""
    i, j = pair
    dim = 1 << n_sites
    ss = np.zeros((dim, dim), dtype=complex)
    for sig in (SIG_X, SIG_Y, SIG_Z):
        ss += site_operator(n_sites, {i: sig, j: sig}).toarray()
    return (np.eye(dim) - ss) / 4.0


def profile_oracle_dense(full_amps: np.ndarray, layout) -> np.ndarray:
    """Literal projector-product profile on the full space (small N only)."""
    from itertools import product as iproduct

    n = layout.n_sites
    dim = 1 << n
    projectors = [singlet_projector_dense(n, p) for p in layout.pairs]
    probs = np.zeros(len(layout.pairs) + 1)
    for symbols in iproduct("st", repeat=len(layout.pairs)):
        op = np.eye(dim, dtype=complex)
        for ps, c in zip(projectors, symbols):
            op = (ps if c == "s" else np.eye(dim) - ps) @ op
        probs[symbols.count("t")] += float(np.real(full_amps.conj() @ op @ full_amps))
    return probs


def random_state(basis, seed, complex_amps=False):
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(basis.dim)
    if complex_amps:
        amps = amps + 1j * rng.standard_normal(basis.dim)
    amps = amps / np.linalg.norm(amps)
    from stchain.spinspace import StateVector

    return StateVector(basis, amps)


def dimer_covering_state(n_sites: int, pairs, basis=None):
    """Product of pair singlets over a full covering, as a StateVector."""
    from stchain.spinspace import StateVector

    if basis is None:
        basis = build_basis(n_sites, n_sites // 2)
    amps = np.ones(basis.dim)
    for (a, b) in pairs:
        ba = basis.site_bits(a).astype(np.int8)
        bb = basis.site_bits(b).astype(np.int8)
        factor = np.where(ba == bb, 0.0, np.where(ba == 1, 1.0, -1.0)) / np.sqrt(2.0)
        amps = amps * factor
    return StateVector(basis, amps)


@pytest.fixture
def rng():
    return np.random.default_rng(20250809)
