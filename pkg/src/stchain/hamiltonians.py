"""Isotropic exchange Hamiltonians on a chain, applied matrix-free.

Every model is a weighted bond list plus optional per-site magnetic field
3-vectors. The Pauli convention is used throughout: a bond (i, j, J)
contributes ``J * sigma_i . sigma_j`` and a field ``B_i . sigma_i``; all
couplings, fields and temperatures are quoted in units of the nearest
neighbour coupling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .spinspace import SpinBasis, StateVector, build_basis

Bond = tuple[int, int, float]

_VARIANTS = ("ring", "open", "j1j2_ring", "end_weakened", "alternating")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Coupling graph and per-site fields for one Hamiltonian variant."""

    n_sites: int
    bonds: tuple[Bond, ...]
    fields: np.ndarray | None = None  # shape (n_sites, 3) or None
    label: str = "custom"

    def __post_init__(self):
        seen = set()
        for (i, j, _) in self.bonds:
            if not (1 <= i < j <= self.n_sites):
                raise ValueError(f"bond ({i},{j}) violates 1 <= i < j <= {self.n_sites}")
            if (i, j) in seen:
                raise ValueError(f"duplicate bond ({i},{j})")
            seen.add((i, j))
        if self.fields is not None:
            f = np.asarray(self.fields, dtype=float)
            if f.shape != (self.n_sites, 3):
                raise ValueError(f"fields must have shape ({self.n_sites}, 3)")
            object.__setattr__(self, "fields", f)

    @property
    def field_free(self) -> bool:
        return self.fields is None or not np.any(self.fields)

    @property
    def conserves_sz(self) -> bool:
        """True when no transverse field components are present."""
        return self.fields is None or not np.any(self.fields[:, :2])

    def norm_bound(self) -> float:
        """Cheap upper bound on the spectral norm."""
        b = sum(3.0 * abs(J) for (_, _, J) in self.bonds)
        if self.fields is not None:
            b += float(np.linalg.norm(self.fields, axis=1).sum())
        return b


def custom_model(n_sites: int, bonds: list[Bond], fields=None, label: str = "custom") -> ModelSpec:
    """Explicit bond-list constructor (e.g. open-ended next-nearest sums)."""
    norm = tuple((min(i, j), max(i, j), float(J)) for (i, j, J) in bonds)
    f = None if fields is None else np.asarray(fields, dtype=float)
    return ModelSpec(n_sites=n_sites, bonds=norm, fields=f, label=label)


def _accumulate(raw: list[tuple[int, int, float]]) -> tuple[Bond, ...]:
    acc: dict[tuple[int, int], float] = {}
    for (i, j, J) in raw:
        key = (min(i, j), max(i, j))
        acc[key] = acc.get(key, 0.0) + float(J)
    return tuple((i, j, J) for (i, j), J in sorted(acc.items()))


def build_model(variant: str, n_sites: int, params: Mapping[str, float] | None = None) -> ModelSpec:
    """Build one of the named chain variants.

    Variants
    --------
    ring
        bonds (i, i+1) for i = 1..N with wraparound, coupling J1.
    open
        bonds (i, i+1) for i = 1..N-1, coupling J1.
    j1j2_ring
        ring plus periodic next-nearest bonds (i, i+2) with coupling J2.
    end_weakened
        open chain whose end bonds (1,2) and (N-1,N) carry Je.
    alternating
        open chain with bond (i, i+1) carrying J1 * (1 + (-1)**i * delta):
        delta > 0 weakens the odd bonds (including both end bonds) and
        strengthens the even bonds that sit under the measured middle pairs,
        which is the configuration that localizes entanglement at the ends.
    """
    if variant not in _VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {_VARIANTS}")
    if n_sites % 2 != 0:
        raise ValueError("chain variants require an even number of sites")
    if n_sites < 2:
        raise ValueError("need at least 2 sites")
    p = dict(params or {})
    j1 = float(p.pop("J1", 1.0))

    if variant == "ring":
        p.pop("J2", None)
        if n_sites == 2:
            raw = [(1, 2, j1)]  # a two-site ring is a single bond
        else:
            raw = [(i, i % n_sites + 1, j1) for i in range(1, n_sites + 1)]
        label = "ring"
    elif variant == "open":
        raw = [(i, i + 1, j1) for i in range(1, n_sites)]
        label = "open"
    elif variant == "j1j2_ring":
        j2 = float(p.pop("J2", 0.0))
        raw = [(i, i % n_sites + 1, j1) for i in range(1, n_sites + 1)]
        raw += [(i, (i + 1) % n_sites + 1, j2) for i in range(1, n_sites + 1)]
        label = f"j1j2_ring(J2={j2:g})"
    elif variant == "end_weakened":
        je = float(p.pop("Je", 0.5 * j1))
        raw = [(1, 2, je), (n_sites - 1, n_sites, je)]
        raw += [(i, i + 1, j1) for i in range(2, n_sites - 1)]
        label = f"end_weakened(Je={je:g})"
    else:  # alternating
        delta = float(p.pop("delta", 0.0))
        raw = [(i, i + 1, j1 * (1 + (-1) ** i * delta)) for i in range(1, n_sites)]
        label = f"alternating(delta={delta:g})"

    if p:
        raise ValueError(f"unused parameters for variant {variant!r}: {sorted(p)}")
    return ModelSpec(n_sites=n_sites, bonds=_accumulate(raw), label=label)


def with_random_fields(model: ModelSpec, fields) -> ModelSpec:
    """Copy of `model` with per-site field 3-vectors installed."""
    f = np.asarray(fields, dtype=float)
    if f.shape != (model.n_sites, 3):
        raise ValueError(f"expected {model.n_sites} field 3-vectors, got shape {f.shape}")
    return replace(model, fields=f)


def with_random_couplings(model: ModelSpec, sigma_j: float, rng: np.random.Generator) -> ModelSpec:
    """Copy of `model` with each bond J perturbed by N(0, sigma_j) noise."""
    if sigma_j < 0:
        raise ValueError("sigma_j must be nonnegative")
    bonds = tuple(
        (i, j, J + float(rng.standard_normal()) * sigma_j) for (i, j, J) in model.bonds
    )
    return replace(model, bonds=bonds)


# -- matrix-free application -------------------------------------------------

def _bond_pieces(basis: SpinBasis, bond: Bond):
    """(diag, src, dst, coeff) for one exchange bond on this basis."""
    i, j, J = bond
    bi = basis.site_bits(i).astype(np.int8)
    bj = basis.site_bits(j).astype(np.int8)
    diag = J * (2.0 * bi - 1) * (2.0 * bj - 1)
    src = np.flatnonzero(bi != bj)
    mask = np.uint32((1 << (i - 1)) | (1 << (j - 1)))
    dst = basis.index_of(basis.states[src] ^ mask)
    return diag, src, dst, 2.0 * J


def _field_pieces(basis: SpinBasis, site: int, bvec):
    """(diag, dst, coeff) for one site field; dst/coeff None if longitudinal."""
    bx, by, bz = (float(c) for c in bvec)
    z = 2.0 * basis.site_bits(site).astype(np.float64) - 1.0
    diag = bz * z
    if bx == 0.0 and by == 0.0:
        return diag, None, None
    if not basis.is_full:
        raise ValueError("transverse fields require the full (sector-free) basis")
    mask = np.uint32(1 << (site - 1))
    dst = basis.index_of(basis.states ^ mask)
    coeff = bx + 1j * by * z  # <flipped| sigma_x,y |code>
    return diag, dst, coeff


class HamiltonianApplier:
    """Precomputed scatter tables for fast repeated H·v products."""

    def __init__(self, model: ModelSpec, basis: SpinBasis):
        if basis.n_sites != model.n_sites:
            raise ValueError("basis and model chain lengths differ")
        if not basis.is_full and not model.conserves_sz:
            raise ValueError("model with transverse fields requires the full basis")
        self.model = model
        self.basis = basis
        self.complex = False
        diag = np.zeros(basis.dim)
        self._hops: list[tuple[np.ndarray, np.ndarray, float]] = []
        for bond in model.bonds:
            d, src, dst, c = _bond_pieces(basis, bond)
            diag += d
            self._hops.append((src, dst, c))
        self._field_hops: list[tuple[np.ndarray, np.ndarray]] = []
        if model.fields is not None:
            for site in range(1, model.n_sites + 1):
                bvec = model.fields[site - 1]
                if not np.any(bvec):
                    continue
                d, dst, coeff = _field_pieces(basis, site, bvec)
                diag += d
                if dst is not None:
                    self.complex = True
                    self._field_hops.append((dst, coeff))
        self.diag = diag

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        if self.complex and not np.iscomplexobj(out):
            out = out.astype(complex)
        for src, dst, c in self._hops:
            out[dst] += c * v[src]  # dst unique per bond: bit-flip is a bijection
        for dst, coeff in self._field_hops:
            out[dst] += coeff * v
        return out


def apply_bonds(basis: SpinBasis, bonds: tuple[Bond, ...] | list[Bond], v: np.ndarray) -> np.ndarray:
    """Streaming sum of J * sigma_i.sigma_j over `bonds` (no caching)."""
    out = np.zeros_like(v)
    for bond in bonds:
        diag, src, dst, c = _bond_pieces(basis, bond)
        out += diag * v
        out[dst] += c * v[src]
    return out


def matvec(model: ModelSpec, state: StateVector) -> np.ndarray:
    """H·v as a raw (unnormalized) amplitude array over `state`'s basis."""
    return HamiltonianApplier(model, state.basis).apply(state.amps)


# -- serialization -----------------------------------------------------------

def model_to_json(model: ModelSpec) -> str:
    fields = model.fields
    payload = {
        "n_sites": model.n_sites,
        "bonds": [[i, j, J] for (i, j, J) in model.bonds],
        "fields": [[0.0, 0.0, 0.0]] * model.n_sites if fields is None else fields.tolist(),
        "label": model.label,
    }
    return json.dumps(payload)


def model_from_json(text: str) -> ModelSpec:
    payload = json.loads(text)
    fields = np.asarray(payload["fields"], dtype=float)
    return ModelSpec(
        n_sites=int(payload["n_sites"]),
        bonds=tuple((int(i), int(j), float(J)) for i, j, J in payload["bonds"]),
        fields=None if not np.any(fields) else fields,
        label=str(payload.get("label", "custom")),
    )
