"""Truncated bosonic Fock space in the occupation-number representation.

Basis states are occupation vectors (n_1, ..., n_M) with sum n_j <= n_max,
ordered by total boson number and lexicographically within each sector.
Coefficient vectors are plain complex arrays over this basis; the Euclidean
inner product of coefficients realizes the Fock-space scalar product (the
quadrature weight is split symmetrically between creation and annihilation,
see :mod:`focklab.operators`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .grid import ModeGrid

__all__ = [
    "BasisSizeError",
    "FockBasis",
    "FockState",
    "build_basis",
    "vacuum",
    "mode_energy_sums",
    "fock_scale_norm",
    "dump_state",
    "load_state",
]

DEFAULT_DIMENSION_CAP = 5_000_000


class BasisSizeError(ValueError):
    """Requested truncated space exceeds the configured dimension cap."""


@dataclass(frozen=True)
class FockBasis:
    """Occupation-number basis of the truncated symmetric Fock space.

    Attributes
    ----------
    modes, n_max : int
    states : (dim, modes) int32 array, sector-major then lexicographic.
    sector_offsets : (n_max+2,) int64 array
        sector_offsets[n] is the index of the first state with total n;
        the final entry equals dim.
    binom : (n_max+1, modes) int64 array
        binom[t, q] = C(t+q, q), used for rank lookups.
    """

    modes: int
    n_max: int
    states: np.ndarray
    sector_offsets: np.ndarray
    binom: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    def sector_slice(self, n: int) -> slice:
        """Index range of the total-number-n sector."""
        return slice(int(self.sector_offsets[n]), int(self.sector_offsets[n + 1]))

    def sector_of(self, i: int) -> int:
        return int(np.searchsorted(self.sector_offsets, i, side="right") - 1)

    def occupation(self, i: int) -> np.ndarray:
        return self.states[i]

    def index_of(self, occ) -> int:
        """Position of an occupation vector in the basis."""
        occ = np.asarray(occ, dtype=np.int64)
        if occ.shape != (self.modes,):
            raise ValueError("occupation vector has wrong length")
        total = int(occ.sum())
        if occ.min() < 0 or total > self.n_max:
            raise ValueError("occupation vector outside the truncated space")
        rank = int(kernels.rank_in_sector(occ.astype(np.int32), self.binom)[0])
        return int(self.sector_offsets[total]) + rank


@dataclass
class FockState:
    """Coefficient vector over a FockBasis."""

    basis: FockBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.basis.dim,):
            raise ValueError("coefficient vector has wrong length")
        self.coeffs = c

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def copy(self) -> "FockState":
        return FockState(self.basis, self.coeffs.copy())


def build_basis(modes: int, n_max: int, cap: int = DEFAULT_DIMENSION_CAP) -> FockBasis:
    """Construct the truncated basis; rejects spaces larger than ``cap``."""
    if modes < 1:
        raise ValueError("modes must be >= 1")
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    sizes = [math.comb(modes + n - 1, n) for n in range(n_max + 1)]
    dim = sum(sizes)
    if dim > cap:
        raise BasisSizeError(
            f"basis dimension {dim} exceeds cap {cap} (modes={modes}, n_max={n_max})"
        )
    sector_sizes = np.array(sizes, dtype=np.int64)
    offsets = np.zeros(n_max + 2, dtype=np.int64)
    np.cumsum(sector_sizes, out=offsets[1:])
    # binom[t, q] = C(t+q, q), bounded by the top sector size --> int64 safe
    binom = np.ones((n_max + 1, modes), dtype=np.int64)
    for t in range(1, n_max + 1):
        for q in range(1, modes):
            binom[t, q] = binom[t - 1, q] + binom[t, q - 1]
    states = kernels.enumerate_states(modes, n_max, sector_sizes)
    states.setflags(write=False)
    offsets.setflags(write=False)
    binom.setflags(write=False)
    return FockBasis(modes=modes, n_max=n_max, states=states,
                     sector_offsets=offsets, binom=binom)


def vacuum(basis: FockBasis) -> FockState:
    """Unit coefficient on the empty occupation."""
    c = np.zeros(basis.dim, dtype=complex)
    c[0] = 1.0
    return FockState(basis, c)


def mode_energy_sums(basis: FockBasis, grid: ModeGrid) -> np.ndarray:
    """Free energies sum_j n_j omega_j per basis state (the dGamma diagonal)."""
    if basis.modes != grid.size:
        raise ValueError("basis mode count does not match grid size")
    return basis.states @ grid.dispersion


def fock_scale_norm(psi: FockState, s: float, grid: ModeGrid) -> float:
    """Fock-scale norm ||psi||_{F_s} = (sum (1 + sum_j n_j omega_j)**s |c|**2)**0.5."""
    energies = mode_energy_sums(psi.basis, grid)
    return float(np.sqrt(np.sum((1.0 + energies) ** s * np.abs(psi.coeffs) ** 2)))


def dump_state(psi: FockState, fh) -> None:
    """Write nonzero coefficients as lines "n_1 ... n_M re im"."""
    close = False
    if isinstance(fh, (str, bytes)):
        fh = open(fh, "w", encoding="ascii")
        close = True
    try:
        for i in np.nonzero(psi.coeffs)[0]:
            occ = " ".join(str(int(n)) for n in psi.basis.states[i])
            c = psi.coeffs[i]
            fh.write(f"{occ} {c.real:.17g} {c.imag:.17g}\n")
    finally:
        if close:
            fh.close()


def load_state(basis: FockBasis, fh) -> FockState:
    """Read a state dumped by :func:`dump_state`."""
    close = False
    if isinstance(fh, (str, bytes)):
        fh = open(fh, "r", encoding="ascii")
        close = True
    try:
        coeffs = np.zeros(basis.dim, dtype=complex)
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != basis.modes + 2:
                raise ValueError(f"malformed state line: {line!r}")
            occ = [int(p) for p in parts[: basis.modes]]
            idx = basis.index_of(occ)
            coeffs[idx] = complex(float(parts[-2]), float(parts[-1]))
        return FockState(basis, coeffs)
    finally:
        if close:
            fh.close()
