"""Sparse field operators on the truncated Fock space: dGamma, a(f), a(f)*.

Discrete kernel convention
--------------------------
Coefficient vectors carry the quadrature weight symmetrically: the basis
state with one boson in mode i represents the normalized amplitude
sqrt(w_i) * psi(k_i).  Consequently

    a(f)   : |n>  ->  sqrt(n_i) sqrt(w_i) conj(f_i) |n - e_i>,
    a(f)*  = conjugate transpose of a(f),

so that the plain Euclidean pairing of coefficients is the Fock inner
product, [a(f), a(g)*] = <f, g>_grid below the truncation ceiling with
<f, g>_grid = sum_i w_i conj(f_i) g_i, and ||a(f) psi|| <= ||f||_{-1}
||psi||_{F_1} holds exactly on the truncated space.  The top sector is
annihilated by a(f)* (the only consistent finite closure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .fock import FockBasis, FockState, mode_energy_sums
from .grid import FormFactor, ModeGrid

__all__ = [
    "FieldOperator",
    "dgamma",
    "annihilator",
    "creator",
    "operator_scale_norm",
    "dump_triplets",
]


@dataclass
class FieldOperator:
    """Sparse linear map on Fock coefficient vectors.

    ``sector_shift`` records the total-number displacement: -1 for
    annihilation-type, +1 for creation-type, 0 for number-conserving maps.
    """

    basis: FockBasis
    matrix: sp.csr_matrix
    sector_shift: int = 0

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        if m.shape != (self.basis.dim, self.basis.dim):
            raise ValueError("operator shape does not match basis dimension")
        m.sum_duplicates()
        m.sort_indices()
        self.matrix = m

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        if isinstance(x, FockState):
            return FockState(x.basis, self.matrix @ x.coeffs)
        return self.matrix @ np.asarray(x)

    def adjoint(self) -> "FieldOperator":
        return FieldOperator(self.basis, self.matrix.conj().T.tocsr(),
                             -self.sector_shift)

    def triplets(self):
        """Sorted (row, col, value) triplets of the numerically nonzero entries."""
        m = self.matrix.copy()
        m.eliminate_zeros()
        coo = m.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def sector_shift_consistent(self) -> bool:
        """Check every entry connects sectors differing by sector_shift."""
        rows, cols, _ = self.triplets()
        if rows.size == 0:
            return True
        totals = self.basis.states.sum(axis=1)
        return bool(np.all(totals[rows] - totals[cols] == self.sector_shift))


def dgamma(grid: ModeGrid, basis: FockBasis) -> FieldOperator:
    """Second quantization of the dispersion: diagonal sum_j n_j omega_j."""
    energies = mode_energy_sums(basis, grid)
    return FieldOperator(basis, sp.diags(energies.astype(complex)).tocsr(), 0)


def annihilator(f: FormFactor, grid: ModeGrid, basis: FockBasis) -> FieldOperator:
    """a(f): integrates the form factor against the removed boson."""
    if len(f) != grid.size or basis.modes != grid.size:
        raise ValueError("form factor / grid / basis sizes disagree")
    amp = np.asarray(np.conj(f.values) * np.sqrt(grid.weights), dtype=np.complex128)
    rows, cols, vals = kernels.annihilation_entries(
        basis.states, basis.sector_offsets, basis.binom, amp)
    m = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    return FieldOperator(basis, m, -1)


def creator(f: FormFactor, grid: ModeGrid, basis: FockBasis) -> FieldOperator:
    """a(f)* as the conjugate transpose of a(f); annihilates the top sector."""
    return annihilator(f, grid, basis).adjoint()


def operator_scale_norm(A: FieldOperator, s_in: float, s_out: float,
                        grid: ModeGrid, trials: int = 1, iterations: int = 200,
                        seed: int = 0) -> float:
    """Power-iteration estimate of ||A|| as a map F_{s_in} -> F_{s_out}.

    Deterministic for fixed seed; ``trials`` independent starting vectors are
    run and the largest estimate returned.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    energies = 1.0 + mode_energy_sums(A.basis, grid)
    d_out = energies ** (s_out / 2.0)
    d_in_inv = energies ** (-s_in / 2.0)
    mat = A.matrix

    def forward(v):
        return d_out * (mat @ (d_in_inv * v))

    def backward(u):
        return d_in_inv * (mat.conj().T @ (d_out * u))

    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        v = rng.standard_normal(A.basis.dim) + 1j * rng.standard_normal(A.basis.dim)
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v /= nv
        est = 0.0
        for _ in range(iterations):
            w = backward(forward(v))
            nw = np.linalg.norm(w)
            if nw == 0:
                est = 0.0
                break
            v = w / nw
            est = np.linalg.norm(forward(v))
        best = max(best, float(est))
    return best


def dump_triplets(op: FieldOperator, fh) -> None:
    """Write sparse entries as lines "row col re im" for external diffing."""
    close = False
    if isinstance(fh, (str, bytes)):
        fh = open(fh, "w", encoding="ascii")
        close = True
    try:
        for r, c, v in zip(*op.triplets()):
            fh.write(f"{int(r)} {int(c)} {v.real:.17g} {v.imag:.17g}\n")
    finally:
        if close:
            fh.close()
