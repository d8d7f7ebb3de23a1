"""Shared numerical kernels: certified sparse solves, dense oracle, spectra.

Every solve returns a :class:`SolveReport` carrying its relative residual;
results never cross a module boundary uncertified.  Direct sparse LU is used
up to ``LU_DIMENSION_CAP``; larger systems fall back to restarted GMRES with
a diagonal preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "SolveError",
    "SpectralPointError",
    "EigenError",
    "SolveReport",
    "solve",
    "dense_inverse_oracle",
    "lowest_eigenpairs",
]

LU_DIMENSION_CAP = 20_000
DENSE_ORACLE_CAP = 4_000
SOLVE_RTOL = 1e-12


class SolveError(RuntimeError):
    """A linear solve broke down or failed its residual certificate."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SpectralPointError(SolveError):
    """Shifted operator is (numerically) singular: z lies on the spectrum."""


class EigenError(RuntimeError):
    """Eigensolver failed to converge."""


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    residual: float
    success: bool
    method: str = "splu"

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "success": self.success,
            "method": self.method,
        }


def _residual(A, x, b) -> float:
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return float(np.linalg.norm(A @ x))
    return float(np.linalg.norm(A @ x - b) / bnorm)


def solve(A: sp.spmatrix, b: np.ndarray, rtol: float = SOLVE_RTOL):
    """Solve A x = b with a post-hoc residual certificate.

    Returns
    -------
    (x, SolveReport)

    Raises
    ------
    SpectralPointError
        On an exactly singular factorization.
    SolveError
        When the certified relative residual exceeds ``rtol``.
    """
    A = sp.csr_matrix(A).astype(complex)
    n, m = A.shape
    if n != m:
        raise ValueError("matrix must be square")
    b = np.asarray(b, dtype=complex)
    if n <= LU_DIMENSION_CAP:
        try:
            lu = spla.splu(A.tocsc())
            x = lu.solve(b)
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise SpectralPointError(f"sparse LU breakdown: {exc}",
                                     SolveReport(0, np.inf, False, "splu")) from exc
        report = SolveReport(0, _residual(A, x, b), True, "splu")
    else:
        diag = A.diagonal()
        if np.any(diag == 0):
            precond = None
        else:
            inv = 1.0 / diag
            precond = spla.LinearOperator(A.shape, matvec=lambda v: inv * v)
        count = {"n": 0}

        def cb(_):
            count["n"] += 1

        x, info = spla.gmres(A, b, rtol=min(rtol, 1e-13), atol=0.0, restart=50,
                             maxiter=400, M=precond, callback=cb,
                             callback_type="pr_norm")
        if info != 0:
            raise SolveError(
                f"GMRES failed to converge (info={info})",
                SolveReport(count["n"], _residual(A, x, b), False, "gmres"))
        report = SolveReport(count["n"], _residual(A, x, b), True, "gmres")
    if not np.isfinite(report.residual) or report.residual > rtol:
        raise SolveError(f"solve residual {report.residual:.3e} exceeds {rtol:.1e}",
                         SolveReport(report.iterations, report.residual, False,
                                     report.method))
    return x, report


def dense_inverse_oracle(A) -> np.ndarray:
    """LU-based dense inverse, for test oracles only (dimension-capped)."""
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("matrix must be square")
    if n > DENSE_ORACLE_CAP:
        raise ValueError(f"dense oracle capped at dimension {DENSE_ORACLE_CAP}")
    try:
        return sla.inv(A)
    except sla.LinAlgError as exc:
        raise SolveError(f"dense inverse of singular matrix: {exc}") from exc


def lowest_eigenpairs(A, count: int):
    """Lowest eigenpairs of a Hermitian operator, with residual certificates.

    Uses a Lanczos-type iteration (ARPACK) for large sparse inputs and dense
    diagonalization when the requested count is close to the dimension.

    Returns
    -------
    values : (count,) float array, ascending
    vectors : (dim, count) complex array
    residuals : (count,) float array of ||A v - lambda v||
    """
    if not sp.issparse(A):
        A = sp.csr_matrix(A)
    n = A.shape[0]
    if count < 1 or count > n:
        raise ValueError("count must be in [1, dim]")
    if count >= n - 1 or n < 16:
        dense = A.toarray()
        vals, vecs = np.linalg.eigh(dense)
        vals, vecs = vals[:count], vecs[:, :count]
    else:
        try:
            vals, vecs = spla.eigsh(A, k=count, which="SA")
        except spla.ArpackNoConvergence as exc:
            raise EigenError(f"eigensolver did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    residuals = np.array([np.linalg.norm(A @ vecs[:, i] - vals[i] * vecs[:, i])
                          for i in range(count)])
    return vals, vecs, residuals
