"""Rotating-wave spin-boson model: block assembly, propagator, explicit resolvent.

On C^2 (x) F ~ F (+) F the Hamiltonian is the two-block operator

    H = [[omega_e + dGamma(omega),  lam * a(f)   ],
         [lam * a(f)*,              omega_g + dGamma(omega)]],

and its resolvent is evaluated through the explicit factorization: a diagonal
solve on the ground block, the excited-block propagator

    G(z) = omega_e - z + dGamma(omega) - lam**2 * S_f(z),
    S_f(z) = a(f) (dGamma(omega) - z)**-1 a(f)*,

and the creation feedback into the ground block.  The code path *is* this
factorization; monolithic inverses exist only in test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .blocks import BlockOperator
from .fock import FockBasis, FockState, mode_energy_sums, vacuum
from .grid import FormFactor, ModeGrid, scale_norm
from .linalg import SolveReport, SpectralPointError, solve
from .operators import FieldOperator, annihilator, creator, dgamma

__all__ = [
    "SpinBosonParams",
    "TwoBlockState",
    "SingularModel",
    "assemble_regular",
    "psi0_energy_stats",
    "sigma_f",
    "propagator_matrix",
    "propagator_inverse_apply",
    "resolvent_apply",
    "SpinBosonResolvent",
    "assemble_singular",
    "domain_shift",
    "singular_domain_action",
    "vacuum_propagator_element",
]


@dataclass(frozen=True)
class SpinBosonParams:
    """Model parameters; omega_e is the dressed energy when renormalized=True."""

    omega_e: float
    lam: float
    f: FormFactor
    omega_g: float = 0.0
    renormalized: bool = False

    def __post_init__(self):
        for name in ("omega_e", "lam", "omega_g"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass
class TwoBlockState:
    """State on F (+) F: excited and ground components on the same basis."""

    excited: FockState
    ground: FockState

    def __post_init__(self):
        if self.excited.basis is not self.ground.basis:
            raise ValueError("components must share one basis")

    @property
    def basis(self) -> FockBasis:
        return self.excited.basis

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.excited.coeffs, self.ground.coeffs])

    @classmethod
    def from_stacked(cls, basis: FockBasis, vec) -> "TwoBlockState":
        vec = np.asarray(vec, dtype=complex)
        d = basis.dim
        return cls(FockState(basis, vec[:d]), FockState(basis, vec[d:]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.stacked()))


def excited_vacuum(basis: FockBasis) -> TwoBlockState:
    """Atom excited, field in the vacuum."""
    z = FockState(basis, np.zeros(basis.dim, dtype=complex))
    return TwoBlockState(vacuum(basis), z)


def assemble_regular(p: SpinBosonParams, grid: ModeGrid, basis: FockBasis) -> BlockOperator:
    """Two-block Hamiltonian [[omega_e + dG, lam a(f)], [lam a(f)*, omega_g + dG]]."""
    dg = dgamma(grid, basis).matrix
    eye = sp.identity(basis.dim, dtype=complex, format="csr")
    a_low = annihilator(p.f, grid, basis).matrix
    return BlockOperator(
        block_dims=[basis.dim, basis.dim],
        blocks={
            (0, 0): (p.omega_e * eye + dg).tocsr(),
            (0, 1): (p.lam * a_low).tocsr(),
            (1, 0): (p.lam * a_low.conj().T).tocsr(),
            (1, 1): (p.omega_g * eye + dg).tocsr(),
        },
    )


def psi0_energy_stats(p: SpinBosonParams, grid: ModeGrid, basis: FockBasis):
    """Mean and variance of the energy in the excited-vacuum state.

    Computed by applying the assembled Hamiltonian, not from the closed
    forms (the closed forms are what the tests check against).
    """
    h = assemble_regular(p, grid, basis)
    psi0 = excited_vacuum(basis)
    segs = [psi0.excited.coeffs, psi0.ground.coeffs]
    h_psi = h.apply(segs)
    mean = float(np.real(np.vdot(segs[0], h_psi[0]) + np.vdot(segs[1], h_psi[1])))
    centered = [h_psi[0] - mean * segs[0], h_psi[1] - mean * segs[1]]
    variance = float(sum(np.linalg.norm(c) ** 2 for c in centered))
    return {"mean": mean, "variance": variance}


def _sigma_middle_inverse(z, grid, basis, shift=0.0):
    """Diagonal of (shift + dGamma - z)^-1 as used inside S_f(z).

    The creator never reaches the vacuum, so that entry is structurally
    unused and set to zero; only the one-or-more-boson part of the truncated
    free spectrum excludes z.
    """
    den = shift + mode_energy_sums(basis, grid).astype(complex) - z
    if np.any(np.abs(den[1:]) == 0.0):
        raise SpectralPointError(f"z={z} lies on the truncated free spectrum")
    inv = np.zeros_like(den)
    inv[1:] = 1.0 / den[1:]
    return inv


def sigma_f(z: complex, p: SpinBosonParams, grid: ModeGrid, basis: FockBasis) -> FieldOperator:
    """Self-energy S_f(z) = a(f) (dGamma - z)^-1 a(f)* on the excited block."""
    a_low = annihilator(p.f, grid, basis).matrix
    inv = _sigma_middle_inverse(z, grid, basis, shift=p.omega_g)
    s = (a_low @ sp.diags(inv)) @ a_low.conj().T
    return FieldOperator(basis, s.tocsr(), 0)


def propagator_matrix(z: complex, p: SpinBosonParams, grid: ModeGrid,
                      basis: FockBasis) -> sp.csr_matrix:
    """G(z) = omega_e - z + dGamma - lam**2 S_f(z) as a sparse matrix."""
    energies = mode_energy_sums(basis, grid).astype(complex)
    diag = sp.diags(p.omega_e - z + energies)
    s = sigma_f(z, p, grid, basis).matrix
    g = (diag - (p.lam**2) * s).tocsr()
    g.sum_duplicates()
    g.sort_indices()
    return g


def propagator_inverse_apply(z: complex, p: SpinBosonParams, grid: ModeGrid,
                             psi_e: FockState):
    """Apply G(z)^-1 via an inner linear solve; returns (state, SolveReport)."""
    g = propagator_matrix(z, p, grid, psi_e.basis)
    x, report = solve(g, psi_e.coeffs)
    return FockState(psi_e.basis, x), report


class SpinBosonResolvent:
    """Resolvent applier using the explicit two-block factorization.

    Propagator factorizations are cached per z, so repeated applications at
    the same point (power iterations, probe sweeps) pay one factorization.
    """

    def __init__(self, p: SpinBosonParams, grid: ModeGrid, basis: FockBasis):
        self.p = p
        self.grid = grid
        self.basis = basis
        self._a_low = annihilator(p.f, grid, basis).matrix
        self._a_raise = self._a_low.conj().T.tocsr()
        self._energies = mode_energy_sums(basis, grid).astype(complex)
        self._lu_cache = {}

    def _propagator_solver(self, z):
        try:
            return self._lu_cache[z]
        except KeyError:
            pass
        p = self.p
        diag = sp.diags(p.omega_e - z + self._energies)
        den = p.omega_g + self._energies - z
        if np.any(np.abs(den[1:]) == 0.0):
            raise SpectralPointError(f"z={z} lies on the truncated free spectrum")
        inv = np.zeros_like(den)
        inv[1:] = 1.0 / den[1:]  # vacuum entry structurally unused by S
        s = (self._a_low @ sp.diags(inv)) @ self._a_raise
        g = (diag - (p.lam**2) * s).tocsc()
        try:
            lu = sp.linalg.splu(g)
        except RuntimeError as exc:
            raise SpectralPointError(f"propagator singular at z={z}: {exc}") from exc
        self._lu_cache[z] = lu
        return lu

    def apply_stacked(self, z: complex, vec: np.ndarray) -> np.ndarray:
        d = self.basis.dim
        vec = np.asarray(vec, dtype=complex)
        psi_e, psi_g = vec[:d], vec[d:]
        p = self.p
        den = p.omega_g + self._energies - z
        if np.any(np.abs(den) == 0.0):
            raise SpectralPointError(f"z={z} lies on the truncated ground spectrum")
        ground_inv = 1.0 / den
        y_g = ground_inv * psi_g
        u = psi_e - p.lam * (self._a_low @ y_g)
        x_e = self._propagator_solver(z).solve(u)
        x_g = y_g - p.lam * ground_inv * (self._a_raise @ x_e)
        return np.concatenate([x_e, x_g])

    def apply(self, z: complex, state: TwoBlockState) -> TwoBlockState:
        return TwoBlockState.from_stacked(
            self.basis, self.apply_stacked(z, state.stacked()))


def resolvent_apply(z: complex, p: SpinBosonParams, grid: ModeGrid,
                    state: TwoBlockState) -> TwoBlockState:
    """(H - z)^-1 applied through the explicit block factorization."""
    return SpinBosonResolvent(p, grid, state.basis).apply(z, state)


@dataclass(frozen=True)
class SingularModel:
    """Cutoff realization of the renormalized model.

    The Hamiltonian equals the regular assembly at the counterterm-shifted
    bare energy; the renormalization lives in the parameter.
    """

    hamiltonian: BlockOperator
    bare_params: SpinBosonParams
    dressed_omega_e: float
    counterterm: float
    anchor: str


def assemble_singular(p: SpinBosonParams, f_cut: FormFactor, grid: ModeGrid,
                      basis: FockBasis, anchor: str = "norm") -> SingularModel:
    """Assemble the cutoff model with its energy counterterm.

    ``p.omega_e`` is interpreted as the dressed energy (requires
    ``p.renormalized``); the bare energy is dressed + counterterm, so the
    vacuum propagator denominator bare - z - lam**2 sigma(z) stays finite as
    the cutoff grows.  The counterterm is lam**2 ||f_cut||_{-1}**2 for
    anchor="norm", or lam**2 <Omega, S_{f_cut}(-1) Omega> (the same integral
    with 1/omega replaced by 1/(omega+1)) for anchor="sigma0"; with the
    latter the dressed vacuum element is exactly
    1 / (dressed - z - lam**2 sum_i w_i |f_i|^2 [1/(w_i - z) - 1/(w_i + 1)]).
    """
    if not p.renormalized:
        raise ValueError("assemble_singular expects renormalized params (dressed omega_e)")
    if anchor == "norm":
        ct = p.lam**2 * scale_norm(f_cut, -1.0, grid) ** 2
    elif anchor == "sigma0":
        ct = p.lam**2 * float(np.sum(
            grid.weights * np.abs(f_cut.values) ** 2 / (grid.dispersion + 1.0)))
    else:
        raise ValueError(f"unknown counterterm anchor {anchor!r}")
    bare = replace(p, omega_e=p.omega_e + ct, f=f_cut, renormalized=False)
    return SingularModel(
        hamiltonian=assemble_regular(bare, grid, basis),
        bare_params=bare,
        dressed_omega_e=p.omega_e,
        counterterm=ct,
        anchor=anchor,
    )


def domain_shift(phi_e: FockState, p: SpinBosonParams, grid: ModeGrid,
                 basis: FockBasis) -> FockState:
    """Singular domain correction -lam (dGamma + 1)^-1 a(f)* phi_e."""
    a_raise = creator(p.f, grid, basis).matrix
    inv = 1.0 / (1.0 + mode_energy_sums(basis, grid))
    return FockState(basis, -p.lam * (inv * (a_raise @ phi_e.coeffs)))


def singular_domain_action(phi_e: FockState, phi_g: FockState, p: SpinBosonParams,
                           grid: ModeGrid, basis: FockBasis) -> TwoBlockState:
    """Action of the singular generator on the domain-parametrized pair.

    Excited: (omega_e + dGamma - lam**2 S_f(-1)) phi_e + lam a(f) phi_g.
    Ground:  (omega_g + dGamma) phi_g + lam (dGamma + 1)^-1 a(f)* phi_e.

    Equals the plain matrix action on (phi_e, phi_g + domain_shift(phi_e))
    up to rounding; tests assert the identity.
    """
    a_low = annihilator(p.f, grid, basis).matrix
    a_raise = a_low.conj().T
    energies = mode_energy_sums(basis, grid)
    s_m1 = sigma_f(-1.0, p, grid, basis).matrix
    out_e = ((p.omega_e + energies) * phi_e.coeffs
             - p.lam**2 * (s_m1 @ phi_e.coeffs)
             + p.lam * (a_low @ phi_g.coeffs))
    out_g = ((p.omega_g + energies) * phi_g.coeffs
             + p.lam * ((a_raise @ phi_e.coeffs) / (1.0 + energies)))
    return TwoBlockState(FockState(basis, out_e), FockState(basis, out_g))


def vacuum_propagator_element(z: complex, p: SpinBosonParams, grid: ModeGrid,
                              basis: FockBasis) -> complex:
    """<Omega, G(z)^-1 Omega> on the excited block (bare parameters)."""
    state, _ = propagator_inverse_apply(z, p, grid, vacuum(basis))
    return complex(state.coeffs[0])
