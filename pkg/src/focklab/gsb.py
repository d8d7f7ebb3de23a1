"""Two-sector generalized model: matrix atom energies, multiple transition channels.

The atom space splits into an excited and a ground sector of dimensions
(dim_e, dim_g); the interaction sum_j Sigma_j^+ (x) a(f_j) + h.c. only couples
the two sectors.  On (C^{dim_e} (+) C^{dim_g}) (x) F the Hamiltonian is

    H = [[h_e, lam A], [lam A*, h_g]],     A = sum_j Sigma_j^+ (x) a(f_j),

with h_s = E_s (x) I + I (x) dGamma, and the resolvent follows the same
ground-solve / propagator / feedback factorization as the two-level model,
with G(z) = h_e - z - lam**2 S(z) and S(z) = A (h_g - z)^-1 A*.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .blocks import BlockOperator
from .fock import FockBasis, mode_energy_sums
from .grid import FormFactor, ModeGrid
from .linalg import SolveReport, SpectralPointError, solve
from .operators import annihilator

__all__ = [
    "GsbChannel",
    "GsbParams",
    "assemble_gsb",
    "gsb_sigma",
    "gsb_resolvent_apply",
    "gsb_singular_action",
    "gsb_counterterm_matrix",
    "assemble_gsb_singular",
]

ATOM_DIMENSION_CAP = 16


@dataclass(frozen=True)
class GsbChannel:
    sigma_plus: np.ndarray  # (dim_e, dim_g), maps ground -> excited
    f: FormFactor

    def __post_init__(self):
        m = np.asarray(self.sigma_plus, dtype=complex)
        if m.ndim != 2:
            raise ValueError("sigma_plus must be a matrix")
        m.setflags(write=False)
        object.__setattr__(self, "sigma_plus", m)


def _check_energy_matrix(E, name):
    E = np.asarray(E, dtype=complex)
    if E.ndim != 2 or E.shape[0] != E.shape[1]:
        raise ValueError(f"{name} must be square")
    if E.shape[0] > ATOM_DIMENSION_CAP:
        raise ValueError(f"{name} exceeds atom dimension cap {ATOM_DIMENSION_CAP}")
    if not np.allclose(E, E.conj().T, atol=1e-12):
        raise ValueError(f"{name} must be Hermitian")
    if np.linalg.eigvalsh(E).min() < -1e-12:
        raise ValueError(f"{name} must be nonnegative")
    return E


@dataclass(frozen=True)
class GsbParams:
    E_e: np.ndarray
    E_g: np.ndarray
    channels: tuple
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "E_e", _check_energy_matrix(self.E_e, "E_e"))
        object.__setattr__(self, "E_g", _check_energy_matrix(self.E_g, "E_g"))
        chans = tuple(self.channels)
        if not chans:
            raise ValueError("at least one transition channel required")
        for ch in chans:
            if ch.sigma_plus.shape != (self.dim_e, self.dim_g):
                raise ValueError("channel matrix shape mismatch")
        object.__setattr__(self, "channels", chans)

    @property
    def dim_e(self) -> int:
        return self.E_e.shape[0]

    @property
    def dim_g(self) -> int:
        return self.E_g.shape[0]


def _coupling_matrix(p: GsbParams, grid: ModeGrid, basis: FockBasis) -> sp.csr_matrix:
    """A = sum_j Sigma_j^+ (x) a(f_j)."""
    blocks = None
    for ch in p.channels:
        a_low = annihilator(ch.f, grid, basis).matrix
        term = sp.kron(sp.csr_matrix(ch.sigma_plus), a_low, format="csr")
        blocks = term if blocks is None else (blocks + term).tocsr()
    blocks.sum_duplicates()
    blocks.sort_indices()
    return blocks


def _free_block(E: np.ndarray, grid: ModeGrid, basis: FockBasis) -> sp.csr_matrix:
    dg = sp.diags(mode_energy_sums(basis, grid).astype(complex)).tocsr()
    eye_atom = sp.identity(E.shape[0], dtype=complex, format="csr")
    eye_fock = sp.identity(basis.dim, dtype=complex, format="csr")
    out = (sp.kron(sp.csr_matrix(E), eye_fock) + sp.kron(eye_atom, dg)).tocsr()
    out.sum_duplicates()
    out.sort_indices()
    return out


def assemble_gsb(p: GsbParams, grid: ModeGrid, basis: FockBasis) -> BlockOperator:
    """Block Hamiltonian on (dim_e + dim_g) Fock blocks; Hermitian by construction."""
    a = _coupling_matrix(p, grid, basis)
    return BlockOperator(
        block_dims=[p.dim_e * basis.dim, p.dim_g * basis.dim],
        blocks={
            (0, 0): _free_block(p.E_e, grid, basis),
            (0, 1): (p.lam * a).tocsr(),
            (1, 0): (p.lam * a.conj().T).tocsr(),
            (1, 1): _free_block(p.E_g, grid, basis),
        },
    )


class _GroundResolvent:
    """(h_g - z)^-1 through the eigendecomposition of the small matrix E_g."""

    def __init__(self, p: GsbParams, grid: ModeGrid, basis: FockBasis):
        self.g_vals, self.g_vecs = np.linalg.eigh(p.E_g)
        self.energies = mode_energy_sums(basis, grid)
        self.dim_g = p.dim_g
        self.fock_dim = basis.dim

    def denominators(self, z, skip_fock_vacuum=False):
        den = (self.g_vals[:, None] + self.energies[None, :]).astype(complex) - z
        check = den[:, 1:] if skip_fock_vacuum else den
        if np.any(np.abs(check) == 0.0):
            raise SpectralPointError(f"z={z} lies on the truncated ground spectrum")
        return den

    def apply(self, z, vec):
        mat = np.asarray(vec, dtype=complex).reshape(self.dim_g, self.fock_dim)
        rot = self.g_vecs.conj().T @ mat
        rot /= self.denominators(z)
        return (self.g_vecs @ rot).reshape(-1)

    def as_sparse(self, z, skip_fock_vacuum=False) -> sp.csr_matrix:
        # with skip_fock_vacuum the (structurally unused) vacuum entries are
        # zeroed instead of inverted, matching the range of the coupling map
        den = self.denominators(z, skip_fock_vacuum)
        inv = np.zeros_like(den)
        if skip_fock_vacuum:
            inv[:, 1:] = 1.0 / den[:, 1:]
        else:
            inv = 1.0 / den
        eye_fock = sp.identity(self.fock_dim, dtype=complex, format="csr")
        v = sp.kron(sp.csr_matrix(self.g_vecs), eye_fock, format="csr")
        d = sp.diags(inv.reshape(-1))
        return (v @ d @ v.conj().T).tocsr()


def gsb_sigma(z: complex, p: GsbParams, grid: ModeGrid, basis: FockBasis) -> sp.csr_matrix:
    """S(z) = A (h_g - z)^-1 A* on the excited sector (dim_e * fock_dim square)."""
    a = _coupling_matrix(p, grid, basis)
    q = _GroundResolvent(p, grid, basis).as_sparse(z, skip_fock_vacuum=True)
    s = ((a @ q) @ a.conj().T).tocsr()
    s.sum_duplicates()
    s.sort_indices()
    return s


def gsb_resolvent_apply(z: complex, p: GsbParams, grid: ModeGrid, basis: FockBasis,
                        psi_e: np.ndarray, psi_g: np.ndarray):
    """(H - z)^-1 through the two-sector factorization.

    Returns (x_e, x_g, SolveReport) with the report certifying the inner
    propagator solve.
    """
    ground = _GroundResolvent(p, grid, basis)
    a = _coupling_matrix(p, grid, basis)
    y_g = ground.apply(z, psi_g)
    u = np.asarray(psi_e, dtype=complex) - p.lam * (a @ y_g)
    h_e = _free_block(p.E_e, grid, basis)
    g = (h_e - z * sp.identity(h_e.shape[0], dtype=complex, format="csr")
         - (p.lam**2) * gsb_sigma(z, p, grid, basis)).tocsr()
    x_e, report = solve(g, u)
    x_g = y_g - p.lam * ground.apply(z, a.conj().T @ x_e)
    return x_e, x_g, report


@dataclass
class GsbActionResult:
    excited: np.ndarray
    ground: np.ndarray
    matrix_mismatch: float = field(default=0.0)


def gsb_singular_action(phi_e: np.ndarray, phi_g: np.ndarray, p: GsbParams,
                        grid: ModeGrid, basis: FockBasis) -> GsbActionResult:
    """Action of the two-sector singular generator on the domain-parametrized pair.

    Evaluates ((h_e - lam**2 S(-1)) phi_e + lam A phi_g,
               h_g phi_g + lam (h_g + 1)^-1 A* phi_e)
    and records its relative deviation from the plain matrix action on
    (phi_e, phi_g - lam (h_g + 1)^-1 A* phi_e).
    """
    phi_e = np.asarray(phi_e, dtype=complex)
    phi_g = np.asarray(phi_g, dtype=complex)
    a = _coupling_matrix(p, grid, basis)
    ground = _GroundResolvent(p, grid, basis)
    h_e = _free_block(p.E_e, grid, basis)
    h_g = _free_block(p.E_g, grid, basis)
    s_m1 = gsb_sigma(-1.0, p, grid, basis)

    shift = ground.apply(-1.0, a.conj().T @ phi_e)
    out_e = h_e @ phi_e - (p.lam**2) * (s_m1 @ phi_e) + p.lam * (a @ phi_g)
    out_g = h_g @ phi_g + p.lam * shift

    h = assemble_gsb(p, grid, basis)
    mat_e, mat_g = h.apply([phi_e, phi_g - p.lam * shift])
    scale = max(np.linalg.norm(out_e), np.linalg.norm(out_g), 1.0)
    mismatch = max(np.max(np.abs(mat_e - out_e), initial=0.0),
                   np.max(np.abs(mat_g - out_g), initial=0.0)) / scale
    return GsbActionResult(excited=out_e, ground=out_g, matrix_mismatch=float(mismatch))


def gsb_counterterm_matrix(p: GsbParams, grid: ModeGrid) -> np.ndarray:
    """Channel-overlap counterterm ansatz on the excited sector.

    Returns sum_{j,l} <f_j, f_l>_{-1} Sigma_j^+ (Sigma_l^+)*, the matrix analog
    of the scalar counterterm lam**2 ||f||_{-1}**2.  Exploratory: the
    two-sector renormalized propagator has no published construction; this
    mode must not be read as more than an ansatz.
    """
    dim_e = p.dim_e
    out = np.zeros((dim_e, dim_e), dtype=complex)
    for ch_j in p.channels:
        for ch_l in p.channels:
            gram = np.sum(grid.weights * np.conj(ch_j.f.values) * ch_l.f.values
                          / grid.dispersion)
            out += gram * (ch_j.sigma_plus @ ch_l.sigma_plus.conj().T)
    return out


def assemble_gsb_singular(p: GsbParams, dressed_E_e: np.ndarray, grid: ModeGrid,
                          basis: FockBasis):
    """Exploratory counterterm mode: bare E_e = dressed - lam**2 * overlap matrix.

    Returns (BlockOperator, bare_E_e).  The bare matrix is generally not
    nonnegative (it diverges downward along a cutoff family), so the block
    operator is assembled directly.  See :func:`gsb_counterterm_matrix` for
    the caveat.
    """
    ct = p.lam**2 * gsb_counterterm_matrix(p, grid)
    bare = np.asarray(dressed_E_e, dtype=complex) - ct
    bare = (bare + bare.conj().T) / 2.0
    a = _coupling_matrix(p, grid, basis)
    op = BlockOperator(
        block_dims=[p.dim_e * basis.dim, p.dim_g * basis.dim],
        blocks={
            (0, 0): _free_block(bare, grid, basis),
            (0, 1): (p.lam * a).tocsr(),
            (1, 0): (p.lam * a.conj().T).tocsr(),
            (1, 1): _free_block(p.E_g, grid, basis),
        },
    )
    return op, bare
