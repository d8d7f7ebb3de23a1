"""N-atom rotating-wave model: excitation sectors and a block-tridiagonal solver.

Spin configurations are grouped by the number of excited atoms; only adjacent
sectors couple, so on the sector decomposition the Hamiltonian is block
tridiagonal.  Sectors are stored from most to least excited (matching the
two-level convention of putting the excited block first), and configurations
within a sector are ordered descending-lexicographically, so for N=2 the
middle sector reads (eg, ge).

Spin-spin terms are admitted exactly when they preserve the number of excited
atoms: they are per-sector Hermitian matrices acting as scalars on each Fock
block, and leave the tridiagonal envelope untouched.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .fock import FockBasis, mode_energy_sums
from .grid import FormFactor, ModeGrid
from .linalg import SolveReport, SpectralPointError
from .operators import annihilator

__all__ = [
    "SectorMap",
    "MultiAtomParams",
    "BlockTridiagonal",
    "sector_map",
    "assemble_multi",
    "block_tridiag_resolvent",
]

ATOM_COUNT_CAP = 12
SECTOR_DENSE_CAP = 4_000


@dataclass(frozen=True)
class SectorMap:
    """Spin configurations grouped by excited-atom count j = 0..N."""

    n_atoms: int
    sectors: tuple  # sectors[j]: tuple of 0/1 tuples with j ones, descending lex

    @property
    def sizes(self):
        return tuple(len(s) for s in self.sectors)


def sector_map(n_atoms: int) -> SectorMap:
    if not 1 <= n_atoms <= ATOM_COUNT_CAP:
        raise ValueError(f"atom count must be in [1, {ATOM_COUNT_CAP}]")
    by_count = [[] for _ in range(n_atoms + 1)]
    for config in itertools.product((0, 1), repeat=n_atoms):
        by_count[sum(config)].append(config)
    sectors = tuple(tuple(sorted(cfgs, reverse=True)) for cfgs in by_count)
    return SectorMap(n_atoms=n_atoms, sectors=sectors)


@dataclass(frozen=True)
class MultiAtomParams:
    omega_e: np.ndarray   # per-atom excited energies
    omega_g: np.ndarray   # per-atom ground energies
    fs: tuple             # per-atom form factors
    lam: float
    spin_spin: dict | None = None  # {j: (n_j, n_j) Hermitian matrix}

    def __post_init__(self):
        oe = np.asarray(self.omega_e, dtype=float)
        og = np.asarray(self.omega_g, dtype=float)
        fs = tuple(self.fs)
        if not (len(oe) == len(og) == len(fs)):
            raise ValueError("per-atom parameter lengths disagree")
        object.__setattr__(self, "omega_e", oe)
        object.__setattr__(self, "omega_g", og)
        object.__setattr__(self, "fs", fs)

    @property
    def n_atoms(self) -> int:
        return len(self.fs)


@dataclass
class BlockTridiagonal:
    """Hermitian block-tridiagonal operator.

    ``diag[k]`` is the k-th diagonal block; ``upper[k]`` couples block k
    (rows) to block k+1 (columns); the sub-diagonal is the conjugate
    transpose of ``upper``.  ``labels`` optionally names the blocks (for the
    N-atom model: excited-atom counts, most excited first).
    """

    diag: list
    upper: list
    labels: list | None = None

    def __post_init__(self):
        if len(self.upper) != len(self.diag) - 1:
            raise ValueError("need exactly one coupling per adjacent block pair")
        for k, u in enumerate(self.upper):
            if u.shape != (self.diag[k].shape[0], self.diag[k + 1].shape[0]):
                raise ValueError(f"coupling {k} has inconsistent shape")

    @property
    def block_sizes(self):
        return [d.shape[0] for d in self.diag]

    @property
    def dim(self):
        return sum(self.block_sizes)

    def to_sparse(self) -> sp.csr_matrix:
        n = len(self.diag)
        grid = [[None] * n for _ in range(n)]
        for k in range(n):
            grid[k][k] = self.diag[k]
        for k, u in enumerate(self.upper):
            grid[k][k + 1] = u
            grid[k + 1][k] = u.conj().T
        out = sp.bmat(grid, format="csr").astype(complex)
        out.sum_duplicates()
        out.sort_indices()
        return out

    def split(self, vec):
        out, pos = [], 0
        for d in self.block_sizes:
            out.append(np.asarray(vec[pos:pos + d], dtype=complex))
            pos += d
        return out

    def apply(self, segments):
        out = [self.diag[k] @ segments[k] for k in range(len(self.diag))]
        for k, u in enumerate(self.upper):
            out[k] += u @ segments[k + 1]
            out[k + 1] += u.conj().T @ segments[k]
        return out


def _config_energy(config, p: MultiAtomParams) -> float:
    return float(np.sum(np.where(np.asarray(config, dtype=bool),
                                 p.omega_e, p.omega_g)))


def assemble_multi(p: MultiAtomParams, grid: ModeGrid, basis: FockBasis) -> BlockTridiagonal:
    """Assemble the N-atom Hamiltonian over descending excitation sectors."""
    n = p.n_atoms
    smap = sector_map(n)
    dg = sp.diags(mode_energy_sums(basis, grid).astype(complex)).tocsr()
    eye = sp.identity(basis.dim, dtype=complex, format="csr")
    a_ops = [annihilator(f, grid, basis).matrix for f in p.fs]

    order = list(range(n, -1, -1))  # most excited first
    diag_blocks, upper_blocks = [], []
    for k, j in enumerate(order):
        configs = smap.sectors[j]
        nj = len(configs)
        cells = [[None] * nj for _ in range(nj)]
        kmat = None
        if p.spin_spin and j in p.spin_spin:
            kmat = np.asarray(p.spin_spin[j], dtype=complex)
            if kmat.shape != (nj, nj):
                raise ValueError(f"spin_spin block for sector {j} has wrong shape")
            if not np.allclose(kmat, kmat.conj().T, atol=1e-12):
                raise ValueError(f"spin_spin block for sector {j} must be Hermitian")
        for a, cfg in enumerate(configs):
            cells[a][a] = (_config_energy(cfg, p) * eye + dg).tocsr()
        if kmat is not None:
            for a in range(nj):
                for b in range(nj):
                    term = kmat[a, b] * eye
                    cells[a][b] = term if cells[a][b] is None \
                        else (cells[a][b] + term).tocsr()
        diag_blocks.append(sp.bmat(cells, format="csr"))

        if j == 0:
            continue
        lower_cfgs = smap.sectors[j - 1]
        coupling = [[None] * len(lower_cfgs) for _ in range(nj)]
        for a, cfg in enumerate(configs):
            for b, low in enumerate(lower_cfgs):
                flipped = [i for i in range(n) if cfg[i] != low[i]]
                if len(flipped) == 1 and cfg[flipped[0]] == 1:
                    coupling[a][b] = (p.lam * a_ops[flipped[0]]).tocsr()
        upper_blocks.append(sp.bmat(coupling, format="csr"))

    return BlockTridiagonal(diag=diag_blocks, upper=upper_blocks, labels=order)


def block_tridiag_resolvent(z: complex, H: BlockTridiagonal, rhs,
                            rtol: float = 1e-10):
    """Solve (H - z) x = rhs by forward-backward block elimination.

    ``rhs`` may be a flat vector or a list of per-block segments; the result
    matches the input layout.  Dense Schur complements are kept per block
    (sizes are capped), and the solve is certified post hoc by its residual.

    Returns (x, SolveReport); raises SpectralPointError when a pivot block is
    singular.
    """
    sizes = H.block_sizes
    flat_input = not isinstance(rhs, (list, tuple))
    segments = H.split(rhs) if flat_input else [np.asarray(s, dtype=complex) for s in rhs]
    if [len(s) for s in segments] != sizes:
        raise ValueError("right-hand side does not match block sizes")
    if max(sizes) > SECTOR_DENSE_CAP:
        raise ValueError(f"block size exceeds dense elimination cap {SECTOR_DENSE_CAP}")

    nblocks = len(sizes)
    shifted = [H.diag[k] - z * sp.identity(sizes[k], dtype=complex, format="csr")
               for k in range(nblocks)]

    def factor(mat):
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        try:
            lu = sla.lu_factor(dense, check_finite=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise SpectralPointError(f"singular pivot block at z={z}: {exc}") from exc
        if np.any(np.diag(lu[0]) == 0) or not np.all(np.isfinite(lu[0])):
            raise SpectralPointError(f"singular pivot block at z={z}")
        return lu

    # forward sweep: Schur complements and transformed right-hand sides
    lus = []
    y = []
    schur = shifted[0]
    rhs_k = segments[0]
    for k in range(nblocks):
        lu = factor(schur)
        lus.append(lu)
        y.append(rhs_k)
        if k == nblocks - 1:
            break
        u = H.upper[k]
        x_block = sla.lu_solve(lu, u.toarray())
        schur = shifted[k + 1].toarray() - u.conj().T @ x_block
        rhs_k = segments[k + 1] - u.conj().T @ sla.lu_solve(lu, y[k])

    # back substitution
    x = [None] * nblocks
    x[-1] = sla.lu_solve(lus[-1], y[-1])
    for k in range(nblocks - 2, -1, -1):
        x[k] = sla.lu_solve(lus[k], y[k] - H.upper[k] @ x[k + 1])

    applied = H.apply(x)
    res_num = np.sqrt(sum(
        np.linalg.norm(applied[k] - z * x[k] - segments[k]) ** 2
        for k in range(nblocks)))
    res_den = np.sqrt(sum(np.linalg.norm(s) ** 2 for s in segments))
    residual = float(res_num / res_den) if res_den > 0 else float(res_num)
    report = SolveReport(iterations=0, residual=residual,
                         success=residual <= rtol, method="block-thomas")
    if not report.success:
        raise SpectralPointError(
            f"block elimination residual {residual:.3e} exceeds {rtol:.1e} at z={z}",
            report)
    result = np.concatenate(x) if flat_input else x
    return result, report
