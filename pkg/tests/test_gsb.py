import math

import numpy as np
import pytest
import scipy.sparse as sp

from focklab.fock import build_basis, mode_energy_sums
from focklab.grid import FormFactor, build_grid, power_form_factor
from focklab.gsb import (GsbChannel, GsbParams, assemble_gsb, assemble_gsb_singular,
                         gsb_counterterm_matrix, gsb_resolvent_apply, gsb_sigma,
                         gsb_singular_action)
from focklab.linalg import dense_inverse_oracle
from focklab.spinboson import SpinBosonParams, assemble_regular, sigma_f

LN43 = math.log(4.0 / 3.0)


def setup(modes=3, n_max=2, seed=0):
    g = build_grid(1.0, 2.0, modes)
    b = build_basis(modes, n_max)
    rng = np.random.default_rng(seed)
    return g, b, rng


def random_ff(grid, rng):
    return FormFactor(rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size))


def scalar_params(f, omega_e=0.7, lam=0.8):
    return GsbParams(E_e=[[omega_e]], E_g=[[0.0]],
                     channels=(GsbChannel(sigma_plus=[[1.0]], f=f),), lam=lam)


def two_level_params(f1, f2, lam=0.6):
    # two excited levels, one ground level, channel j attached to level j
    return GsbParams(
        E_e=[[1.0, 0.1], [0.1, 1.5]], E_g=[[0.2]],
        channels=(GsbChannel(sigma_plus=[[1.0], [0.0]], f=f1),
                  GsbChannel(sigma_plus=[[0.0], [1.0]], f=f2)),
        lam=lam)


def csr_equal_bits(a, b):
    a = a.copy(); a.eliminate_zeros(); a.sum_duplicates(); a.sort_indices()
    b = b.copy(); b.eliminate_zeros(); b.sum_duplicates(); b.sort_indices()
    return (np.array_equal(a.indptr, b.indptr)
            and np.array_equal(a.indices, b.indices)
            and np.array_equal(a.data, b.data))


def test_scalar_reduction_is_bit_exact():
    g, b, rng = setup()
    f = random_ff(g, rng)
    h_sb = assemble_regular(SpinBosonParams(omega_e=0.7, lam=0.8, f=f), g, b).to_sparse()
    h_gsb = assemble_gsb(scalar_params(f), g, b).to_sparse()
    assert csr_equal_bits(h_sb, h_gsb)


def test_decoupled_spectrum_union():
    g, b, rng = setup()
    p = GsbParams(E_e=[[1.0, 0.0], [0.0, 1.5]], E_g=[[0.2]],
                  channels=(GsbChannel(sigma_plus=[[1.0], [0.0]],
                                       f=power_form_factor(g, 0.0)),),
                  lam=0.0)
    h = assemble_gsb(p, g, b).to_sparse().toarray()
    energies = mode_energy_sums(b, g)
    expect = np.sort(np.concatenate([1.0 + energies, 1.5 + energies, 0.2 + energies]))
    assert np.allclose(np.sort(np.linalg.eigvalsh(h)), expect, atol=1e-12)


def test_multilevel_matches_dense_tensor_build():
    # independent construction: explicit kron of atom matrices with dense
    # Fock-operator blocks on C^3 (x) F
    g, b, rng = setup(seed=2)
    f1, f2 = random_ff(g, rng), random_ff(g, rng)
    p = two_level_params(f1, f2)
    got = assemble_gsb(p, g, b).to_sparse().toarray()

    from focklab.operators import annihilator, dgamma
    a1 = annihilator(f1, g, b).matrix.toarray()
    a2 = annihilator(f2, g, b).matrix.toarray()
    dg = dgamma(g, b).matrix.toarray()
    eye_f = np.eye(b.dim)
    atom_e = np.zeros((3, 3), dtype=complex); atom_e[:2, :2] = np.asarray(p.E_e)
    atom_g = np.zeros((3, 3), dtype=complex); atom_g[2, 2] = 0.2
    sp1 = np.zeros((3, 3)); sp1[0, 2] = 1.0
    sp2 = np.zeros((3, 3)); sp2[1, 2] = 1.0
    want = (np.kron(atom_e + atom_g, eye_f) + np.kron(np.eye(3), dg)
            + p.lam * (np.kron(sp1, a1) + np.kron(sp2, a2))
            + p.lam * (np.kron(sp1.T, a1.conj().T) + np.kron(sp2.T, a2.conj().T)))
    assert np.max(np.abs(got - want)) < 1e-14


def test_interaction_has_no_intra_sector_blocks():
    # transitions within a sector are not allowed: the interaction part has
    # exactly zero e-e and g-g blocks
    g, b, rng = setup(seed=3)
    p = two_level_params(random_ff(g, rng), random_ff(g, rng))
    h = assemble_gsb(p, g, b)
    d = b.dim
    full = h.to_sparse()
    h0 = sp.block_diag([h.blocks[(0, 0)], h.blocks[(1, 1)]], format="csr")
    inter = (full - h0).tocsr()
    inter.eliminate_zeros()
    dense = np.abs(inter.toarray())
    assert np.max(dense[: 2 * d, : 2 * d]) == 0.0  # e-e
    assert np.max(dense[2 * d :, 2 * d :]) == 0.0  # g-g


def test_sigma_scalar_reduction_exact():
    g, b, rng = setup(seed=4)
    f = random_ff(g, rng)
    p = scalar_params(f)
    p_sb = SpinBosonParams(omega_e=0.7, lam=0.8, f=f)
    for z in (-1.0, 0.3 + 0.6j):
        s_sb = sigma_f(z, p_sb, g, b).matrix
        s_gsb = gsb_sigma(z, p, g, b)
        diff = (s_sb - s_gsb).tocsr()
        diff.eliminate_zeros()
        assert diff.nnz == 0


def test_sigma_vacuum_channel_overlap():
    # <e_j vac, S(z) e_l vac> = sum_i w_i conj(f_j) f_l / (omega_i - z);
    # for f1 == 1, f2 = 1/k on [1,2] at z = -1 the cross overlap is ln(4/3)
    count = 400
    g = build_grid(1.0, 2.0, count)
    b = build_basis(count, 1)
    f1 = power_form_factor(g, 0.0)
    f2 = power_form_factor(g, 1.0)
    p = GsbParams(E_e=[[1.0, 0.0], [0.0, 1.5]], E_g=[[0.0]],
                  channels=(GsbChannel(sigma_plus=[[1.0], [0.0]], f=f1),
                            GsbChannel(sigma_plus=[[0.0], [1.0]], f=f2)),
                  lam=1.0)
    s = gsb_sigma(-1.0, p, g, b)
    cross = s[0, b.dim]  # e_1 vacuum row, e_2 vacuum column
    assert cross.real == pytest.approx(LN43, abs=1e-5)
    assert abs(cross.imag) < 1e-14


def test_sigma_hermitian_below_gap():
    g, b, rng = setup(seed=5)
    p = two_level_params(random_ff(g, rng), random_ff(g, rng))
    s = gsb_sigma(-0.5, p, g, b)
    diff = (s - s.conj().T).tocsr()
    diff.eliminate_zeros()
    assert diff.nnz == 0 or np.max(np.abs(diff.data)) < 1e-14


def test_resolvent_matches_dense_oracle():
    g, b, rng = setup(seed=6)
    p = two_level_params(random_ff(g, rng), random_ff(g, rng))
    hs = assemble_gsb(p, g, b).to_sparse()
    n = hs.shape[0]
    for z in (0.4 + 0.8j, -1.2 - 0.5j):
        dense = dense_inverse_oracle(hs - z * np.eye(n))
        ve = rng.standard_normal(2 * b.dim) + 1j * rng.standard_normal(2 * b.dim)
        vg = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
        xe, xg, report = gsb_resolvent_apply(z, p, g, b, ve, vg)
        want = dense @ np.concatenate([ve, vg])
        got = np.concatenate([xe, xg])
        assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)
        assert report.success


def test_singular_action_decoupled():
    g, b, rng = setup(seed=7)
    f = random_ff(g, rng)
    p = GsbParams(E_e=[[0.7]], E_g=[[0.0]],
                  channels=(GsbChannel(sigma_plus=[[1.0]], f=f),), lam=0.0)
    phi_e = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    phi_g = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    act = gsb_singular_action(phi_e, phi_g, p, g, b)
    energies = mode_energy_sums(b, g)
    assert np.allclose(act.excited, (0.7 + energies) * phi_e, atol=1e-13)
    assert np.allclose(act.ground, energies * phi_g, atol=1e-13)
    assert act.matrix_mismatch < 1e-14


def test_singular_action_matches_scalar_model():
    g, b, rng = setup(seed=8)
    f = random_ff(g, rng)
    p = scalar_params(f)
    p_sb = SpinBosonParams(omega_e=0.7, lam=0.8, f=f)
    from focklab.fock import FockState
    from focklab.spinboson import singular_domain_action
    phi_e = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    phi_g = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    act = gsb_singular_action(phi_e, phi_g, p, g, b)
    sb = singular_domain_action(FockState(b, phi_e), FockState(b, phi_g), p_sb, g, b)
    assert np.max(np.abs(act.excited - sb.excited.coeffs)) < 1e-13
    assert np.max(np.abs(act.ground - sb.ground.coeffs)) < 1e-13


def test_singular_action_random_channels_identity():
    g, b, rng = setup(seed=9)
    p = two_level_params(random_ff(g, rng), random_ff(g, rng))
    phi_e = rng.standard_normal(2 * b.dim) + 1j * rng.standard_normal(2 * b.dim)
    phi_g = rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)
    act = gsb_singular_action(phi_e, phi_g, p, g, b)
    assert act.matrix_mismatch <= 1e-12


def test_counterterm_matrix_scalar_reduction():
    g, b, rng = setup(seed=10)
    f = random_ff(g, rng)
    p = scalar_params(f, lam=0.9)
    ct = gsb_counterterm_matrix(p, g)
    expect = np.sum(g.weights * np.abs(f.values) ** 2 / g.dispersion)
    assert ct.shape == (1, 1)
    assert ct[0, 0].real == pytest.approx(expect, rel=1e-13)


def test_assemble_gsb_singular_hermitian():
    g, b, rng = setup(seed=11)
    p = two_level_params(random_ff(g, rng), random_ff(g, rng))
    dressed = np.asarray(p.E_e)
    op, bare = assemble_gsb_singular(p, dressed, g, b)
    assert op.hermiticity_defect() == 0.0
    assert np.allclose(bare, dressed - p.lam**2 * gsb_counterterm_matrix(p, g))


def test_params_validation():
    g, _, rng = setup()
    f = random_ff(g, rng)
    with pytest.raises(ValueError):
        GsbParams(E_e=[[1.0, 0.5], [0.0, 1.0]], E_g=[[0.0]],
                  channels=(GsbChannel(sigma_plus=[[1.0], [1.0]], f=f),), lam=1.0)
    with pytest.raises(ValueError):
        GsbParams(E_e=[[-1.0]], E_g=[[0.0]],
                  channels=(GsbChannel(sigma_plus=[[1.0]], f=f),), lam=1.0)
    with pytest.raises(ValueError):
        GsbParams(E_e=[[1.0]], E_g=[[0.0]], channels=(), lam=1.0)
    with pytest.raises(ValueError):
        GsbParams(E_e=[[1.0]], E_g=[[0.0]],
                  channels=(GsbChannel(sigma_plus=[[1.0], [0.0]], f=f),), lam=1.0)
