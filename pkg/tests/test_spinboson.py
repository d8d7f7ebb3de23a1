import math

import numpy as np
import pytest
import scipy.sparse as sp

from focklab.fock import FockState, build_basis, mode_energy_sums, vacuum
from focklab.grid import FormFactor, build_grid, power_form_factor, scale_norm
from focklab.linalg import SpectralPointError, dense_inverse_oracle, lowest_eigenpairs
from focklab.spinboson import (SpinBosonParams, SpinBosonResolvent, TwoBlockState,
                               assemble_regular, assemble_singular, domain_shift,
                               excited_vacuum, propagator_inverse_apply,
                               propagator_matrix, psi0_energy_stats, resolvent_apply,
                               sigma_f, singular_domain_action,
                               vacuum_propagator_element)

LN32 = math.log(1.5)


def random_ff(grid, rng):
    return FormFactor(rng.standard_normal(grid.size) + 1j * rng.standard_normal(grid.size))


def setup(modes=3, n_max=2, k_max=2.0, seed=0):
    g = build_grid(1.0, k_max, modes)
    b = build_basis(modes, n_max)
    rng = np.random.default_rng(seed)
    return g, b, rng


def random_two_block(b, rng):
    d = b.dim
    return TwoBlockState(
        FockState(b, rng.standard_normal(d) + 1j * rng.standard_normal(d)),
        FockState(b, rng.standard_normal(d) + 1j * rng.standard_normal(d)))


def test_decoupled_spectrum_is_union():
    g, b, _ = setup()
    p = SpinBosonParams(omega_e=0.7, lam=0.0, f=power_form_factor(g, 0.0))
    h = assemble_regular(p, g, b)
    for (i, j), blk in h.blocks.items():
        if i != j:
            assert np.count_nonzero(blk.toarray()) == 0
    energies = mode_energy_sums(b, g)
    expect = np.sort(np.concatenate([0.7 + energies, energies]))
    got = np.sort(np.linalg.eigvalsh(h.to_sparse().toarray()))
    assert np.allclose(got, expect, atol=1e-12)


def test_jaynes_cummings_closure():
    # M=1, n_max=1: the singly-excited pair diagonalizes in closed form
    g = build_grid(1.0, 2.0, 1)
    b = build_basis(1, 1)
    f = FormFactor(np.array([0.8 - 0.3j]))
    p = SpinBosonParams(omega_e=0.9, lam=0.7, f=f)
    h = assemble_regular(p, g, b).to_sparse().toarray()
    assert h.shape == (4, 4)
    w1, omega1 = g.weights[0], g.dispersion[0]
    coupling = abs(p.lam) ** 2 * w1 * abs(f.values[0]) ** 2
    mean = (p.omega_e + omega1) / 2.0
    gap = math.sqrt(((p.omega_e - omega1) / 2.0) ** 2 + coupling)
    expect = np.sort([0.0, p.omega_e + omega1, mean - gap, mean + gap])
    assert np.allclose(np.sort(np.linalg.eigvalsh(h)), expect, atol=1e-12)


def test_hermiticity_is_exact():
    g, b, rng = setup()
    p = SpinBosonParams(omega_e=0.7, lam=0.8, f=random_ff(g, rng))
    assert assemble_regular(p, g, b).hermiticity_defect() == 0.0


def test_psi0_mean_is_omega_e_exactly():
    g, b, rng = setup()
    for omega_e in (0.0, 0.7, -1.3, 5.0):
        p = SpinBosonParams(omega_e=omega_e, lam=0.9, f=random_ff(g, rng))
        assert psi0_energy_stats(p, g, b)["mean"] == omega_e


def test_psi0_variance_matches_grid_norm():
    g, b, rng = setup()
    f = random_ff(g, rng)
    p = SpinBosonParams(omega_e=0.4, lam=0.8, f=f)
    stats = psi0_energy_stats(p, g, b)
    assert stats["variance"] == pytest.approx(
        0.8**2 * scale_norm(f, 0.0, g) ** 2, rel=1e-13)


def test_psi0_variance_zero_when_decoupled():
    g, b, _ = setup()
    p = SpinBosonParams(omega_e=0.4, lam=0.0, f=power_form_factor(g, 0.0))
    assert psi0_energy_stats(p, g, b)["variance"] == 0.0


def test_sigma_vacuum_element_log_oracle():
    # <vac, S_f(-1) vac> for f == 1 on [1,2] converges to ln(3/2)
    b = build_basis(100, 1)
    g = build_grid(1.0, 2.0, 100)
    p = SpinBosonParams(omega_e=1.0, lam=1.0, f=power_form_factor(g, 0.0))
    s = sigma_f(-1.0, p, g, b)
    assert s.matrix[0, 0].real == pytest.approx(LN32, abs=1e-5)
    assert s.sector_shift == 0


def test_sigma_zero_form_factor():
    g, b, _ = setup()
    p = SpinBosonParams(omega_e=1.0, lam=1.0, f=FormFactor(np.zeros(3)))
    s = sigma_f(0.5j, p, g, b)
    assert np.count_nonzero(s.matrix.toarray()) == 0


def test_sigma_positive_semidefinite_below_gap():
    g, b, rng = setup(modes=3, n_max=3)
    p = SpinBosonParams(omega_e=1.0, lam=1.0, f=random_ff(g, rng))
    for z in (-1.0, 0.0, 0.5):
        s = sigma_f(z, p, g, b).matrix.toarray()
        assert np.max(np.abs(s - s.conj().T)) < 1e-13
        assert np.linalg.eigvalsh((s + s.conj().T) / 2).min() > -1e-12


def test_sigma_rejects_spectral_point():
    g, b, _ = setup()
    p = SpinBosonParams(omega_e=1.0, lam=1.0, f=power_form_factor(g, 0.0))
    with pytest.raises(SpectralPointError):
        sigma_f(complex(g.dispersion[1]), p, g, b)  # one-boson energy


def test_sigma_allows_z_zero():
    # the creator never reaches the vacuum, so z = 0 is not an obstruction
    g, b, rng = setup()
    p = SpinBosonParams(omega_e=1.0, lam=1.0, f=random_ff(g, rng))
    s = sigma_f(0.0, p, g, b).matrix.toarray()
    assert np.all(np.isfinite(s))


def test_propagator_decoupled_is_diagonal():
    g, b, rng = setup()
    p = SpinBosonParams(omega_e=0.6, lam=0.0, f=power_form_factor(g, 0.0))
    z = 0.2 + 0.4j
    psi = FockState(b, rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim))
    out, report = propagator_inverse_apply(z, p, g, psi)
    energies = mode_energy_sums(b, g)
    assert np.allclose(out.coeffs, psi.coeffs / (0.6 - z + energies), atol=1e-13)
    assert report.success


def test_propagator_friedrichs_scalar_reduction():
    # excitation conservation makes the vacuum element exactly scalar
    g, b, rng = setup(modes=5, n_max=2, seed=3)
    f = random_ff(g, rng)
    p = SpinBosonParams(omega_e=0.9, lam=0.45, f=f)
    for z in (0.3 + 0.8j, -0.7 + 0.0j, 2.0 - 1.5j):
        sigma = np.sum(g.weights * np.abs(f.values) ** 2 / (g.dispersion - z))
        expect = 1.0 / (p.omega_e - z - p.lam**2 * sigma)
        got = vacuum_propagator_element(z, p, g, b)
        assert abs(got - expect) <= 1e-13 * abs(expect)


def test_propagator_inverse_identity():
    g, b, rng = setup(seed=5)
    p = SpinBosonParams(omega_e=0.9, lam=0.6, f=random_ff(g, rng))
    z = 0.1 + 0.7j
    psi = FockState(b, rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim))
    out, _ = propagator_inverse_apply(z, p, g, psi)
    back = propagator_matrix(z, p, g, b) @ out.coeffs
    assert np.linalg.norm(back - psi.coeffs) <= 1e-12 * np.linalg.norm(psi.coeffs)


def z_panel():
    return [0.3 + 0.9j, -0.5 - 0.6j, 1.7 + 0.2j, -2.0 + 1.0j]


def test_resolvent_matches_dense_oracle():
    for modes, n_max, seed in [(3, 2, 0), (4, 3, 1), (6, 2, 2)]:
        g, b, rng = setup(modes=modes, n_max=n_max, seed=seed)
        p = SpinBosonParams(omega_e=0.8, lam=0.5, f=random_ff(g, rng))
        h = assemble_regular(p, g, b).to_sparse().toarray()
        res = SpinBosonResolvent(p, g, b)
        for z in z_panel():
            dense = dense_inverse_oracle(h - z * np.eye(2 * b.dim))
            v = rng.standard_normal(2 * b.dim) + 1j * rng.standard_normal(2 * b.dim)
            got = res.apply_stacked(z, v)
            want = dense @ v
            assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)


def test_resolvent_decoupled_block_diagonal():
    g, b, rng = setup()
    p = SpinBosonParams(omega_e=0.8, lam=0.0, f=power_form_factor(g, 0.0))
    state = TwoBlockState(
        FockState(b, rng.standard_normal(b.dim).astype(complex)),
        FockState(b, np.zeros(b.dim, dtype=complex)))
    out = resolvent_apply(0.5j, p, g, state)
    assert np.linalg.norm(out.ground.coeffs) == 0.0


def test_resolvent_conjugate_symmetry():
    g, b, rng = setup(seed=7)
    p = SpinBosonParams(omega_e=0.8, lam=0.5, f=random_ff(g, rng))
    res = SpinBosonResolvent(p, g, b)
    z = 0.4 + 0.9j
    for _ in range(5):
        v = rng.standard_normal(2 * b.dim) + 1j * rng.standard_normal(2 * b.dim)
        w = rng.standard_normal(2 * b.dim) + 1j * rng.standard_normal(2 * b.dim)
        lhs = np.vdot(w, res.apply_stacked(z, v))
        rhs = np.vdot(res.apply_stacked(np.conj(z), w), v)
        assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_resolvent_first_identity():
    g, b, rng = setup(seed=9)
    p = SpinBosonParams(omega_e=0.8, lam=0.5, f=random_ff(g, rng))
    res = SpinBosonResolvent(p, g, b)
    z1, z2 = 0.3 + 0.8j, -0.9 - 0.4j
    for _ in range(5):
        v = rng.standard_normal(2 * b.dim) + 1j * rng.standard_normal(2 * b.dim)
        lhs = res.apply_stacked(z1, v) - res.apply_stacked(z2, v)
        rhs = (z1 - z2) * res.apply_stacked(z1, res.apply_stacked(z2, v))
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_excitation_number_conservation_exact():
    g, b, rng = setup(modes=4, n_max=3, seed=11)
    p = SpinBosonParams(omega_e=0.8, lam=0.5, f=random_ff(g, rng))
    h = assemble_regular(p, g, b).to_sparse()
    bosons = b.states.sum(axis=1)
    excitation = np.concatenate([bosons + 1, bosons]).astype(float)
    n_op = sp.diags(excitation)
    comm = h @ n_op - n_op @ h
    comm.eliminate_zeros()
    assert comm.nnz == 0


def test_assemble_singular_zero_form_factor():
    g, b, _ = setup()
    p = SpinBosonParams(omega_e=1.2, lam=0.8, f=power_form_factor(g, 0.0),
                        renormalized=True)
    model = assemble_singular(p, FormFactor(np.zeros(3)), g, b)
    assert model.counterterm == 0.0
    assert model.bare_params.omega_e == 1.2
    for (i, j), blk in model.hamiltonian.blocks.items():
        if i != j:
            assert np.count_nonzero(blk.toarray()) == 0


def test_assemble_singular_log_counterterm():
    # ||f||_{-1}^2 for f == 1 on [1, e] is exactly 1; the bare level sits one
    # counterterm above the dressed one
    count = 400
    g = build_grid(1.0, math.e, count)
    b = build_basis(count, 1)
    p = SpinBosonParams(omega_e=1.0, lam=1.0, f=power_form_factor(g, 0.0),
                        renormalized=True)
    model = assemble_singular(p, power_form_factor(g, 0.0), g, b)
    assert model.counterterm == pytest.approx(1.0, abs=1e-5)
    assert model.bare_params.omega_e == pytest.approx(2.0, abs=1e-5)
    assert model.bare_params.omega_e == p.omega_e + model.counterterm


def test_assemble_singular_sigma0_anchor_formula():
    # dressed vacuum element with the z0 = -1 anchor reproduces the
    # first-resolvent-identity bracket exactly on the grid
    g = build_grid(1.0, 50.0, 120, spacing="log")
    b = build_basis(g.size, 1)
    f = power_form_factor(g, 0.0)
    p = SpinBosonParams(omega_e=1.0, lam=0.9, f=f, renormalized=True)
    model = assemble_singular(p, f, g, b, anchor="sigma0")
    z = 0.4 + 1.1j
    bracket = np.sum(g.weights * np.abs(f.values) ** 2
                     * (1.0 / (g.dispersion - z) - 1.0 / (g.dispersion + 1.0)))
    expect = 1.0 / (1.0 - z - 0.9**2 * bracket)
    got = vacuum_propagator_element(z, model.bare_params, g, b)
    assert abs(got - expect) <= 1e-13 * abs(expect)


def test_assemble_singular_requires_renormalized_flag():
    g, b, _ = setup()
    p = SpinBosonParams(omega_e=1.0, lam=1.0, f=power_form_factor(g, 0.0))
    with pytest.raises(ValueError):
        assemble_singular(p, p.f, g, b)


def test_domain_shift_decoupled():
    g, b, rng = setup()
    p = SpinBosonParams(omega_e=1.0, lam=0.0, f=random_ff(g, rng))
    psi = FockState(b, rng.standard_normal(b.dim).astype(complex))
    assert np.linalg.norm(domain_shift(psi, p, g, b).coeffs) == 0.0


def test_domain_shift_on_vacuum():
    g, b, rng = setup(modes=4, seed=13)
    f = random_ff(g, rng)
    p = SpinBosonParams(omega_e=1.0, lam=0.7, f=f)
    out = domain_shift(vacuum(b), p, g, b)
    for i in range(4):
        occ = np.zeros(4, dtype=int)
        occ[i] = 1
        expect = -0.7 * math.sqrt(g.weights[i]) * f.values[i] / (g.dispersion[i] + 1.0)
        assert out.coeffs[b.index_of(occ)] == pytest.approx(expect, rel=1e-13)


def test_domain_action_identity():
    g, b, rng = setup(modes=4, n_max=3, seed=17)
    p = SpinBosonParams(omega_e=0.8, lam=0.6, f=random_ff(g, rng))
    h = assemble_regular(p, g, b)
    for _ in range(10):
        phi_e = FockState(b, rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim))
        phi_g = FockState(b, rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim))
        shifted = phi_g.coeffs + domain_shift(phi_e, p, g, b).coeffs
        mat = h.apply([phi_e.coeffs, shifted])
        act = singular_domain_action(phi_e, phi_g, p, g, b)
        scale = max(np.linalg.norm(act.excited.coeffs), np.linalg.norm(act.ground.coeffs))
        assert np.max(np.abs(mat[0] - act.excited.coeffs)) <= 1e-12 * scale
        assert np.max(np.abs(mat[1] - act.ground.coeffs)) <= 1e-12 * scale


def test_ground_energy_offset_enters_ground_block():
    g, b, rng = setup()
    p = SpinBosonParams(omega_e=0.8, lam=0.0, f=power_form_factor(g, 0.0), omega_g=0.3)
    h = assemble_regular(p, g, b)
    assert h.blocks[(1, 1)].diagonal()[0] == 0.3
