"""Dissipator algebra, exact propagation, and stationary-state solvers."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st

import nvpump as nv
from nvpump.lindblad import (DegenerateKernelError, InvalidGeneratorError,
                             RateMatrix)
from reference_values import NESS_TABLE


def _diag_rho(p):
    return np.diag(np.asarray(p, dtype=complex))


def test_dissipator_on_level_5(model):
    rho = _diag_rho(np.eye(8)[4])
    out = nv.apply_dissipator(rho, nv.active_jumps(model, laser_on=False))
    expect = np.zeros((8, 8))
    expect[1, 1] = 77.0       # spin conserving 5 -> 2
    expect[0, 0] = 0.25       # spin flip 5 -> 1
    expect[7, 7] = 15.0       # shelving 5 -> 8
    expect[4, 4] = -92.25
    npt.assert_allclose(out.real, expect, atol=1e-13)
    npt.assert_allclose(out.imag, 0.0, atol=1e-13)


def test_dissipator_row_column_damping(model):
    # coherence on the pumped transition damps at half the total out-rate
    rho = np.zeros((8, 8), dtype=complex)
    rho[0, 3] = rho[3, 0] = 1.0
    out = nv.apply_dissipator(rho, nv.active_jumps(model, laser_on=True))
    out_1 = 77.0              # pump 1 -> 4
    out_4 = 77.0 + 0.25 + 0.25
    assert out[0, 3] == pytest.approx(-0.5 * (out_1 + out_4))
    assert out[3, 0] == pytest.approx(-0.5 * (out_1 + out_4))


def test_dissipator_traceless(model, uniform_G):
    rng = np.random.default_rng(7)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    out = nv.apply_dissipator(rho, nv.active_jumps(model, True))
    assert abs(np.trace(out)) < 1e-10 * np.abs(out).max()
    npt.assert_allclose(out, out.conj().T, atol=1e-12 * np.abs(out).max())


@settings(deadline=None, max_examples=25, derandomize=True)
@given(st.integers(0, 2**31 - 1))
def test_adjoint_duality(seed):
    """Tr[A D(rho)] equals Tr[D+(A) rho] for Hermitian A."""
    model = nv.build_model(nv.ModelParams())
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    A = a + a.conj().T
    b = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = b @ b.conj().T
    rho /= np.trace(rho).real
    jumps = nv.active_jumps(model, True)
    lhs = np.trace(A @ nv.apply_dissipator(rho, jumps))
    rhs_ = np.trace(nv.apply_adjoint_dissipator(A, jumps) @ rho)
    assert abs(lhs - rhs_) < 1e-9 * max(1.0, abs(lhs))


def test_rhs_diagonal_matches_rate_matrix(model, uniform_G):
    rho = _diag_rho(uniform_G)
    d = nv.rhs(rho, model, laser_on=True)
    W = nv.build_rate_matrix(model, True)
    npt.assert_allclose(np.diag(d).real, W.matrix @ uniform_G,
                        atol=1e-10 * W.max_rate)
    off = d - np.diag(np.diag(d))
    assert np.abs(off).max() == 0.0


def test_rate_matrix_structure(model):
    for flag in (True, False):
        W = nv.build_rate_matrix(model, flag).matrix
        off = W - np.diag(np.diag(W))
        assert off.min() >= 0.0
        npt.assert_allclose(W.sum(axis=0), 0.0, atol=1e-12 * np.abs(W).max())
    assert nv.build_rate_matrix(model, True).max_rate == pytest.approx(1e3)


def test_rate_matrix_rejects_bad_input():
    bad = -np.eye(8)          # columns do not sum to zero
    with pytest.raises(ValueError):
        RateMatrix(matrix=bad)
    bad2 = np.zeros((8, 8))
    bad2[0, 1] = -1.0
    bad2[1, 1] = 1.0
    with pytest.raises(ValueError):
        RateMatrix(matrix=bad2)


def test_laser_off_pump_inactive(model):
    ops = nv.active_jumps(model, laser_on=False)
    assert all(op.channel != "pump" for op in ops)
    assert len(ops) == 14


def test_evolution_conserves_probability(model, uniform_G):
    W = nv.build_rate_matrix(model, True)
    t = np.linspace(0.0, 20.0, 201)
    traj = nv.evolve_populations(W, uniform_G, t)
    npt.assert_allclose(traj.populations.sum(axis=1), 1.0, atol=1e-10)
    assert traj.populations.min() >= 0.0
    npt.assert_array_equal(traj.populations[0], uniform_G)


def test_grid_may_start_anywhere(model, uniform_G):
    W = nv.build_rate_matrix(model, True)
    a = nv.evolve_populations(W, uniform_G, np.linspace(0.0, 4.0, 41))
    b = nv.evolve_populations(W, uniform_G, np.linspace(5.0, 9.0, 41))
    npt.assert_allclose(a.populations, b.populations, atol=1e-13)


def test_defective_generator_falls_back_to_expm():
    """Equal shelf rates make the decay chain non-diagonalizable."""
    params = nv.ModelParams(kappa_I=3.0, kappa_IG=(1.0, 1.0, 1.0))
    W = nv.build_rate_matrix(nv.build_model(params), False)
    e8 = np.eye(8)[7]
    t = np.array([0.0, 0.3, 1.0, 2.5])
    traj = nv.evolve_populations(W, e8, t)
    npt.assert_allclose(traj.populations[:, 7], np.exp(-3 * t), rtol=1e-12)
    npt.assert_allclose(traj.populations[:, 6], 3 * t * np.exp(-3 * t),
                        rtol=1e-12, atol=1e-15)


def test_branching_from_shelf(model):
    W = nv.build_rate_matrix(model, False)
    p = nv.asymptotic_state(W, np.eye(8)[6])
    npt.assert_allclose(p[:3], 1.0 / 3.0, atol=1e-12)
    npt.assert_allclose(p[3:], 0.0, atol=1e-12)


def test_branching_from_excited_ms0(model):
    W = nv.build_rate_matrix(model, False)
    p = nv.asymptotic_state(W, np.eye(8)[3])
    assert p[0] == pytest.approx(77.0 / 77.5, abs=1e-12)


def test_steady_state_matches_reference():
    for gp, ref in NESS_TABLE.items():
        W = nv.build_rate_matrix(
            nv.build_model(nv.ModelParams(Gamma_p=gp)), True)
        p = nv.steady_state(W)
        npt.assert_allclose(p, ref, atol=1e-9)
        assert np.abs(W.matrix @ p).max() < 1e-10 * W.max_rate


def test_steady_state_is_fixed_point(model, ness):
    W = nv.build_rate_matrix(model, True)
    traj = nv.evolve_populations(W, ness, np.array([0.0, 100.0]))
    npt.assert_allclose(traj.populations[-1], ness, atol=1e-9)


def test_laser_off_kernel_is_degenerate(model):
    W = nv.build_rate_matrix(model, False)
    with pytest.raises(DegenerateKernelError, match="asymptotic_state"):
        nv.steady_state(W)


def test_asymptotic_matches_long_evolution(model, uniform_G):
    W = nv.build_rate_matrix(model, True)
    p_inf = nv.asymptotic_state(W, uniform_G)
    lam = np.linalg.eigvals(W.matrix)
    slowest = np.abs(lam.real[np.abs(lam.real) > 1e-10 * W.max_rate]).min()
    t_long = 1e3 / slowest
    traj = nv.evolve_populations(W, uniform_G, np.array([0.0, t_long]))
    npt.assert_allclose(p_inf, traj.populations[-1], atol=1e-8)


def test_asymptotic_depends_on_start_when_degenerate(model):
    W = nv.build_rate_matrix(model, False)
    p_a = nv.asymptotic_state(W, np.eye(8)[3])
    p_b = nv.asymptotic_state(W, np.eye(8)[4])
    assert np.abs(p_a - p_b).max() > 0.1


def test_generator_spectrum_has_no_positive_part(model):
    for flag in (True, False):
        W = nv.build_rate_matrix(model, flag)
        lam = np.linalg.eigvals(W.matrix)
        assert lam.real.max() <= 1e-12 * W.max_rate


def test_invalid_generator_detected():
    bad = np.zeros((8, 8))
    bad[0, 0] = 1.0
    bad[1, 0] = -1.0
    rm = RateMatrix.__new__(RateMatrix)
    object.__setattr__(rm, "matrix", bad)
    with pytest.raises(InvalidGeneratorError):
        nv.asymptotic_state(rm, np.eye(8)[0])


def test_trajectory_validation(uniform_G):
    P = np.tile(uniform_G, (3, 1))
    with pytest.raises(ValueError):
        nv.Trajectory(times=np.array([0.0, 2.0, 1.0]), populations=P,
                      laser_on=np.ones(3, dtype=bool))
    bad = P.copy()
    bad[1, 0] = -1e-6
    with pytest.raises(nv.NumericalFailureError):
        nv.Trajectory(times=np.array([0.0, 1.0, 2.0]), populations=bad,
                      laser_on=np.ones(3, dtype=bool))


def test_phase_slices_share_boundary_sample(uniform_G):
    traj = nv.Trajectory(times=np.arange(4.0),
                         populations=np.tile(uniform_G, (4, 1)),
                         laser_on=np.array([True, True, False, False]))
    slices = list(traj.phase_slices())
    assert slices == [(slice(0, 3), True), (slice(2, 4), False)]


def test_full_lindblad_matches_populations_short(model, uniform_G):
    t = np.linspace(0.0, 2.0, 50)
    traj_full = nv.evolve_full(_diag_rho(uniform_G), model, True, t)
    W = nv.build_rate_matrix(model, True)
    traj_pop = nv.evolve_populations(W, uniform_G, t)
    npt.assert_allclose(traj_full.populations, traj_pop.populations,
                        atol=1e-8)
    assert traj_full.densities is not None
    tr = np.array([np.trace(r).real for r in traj_full.densities])
    npt.assert_allclose(tr, 1.0, atol=1e-9)
