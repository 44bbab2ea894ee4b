import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ergokit import galerkin as gw
from ergokit.chain import matched_chain_params
from ergokit.exceptions import QuadratureUnderresolved, ValidationError


def test_spec_validation_and_default_quadrature():
    with pytest.raises(ValidationError):
        gw.GalerkinSpec(4, terms=((1.0, 2),))
    with pytest.raises(ValidationError):
        gw.GalerkinSpec(4, terms=((-1.0, 3),))
    with pytest.raises(ValidationError):
        gw.GalerkinSpec(4, quad_points=10)
    assert gw.GalerkinSpec(8).quad_points >= 2 * 3 * 8


def test_basis_orthonormal():
    spec = gw.GalerkinSpec(6, a=1.7)
    g = gw.quadrature_grid(spec)
    assert np.allclose((g.B * g.w) @ g.B.T, np.eye(6), atol=1e-13)


def test_zero_state_zero_acceleration():
    spec = gw.GalerkinSpec(5)
    assert not np.any(gw.galerkin_rhs(gw.ModeState(np.zeros(5), np.zeros(5)), spec))


def test_linear_rhs_is_diagonal():
    spec = gw.GalerkinSpec.single(5, g=0.0)
    u = np.arange(1.0, 6.0)
    assert np.array_equal(gw.galerkin_rhs(gw.ModeState(u, np.zeros(5)), spec), -spec.mu * u)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_cubic_single_mode_projection(a):
    # <(u e_1)^3, e_1> = u^3 a^-2 int sin^4 = 3 u^3 / (4 a)
    spec = gw.GalerkinSpec(1, a=a)
    u = 0.7
    assert gw.nonlinear_projection(spec, np.array([u]))[0] == pytest.approx(3 * u**3 / (4 * a),
                                                                           rel=1e-13)


def test_underresolved_projection_is_flagged():
    spec = gw.GalerkinSpec(1, quad_points=6)
    with pytest.raises(QuadratureUnderresolved):
        gw.galerkin_rhs(gw.ModeState([1.0], [0.0]), spec, check_resolution=True)


def test_project_and_evaluate_roundtrip():
    spec = gw.GalerkinSpec(5, a=1.3)
    u = np.array([0.5, -0.2, 0.1, 0.0, 0.05])
    coeffs = gw.project_function(spec, lambda x: gw.field(spec, u, x))
    assert np.allclose(coeffs, u, atol=1e-13)


def test_single_mode_harmonic_solution_second_order():
    spec = gw.GalerkinSpec.single(3, g=0.0)
    errs = []
    for dt in (0.01, 0.005):
        tr = gw.integrate_wave(spec, [0.0, 1.0, 0.0], 2.0, dt)
        errs.append(np.max(np.abs(tr.u[:, 1] - np.cos(np.sqrt(spec.mu[1]) * tr.times))))
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_zero_data_stays_zero():
    tr = gw.integrate_wave(gw.GalerkinSpec(4), np.zeros(4), 1.0, 0.01)
    assert not np.any(tr.u) and not np.any(tr.v)


def test_energy_drift_second_order_and_a_priori_bound():
    spec = gw.GalerkinSpec.single(8)

    def U0(x):
        return 1.0 - x**2

    ratio = gw.energy_drift(spec, U0, 2.0, 0.004) / gw.energy_drift(spec, U0, 2.0, 0.002)
    assert 3.2 <= ratio <= 4.8
    ok, _ = gw.a_priori_check(gw.integrate_wave(spec, U0, 2.0, 0.001))
    assert ok


def test_convergence_single_mode_linear_is_exact():
    rep = gw.convergence_study([2, 4, 8], lambda x: np.cos(np.pi * x / 2), 1.0, 1e-3,
                               terms=())
    assert all(r.l2_difference < 1e-12 for r in rep.rows)


def test_convergence_monotone_for_smooth_data():
    rep = gw.convergence_study([8, 16, 32], lambda x: 1.0 - x**2, 1.0, 1e-3)
    assert rep.monotone


def test_gronwall_cases():
    spec = gw.GalerkinSpec.single(8)

    def U0(x):
        return 1.0 - x**2

    zero = gw.gronwall_stability_check(spec, U0, 0.0, 0.5, 1e-3)
    assert zero.exact_uniqueness and zero.passed
    lin = gw.gronwall_stability_check(gw.GalerkinSpec.single(8, g=0.0), U0, 1e-6, 2.0, 1e-3)
    assert lin.M == 0.0 and lin.sup_ratio == pytest.approx(1.0, abs=1e-6)
    cubic = gw.gronwall_stability_check(spec, U0, 1e-6, 5.0, 1e-3)
    assert cubic.passed and cubic.M > 0


@pytest.mark.parametrize("q,k,theta", [(2.0, 2, 0.0), (4.0, 2, 1.0), (3.0, 2, 2.0 / 3.0),
                                       (4.0, 3, 0.75)])
def test_holder_theta(q, k, theta):
    assert gw.holder_theta(q, k) == pytest.approx(theta)


def test_holder_exponent_range():
    with pytest.raises(ValidationError):
        gw.holder_theta(5.0, 2)


def test_holder_constant_field_is_equality():
    spec = gw.GalerkinSpec(4)
    w = gw.quadrature_grid(spec).w
    rep = gw.holder_interpolation_check(np.full((1, w.size), 2.5), w, 3.0, 2)
    assert rep.passed and abs(rep.min_slack) < 1e-13


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 12, elements=st.floats(-5, 5)), st.floats(2.0, 6.0),
       st.integers(2, 3))
def test_holder_inequality_property(coeffs, q, k):
    q = min(q, 2.0 * k)
    spec = gw.GalerkinSpec(12)
    g = gw.quadrature_grid(spec)
    assert gw.holder_interpolation_check(coeffs @ g.B, g.w, q, k).passed


def test_chain_interpolation_reproduces_nodes_and_modes():
    prm = matched_chain_params(1.0, 31)
    from ergokit.chain import continuum_sites
    x = continuum_sites(prm)
    q = np.sin(2 * np.pi * (x + 1) / 2) + 0.3 * np.sin(5 * np.pi * (x + 1) / 2)
    assert np.allclose(gw.chain_field_at(prm, q, x), q, atol=1e-12)
    assert gw.chain_field_at(prm, q, [0.123])[0] == pytest.approx(
        np.sin(np.pi * 1.123) + 0.3 * np.sin(2.5 * np.pi * 1.123), abs=1e-12)


def test_cross_solver_small():
    rep = gw.cross_solver_check(lambda x: (1 - x**2) ** 3, 0.5, 1e-3, n=16, N=128)
    assert rep.passed


def test_csv_writers(tmp_path):
    spec = gw.GalerkinSpec(3)
    tr = gw.integrate_wave(spec, [0.1, 0.0, 0.0], 0.02, 0.01)
    gw.write_modes_csv(tmp_path / "m.csv", tr)
    assert (tmp_path / "m.csv").read_text().splitlines()[0] == "t,u1,u2,u3,energy"
    rep = gw.ConvergenceReport([gw.ConvergenceRow(8, 16, 0.5)], True)
    gw.write_convergence_csv(tmp_path / "c.csv", rep)
    assert (tmp_path / "c.csv").read_text().splitlines()[1] == "8,16,0.5"
