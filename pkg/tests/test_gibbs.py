import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergokit import gibbs as gm
from ergokit.chain import ChainParams
from ergokit.exceptions import NotCoerciveError, ValidationError
from ergokit.observables import ObservableSpec
from ergokit.stats import series_estimate

# E[q^2] for exp(-(q^2/2 + q^4/4)) and for the N=2 chain [[2,-1],[-1,2]] with
# the same quartic term, from 30-digit mpmath quadrature.
QUARTIC_N1_Q2 = 0.46791991697366518864
QUARTIC_N2_Q1SQ = 0.380133710158266


def _quartic(n, beta=1.0):
    A = gm.StiffnessMatrix(np.array([[1.0]])) if n == 1 else gm.StiffnessMatrix.dirichlet_1d(n)
    return gm.GibbsSpec(A, gm.PotentialSpec.polynomial_even(1.0, 2), beta, 1.0)


def test_stiffness_constructors():
    A = gm.StiffnessMatrix.dirichlet_1d(3, h=0.5)
    assert np.allclose(A.entries, np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]]) / 0.25)
    assert gm.StiffnessMatrix.dirichlet_2d(3, 2).dim == 6
    B = gm.StiffnessMatrix.biharmonic_1d(4)
    assert np.allclose(B.entries, gm.StiffnessMatrix.dirichlet_1d(4).entries @
                       gm.StiffnessMatrix.dirichlet_1d(4).entries)
    with pytest.raises(ValidationError):
        gm.StiffnessMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_chain_stiffness_matches_chain_params():
    prm = ChainParams(N=5, a=2.0)
    assert np.allclose(gm.StiffnessMatrix.chain(5, prm.dx).entries, prm.stiffness())


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(1, 6))
def test_coercivity_homogeneity(c, n):
    A = gm.StiffnessMatrix.dirichlet_1d(n)
    c0 = gm.coercivity_constant(A)
    assert c0 > 0
    assert gm.coercivity_constant(A * c) == pytest.approx(c * c0, rel=1e-12)


def test_not_coercive():
    with pytest.raises(NotCoerciveError):
        gm.coercivity_constant(gm.StiffnessMatrix(np.diag([1.0, 0.0])))


def test_potential_derivatives_match_finite_differences():
    for pot in (gm.PotentialSpec.polynomial([0.0, 0.3, -0.2, 0.5, 0.25]),
                gm.PotentialSpec.sine(0.7, 1.3), gm.PotentialSpec.linear(0.4)):
        z, h = np.linspace(-1.5, 1.5, 7), 1e-5
        for order in (1, 2, 3):
            fd = (pot.derivative(z + h, order - 1) - pot.derivative(z - h, order - 1)) / (2 * h)
            assert np.allclose(pot.derivative(z, order), fd, atol=1e-6)


def test_spec_json_roundtrip():
    spec = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(3), gm.PotentialSpec.sine(1.0, 2.0), 2.0)
    back = gm.GibbsSpec.from_json(spec.to_json())
    assert np.array_equal(back.A.entries, spec.A.entries)
    assert back.potential == spec.potential and back.beta == 2.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_detailed_balance(seed):
    rng = np.random.default_rng(seed)
    spec = _quartic(3, beta=1.5)
    x = rng.standard_normal(3)
    y = x.copy()
    y[rng.integers(3)] += rng.normal()
    fwd = math.exp(gm.log_density(spec, x)) * gm.metropolis_transition_density(spec, x, y, 0.6)
    bwd = math.exp(gm.log_density(spec, y)) * gm.metropolis_transition_density(spec, y, x, 0.6)
    assert fwd == pytest.approx(bwd, rel=1e-12)


def test_transition_density_needs_single_site_move():
    spec = _quartic(2)
    with pytest.raises(ValidationError):
        gm.metropolis_transition_density(spec, np.zeros(2), np.ones(2), 0.5)


def test_mcmc_is_deterministic_and_stream_separated():
    spec = _quartic(2)
    cfg = gm.MCMCConfig(500, burn_in=100, seed=3)
    a, b = gm.mcmc_sample(spec, cfg), gm.mcmc_sample(spec, cfg)
    assert np.array_equal(a.samples, b.samples)
    c = gm.mcmc_sample(spec, cfg, chain_index=1)
    assert not np.array_equal(a.samples, c.samples)


def test_gaussian_covariance_n2():
    spec = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(2), beta=1.0)
    assert spec.covariance()[0, 0] == pytest.approx(2.0 / 3.0)
    batch = gm.mcmc_sample(spec, gm.MCMCConfig(200000, burn_in=2000, seed=1))
    assert 0.2 < batch.acceptance_rate < 0.6
    for (i, j) in ((0, 0), (0, 1), (1, 1)):
        est = series_estimate(batch.samples[:, i] * batch.samples[:, j])
        assert est.z(spec.covariance()[i, j]) <= 3.0


def test_quadrature_oracle_matches_high_precision():
    F = ObservableSpec.site_square(1)
    assert gm.quadrature_expectation(_quartic(1), F) == pytest.approx(QUARTIC_N1_Q2, rel=1e-9)
    assert gm.quadrature_expectation(_quartic(2), F) == pytest.approx(QUARTIC_N2_Q1SQ, rel=1e-7)


def test_quadrature_rejects_large_dimension():
    with pytest.raises(ValidationError):
        gm.quadrature_expectation(_quartic(3), ObservableSpec.site_square(1))


@pytest.mark.parametrize("n", [1, 2])
def test_mcmc_agrees_with_quadrature(n):
    F = ObservableSpec.site_square(1)
    spec = _quartic(n)
    mc = gm.expectation(spec, F, gm.MCMCConfig(200000, burn_in=2000, seed=10 + n))
    q = gm.expectation(spec, F, None, method="quadrature")
    assert mc.z(q.mean) <= 3.0
    assert q.method == "quadrature" and mc.method == "mcmc"


def test_reweighting_factor_in_unit_interval():
    spec = _quartic(4)
    samples = np.random.default_rng(0).standard_normal((1000, 4)) * 1.5
    w = gm.reweighting_factor(spec, samples)
    assert np.all((w > 0) & (w <= 1))


def test_lipschitz_linear_mean_weight():
    spec = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(3), gm.PotentialSpec.linear(0.8), 1.0)
    rep = gm.lipschitz_weight_check(spec, gm.MCMCConfig(200000, seed=4))
    ones = np.ones(3)
    s = 0.5 * 0.8
    assert rep.exact_mean_weight == pytest.approx(math.exp(0.5 * s * s * ones @ spec.covariance() @ ones))
    assert rep.weight_in_bounds == 1.0
    assert rep.gaussian_mean_weight.z(rep.exact_mean_weight) <= 3.0
    assert rep.exact_mean_weight <= rep.analytic_bound


def test_lipschitz_bound_dominates_sine_weight():
    spec = gm.GibbsSpec(gm.StiffnessMatrix.dirichlet_1d(3), gm.PotentialSpec.sine(1.0, 2.0), 1.0)
    rep = gm.lipschitz_weight_check(spec, gm.MCMCConfig(100000, seed=5))
    assert rep.gaussian_mean_weight.mean <= rep.analytic_bound


def test_chain_initial_conditions_shapes():
    prm = ChainParams(N=6, g=1.0, k=2)
    q, p = gm.chain_initial_conditions(prm, 10, seed=2, thinning=20, burn_in=200)
    assert q.shape == (10, 6) and p.shape == (10, 6)


def test_samples_csv(tmp_path):
    gm.write_samples_csv(tmp_path / "s.csv", np.array([[0.1, 0.2], [0.3, 0.4]]))
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 3
