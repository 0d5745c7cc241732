import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cltlab import distributions as dist
from cltlab import interpolation as ip
from cltlab import wasserstein as ws
from cltlab.harness.experiments import builtin_specs

PM1 = (np.array([-1.0, 1.0]), np.array([0.5, 0.5]))
DELTA0 = (np.zeros((1, 1)), np.ones(1))


def test_symmetric_score_zero_at_origin():
    assert float(ip.score_mixture(PM1, 0.5, [0.0])[0]) == pytest.approx(0.0, abs=1e-15)


def test_large_time_vanishes():
    x = np.linspace(-3, 3, 13)[:, None]
    assert np.abs(ip.score_mixture(PM1, 40.0, x)).max() < 1e-10


def test_point_mass_closed_form():
    for t in (0.05, 0.3, 1.0, 2.5):
        exact = math.exp(-2 * t) / math.sqrt(-math.expm1(-2 * t))
        assert ip.score_pnorm_quadrature(DELTA0, t, 2.0) == pytest.approx(exact, rel=1e-10)
        est = ip.score_pnorm(DELTA0, t, 2.0, m=50_000, seed=1)
        assert abs(est.value - exact) < 3 * est.std_error + 1e-12


@pytest.mark.parametrize("d", [1, 2, 3])
def test_point_mass_integral(d):
    si = ip.score_integral((np.zeros((1, d)), np.ones(1)), 2.0)
    assert si.value == pytest.approx(math.sqrt(d), abs=1e-6)
    assert not si.flagged


@given(st.floats(0.05, 3.0), st.lists(st.floats(-4, 4), min_size=1, max_size=5))
def test_identity_two_routes(t, xs):
    law = builtin_specs()["two_point_skew"]
    x = np.array(xs)[:, None]
    a = ip.score_mixture(law, t, x)
    b = ip.score_via_conditional(law, t, x)
    np.testing.assert_allclose(a, b, atol=1e-8 * (1 + np.abs(a).max()))


@given(st.floats(0.05, 3.0))
def test_identity_2d(t):
    law = builtin_specs()["discrete_corr_2d"]
    x = np.random.default_rng(0).normal(size=(7, 2)) * 2
    np.testing.assert_allclose(ip.score_mixture(law, t, x), ip.score_via_conditional(law, t, x), atol=1e-8)


@given(st.floats(0.05, 3.0), st.floats(-3, 3))
def test_gaussian_mixture_score_is_zero_for_gamma(t, x):
    spec = builtin_specs()["gaussian_2d"]
    np.testing.assert_allclose(ip.score_gaussian_mixture(spec, t, np.array([[x, -x]])), 0.0, atol=1e-12)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_domination_two_atoms(p):
    law = dist.convolve_power(dist.Discrete1D(PM1[0], PM1[1]), 4)
    si = ip.score_integral(law, p)
    assert ws.wp_quantile_exact(law, p) <= si.value + si.error_budget


def test_trivial_bound_dominates():
    law = builtin_specs()["two_point_skew"]
    for t in (0.05, 0.5, 2.0):
        assert ip.score_pnorm_quadrature(law, t, 2.0) <= ip.trivial_bound(law, t, 2.0) + 1e-9


def test_far_field_warning():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ip.score_mixture(PM1, 0.01, [50.0])
    assert any(issubclass(w.category, ip.FarFieldWarning) for w in caught)


def test_ft_sample_large_time():
    F = ip.ft_sample(builtin_specs()["exponential_2d"], 4, 40.0, 20_000, seed=2)
    assert np.abs(F.mean(axis=0)).max() < 0.05
    np.testing.assert_allclose(np.cov(F.T), np.eye(2), atol=0.05)


def test_sum_law_product():
    atoms, weights = ip.sum_law(builtin_specs()["rademacher_2d"], 2)
    assert atoms.shape == (9, 2)
    assert weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose((weights[:, None] * atoms**2).sum(axis=0), 1.0)


def test_discretized_continuous_law():
    spec = builtin_specs()["exponential_1d"]
    ppf, isf = ws.sum_law_quantiles(spec, 64)
    law, err = ip.discretize_quantiles(ppf, isf, 2.0, atoms=256)
    exact = ws.wp_quantile_continuous(ppf, isf, 2.0)
    assert abs(ws.wp_quantile_exact(law, 2.0) - exact) <= err + 1e-9
