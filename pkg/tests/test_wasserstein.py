import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cltlab import distributions as dist
from cltlab import wasserstein as ws
from cltlab.harness.experiments import builtin_specs

POINT = dist.Discrete1D(np.zeros(1), np.ones(1))
PM1 = dist.Discrete1D(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))


def test_point_mass_exact():
    assert ws.wp_quantile_exact(POINT, 2.0) == pytest.approx(1.0, abs=1e-12)
    # E|Z|^3 = 2 sqrt(2/pi)
    assert ws.wp_quantile_exact(POINT, 3.0) == pytest.approx((2 * math.sqrt(2 / math.pi)) ** (1 / 3), abs=1e-10)
    assert ws.wp_quantile_exact(POINT, 3.0) == pytest.approx(1.16857525, abs=1e-8)


def test_rademacher_exact():
    # sign coupling: E[(|Z| - 1)^2] = 2 - 2 sqrt(2/pi)
    expected = math.sqrt(2 - 2 * math.sqrt(2 / math.pi))
    assert ws.wp_quantile_exact(PM1, 2.0) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.6357915369, abs=1e-10)


def test_exact_rate_plateau():
    law = dist.Discrete1D.from_spec(builtin_specs()["rademacher_1d"])
    vals = [math.sqrt(n) * ws.wp_quantile_exact(dist.convolve_power(law, n), 2.0) for n in (256, 1024, 4096, 16384)]
    # lattice plateau sqrt(1/3) for span 2
    assert abs(vals[-1] - math.sqrt(1 / 3)) < 0.03 * math.sqrt(1 / 3)
    assert max(vals) - min(vals) < 1e-3


def test_continuous_route_exponential():
    spec = builtin_specs()["exponential_1d"]
    ppf, isf = ws.sum_law_quantiles(spec, 4096)
    val = math.sqrt(4096) * ws.wp_quantile_continuous(ppf, isf, 2.0)
    assert val == pytest.approx(math.sqrt(2) / 3, rel=0.01)


def test_assignment_examples():
    X = np.random.default_rng(0).normal(size=(5, 2))
    assert ws.wp_assignment(X, X[::-1], 2.0) == pytest.approx(0.0, abs=1e-12)
    assert ws.wp_assignment(np.array([[0.0], [2.0]]), np.array([[1.0], [3.0]]), 2.0) == pytest.approx(1.0)
    assert ws.wp_sorted([0.0, 2.0], [3.0, 1.0], 2.0) == pytest.approx(1.0)


def test_brute_force_720():
    rng = np.random.default_rng(7)
    X, Y = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
    for p in (1.0, 2.0, 3.0):
        C = ws.cost_matrix(X, Y, p)
        best = min(sum(C[i, s[i]] for i in range(6)) for s in itertools.permutations(range(6)))
        assert ws.wp_assignment(X, Y, p) == pytest.approx((best / 6) ** (1 / p), abs=1e-9)


@given(arrays(float, (5, 1), elements=st.floats(-4, 4)), arrays(float, (5, 1), elements=st.floats(-4, 4)),
       st.sampled_from([1.0, 2.0, 3.0]))
def test_sorted_matches_assignment_1d(X, Y, p):
    assert ws.wp_sorted(X.ravel(), Y.ravel(), p) == pytest.approx(ws.wp_assignment(X, Y, p), abs=1e-9)


@given(arrays(float, (4, 2), elements=st.floats(-4, 4)), arrays(float, (4, 2), elements=st.floats(-4, 4)),
       arrays(float, (4, 2), elements=st.floats(-4, 4)))
def test_triangle_inequality(X, Y, Zc):
    p = 2.0
    assert ws.wp_assignment(X, Zc, p) <= ws.wp_assignment(X, Y, p) + ws.wp_assignment(Y, Zc, p) + 1e-9


@given(st.floats(2.0, 4.0))
def test_monotone_in_p(p):
    law = dist.convolve_power(PM1, 3)
    assert ws.wp_quantile_exact(law, 2.0) <= ws.wp_quantile_exact(law, p) + 1e-10


def test_plan_is_permutation():
    rng = np.random.default_rng(3)
    X, Y = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    plan = ws.optimal_plan(X, Y, 2.0)
    np.testing.assert_array_equal(np.sort(plan), np.arange(8))
    assert ws.plan_cost(X, Y, plan, 2.0) == pytest.approx(ws.wp_assignment(X, Y, 2.0))


def test_two_sample_deterministic_and_bias():
    spec = builtin_specs()["gaussian_2d"]
    a = ws.wp_two_sample(spec, 4, 2.0, m=128, reps=4, seed=1)
    b = ws.wp_two_sample(spec, 4, 2.0, m=128, reps=4, seed=1)
    assert a.value == b.value
    big = ws.wp_two_sample(spec, 4, 2.0, m=1024, reps=4, seed=1)
    assert 0 < big.value < a.value


def test_two_sample_rejects_large_cloud():
    with pytest.raises(ValueError):
        ws.wp_two_sample(builtin_specs()["rademacher_1d"], 4, 2.0, m=ws.MAX_CLOUD + 1)


def test_pair_bound_decreasing():
    spec = builtin_specs()["rademacher_1d"]
    vals = [ws.wp_pair_bound_for_theorem(spec, n, 3.0, m=512, reps=8, seed=0) for n in (4, 64)]
    assert 0 < vals[1] < vals[0]
