import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import binom

from cltlab import distributions as dist
from cltlab.distributions import DistributionSpec

RAD = dist.standardize(DistributionSpec.product("rademacher", 1))
RAD2 = dist.standardize(DistributionSpec.product("rademacher", 2))
EXP = dist.standardize(DistributionSpec.product("standardized_exponential", 1))


def test_standardize_two_atoms():
    spec = dist.standardize(DistributionSpec.discrete([0.0, 1.0], [0.5, 0.5]))
    atoms, weights = dist.as_discrete(spec)
    np.testing.assert_allclose(np.sort(atoms.ravel()), [-1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(weights, [0.5, 0.5])


def test_standardize_idempotent_and_correlated():
    spec = dist.standardize(DistributionSpec.discrete([[0, 0], [1, 0.5], [2, 3], [-1, 1]], [0.4, 0.3, 0.2, 0.1]))
    np.testing.assert_allclose(dist.covariance(spec), np.eye(2), atol=1e-9)
    np.testing.assert_allclose(dist.mean(spec), 0.0, atol=1e-9)
    again = dist.standardize(spec)
    np.testing.assert_allclose(dist.as_discrete(again)[0], dist.as_discrete(spec)[0], atol=1e-9)


def test_point_mass_sample():
    np.testing.assert_array_equal(dist.sample(DistributionSpec.point_mass(0.0), 3, seed=0), np.zeros((3, 1)))


def test_sample_deterministic():
    a = dist.sample(EXP, 100, 5)
    b = dist.sample(EXP, 100, 5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, dist.sample(EXP, 100, 6))


def test_moment_tensors():
    for spec in (RAD, RAD2, EXP):
        np.testing.assert_allclose(dist.moment_tensor(spec, 2), np.eye(spec.dim), atol=1e-12)
    np.testing.assert_allclose(dist.moment_tensor(RAD2, 3), 0.0, atol=1e-15)
    assert float(dist.moment_tensor(EXP, 3).ravel()[0]) == pytest.approx(2.0, rel=1e-12)


def test_difference_second_moment():
    assert float(dist.difference_second_moment(RAD, 4.0)[0, 0]) == pytest.approx(2.0)
    assert float(dist.difference_second_moment(RAD, 1.0)[0, 0]) == 0.0
    np.testing.assert_allclose(dist.difference_second_moment(RAD2, 4.0), np.eye(2), atol=1e-12)


def test_difference_abs_moment():
    assert dist.difference_abs_moment(RAD, 2.0) == pytest.approx(2.0)
    assert dist.difference_abs_moment(RAD, 4.0, threshold_sq=5.0) == 0.0
    pairs = dist.pair_sample(EXP, 200_000, seed=1)
    assert pairs.abs_moment(2.0) == pytest.approx(2.0, rel=0.03)


def test_convolve_power_examples():
    law = dist.Discrete1D.from_spec(RAD)
    two = dist.convolve_power(law, 2)
    np.testing.assert_allclose(two.atoms, [-math.sqrt(2), 0.0, math.sqrt(2)], atol=1e-12)
    np.testing.assert_allclose(two.weights, [0.25, 0.5, 0.25], atol=1e-14)
    assert dist.convolve_power(law, 1) is law
    ten = dist.convolve_power(law, 10)
    assert ten.atoms.size == 11
    np.testing.assert_allclose(ten.weights, binom.pmf(np.arange(11), 10, 0.5), atol=1e-14)
    np.testing.assert_allclose(np.diff(ten.atoms), 2 / math.sqrt(10), rtol=1e-10)


def test_weights_validated():
    with pytest.raises(ValueError):
        DistributionSpec.discrete([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        dist.Discrete1D([0.0, 1.0], [0.2, 0.7])


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=2, max_size=6, unique=True),
       st.integers(2, 12))
def test_convolution_preserves_moments(atoms, n):
    atoms = sorted(atoms)
    if min(np.diff(atoms)) < 1e-3:
        return
    w = np.full(len(atoms), 1.0 / len(atoms))
    law = dist.Discrete1D(np.array(atoms), w)
    mu, var = law.mean(), law.variance()
    out = dist.convolve_power(law, n)
    assert out.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert out.mean() == pytest.approx(math.sqrt(n) * mu, abs=1e-8 * (1 + abs(mu) * n))
    assert out.variance() == pytest.approx(var, rel=1e-8, abs=1e-10)


@given(st.floats(0.05, 0.95), st.floats(-3, 3), st.floats(0.1, 4))
def test_standardize_two_point(w, a, gap):
    spec = dist.standardize(DistributionSpec.discrete([a, a + gap], [w, 1 - w]))
    assert float(dist.mean(spec)[0]) == pytest.approx(0.0, abs=1e-9)
    assert float(dist.covariance(spec)[0, 0]) == pytest.approx(1.0, rel=1e-9)


@given(st.floats(0.1, 20.0), st.floats(0.1, 20.0))
def test_tail_monotone(t1, t2):
    pairs = dist.pair_sample(RAD2)
    lo, hi = sorted((t1, t2))
    assert pairs.abs_moment(4.0, hi) <= pairs.abs_moment(4.0, lo) + 1e-15
