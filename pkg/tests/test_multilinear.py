import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cltlab import multilinear as ml

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def vec(d):
    return arrays(float, d, elements=finite)


# -- contract examples -----------------------------------------------------------------

def test_outer_power_basis():
    np.testing.assert_array_equal(ml.outer_power([1.0, 0.0], 2), [[1, 0], [0, 0]])


def test_outer_power_order_zero():
    assert float(ml.outer_power([0.3, 2.0], 0)) == 1.0


def test_outer_power_entries():
    T = ml.outer_power([1.0, 2.0], 3)
    assert T[1, 1, 0] == 4.0
    assert T[1, 1, 1] == 8.0


def test_hs_dot_examples():
    assert ml.hs_dot(np.eye(3), np.eye(3)) == pytest.approx(3.0)
    a = np.zeros((2, 2)); a[0, 0] = 1.0
    b = np.zeros((2, 2)); b[1, 1] = 5.0
    assert ml.hs_dot(a, b) == 0.0


def test_contract_examples():
    y = np.array([0.5, -2.0])
    np.testing.assert_allclose(ml.contract(np.eye(2), y), y)
    M = np.zeros((2, 2, 2)); M[0, 0, 0] = 1.0
    np.testing.assert_allclose(ml.contract(M, ml.hermite_tensor([1.0, 1.0], 2)), [0.0, 0.0])
    a, b, c, e = 0.3, -1.0, 2.5, 4.0
    np.testing.assert_allclose(ml.contract(np.ones((2, 2, 2)), np.array([[a, b], [c, e]])),
                               [a + b + c + e] * 2)


def test_hermite_low_orders():
    x = np.array([0.7, -1.3, 2.0])
    np.testing.assert_allclose(ml.hermite_tensor(x, 1), -x)
    np.testing.assert_allclose(ml.hermite_tensor(x, 2), np.outer(x, x) - np.eye(3))


def test_hermite_scalar_order_three():
    assert float(ml.hermite_tensor([2.0], 3).ravel()[0]) == pytest.approx(-2.0)


def test_pnorm_examples():
    assert ml.contracted_hermite_pnorm(np.zeros((2, 2, 2)), 2, 3.0, n_mc=1000).value == 0.0
    est = ml.contracted_hermite_pnorm(np.full((1, 1, 1), 0.7), 2, 2.0)
    assert est.exact == pytest.approx(0.7 * math.sqrt(2.0), rel=1e-14)


def test_caps():
    with pytest.raises(ValueError):
        ml.outer_power(np.ones(17), 2)
    with pytest.raises(ValueError):
        ml.outer_power(np.ones(2), 7)


# -- properties ------------------------------------------------------------------------

@given(st.integers(1, 3).flatmap(lambda d: st.tuples(vec(d), vec(d))), st.integers(0, 4))
def test_hs_of_outer_powers(xy, k):
    x, y = xy
    assert ml.hs_dot(ml.outer_power(x, k), ml.outer_power(y, k)) == pytest.approx(
        float(x @ y) ** k, rel=1e-9, abs=1e-9)


@given(st.integers(1, 3).flatmap(vec), st.integers(0, 4))
def test_outer_power_symmetric(x, k):
    T = ml.outer_power(x, k)
    for perm in itertools.permutations(range(k)):
        np.testing.assert_allclose(T, np.transpose(T, perm), rtol=1e-14, atol=0)


@given(st.integers(1, 3).flatmap(vec), st.integers(1, 4))
def test_hermite_recurrence(x, k):
    # H_{k+1}(x) = -x ⊗ H_k(x) + grad H_k(x), gradient by central differences
    d, h = x.size, 1e-5
    grad = np.stack([(ml.hermite_tensor(x + h * e, k) - ml.hermite_tensor(x - h * e, k)) / (2 * h)
                     for e in np.eye(d)], axis=0)
    Hk = ml.hermite_tensor(x, k)
    expected = -np.multiply.outer(x, Hk) + grad
    np.testing.assert_allclose(ml.hermite_tensor(x, k + 1), expected, atol=1e-5 * (1 + np.abs(x).max()) ** (k + 1))


@given(st.integers(1, 3).flatmap(vec), st.integers(1, 5))
def test_hermite_symmetric(x, k):
    H = ml.hermite_tensor(x, k)
    for perm in itertools.permutations(range(k)):
        np.testing.assert_allclose(H, np.transpose(H, perm), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("d,k", [(1, 3), (2, 2), (3, 1)])
def test_hermite_zero_mean(d, k):
    rng = np.random.default_rng(1)
    Z = rng.standard_normal((200_000, d))
    mean = ml.hermite_tensor_batch(Z, k).mean(axis=0)
    assert np.abs(mean).max() < 5.0 * math.sqrt(math.factorial(k) * 3**k / 200_000)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_p2_closed_form_against_mc(d):
    rng = np.random.default_rng(d)
    M = rng.normal(size=(d, d, d))
    M = (M + M.transpose(0, 2, 1)) / 2
    est = ml.contracted_hermite_pnorm(M, 2, 2.0, n_mc=1 << 18, seed=3)
    assert est.exact == pytest.approx(math.sqrt(2) * ml.hs_norm(M), rel=1e-12)
    assert abs(est.value - est.exact) < 4 * est.std_error + 1e-3 * est.exact
