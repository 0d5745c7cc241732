import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cltlab import clt_bounds as cb
from cltlab import distributions as dist
from cltlab.harness.experiments import builtin_specs

S = builtin_specs()


def terms(name, n, beta_sq=4.0, p=2.0):
    return cb.compute_terms(S[name], n, p, beta_sq, n_mc=100_000)


def test_rademacher_n4_terms():
    t = terms("rademacher_1d", 4)
    # D = X' - X in {-2, 0, 2} w.p. 1/4, 1/2, 1/4
    assert t.norm_M3 == 0.0
    assert t.norm_M4 == pytest.approx(0.25)
    assert t.L_p == pytest.approx(2.0)
    assert t.Lprime_4 == pytest.approx(0.125)
    assert t.Ldoubleprime_4_tail(0.0) == pytest.approx(0.5)
    assert t.beta_W == pytest.approx(1.0)
    assert t.Lambda_beta[0, 0] == pytest.approx(0.5)
    assert t.beta_2 == pytest.approx(0.5)
    assert t.exact_pairs


def test_frozen_report_rademacher_64():
    rep = cb.theorem_bound(terms("rademacher_1d", 64), 3.0, 6.0, 0.1)
    assert rep.term_leading == 0.0
    assert rep.term_lattice == pytest.approx(math.sqrt(2) / 4, rel=1e-14)
    assert rep.epsilon == pytest.approx(0.0625, rel=1e-12)
    assert rep.total == pytest.approx(0.695748947795455, rel=1e-10)
    assert rep.diagnostic("epsilon_at_jump")


def test_frozen_report_two_point():
    rep = cb.theorem_bound(terms("two_point_skew", 256, 8.0), 3.0, 6.0, 0.05)
    assert rep.epsilon == pytest.approx(0.0822530739917599, rel=1e-9)
    assert rep.total == pytest.approx(0.692966213813598, rel=1e-9)
    # leading term: (1/6) sqrt(2) |E X^3| / sqrt(n), E X^3 = 1.5 for w = 0.2
    assert rep.term_leading == pytest.approx(math.sqrt(2) * 1.5 / 6 / 16, rel=1e-12)


def test_step_crossing_bracket():
    t = terms("rademacher_1d", 64)
    root = cb.solve_epsilon(t, 3.0, 6.0, 0.1)
    assert root.at_jump
    lo, hi = root.bracket
    assert root.bracket_signs == (-1.0, 1.0)
    assert hi - lo <= 4 * np.spacing(hi)


def test_constant_numerator_closed_form():
    t = terms("rademacher_1d", 4)
    # every difference has |D_W|^2 = 1 >= eps for eps below 1: numerator constant there
    den = t.denominator()
    A = t.Ldoubleprime_4_tail(0.0) + t.norm_M4
    closed = (t.p * A / den) ** (2 / 3)
    assert closed < 1.0
    assert cb.solve_epsilon(t, 3.0, 6.0, 0.0).value == pytest.approx(closed, rel=1e-9)


def test_zero_numerator_degenerate():
    spec = dist.standardize(dist.DistributionSpec.gaussian_mixture([[0.0]], [[[1.0]]], [1.0]))
    t = cb.compute_terms(spec, 10**12, 2.0, 1.0, n_mc=1000)
    t = cb.CltTerms(**{**t.__dict__, "norm_M4": 0.0, "Ldoubleprime_4_tail": lambda e: 0.0})
    root = cb.solve_epsilon(t, 3.0, 6.0, 0.0)
    assert root.value == 0.0 and root.degenerate


def test_corollary_constants():
    assert cb.corollary_constant(S["rademacher_2d"], 2.0) == 0.0
    assert cb.corollary_constant(S["exponential_1d"], 2.0) == pytest.approx(math.sqrt(2) / 3, rel=1e-12)
    assert cb.corollary_constant(S["exponential_2d"], 2.0) == pytest.approx(2 / 3, rel=1e-12)


def test_hypothesis_rejected():
    with pytest.raises(cb.TruncationHypothesisError):
        terms("rademacher_1d", 64, beta_sq=1.0)


def test_unstandardized_rejected():
    with pytest.raises(ValueError):
        cb.compute_terms(dist.DistributionSpec.discrete([0.0, 3.0], [0.5, 0.5]), 4, 2.0, 4.0)


def test_noise_ratio_convention():
    assert cb.noise_ratio_p(1.0, 2.0) == pytest.approx(math.e**2 - 1)
    assert cb.noise_ratio_p(1.0, 3.0) == pytest.approx((math.e**2 - 1) / 2)


def test_conjugates():
    assert cb.conjugate_exponents(2.0, 3.0) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        cb.conjugate_exponents(3.0, 2.0)


def test_total_nonincreasing_in_n():
    totals = []
    for k in range(6, 13):
        n = 2**k
        totals.append(cb.theorem_bound(terms("rademacher_1d", n), 3.0, 6.0, cb.wq_bonis(n, 3.0)).total)
    inversions = [k for k in range(1, len(totals)) if totals[k] > totals[k - 1]]
    assert all(2 ** (6 + k) <= 256 for k in inversions) and len(inversions) <= 1


def test_lattice_term_schedule():
    vals = []
    for n in (64, 256, 1024, 4096):
        t = terms("exponential_1d", n, beta_sq=n**-0.5)
        vals.append(math.sqrt(n) * cb.theorem_bound(t, 3.0, 6.0, 0.1).term_lattice)
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.2


def test_psi1_small_time():
    t = terms("rademacher_1d", 64)
    vals = [cb.psi1(s, t) * math.sqrt(s) for s in np.geomspace(1e-8, 0.1, 20)]
    assert max(vals) < 10.0


def test_psi2_domain():
    t = terms("rademacher_1d", 64)
    with pytest.raises(ValueError):
        cb.psi2(1e-6, t)


@given(st.sampled_from(["rademacher_1d", "two_point_skew", "rademacher_2d"]),
       st.sampled_from([16, 64, 256, 1024]), st.floats(0.0, 1.0))
def test_epsilon_root_property(name, n, wq):
    t = terms(name, n, beta_sq=8.0)
    root = cb.solve_epsilon(t, 3.0, 6.0, wq)
    tol = 1e-10 * (1 + root.rhs0)
    if root.at_jump:
        assert root.bracket_signs == (-1.0, 1.0)
        assert root.bracket[1] - root.bracket[0] <= 4 * np.spacing(root.bracket[1])
    else:
        assert abs(root.residual) < tol


@given(st.sampled_from([16, 64, 256]), st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_epsilon_monotone_in_wq(n, a, b):
    t = terms("two_point_skew", n, beta_sq=8.0)
    lo, hi = sorted((a, b))
    assert cb.solve_epsilon(t, 3.0, 6.0, lo).value <= cb.solve_epsilon(t, 3.0, 6.0, hi).value + 1e-12


@given(st.floats(0.5, 4.0))
def test_total_increasing_in_C(C):
    t = terms("two_point_skew", 64, beta_sq=8.0)
    a = cb.theorem_bound(t, 3.0, 6.0, 0.1, C=C).total
    b = cb.theorem_bound(t, 3.0, 6.0, 0.1, C=C * 1.5).total
    assert b >= a
