"""Property suite: every module invariant as a machine-readable pass/fail entry."""

from __future__ import annotations

import itertools
import json
import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .. import _rng
from .. import clt_bounds as cb
from .. import distributions as dist
from .. import interpolation as ip
from .. import multilinear as ml
from .. import wasserstein as ws
from .experiments import builtin_specs, run_rate_experiment
from .records import records_csv

ROSENTHAL_BUDGET = 10.0
PSI_RATIO_BUDGET = 50.0


@dataclass
class Check:
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        d = asdict(self)
        for k in ("value", "threshold"):
            if isinstance(d[k], float) and not math.isfinite(d[k]):
                d[k] = repr(d[k])
        return json.dumps(d, sort_keys=False)


def _check(name: str, fn: Callable[[], tuple], registry: list) -> Check:
    t0 = time.perf_counter()
    try:
        passed, value, threshold, detail = fn()
        c = Check(name, bool(passed), None if value is None else float(value),
                  None if threshold is None else float(threshold), detail)
    except Exception as exc:  # a crash is a failure entry, not an abort
        c = Check(name, False, detail=f"{type(exc).__name__}: {exc}")
    c.seconds = round(time.perf_counter() - t0, 3)
    registry.append(c)
    return c


def _std() -> dict[str, dist.DistributionSpec]:
    return builtin_specs()


# -- multilinear --------------------------------------------------------------------

def hermite_checks(seed: int = 0, n_mc: int = 10**6) -> list[Check]:
    """Hermite and Gaussian-moment properties (also the mutation-test target)."""
    out: list[Check] = []
    rng = _rng.generator(seed, 101)

    def closed_forms():
        x = rng.normal(size=3)
        err = max(np.max(np.abs(ml.hermite_tensor(x, 1) + x)),
                  np.max(np.abs(ml.hermite_tensor(x, 2) - (np.outer(x, x) - np.eye(3)))),
                  abs(float(ml.hermite_tensor([2.0], 3).ravel()[0]) + 2.0))
        return err < 1e-12, err, 1e-12, "H_1 = -x, H_2 = xx^T - I, d=1 H_3(2) = -2"

    def recurrence():
        h = 1e-5
        worst = 0.0
        for d in (1, 2, 3):
            for k in range(0, 5):
                x = rng.normal(size=d)
                grad = np.stack([(ml.hermite_tensor(x + h * e, k) - ml.hermite_tensor(x - h * e, k)) / (2 * h)
                                 for e in np.eye(d)], axis=-1)
                rec = -np.multiply.outer(ml.hermite_tensor(x, k), x) + grad
                # the new index is last in both terms; H_{k+1} is symmetric so the order is immaterial
                worst = max(worst, float(np.max(np.abs(rec - ml.hermite_tensor(x, k + 1)))))
        return worst < 1e-6, worst, 1e-6, "H_{k+1} = -x (x) H_k + grad H_k, k<=4, d<=3"

    def zero_mean():
        d = 2
        worst = 0.0
        for k in (1, 2, 3, 4):
            s = np.zeros((d,) * k)
            s2 = np.zeros((d,) * k)
            for r, size in _rng.blocks(seed, n_mc, 102, k):
                H = ml.hermite_tensor_batch(r.standard_normal((size, d)), k)
                s += H.sum(axis=0)
                s2 += (H * H).sum(axis=0)
            mean = s / n_mc
            se = np.sqrt(np.maximum(s2 / n_mc - mean**2, 1e-300) / n_mc)
            worst = max(worst, float(np.max(np.abs(mean) / se)))
        return worst < 4.0, worst, 4.0, "max |mean|/SE of H_k(Z) entries, k=1..4, 10^6 draws"

    def closed_norm():
        A = rng.normal(size=(3, 3, 3))
        M = sum(np.transpose(A, (0,) + pr) for pr in itertools.permutations((1, 2))) / 2.0
        est = ml.contracted_hermite_pnorm(M, 2, 2.0, n_mc=n_mc, seed=seed)
        rel = abs(est.value - est.exact) / est.exact
        return rel < 0.01, rel, 0.01, f"MC {est.value:.5f} vs sqrt(2)||M|| = {est.exact:.5f}"

    def hypercontractivity():
        worst = 0.0
        for k in (1, 2, 3):
            for p in (2.0, 3.0, 4.0):
                M = rng.normal(size=(2,) * (k + 1))
                est = ml.contracted_hermite_pnorm(M, k, p, n_mc=n_mc // 4, seed=seed + k)
                rel_se = 2.0 * est.std_error / est.value if est.value > 0 else 0.0
                bound = (p - 1.0) ** k * math.factorial(k) * ml.hs_norm(M) ** 2
                worst = max(worst, est.value**2 / (bound * (1.0 + 3.0 * rel_se)))
        return worst <= 1.0, worst, 1.0, "max ||M H_k(Z)||_p^2 / ((p-1)^k k! ||M||^2 (1 + 3 rel SE))"

    def regression_identity():
        alpha = 0.6
        c = math.sqrt(1.0 - alpha**2)
        d = 2
        acc = acc2 = 0.0
        for r, size in _rng.blocks(seed, n_mc, 103):
            Y = r.standard_normal((size, d))
            Z = r.standard_normal((size, d))
            V = alpha * Y + c * Z
            resid = (ml.hermite_tensor_batch(Z, 2) - (1.0 - alpha**2) * ml.hermite_tensor_batch(V, 2)).reshape(size, -1)
            g = np.concatenate([np.ones((size, 1)), V, V * V], axis=1)
            prod = (resid[:, :, None] * g[:, None, :]).reshape(size, -1)
            acc = acc + prod.sum(axis=0)
            acc2 = acc2 + (prod * prod).sum(axis=0)
        mean = acc / n_mc
        se = np.sqrt((acc2 / n_mc - mean**2) / n_mc)
        worst = float(np.max(np.abs(mean) / se))
        return worst < 4.0, worst, 4.0, "max |mean|/SE of (H_2(Z) - (1-a^2) H_2(V)) g(V), g in {1, V, V^2}"

    def outer_norm():
        worst = 0.0
        for k in range(6):
            x = rng.normal(size=3)
            worst = max(worst, abs(ml.hs_norm(ml.outer_power(x, k)) - np.linalg.norm(x) ** k)
                        / max(1.0, np.linalg.norm(x) ** k))
        return worst < 1e-12, worst, 1e-12, "||x^(k)|| = ||x||^k, k<=5"

    _check("multilinear.outer_power_norm", outer_norm, out)
    _check("multilinear.hermite_closed_forms", closed_forms, out)
    _check("multilinear.hermite_recurrence", recurrence, out)
    _check("multilinear.hermite_zero_mean", zero_mean, out)
    _check("multilinear.hermite_pnorm_closed_form", closed_norm, out)
    _check("multilinear.hypercontractivity_bound", hypercontractivity, out)
    _check("multilinear.gaussian_regression_identity", regression_identity, out)
    return out


# -- distributions ------------------------------------------------------------------

def distribution_checks(seed: int = 0) -> list[Check]:
    out: list[Check] = []
    specs = _std()

    def standardized():
        worst = 0.0
        for s in specs.values():
            worst = max(worst, float(np.max(np.abs(dist.mean(s)))),
                        float(np.max(np.abs(dist.covariance(s) - np.eye(s.dim)))))
        return worst < 1e-9, worst, 1e-9, "exact mean and covariance of every standardized built-in"

    def idempotent():
        worst = 0.0
        for s in specs.values():
            t = dist.standardize(s)
            for q in (1, 2, 3):
                worst = max(worst, float(np.max(np.abs(dist.moment_tensor(t, q) - dist.moment_tensor(s, q)))))
        return worst < 1e-9, worst, 1e-9, "standardize twice = once (moments to order 3)"

    def symmetric():
        worst = 0.0
        for s in specs.values():
            for q in (3, 4):
                T = dist.moment_tensor(s, q)
                for pr in itertools.permutations(range(q)):
                    worst = max(worst, float(np.max(np.abs(T - np.transpose(T, pr)))))
        return worst < 1e-12, worst, 1e-12, "moment tensors invariant under index permutations"

    def convolution():
        worst = 0.0
        for name in ("rademacher_1d", "two_point_skew"):
            base = dist.Discrete1D.from_spec(specs[name])
            for n in (1, 7, 64, 1000):
                law = dist.convolve_power(base, n)
                worst = max(worst, abs(law.mean()), abs(law.variance() - 1.0), abs(law.weights.sum() - 1.0))
        return worst < 1e-10, worst, 1e-10, "S_n law: mean 0, variance 1, mass 1"

    def split():
        worst = 0.0
        s = specs["discrete_corr_2d"]
        for q in (0.0, 1.0, 2.0, 3.5):
            full = dist.difference_abs_moment(s, q)
            for t in (0.0, 0.5, 1.0, 2.0, 5.0, 100.0):
                parts = (dist.difference_abs_moment(s, q, t, "below") + dist.difference_abs_moment(s, q, t, "above"))
                worst = max(worst, abs(full - parts))
        return worst < 1e-12, worst, 1e-12, "untruncated = below + above for all probed thresholds"

    def diff_second():
        r1 = specs["rademacher_1d"]
        vals = (float(dist.difference_second_moment(r1, 4.0)[0, 0]), float(dist.difference_second_moment(r1, 1.0)[0, 0]))
        m2 = dist.difference_second_moment(specs["rademacher_2d"], 4.0)
        err = max(abs(vals[0] - 2.0), abs(vals[1]), float(np.max(np.abs(m2 - np.eye(2)))))
        return err < 1e-12, err, 1e-12, "Rademacher truncated difference second moments (2, 0, I)"

    _check("distributions.standardized_moments", standardized, out)
    _check("distributions.standardize_idempotent", idempotent, out)
    _check("distributions.moment_tensor_symmetric", symmetric, out)
    _check("distributions.convolution_moments", convolution, out)
    _check("distributions.difference_moment_split", split, out)
    _check("distributions.difference_second_moment", diff_second, out)
    return out


# -- clt_bounds ---------------------------------------------------------------------

def epsilon_slope(spec: dist.DistributionSpec, grid=tuple(2**k for k in range(8, 17)), beta_sq_X: float = 8.0,
                  p: float = 2.0, q: float = 3.0, K: float = 1.0) -> tuple[float, float, list]:
    """``(slope, worst relative residual, roots)`` of ε against ``n`` with the ``K n^{-1/3}`` plug-in."""
    r = cb.conjugate_exponents(p, q)
    roots = []
    for n in grid:
        terms = cb.compute_terms(spec, n, p, beta_sq_X)
        roots.append(cb.solve_epsilon(terms, q, r, cb.wq_bonis(n, q, K)))
    eps = np.array([x.value for x in roots])
    slope = float(np.polyfit(np.log(np.array(grid, float)), np.log(eps), 1)[0])
    worst = max(abs(x.residual) / (1.0 + x.rhs0) for x in roots)
    return slope, worst, roots


def leading_scaling(spec: dist.DistributionSpec, p: float = 2.0, grid=tuple(2**k for k in range(6, 15)),
                    beta_sq_X: float = 8.0) -> tuple[float, float, float]:
    """``(relative spread of sqrt(n) term_leading, its mean, limit constant)``."""
    vals = []
    for n in grid:
        terms = cb.compute_terms(spec, n, p, beta_sq_X)
        vals.append(math.sqrt(n) * terms.leading_norm / 6.0)
    vals = np.array(vals)
    spread = float((vals.max() - vals.min()) / max(abs(vals.mean()), 1e-300))
    return spread, float(vals.mean()), cb.corollary_constant(spec, p)


def bound_checks(seed: int = 0) -> list[Check]:
    out: list[Check] = []
    specs = _std()

    def example_terms():
        t = cb.compute_terms(specs["rademacher_1d"], 4, 2.0, 4.0)
        got = (t.L_p, t.norm_M4, t.norm_M3, float(t.Lambda_beta[0, 0]), t.beta_2)
        want = (2.0, 0.25, 0.0, 0.5, 0.5)
        err = max(abs(a - b) for a, b in zip(got, want))
        return err < 1e-12, err, 1e-12, "Rademacher n=4: L_2=2, M_4=1/4, M_3=0, Lambda=1/2, beta_2=1/2"

    def _roots():
        for name in ("rademacher_1d", "two_point_skew", "rademacher_2d", "discrete_corr_2d"):
            for n in (16, 256, 4096):
                terms = cb.compute_terms(specs[name], n, 2.0, 8.0)
                for W in (0.0, 0.1, cb.wq_bonis(n, 3.0)):
                    yield cb.solve_epsilon(terms, 3.0, 6.0, W)

    def residuals():
        roots = [x for x in _roots() if not x.degenerate]
        smooth = [x for x in roots if not x.at_jump]
        worst = max(abs(x.residual) / (1.0 + x.rhs0) for x in smooth)
        return worst < 1e-10, worst, 1e-10, \
            f"bisection residual / (1 + RHS(0)) over {len(smooth)} roots off the steps of L''_4"

    def step_roots():
        jumps = [x for x in _roots() if x.at_jump]
        eps = np.finfo(float).eps
        bad = [x for x in jumps if x.bracket_signs != (-1.0, 1.0) or x.bracket[1] - x.bracket[0] > 4 * eps * x.bracket[1]]
        return not bad, len(jumps), None, f"{len(jumps)} crossings on a step of L''_4, {len(bad)} not bracketed to 4 ulp"

    def total_sum():
        worst = 0.0
        for name in ("rademacher_1d", "two_point_skew", "exponential_1d"):
            terms = cb.compute_terms(specs[name], 128, 2.0, 8.0, n_mc=200_000, seed=seed)
            rep = cb.theorem_bound(terms, 3.0, 6.0, cb.wq_bonis(128, 3.0))
            parts = (rep.term_leading, rep.term_lattice, rep.term_mixed, rep.term_tail)
            worst = max(worst, abs(rep.total - sum(parts)) + (0.0 if min(parts) >= 0 else math.inf))
        return worst < 1e-12, worst, 1e-12, "total = sum of the four non-negative terms"

    def monotone():
        grid = [2**k for k in range(6, 15)]
        totals = []
        for n in grid:
            terms = cb.compute_terms(specs["rademacher_1d"], n, 2.0, 4.0)
            totals.append(cb.theorem_bound(terms, 3.0, 6.0, cb.wq_bonis(n, 3.0)).total)
        inversions = [(grid[i], grid[i + 1]) for i in range(len(grid) - 1) if totals[i + 1] > totals[i]]
        late = [a for a, _ in inversions if a >= 2**8]
        ok = len(inversions) <= 1 and not late
        return ok, len(inversions), 1, f"inversions at {inversions}"

    def slope():
        s, worst, roots = epsilon_slope(specs["two_point_skew"])
        jumps = sum(r.at_jump for r in roots)
        ok = abs(s + 5.0 / 9.0) <= 0.02 and worst < 1e-10 and jumps == 0
        return ok, s, -5.0 / 9.0, f"|slope + 5/9| <= 0.02, worst residual {worst:.2e}, jumps {jumps}"

    def leading():
        spread, mean, const = leading_scaling(specs["two_point_skew"])
        ok = spread < 1e-9 and abs(mean - const) <= 1e-9 * max(1.0, const)
        return ok, spread, 1e-9, f"sqrt(n) term_leading = {mean:.12g}, limit constant {const:.12g}"

    def beta2():
        vals = [cb.compute_terms(specs["rademacher_2d"], n, 2.0, 4.0).beta_2 for n in (4, 64, 1024, 16384)]
        spread = max(vals) - min(vals)
        return spread < 1e-9, spread, 1e-9, "beta_2 independent of n"

    def constants():
        c_exp = cb.corollary_constant(specs["exponential_1d"], 2.0)
        c_exp2 = cb.corollary_constant(dist.standardize(dist.DistributionSpec.product("standardized_exponential", 2)), 2.0)
        c_rad = cb.corollary_constant(specs["rademacher_2d"], 2.0)
        err = max(abs(c_exp - math.sqrt(2) / 3), abs(c_exp2 - 2.0 / 3.0), abs(c_rad))
        return err < 1e-12, err, 1e-12, "limit constants sqrt(2)/3, 2/3, 0"

    def hypothesis():
        try:
            cb.compute_terms(specs["rademacher_2d"], 16, 2.0, 1.0)
        except cb.TruncationHypothesisError as exc:
            return True, exc.smallest_eigenvalue, None, "beta_sq_X = 1 rejected for Rademacher d=2"
        return False, None, None, "beta_sq_X = 1 was accepted"

    _check("clt_bounds.example_terms", example_terms, out)
    _check("clt_bounds.epsilon_residual", residuals, out)
    _check("clt_bounds.epsilon_step_crossings", step_roots, out)
    _check("clt_bounds.total_is_sum", total_sum, out)
    _check("clt_bounds.total_monotone_in_n", monotone, out)
    _check("clt_bounds.epsilon_slope", slope, out)
    _check("clt_bounds.leading_sqrt_n_scaling", leading, out)
    _check("clt_bounds.beta2_n_independent", beta2, out)
    _check("clt_bounds.corollary_constants", constants, out)
    _check("clt_bounds.hypothesis_violation_reported", hypothesis, out)
    return out


# -- wasserstein --------------------------------------------------------------------

def transport_checks(seed: int = 0) -> list[Check]:
    out: list[Check] = []
    rng = _rng.generator(seed, 201)

    def brute():
        worst = 0.0
        for _ in range(5):
            X, Y = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
            C = ws.cost_matrix(X, Y, 2.0)
            best = min(sum(C[i, s[i]] for i in range(6)) for s in itertools.permutations(range(6)))
            worst = max(worst, abs(ws.wp_assignment(X, Y, 2.0) ** 2 - best / 6.0))
        return worst < 1e-9, worst, 1e-9, "assignment vs all 720 permutations"

    def symmetry():
        worst = 0.0
        for _ in range(5):
            X, Y = rng.normal(size=(64, 3)), rng.exponential(size=(64, 3))
            worst = max(worst, abs(ws.wp_assignment(X, Y, 2.0) - ws.wp_assignment(Y, X, 2.0)))
        return worst == 0.0, worst, 0.0, "W(X, Y) == W(Y, X) exactly"

    def triangle():
        worst = -math.inf
        for _ in range(5):
            X, Y, Z = (rng.normal(size=(64, 2)) + rng.normal(size=2) for _ in range(3))
            for p in (1.0, 2.0, 3.0):
                worst = max(worst, ws.wp_assignment(X, Z, p) - ws.wp_assignment(X, Y, p) - ws.wp_assignment(Y, Z, p))
        return worst <= 1e-9, worst, 1e-9, "W(X,Z) - W(X,Y) - W(Y,Z)"

    def monotone_p():
        worst = -math.inf
        for _ in range(5):
            X, Y = rng.normal(size=(64, 2)), rng.standard_t(3, size=(64, 2))
            plan3 = ws.optimal_plan(X, Y, 3.0)
            w2 = ws.wp_assignment(X, Y, 2.0)
            worst = max(worst, w2 - ws.plan_cost(X, Y, plan3, 3.0), ws.plan_cost(X, Y, plan3, 2.0) - ws.plan_cost(X, Y, plan3, 3.0))
        return worst <= 1e-9, worst, 1e-9, "W_2 <= W_3 along the order-3 plan"

    def one_d():
        worst = 0.0
        for p in (1.0, 2.0, 3.0):
            x, y = rng.normal(size=200), rng.exponential(size=200)
            worst = max(worst, abs(ws.wp_assignment(x, y, p) - ws.wp_sorted(x, y, p)))
        return worst < 1e-9, worst, 1e-9, "assignment = sorted coupling in 1-d"

    def quantile_oracles():
        v0 = ws.wp_quantile_exact(dist.Discrete1D(np.array([0.0]), np.array([1.0])), 2.0)
        v1 = ws.wp_quantile_exact(dist.Discrete1D(np.array([-1.0, 1.0]), np.array([0.5, 0.5])), 2.0)
        v3 = ws.wp_quantile_exact(dist.Discrete1D(np.array([0.0]), np.array([1.0])), 3.0)
        err = max(abs(v0 - 1.0), abs(v1 - math.sqrt(2 - 2 * math.sqrt(2 / math.pi))),
                  abs(v3 - (2 * math.sqrt(2 / math.pi)) ** (1 / 3)))
        return err < 1e-9, err, 1e-9, "W_2(delta_0)=1, W_2(+-1) = sqrt(2 - 2 sqrt(2/pi)), W_3(delta_0)"

    _check("wasserstein.assignment_brute_force", brute, out)
    _check("wasserstein.symmetry", symmetry, out)
    _check("wasserstein.triangle_inequality", triangle, out)
    _check("wasserstein.monotone_in_p", monotone_p, out)
    _check("wasserstein.one_d_consistency", one_d, out)
    _check("wasserstein.quantile_oracles", quantile_oracles, out)
    return out


# -- interpolation ------------------------------------------------------------------

IDENTITY_LAWS = {
    "two_atom": (np.array([[-1.0], [1.0]]), np.array([0.5, 0.5])),
    "five_atom": (np.array([[-2.0], [-1.0], [0.0], [1.0], [3.0]]), np.array([0.1, 0.2, 0.3, 0.25, 0.15])),
    "plane_three_atom": (np.array([[0.0, 1.0], [1.5, -0.5], [-1.0, -1.0]]), np.array([0.5, 0.3, 0.2])),
}
IDENTITY_TIMES = (0.05, 0.2, 1.0, 3.0)


def identity_gap() -> float:
    """Sup difference between the two score formulas on a 21-point grid per axis."""
    worst = 0.0
    g = np.linspace(-4.0, 4.0, 21)
    for atoms, weights in IDENTITY_LAWS.values():
        x = g[:, None] if atoms.shape[1] == 1 else np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
        for t in IDENTITY_TIMES:
            a = ip.score_mixture((atoms, weights), t, x)
            b = ip.score_via_conditional((atoms, weights), t, x)
            worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def domination_table() -> list[dict]:
    rows = []
    for name in ("two_atom", "five_atom"):
        atoms, weights = IDENTITY_LAWS[name]
        law = dist.Discrete1D(atoms.ravel(), weights)
        for p in (2.0, 3.0):
            exact = ws.wp_quantile_exact(law, p)
            si = ip.score_integral((atoms, weights), p)
            rows.append({"law": name, "p": p, "wp_exact": exact, "score_integral": si.value,
                         "budget": si.error_budget, "holds": exact <= si.value + si.error_budget})
    return rows


PSI_CASES = (("rademacher_1d", 16, 4.0), ("two_point_skew", 16, 8.0), ("rademacher_2d", 4, 4.0))


def psi_ratio_table(p: float = 2.0, q: float = 3.0, times=tuple(np.geomspace(0.01, 8.0, 14)), C: float = 1.0) -> list[dict]:
    """Largest ``||ρ_t||_p / Ψ(t)`` over the probed times, per built-in case."""
    specs = _std()
    r = cb.conjugate_exponents(p, q)
    rows = []
    for name, n, beta_sq in PSI_CASES:
        spec = specs[name]
        law = ip.sum_law(spec, n)
        terms = cb.compute_terms(spec, n, p, beta_sq)
        wq = ws.wp_quantile_exact(dist.Discrete1D(law[0].ravel(), law[1]), q) if spec.dim == 1 else cb.wq_bonis(n, q)
        eps2 = cb.solve_epsilon(terms, q, r, wq).value
        worst, where = 0.0, None
        for t in times:
            regime, psi = cb.psi_envelope(float(t), terms, q, r, wq, eps2, C)
            ratio = ip.score_pnorm_quadrature(law, float(t), p) / psi
            if ratio > worst:
                worst, where = ratio, (float(t), regime)
        rows.append({"case": name, "n": n, "max_ratio": float(worst), "at": where})
    return rows


def interpolation_checks(seed: int = 0) -> list[Check]:
    out: list[Check] = []

    def identity():
        gap = identity_gap()
        return gap < 1e-8, gap, 1e-8, "3 laws x 4 times, 21-point grid per axis"

    def delta0():
        worst = 0.0
        for d in (1, 2, 3, 4):
            si = ip.score_integral((np.zeros((1, d)), np.ones(1)), 2.0)
            worst = max(worst, abs(si.value - math.sqrt(d)))
        w2 = ws.wp_quantile_exact(dist.Discrete1D(np.array([0.0]), np.array([1.0])), 2.0)
        worst = max(worst, abs(ip.score_integral((np.zeros((1, 1)), np.ones(1)), 2.0).value - w2))
        return worst < 1e-6, worst, 1e-6, "point mass: integral = sqrt(d), d<=4, and = W_2 in d=1"

    def domination():
        rows = domination_table()
        slack = min(r["score_integral"] + r["budget"] - r["wp_exact"] for r in rows)
        return all(r["holds"] for r in rows), slack, 0.0, "min(integral + budget - W_p) over laws and p"

    def delta_closed():
        t, x = 0.7, np.array([[0.3], [-1.2], [2.0]])
        want = -x * math.exp(-2 * t) / -math.expm1(-2 * t)
        got = ip.score_mixture((np.zeros((1, 1)), np.ones(1)), t, x)
        est = ip.score_pnorm((np.zeros((1, 1)), np.ones(1)), t, 2.0, m=100_000, seed=seed)
        exact = math.exp(-2 * t) / math.sqrt(-math.expm1(-2 * t))
        err = float(np.max(np.abs(got - want)))
        return err < 1e-12 and abs(est.value - exact) <= 3 * est.std_error, err, 1e-12, \
            f"score closed form; MC norm {est.value:.5f} vs {exact:.5f} (SE {est.std_error:.1e})"

    def trivial():
        worst = -math.inf
        for atoms, weights in IDENTITY_LAWS.values():
            for t in (0.05, 0.3, 1.0, 3.0):
                for p in (2.0, 3.0):
                    est = ip.score_pnorm((atoms, weights), t, p, m=50_000, seed=seed)
                    worst = max(worst, est.value - ip.trivial_bound((atoms, weights), t, p) - 3 * est.std_error)
        return worst <= 0.0, worst, 0.0, "MC ||rho_t||_p - first bound - 3 SE"

    def far_time():
        worst = 0.0
        for atoms, weights in IDENTITY_LAWS.values():
            x = np.linspace(-3, 3, 13)
            x = x[:, None] if atoms.shape[1] == 1 else np.stack([x, -x], axis=1)
            worst = max(worst, float(np.max(np.abs(ip.score_mixture((atoms, weights), 40.0, x)))))
        return worst < 1e-10, worst, 1e-10, "rho_40(x) for |x| <= 3"

    def psi_ratio():
        rows = psi_ratio_table()
        worst = max(r["max_ratio"] for r in rows)
        detail = "; ".join(f"{r['case']}: {r['max_ratio']:.3g} at t={r['at'][0]:.3g} ({r['at'][1]})" for r in rows)
        return math.isfinite(worst) and worst <= PSI_RATIO_BUDGET, worst, PSI_RATIO_BUDGET, detail

    _check("interpolation.score_identity", identity, out)
    _check("interpolation.point_mass_integral", delta0, out)
    _check("interpolation.domination", domination, out)
    _check("interpolation.point_mass_score", delta_closed, out)
    _check("interpolation.first_bound_consistency", trivial, out)
    _check("interpolation.large_time_vanishes", far_time, out)
    _check("interpolation.psi_ratio_budget", psi_ratio, out)
    return out


# -- Rosenthal ratio ----------------------------------------------------------------

_KINDS = ("rademacher", "uniform_pm", "standardized_exponential", "two_point")


def _abs_moment(kind: str, p: float, a: float = 0.0, b: float = 0.0, w: float = 0.5) -> float:
    if kind == "rademacher":
        return 1.0
    if kind == "uniform_pm":
        return 1.0 / (p + 1.0)
    if kind == "two_point":
        mu = w * a + (1 - w) * b
        return w * abs(a - mu) ** p + (1 - w) * abs(b - mu) ** p
    return integrate.quad(lambda x: abs(x - 1.0) ** p * math.exp(-x), 0.0, 1.0)[0] + \
        integrate.quad(lambda x: abs(x - 1.0) ** p * math.exp(-x), 1.0, math.inf)[0]


def rosenthal_ratios(seed: int = 0, configs: int = 20, m: int = 100_000) -> list[dict]:
    """``||sum U_i||_p`` over the two-regime moment bound for random independent centered sums."""
    rng = _rng.generator(seed, 301)
    rows = []
    for c in range(configs):
        N = int(rng.integers(1, 41))
        p = float(rng.choice([2.0, 3.0, 4.0, 6.0]))
        total = np.zeros(m)
        var_sum = pth_sum = 0.0
        for i in range(N):
            kind = str(rng.choice(_KINDS))
            scale = float(rng.lognormal(0.0, 1.0))
            a, b, w = float(rng.normal()), float(rng.normal()), float(rng.uniform(0.05, 0.95))
            mg = dist.Marginal(kind, a=a, b=b + 1.0, w=w) if kind == "two_point" else dist.Marginal(kind)
            draws = mg.sample(_rng.generator(seed, 302, c, i), m) - mg.raw_moment(1)
            total += scale * draws
            var_sum += scale**2 * (mg.raw_moment(2) - mg.raw_moment(1) ** 2)
            pth_sum += scale**p * _abs_moment(kind, p, mg.a, mg.b, mg.w)
        lhs = float(np.mean(np.abs(total) ** p) ** (1.0 / p))
        rhs = math.sqrt(p) * math.sqrt(var_sum) + p * pth_sum ** (1.0 / p)
        rows.append({"config": c, "N": N, "p": p, "ratio": lhs / rhs})
    return rows


def rosenthal_checks(seed: int = 0) -> list[Check]:
    out: list[Check] = []

    def ratio():
        rows = rosenthal_ratios(seed)
        worst = max(r["ratio"] for r in rows)
        return worst <= ROSENTHAL_BUDGET, worst, ROSENTHAL_BUDGET, f"max over {len(rows)} random configurations"

    def rademacher():
        # exact second moment: ||sum U_i||_2 = sqrt(N), denominator sqrt(2N) + 2 sqrt(N)
        N = 25
        ratio = math.sqrt(N) / (math.sqrt(2) * math.sqrt(N) + 2 * math.sqrt(N))
        return ratio < 1.0, ratio, 1.0, "i.i.d. Rademacher, p = 2"

    _check("rosenthal.ratio_budget", ratio, out)
    _check("rosenthal.rademacher_p2", rademacher, out)
    return out


# -- harness ------------------------------------------------------------------------

def harness_checks(seed: int = 0) -> list[Check]:
    out: list[Check] = []

    def determinism():
        spec = _std()["uniform_2d"]
        cfg = {"spec": spec, "p": 2, "route": "two_sample_mc", "n_grid": [4, 8, 16, 32], "m": 64, "reps": 2,
               "seed": seed, "reference_mc": 1 << 12}
        a = records_csv(run_rate_experiment(cfg).records)
        b = records_csv(run_rate_experiment(cfg).records)
        return a == b, None, None, "identical config and seed give byte-identical CSV"

    def lattice_rate():
        fit = run_rate_experiment({"spec": _std()["rademacher_1d"], "p": 2, "route": "quantile_exact",
                                   "n_grid": [2**k for k in range(8, 15)]})
        return abs(fit.fitted_slope + 0.5) <= 0.03, fit.fitted_slope, -0.5, "exact Rademacher route slope"

    def mutation():
        saved = ml._he_table

        def flipped(x, k):
            table = saved(x, k)
            if k >= 2:
                table[..., 2] = -table[..., 2]
            return table

        ml._he_table = flipped
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                results = hermite_checks(seed, n_mc=1 << 16)
        finally:
            ml._he_table = saved
        caught = [c.name for c in results if not c.passed]
        return len(caught) >= 2, len(caught), 2, f"perturbed He_2 sign caught by {caught}"

    _check("harness.determinism", determinism, out)
    _check("harness.lattice_rate_slope", lattice_rate, out)
    _check("harness.mutation_sensitivity", mutation, out)
    return out


SUITES = {
    "multilinear": hermite_checks,
    "distributions": distribution_checks,
    "clt_bounds": bound_checks,
    "wasserstein": transport_checks,
    "interpolation": interpolation_checks,
    "rosenthal": rosenthal_checks,
    "harness": harness_checks,
}


def run_verify_suite(seed: int = 0, only: Optional[list[str]] = None) -> list[Check]:
    """Run every property check; failures and crashes become report entries."""
    results: list[Check] = []
    for name, fn in SUITES.items():
        if only and name not in only:
            continue
        results.extend(fn(seed))
    return results
