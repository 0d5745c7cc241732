"""Rate experiments and bound-versus-empirical comparisons."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .. import _rng
from .. import clt_bounds as cb
from .. import distributions as dist
from .. import wasserstein as ws
from ..specfile import load_spec
from .records import ExperimentRecord, RateFit

ROUTES = ("quantile_exact", "quantile_continuous", "product_exact", "two_sample_mc")


class RouteError(ValueError):
    pass


# -- configuration -------------------------------------------------------------------

def _resolve_spec(value, base: Optional[Path]) -> dist.DistributionSpec:
    if isinstance(value, dist.DistributionSpec):
        return value
    if isinstance(value, dict):
        return load_spec(value)
    path = Path(value)
    if not path.is_absolute() and base is not None and (base / path).exists():
        path = base / path
    return load_spec(str(path))


def load_config(path) -> dict:
    """Read a JSON experiment config; ``spec`` may be inline or a path relative to the config."""
    path = Path(path)
    cfg = json.loads(path.read_text())
    cfg["spec"] = _resolve_spec(cfg["spec"], path.parent)
    cfg.setdefault("name", path.stem)
    return cfg


def builtin_specs() -> dict[str, dist.DistributionSpec]:
    """Standardized laws used by the verification and acceptance suites."""
    S, P = dist.standardize, dist.DistributionSpec.product
    return {
        "rademacher_1d": S(P("rademacher", 1, name="rademacher_1d")),
        "rademacher_2d": S(P("rademacher", 2, name="rademacher_2d")),
        "two_point_skew": S(P("two_point", 1, name="two_point_skew", a=1.0, b=0.0, w=0.2)),
        "exponential_1d": S(P("standardized_exponential", 1, name="exponential_1d")),
        "exponential_2d": S(P("standardized_exponential", 2, name="exponential_2d")),
        "uniform_2d": S(P("uniform_pm", 2, name="uniform_2d")),
        "discrete_corr_2d": S(dist.DistributionSpec.discrete(
            [[0.0, 0.0], [1.0, 0.5], [2.0, 3.0], [-1.0, 1.0]], [0.4, 0.3, 0.2, 0.1], name="discrete_corr_2d")),
        "gaussian_2d": dist.standardize(dist.DistributionSpec.gaussian_mixture(
            [[0.0, 0.0]], [np.eye(2)], [1.0], name="gaussian_2d")),
    }


def _spec_id(spec: dist.DistributionSpec) -> str:
    return spec.name or f"{spec.family}-{spec.fingerprint()[:8]}"


def point_seed(seed: int, n: int) -> int:
    """Seed for one grid point, derived from the experiment seed and ``n`` only."""
    return int(np.random.SeedSequence([seed, n]).generate_state(1)[0])


# -- single estimates ----------------------------------------------------------------

def lattice_law(spec: dist.DistributionSpec) -> Optional[dist.Discrete1D]:
    """The 1-d law as a ``Discrete1D`` when it is finite-atom and lies on a lattice."""
    if spec.dim != 1 or not spec.is_finite_atom:
        return None
    law = dist.Discrete1D.from_spec(spec)
    return law if dist._lattice(law.atoms) is not None else None


def coordinate_spec(spec: dist.DistributionSpec) -> Optional[dist.DistributionSpec]:
    """One coordinate of a product spec, as a 1-d spec."""
    if spec.family != "product_1d":
        return None
    return replace(spec, dim=1, name=f"{spec.label}-coord")


def _exact_1d_route(spec: dist.DistributionSpec) -> Optional[str]:
    if lattice_law(spec) is not None:
        return "quantile_exact"
    if ws.sum_law_quantiles(spec, 1) is not None:
        return "quantile_continuous"
    return None


def check_route(spec: dist.DistributionSpec, route: str, p: float = 2.0) -> None:
    if route not in ROUTES:
        raise RouteError(f"unknown route {route!r}; expected one of {ROUTES}")
    if route == "quantile_exact" and lattice_law(spec) is None:
        raise RouteError("quantile_exact needs a one-dimensional lattice spec")
    if route == "quantile_continuous" and ws.sum_law_quantiles(spec, 1) is None:
        raise RouteError("quantile_continuous needs a closed-form quantile function for S_n")
    if route == "product_exact":
        coord = coordinate_spec(spec)
        if p != 2 or coord is None or _exact_1d_route(coord) is None:
            raise RouteError("product_exact needs p = 2 and a product spec with an exact 1-d route")


def estimate_wp(spec: dist.DistributionSpec, n: int, p: float, route: str, m: int = 2048,
                reps: int = 32, seed: int = 0) -> tuple[float, Optional[float]]:
    """``(W_p estimate, standard error or None)`` by the named route."""
    check_route(spec, route, p)
    if route == "product_exact":
        # quadratic cost separates over coordinates: W_2^2 of a product is the sum of the W_2^2
        coord = coordinate_spec(spec)
        w1, _ = estimate_wp(coord, n, p, _exact_1d_route(coord))
        return math.sqrt(spec.dim) * w1, None
    if route == "quantile_exact":
        return ws.wp_quantile_exact(dist.convolve_power(lattice_law(spec), n), p), None
    if route == "quantile_continuous":
        ppf, isf = ws.sum_law_quantiles(spec, n)
        return ws.wp_quantile_continuous(ppf, isf, p), None
    est = ws.wp_two_sample(spec, n, p, m, reps, seed)
    return est.value, est.std_error


def best_route(spec: dist.DistributionSpec, p: float = 2.0) -> str:
    """Most accurate available route: exact when possible, two-sample otherwise."""
    route = _exact_1d_route(spec) if spec.dim == 1 else None
    if route:
        return route
    coord = coordinate_spec(spec)
    if p == 2 and coord is not None and _exact_1d_route(coord):
        return "product_exact"
    return "two_sample_mc"


def lattice_candidates(spec: dist.DistributionSpec, p: float, n_mc: int = 1 << 20,
                       seed: int = 0) -> dict[str, float]:
    """Both readings of the 1-d lattice limit constant, plus the quoted lower bound.

    ``printed``: ``(1/6) ||E[X^3](Z^2 - 1) + β U||_p``;
    ``regrouped``: ``||(1/6) E[X^3](Z^2 - 1) + β U||_p``, with ``U`` uniform on
    ``[-1/2, 1/2]`` and ``β`` the lattice span.
    """
    law = lattice_law(spec)
    if law is None:
        raise ValueError("lattice constants need a one-dimensional lattice spec")
    _, span, _ = dist._lattice(law.atoms)
    m3 = float(law.weights @ law.atoms**3)
    rng = _rng.generator(seed, 11)
    Z = rng.standard_normal(n_mc)
    U = rng.uniform(-0.5, 0.5, n_mc)
    printed = np.mean(np.abs(m3 * (Z * Z - 1.0) + span * U) ** p) ** (1.0 / p) / 6.0
    regrouped = np.mean(np.abs(m3 / 6.0 * (Z * Z - 1.0) + span * U) ** p) ** (1.0 / p)
    return {"span": span, "printed": float(printed), "regrouped": float(regrouped),
            "quoted_lower_bound": span / 4.0}


# -- rate experiment -----------------------------------------------------------------

def _rate_point(args) -> ExperimentRecord:
    spec, spec_id, n, p, route, m, reps, seed = args
    s = point_seed(seed, n)
    wp, se = estimate_wp(spec, n, p, route, m, reps, s)
    return ExperimentRecord(spec_id, spec.dim, n, p, s, route, wp, se)


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def is_gaussian_source(spec: dist.DistributionSpec) -> bool:
    if spec.family != "gaussian_mixture":
        return False
    return bool(np.allclose(spec.means, 0.0, atol=1e-12)
                and np.allclose(spec.covariances, np.eye(spec.dim), atol=1e-12))


def run_rate_experiment(config: dict) -> RateFit:
    """One record per grid point plus a fit against the reference constants.

    Config keys: ``spec``, ``p``, ``n_grid``, ``route``, ``seed`` and, for the
    two-sample route, ``m`` and ``reps``; optional ``workers`` and ``reference_mc``.
    """
    spec = _resolve_spec(config["spec"], None)
    p = float(config.get("p", 2))
    route = config.get("route", "two_sample_mc")
    grid = [int(n) for n in config["n_grid"]]
    seed = int(config.get("seed", 0))
    check_route(spec, route, p)
    spec_id = config.get("spec_id") or _spec_id(spec)
    jobs = [(spec, spec_id, n, p, route, int(config.get("m", 2048)), int(config.get("reps", 32)), seed)
            for n in grid]
    records = _map(_rate_point, jobs, int(config.get("workers", 1)))

    extras: dict[str, Any] = {"route": route, "p": p}
    ref = None
    if spec.standardized:
        ref = cb.corollary_constant(spec, p, n_mc=int(config.get("reference_mc", 1 << 20)), seed=seed)
        extras["corollary_constant"] = ref
    coord = coordinate_spec(spec)
    if lattice_law(spec) is not None:
        lat = lattice_candidates(spec, p, seed=seed)
        extras.update({f"lattice_{k}": v for k, v in lat.items()})
        ref = lat["regrouped"]
    elif p == 2 and coord is not None and lattice_law(coord) is not None:
        # squared cost separates over independent coordinates
        lat = lattice_candidates(coord, p, seed=seed)
        extras.update({f"lattice_{k}": v for k, v in lat.items()})
        ref = math.sqrt(spec.dim) * lat["regrouped"]
    if is_gaussian_source(spec):
        extras["degenerate"] = "gaussian source: estimates measure sampling bias only"
    fit = RateFit.from_records(records, ref, extras)
    if abs(fit.fitted_slope + 0.5) > 0.1:
        fit.extras["slope_flag"] = f"slope {fit.fitted_slope:.3f} is far from -1/2"
    return fit


# -- bound comparison ----------------------------------------------------------------

@dataclass
class BoundComparison:
    rows: list = field(default_factory=list)
    sweep: list = field(default_factory=list)
    records: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"rows": self.rows, "sweep": self.sweep}


def beta_sq_for(config: dict, n: int) -> float:
    sched = config.get("beta_schedule")
    if sched:
        return float(sched.get("scale", 1.0)) * n ** float(sched["power"])
    return float(config["beta_sq_X"])


def wq_input(policy, spec: dist.DistributionSpec, n: int, q: float, seed: int,
             m: int = 2048, reps: int = 32) -> tuple[float, str]:
    """``W_q`` plug-in by policy: ``auto``, ``bonis:K`` or a number."""
    if isinstance(policy, (int, float)):
        return float(policy), "value"
    if isinstance(policy, str) and policy.startswith("bonis"):
        K = float(policy.split(":", 1)[1]) if ":" in policy else 1.0
        return cb.wq_bonis(n, q, K), policy
    if policy != "auto":
        try:
            return float(policy), "value"
        except ValueError:
            raise ValueError(f"unknown W_q policy {policy!r}") from None
    route = best_route(spec, q)
    if route != "two_sample_mc":
        return estimate_wp(spec, n, q, route)[0], route
    return ws.wp_pair_bound_for_theorem(spec, n, q, m, reps, seed), "two_sample_plus_2se"


def _bound_at(spec, n, p, q, r, beta_sq, C, policy, seed, m, reps, n_mc, split_root=False):
    terms = cb.compute_terms(spec, n, p, beta_sq, n_mc=n_mc, seed=seed)
    wq, how = wq_input(policy, spec, n, q, seed, m, reps)
    return cb.theorem_bound(terms, q, r, wq, C, split_root), how


def run_bound_comparison(config: dict) -> BoundComparison:
    """Per-``n`` table of empirical ``W_p``, bound terms and their ratio, plus an optional β sweep.

    Config keys: ``spec``, ``p``, ``q``, ``n_grid``, ``beta_sq_X`` or
    ``beta_schedule`` (``{"power": a, "scale": c}`` gives ``c n^a``), ``C``,
    ``wq`` policy, ``seed``, ``m``, ``reps`` and optionally ``beta_sweep``.
    """
    spec = _resolve_spec(config["spec"], None)
    p = float(config.get("p", 2))
    q = float(config.get("q", 3))
    r = cb.conjugate_exponents(p, q)
    C = float(config.get("C", 1.0))
    policy = config.get("wq", "auto")
    seed = int(config.get("seed", 0))
    m, reps = int(config.get("m", 2048)), int(config.get("reps", 32))
    n_mc = int(config.get("n_mc", dist.DEFAULT_MC))
    route = config.get("route") or best_route(spec, p)
    spec_id = config.get("spec_id") or _spec_id(spec)
    out = BoundComparison()

    for n in (int(v) for v in config["n_grid"]):
        s = point_seed(seed, n)
        beta_sq = beta_sq_for(config, n)
        wp, se = estimate_wp(spec, n, p, route, m, reps, s)
        row: dict[str, Any] = {"n": n, "beta_sq_X": beta_sq, "wp": wp, "se": se, "route": route}
        try:
            rep, how = _bound_at(spec, n, p, q, r, beta_sq, C, policy, s, m, reps, n_mc)
        except cb.TruncationHypothesisError as exc:
            row.update(status="rejected", smallest_eigenvalue=exc.smallest_eigenvalue)
            out.rows.append(row)
            out.records.append(ExperimentRecord(spec_id, spec.dim, n, p, s, route, wp, se))
            continue
        row.update(status="ok", wq_policy=how, W_q_input=rep.W_q_input, epsilon=rep.epsilon,
                   term_leading=rep.term_leading, term_lattice=rep.term_lattice,
                   term_mixed=rep.term_mixed, term_tail=rep.term_tail, total=rep.total,
                   ratio=rep.total / wp if wp > 0 else math.inf,
                   sqrtn_term_lattice=math.sqrt(n) * rep.term_lattice)
        out.rows.append(row)
        out.records.append(ExperimentRecord(spec_id, spec.dim, n, p, s, route, wp, se, rep.total))

    sweep = config.get("beta_sweep")
    if sweep:
        n0 = int(config.get("sweep_n", config["n_grid"][0]))
        for beta_sq in sweep:
            entry: dict[str, Any] = {"n": n0, "beta_sq_X": float(beta_sq)}
            try:
                rep, _ = _bound_at(spec, n0, p, q, r, float(beta_sq), C, policy, point_seed(seed, n0),
                                   m, reps, n_mc)
                entry.update(status="accepted", total=rep.total, term_lattice=rep.term_lattice,
                             term_mixed=rep.term_mixed, epsilon=rep.epsilon)
            except cb.TruncationHypothesisError as exc:
                entry.update(status="rejected", smallest_eigenvalue=exc.smallest_eigenvalue)
            out.sweep.append(entry)
    return out


def format_table(rows: Sequence[dict], columns: Sequence[str]) -> str:
    """Fixed-width text table; missing cells are blank."""
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)

    body = [[cell(row.get(c)) for c in columns] for row in rows]
    widths = [max(len(c), *(len(b[i]) for b in body)) if body else len(c) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(b, widths)) for b in body]
    return "\n".join(lines)
