"""Ornstein-Uhlenbeck interpolation between a finite-atom law and γ.

``F_t = e^{-t} W + sqrt(1 - e^{-2t}) Z``.  When ``W`` has finitely many atoms
``F_t`` is a Gaussian mixture, so its score relative to γ is available in
closed form, two different ways.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from . import _rng
from .distributions import Discrete1D, DistributionSpec, as_discrete, convolve_power, sample_sum
from .multilinear import NormEstimate, pnorm_from_powers
from .wasserstein import _cell_boundaries, _gl, adaptive_gauss_legendre

FAR_FIELD_SIGMAS = 40.0


class FarFieldWarning(UserWarning):
    """Evaluation point lies farther than 40 noise standard deviations from every atom image."""


@dataclass(frozen=True)
class OUPoint:
    t: float
    noise_ratio: float
    shrink: float
    noise_var: float

    @classmethod
    def at(cls, t: float) -> "OUPoint":
        if t < 0:
            raise ValueError("t must be non-negative")
        return cls(t=t, noise_ratio=math.expm1(2.0 * t), shrink=math.exp(-t), noise_var=-math.expm1(-2.0 * t))


def law_atoms(law) -> tuple[np.ndarray, np.ndarray]:
    """``(atoms (A, d), weights (A,))`` for a spec, a ``Discrete1D`` or a pair of arrays."""
    if isinstance(law, Discrete1D):
        return law.atoms[:, None], law.weights
    if isinstance(law, DistributionSpec):
        disc = as_discrete(law)
        if disc is None:
            raise ValueError(f"{law.label} is not a finite-atom law")
        return disc
    atoms, weights = law
    atoms = np.asarray(atoms, dtype=float)
    if atoms.ndim == 1:
        atoms = atoms[:, None]
    return atoms, np.asarray(weights, dtype=float)


def sum_law(spec: DistributionSpec, n: int, max_atoms: int = 1 << 16) -> tuple[np.ndarray, np.ndarray]:
    """Exact atoms and weights of ``S_n`` for 1-d finite-atom specs and discrete product specs."""
    if spec.dim == 1:
        law = convolve_power(Discrete1D.from_spec(spec), n)
        return law.atoms[:, None], law.weights
    if spec.family == "product_1d" and spec.marginal.is_discrete:
        pts, ws = spec.marginal.atoms()
        law = convolve_power(Discrete1D(spec.scale * (pts - spec.loc), ws), n)
        if law.atoms.size ** spec.dim > max_atoms:
            raise ValueError("S_n has too many atoms")
        grids = np.meshgrid(*([law.atoms] * spec.dim), indexing="ij")
        wgrids = np.meshgrid(*([law.weights] * spec.dim), indexing="ij")
        return (np.stack([g.ravel() for g in grids], axis=1),
                np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1))
    raise ValueError(f"no exact law of S_n for {spec.label}")


def ft_sample(spec: DistributionSpec, n: int, t: float, m: int, seed: int = 0) -> np.ndarray:
    """Draws of ``e^{-t} S_n + sqrt(1 - e^{-2t}) Z``."""
    if t <= 0:
        raise ValueError("t must be positive")
    pt = OUPoint.at(t)
    S = sample_sum(spec, n, m, seed, 0)
    Z = _rng.gaussian(seed, m, spec.dim, 1)
    return pt.shrink * S + math.sqrt(pt.noise_var) * Z


def _log_kernel(atoms, weights, pt: OUPoint, x):
    """``log w_j - |x - e^{-t} a_j|^2 / (2 σ^2)`` for every row of ``x`` and atom ``j``."""
    centers = pt.shrink * atoms
    sq = (np.einsum("nd,nd->n", x, x)[:, None] - 2.0 * x @ centers.T
          + np.einsum("ad,ad->a", centers, centers)[None, :])
    sq = np.maximum(sq, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(weights)[None, :] - sq / (2.0 * pt.noise_var), sq


def _far_field_check(sq: np.ndarray, pt: OUPoint) -> None:
    if np.any(np.min(sq, axis=1) > (FAR_FIELD_SIGMAS**2) * pt.noise_var):
        warnings.warn("score evaluated beyond 40 sigma of every atom; nearest-atom asymptote in use",
                      FarFieldWarning, stacklevel=3)


def _prep(law, t, x):
    if t <= 0:
        raise ValueError("t must be positive")
    atoms, weights = law_atoms(law)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != atoms.shape[1]:
        x = x.reshape(-1, atoms.shape[1])
    return atoms, weights, OUPoint.at(t), x, single


def score_mixture(law, t: float, x) -> np.ndarray:
    """``∇ log f_t(x) + x`` with ``f_t`` the Gaussian-mixture density of ``F_t``.

    The log-density gradient is the logsumexp-weighted average of the component
    gradients ``-(x - e^{-t} a_j) / σ^2``.
    """
    atoms, weights, pt, x, single = _prep(law, t, x)
    logk, sq = _log_kernel(atoms, weights, pt, x)
    _far_field_check(sq, pt)
    post = np.exp(logk - special.logsumexp(logk, axis=1, keepdims=True))
    grad_log_f = -(x - pt.shrink * post @ atoms) / pt.noise_var
    out = grad_log_f + x
    return out[0] if single else out


def score_via_conditional(law, t: float, x) -> np.ndarray:
    """``e^{-t} E[W - Z / sqrt(Δ(t)) | F_t = x]`` from the posterior over atoms."""
    atoms, weights, pt, x, single = _prep(law, t, x)
    logk, sq = _log_kernel(atoms, weights, pt, x)
    _far_field_check(sq, pt)
    logk = logk - logk.max(axis=1, keepdims=True)
    post = np.exp(logk)
    post /= post.sum(axis=1, keepdims=True)
    w_mean = post @ atoms
    z_mean = (x - pt.shrink * w_mean) / math.sqrt(pt.noise_var)
    out = pt.shrink * (w_mean - z_mean / math.sqrt(pt.noise_ratio))
    return out[0] if single else out


def score_pnorm(law, t: float, p: float, m: int = 200_000, seed: int = 0) -> NormEstimate:
    """Monte Carlo ``E[|ρ_t(F_t)|^p]^{1/p}`` with ``F_t`` drawn from the mixture."""
    atoms, weights = law_atoms(law)
    pt = OUPoint.at(t)
    d = atoms.shape[1]
    acc = acc2 = 0.0
    for rng, size in _rng.blocks(seed, m, block=1 << 13):
        idx = rng.choice(weights.size, size=size, p=weights)
        F = pt.shrink * atoms[idx] + math.sqrt(pt.noise_var) * rng.standard_normal((size, d))
        rho = score_mixture((atoms, weights), t, F)
        v = np.sum(rho * rho, axis=1) ** (p / 2.0)
        acc += float(v.sum())
        acc2 += float(v @ v)
    value, se = pnorm_from_powers(acc, acc2, m, p)
    return NormEstimate(value, se, m)


@lru_cache(maxsize=32)
def _hermite_grid(nodes: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    grids = np.meshgrid(*([z] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    keep = wts > 1e-300
    return pts[keep], wts[keep]


def default_nodes(d: int) -> int:
    return {1: 96, 2: 40, 3: 16}.get(d, 8)


def score_pnorm_quadrature(law, t: float, p: float, nodes: int | None = None) -> float:
    """Deterministic ``||ρ_t||_p``: Gauss-Hermite quadrature around each atom image."""
    atoms, weights = law_atoms(law)
    pt = OUPoint.at(t)
    d = atoms.shape[1]
    z, wz = _hermite_grid(nodes or default_nodes(d), d)
    sig = math.sqrt(pt.noise_var)
    total = 0.0
    for a, w in zip(atoms, weights):
        if w == 0:
            continue
        F = pt.shrink * a + sig * z
        rho = score_mixture((atoms, weights), t, F)
        total += w * float(wz @ (np.sum(rho * rho, axis=1) ** (p / 2.0)))
    return total ** (1.0 / p)


def gaussian_norm(d: int, p: float) -> float:
    """``||Z||_p`` for ``Z ~ N(0, I_d)``."""
    log_m = (p / 2.0) * math.log(2.0) + special.gammaln((d + p) / 2.0) - special.gammaln(d / 2.0)
    return math.exp(log_m / p)


def trivial_bound(law, t: float, p: float) -> float:
    """``e^{-t} (||W||_p + ||Z||_p / sqrt(Δ(t)))``."""
    atoms, weights = law_atoms(law)
    pt = OUPoint.at(t)
    w_norm = float(weights @ np.sum(atoms * atoms, axis=1) ** (p / 2.0)) ** (1.0 / p)
    return pt.shrink * (w_norm + gaussian_norm(atoms.shape[1], p) / math.sqrt(pt.noise_ratio))


@dataclass(frozen=True)
class ScoreIntegral:
    value: float
    error_budget: float
    quadrature_error: float
    node_error: float
    tail_bound: float
    flagged: bool


def score_integral(law, p: float, t_min_split: float = 0.1, T_max: float = 20.0, order: int = 16,
                   tol: float = 1e-8, nodes: int | None = None, max_depth: int = 30) -> ScoreIntegral:
    """``∫_0^∞ ||ρ_t||_p dt`` for a finite-atom law, with an error budget.

    ``t = τ^2`` on ``(0, t_min_split]`` absorbs the ``t^{-1/2}`` blow-up; adaptive
    Gauss-Legendre panels cover ``[t_min_split, T_max]``; beyond ``T_max`` the
    trivial bound is integrated analytically and counted as error.  The node
    error compares Gauss-Hermite rules with ``nodes`` and ``2 * nodes`` points.
    """
    atoms, weights = law_atoms(law)
    d = atoms.shape[1]
    nodes = nodes or default_nodes(d)
    x, w = _gl(order)

    def norm_at(t: float, k: int) -> float:
        return score_pnorm_quadrature((atoms, weights), t, p, k)

    def rule(fn, a, b):
        half, mid = 0.5 * (b - a), 0.5 * (b + a)
        return half * sum(wi * fn(mid + half * xi) for xi, wi in zip(x, w))

    def adapt(fn, a, b, whole, depth, local_tol):
        m = 0.5 * (a + b)
        left, right = rule(fn, a, m), rule(fn, m, b)
        err = abs(left + right - whole)
        if err <= local_tol or depth >= max_depth:
            return left + right, err, [(a, b)]
        lv, le, lp = adapt(fn, a, m, left, depth + 1, local_tol / 2)
        rv, re, rp = adapt(fn, m, b, right, depth + 1, local_tol / 2)
        return lv + rv, le + re, lp + rp

    def small(tau, k=nodes):
        return 2.0 * tau * norm_at(tau * tau, k)

    def large(t, k=nodes):
        return norm_at(t, k)

    root = math.sqrt(t_min_split)
    v1, e1, panels1 = adapt(small, 0.0, root, rule(small, 0.0, root), 0, tol / 4)
    edges = [t_min_split]
    while edges[-1] < T_max:
        edges.append(min(2.0 * edges[-1], T_max))
    v2, e2, panels2 = 0.0, 0.0, []
    for a, b in zip(edges[:-1], edges[1:]):
        v, e, pnl = adapt(large, a, b, rule(large, a, b), 0, tol / (4 * (len(edges) - 1)))
        v2, e2, panels2 = v2 + v, e2 + e, panels2 + pnl

    fine = sum(rule(lambda s: small(s, 2 * nodes), a, b) for a, b in panels1) + \
        sum(rule(lambda s: large(s, 2 * nodes), a, b) for a, b in panels2)
    value = v1 + v2
    node_err = abs(fine - value)

    w_norm = float(weights @ np.sum(atoms * atoms, axis=1) ** (p / 2.0)) ** (1.0 / p)
    tail = math.exp(-T_max) * w_norm + gaussian_norm(d, p) * (1.0 - math.sqrt(-math.expm1(-2.0 * T_max)))
    quad_err = e1 + e2
    budget = quad_err + node_err + tail
    return ScoreIntegral(value, budget, quad_err, node_err, tail, flagged=budget > tol)


def score_gaussian_mixture(spec: DistributionSpec, t: float, x) -> np.ndarray:
    """Score of ``F_t`` relative to γ when ``W`` is itself a Gaussian mixture.

    Component ``j`` of ``F_t`` is ``N(e^{-t} μ_j, e^{-2t} Σ_j + σ^2 I)``.
    """
    if spec.family != "gaussian_mixture":
        raise ValueError("spec must be a gaussian_mixture")
    if t <= 0:
        raise ValueError("t must be positive")
    pt = OUPoint.at(t)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    d = spec.dim
    logs, grads = [], []
    for mu, cov, w in zip(spec.means, spec.covariances, spec.weights):
        S = pt.shrink**2 * np.asarray(cov) + pt.noise_var * np.eye(d)
        L = np.linalg.cholesky(S)
        r = x - pt.shrink * np.asarray(mu)
        sol = np.linalg.solve(S, r.T).T
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        logw = math.log(w) if w > 0 else -np.inf
        logs.append(logw - 0.5 * logdet - 0.5 * np.einsum("nd,nd->n", r, sol))
        grads.append(-sol)
    logk = np.stack(logs, axis=1)
    post = np.exp(logk - special.logsumexp(logk, axis=1, keepdims=True))
    grad = np.einsum("nj,jnd->nd", post, np.stack(grads))
    out = grad + x
    return out[0] if single else out


def discretize_quantiles(ppf: Callable, isf: Callable, p: float, atoms: int = 512) -> tuple[Discrete1D, float]:
    """Equal-weight quantile-grid discretization of a continuous 1-d law.

    Atom ``j`` sits at the quantile ``(j + 1/2) / atoms``.  Also returns the
    transport cost ``W_p(law, discretization)`` along the quantile coupling.
    """
    u = (np.arange(atoms) + 0.5) / atoms
    half = atoms // 2
    pts = np.concatenate([ppf(u[:half]), isf(1.0 - u[half:])])
    law = Discrete1D(pts, np.full(atoms, 1.0 / atoms))
    z = np.clip(_cell_boundaries(law.weights), -12.0, 12.0)

    def transport(zz):
        out = np.empty_like(zz)
        neg = zz < 0
        out[neg] = ppf(special.ndtr(zz[neg]))
        out[~neg] = isf(special.ndtr(-zz[~neg]))
        return out

    def integrand(zz, aa):
        return np.abs(transport(zz) - aa) ** p * np.exp(-0.5 * zz * zz) / math.sqrt(2.0 * math.pi)

    value, _ = adaptive_gauss_legendre(integrand, z[:-1], z[1:], pts, order=16, cell_tol=1e-11)
    return law, max(value, 0.0) ** (1.0 / p)
