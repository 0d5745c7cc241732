"""Non-asymptotic CLT bound in W_p and its ingredients.

Everything is computed under the i.i.d. reduction ``W_i = X_i / sqrt(n)``: a sum
over summands equals ``n`` times the per-summand value.  Truncations compare the
squared norm of a difference ``D = W' - W`` against a threshold.

``η_p(t)`` is taken to be ``Δ(t) / (p - 1)`` with ``Δ(t) = e^{2t} - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import distributions as dist
from .multilinear import contracted_hermite_pnorm, hs_norm

BISECTION_CAP = 200


class TruncationHypothesisError(ValueError):
    """The truncated difference covariance is not positive-definite."""

    def __init__(self, smallest_eigenvalue: float, beta_sq: float):
        self.smallest_eigenvalue = smallest_eigenvalue
        self.beta_sq = beta_sq
        super().__init__(
            f"truncation hypothesis violated: E[D D^T 1{{|D|^2 <= {beta_sq:g}}}] is not positive-definite "
            f"(smallest eigenvalue {smallest_eigenvalue:.3e})"
        )


def noise_ratio(t: float) -> float:
    """``e^{2t} - 1``: noise variance over squared signal scale of the OU point at time ``t``."""
    return math.expm1(2.0 * t)


def noise_ratio_p(t: float, p: float) -> float:
    """``(e^{2t} - 1) / (p - 1)``, the tail threshold used at time ``t``."""
    return noise_ratio(t) / (p - 1.0)


@dataclass(eq=False)
class CltTerms:
    """Scalar and tensor quantities entering the bound, for one ``(spec, n, p, β)``.

    Tail quantities are callables of the W-scale threshold ``t`` (compared with
    ``|D|^2``).  ``leading_norm`` is ``||M_3 H_2(Z)||_p``.
    """

    d: int
    n: int
    p: float
    M3: np.ndarray
    M4: np.ndarray
    norm_M3: float
    norm_M4: float
    L_p: float
    L4_tail: Callable[[float], float]
    Lp2_tail: Callable[[float], float]
    Lprime_4: float
    Lprime_p2: float
    Ldoubleprime_4_tail: Callable[[float], float]
    beta_sq_X: float
    beta_W: float
    Lambda_beta: np.ndarray
    beta_2: float
    beta_p: float
    leading_norm: float
    leading_norm_se: float = 0.0
    leading_exact: bool = False
    exact_pairs: bool = True
    label: str = ""

    def L_tail(self, q: float, t: float) -> float:
        if q == 4:
            return self.L4_tail(t)
        if q == self.p + 2:
            return self.Lp2_tail(t)
        raise ValueError(f"tail available for q in {{4, {self.p + 2:g}}}, got {q}")

    def denominator(self, split_root: bool = False) -> float:
        p = self.p
        if split_root:
            inner = self.beta_p ** (1.0 / p) + self.L_p ** (1.0 / p)
        else:
            inner = (self.beta_p + self.L_p) ** (1.0 / p)
        return math.sqrt(self.beta_2 + self.d) + math.sqrt(p) * inner


def _check_standardized(spec: dist.DistributionSpec) -> None:
    if spec.standardized:
        return
    mu = dist.mean(spec)
    cov = dist.covariance(spec)
    if np.max(np.abs(mu)) > 1e-9 or np.max(np.abs(cov - np.eye(spec.dim))) > 1e-9:
        raise ValueError(f"{spec.label} is not standardized; call distributions.standardize first")


def compute_terms(spec: dist.DistributionSpec, n: int, p: float, beta_sq_X: float,
                  pairs: Optional[dist.PairSample] = None, n_mc: int = dist.DEFAULT_MC,
                  seed: int = 0, leading_mc: int = 1 << 18) -> CltTerms:
    """All bound ingredients for ``W_i = X_i / sqrt(n)``.

    ``beta_sq_X`` truncates ``|X' - X|^2``; the W-scale radius is ``sqrt(beta_sq_X / n)``.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if p < 2:
        raise ValueError("p must be >= 2")
    if beta_sq_X <= 0:
        raise ValueError("beta_sq_X must be positive")
    _check_standardized(spec)
    d = spec.dim
    pairs = pairs if pairs is not None else dist.pair_sample(spec, n_mc, seed)

    M3 = dist.moment_tensor(spec, 3) / math.sqrt(n)
    M4 = dist.moment_tensor(spec, 4) / n
    second = hs_norm(dist.moment_tensor(spec, 2))

    def lq(q: float) -> float:
        return n ** (1.0 - q / 2.0) * pairs.abs_moment(q)

    def tail(q: float) -> Callable[[float], float]:
        factor = n ** (1.0 - q / 2.0)
        return lambda t: factor * pairs.abs_moment(q, n * max(t, 0.0), "above")

    def lprime(q: float) -> float:
        return n * (second / n) ** (q / 2.0) * n ** (-q / 2.0) * pairs.abs_moment(q)

    def ldoubleprime_4(t: float) -> float:
        return hs_norm(pairs.weighted_second_moment_tail(2.0, n * max(t, 0.0))) / n

    sigma_beta = pairs.truncated_second_moment(beta_sq_X)
    eig = np.linalg.eigvalsh(sigma_beta)
    if eig[0] <= 1e-12 * max(1.0, eig[-1]):
        raise TruncationHypothesisError(float(eig[0]), beta_sq_X)
    Lam = np.linalg.inv(sigma_beta)
    Lam = 0.5 * (Lam + Lam.T)

    sl = pairs._cut(beta_sq_X, "at_most")
    proj = pairs.diff[sl] @ Lam.T
    proj_norm = np.sqrt(np.einsum("ij,ij->i", proj, proj))
    w = pairs.weights[sl]

    def beta_q(q: float) -> float:
        return n ** (1.0 - q / 2.0) * float(w @ proj_norm**q)

    est = contracted_hermite_pnorm(M3 * math.sqrt(n), 2, p, n_mc=leading_mc, seed=seed)
    if est.exact is not None:
        lead, lead_se, exact = est.exact / math.sqrt(n), 0.0, True
    else:
        lead, lead_se, exact = est.value / math.sqrt(n), est.std_error / math.sqrt(n), False

    return CltTerms(
        d=d, n=n, p=p, M3=M3, M4=M4, norm_M3=hs_norm(M3), norm_M4=hs_norm(M4),
        L_p=lq(p), L4_tail=tail(4.0), Lp2_tail=tail(p + 2.0),
        Lprime_4=lprime(4.0), Lprime_p2=lprime(p + 2.0), Ldoubleprime_4_tail=ldoubleprime_4,
        beta_sq_X=beta_sq_X, beta_W=math.sqrt(beta_sq_X / n), Lambda_beta=Lam,
        beta_2=beta_q(2.0), beta_p=beta_q(p),
        leading_norm=lead, leading_norm_se=lead_se, leading_exact=exact,
        exact_pairs=pairs.exact, label=spec.label,
    )


def conjugate_exponents(p: float, q: float) -> float:
    """``r`` with ``1/q + 1/r = 1/p``."""
    if q <= p:
        raise ValueError("q must exceed p")
    return p * q / (q - p)


def wq_bonis(n: int, q: float, K: float = 1.0) -> float:
    """Plug-in ``K n^{1/(2q) - 1/2}`` for ``W_q(ν_n, γ)``."""
    return K * n ** (1.0 / (2.0 * q) - 0.5)


@dataclass(frozen=True)
class EpsilonRoot:
    value: float
    residual: float
    rhs0: float
    iterations: int
    degenerate: bool = False
    at_jump: bool = False
    bracket: tuple = (0.0, 0.0)
    bracket_signs: tuple = (0.0, 0.0)

    def __float__(self) -> float:
        return self.value


def _numerator(terms: CltTerms, r: float, W_q_bound: float) -> Callable[[float], float]:
    base = terms.norm_M4 + r * terms.norm_M3 * W_q_bound
    return lambda eps: terms.Ldoubleprime_4_tail(eps) + base


def solve_epsilon(terms: CltTerms, q: float, r: float, W_q_bound: float,
                  split_root: bool = False) -> EpsilonRoot:
    """Root of ``ε^{3/2} = p N(ε) / den`` by bisection.

    ``N(ε)`` is nonincreasing (``L''_4`` is a tail functional) so the root is
    unique.  For laws represented by finitely many pairs ``N`` is a step
    function; a crossing that falls on a step is reported with ``at_jump``.
    """
    p = terms.p
    if abs(1.0 / q + 1.0 / r - 1.0 / p) > 1e-12:
        raise ValueError(f"1/q + 1/r must equal 1/p (q={q}, r={r}, p={p})")
    if W_q_bound < 0:
        raise ValueError("W_q_bound must be non-negative")
    den = terms.denominator(split_root)
    if not den > 0:
        raise ValueError("denominator must be positive")
    num = _numerator(terms, r, W_q_bound)

    def rhs(eps: float) -> float:
        return p * num(eps) / den

    rhs0 = rhs(0.0)
    if num(0.0) == 0.0:
        return EpsilonRoot(0.0, 0.0, rhs0, 0, degenerate=True)
    tol = 1e-10 * (1.0 + rhs0)

    def g(eps: float) -> float:
        return eps**1.5 - rhs(eps)

    lo, hi = 0.0, (p * rhs0) ** (2.0 / 3.0) + 1.0
    it = 0
    for it in range(1, BISECTION_CAP + 1):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2 * np.finfo(float).eps * hi:
            break
    g_lo, g_hi = g(lo), g(hi)
    best, res = (lo, g_lo) if abs(g_lo) < abs(g_hi) else (hi, g_hi)
    return EpsilonRoot(best, res, rhs0, it, at_jump=abs(res) >= tol, bracket=(lo, hi),
                       bracket_signs=(float(np.sign(g_lo)), float(np.sign(g_hi))))


@dataclass
class BoundReport:
    epsilon: float
    term_leading: float
    term_lattice: float
    term_mixed: float
    term_tail: float
    C_used: float
    W_q_input: float
    q: float
    r: float
    total: float
    inputs: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def diagnostic(self, label: str):
        for key, value in self.diagnostics:
            if key == label:
                return value
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "term_leading": self.term_leading,
            "term_lattice": self.term_lattice,
            "term_mixed": self.term_mixed,
            "term_tail": self.term_tail,
            "total": self.total,
            "inputs": dict(self.inputs, C=self.C_used, W_q=self.W_q_input, q=self.q, r=self.r),
            "diagnostics": {k: v for k, v in self.diagnostics},
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _safe_product(scale: float, value: float) -> float:
    # 0 * inf is zero here: a vanishing coefficient kills the log term
    if value == 0.0:
        return 0.0
    return scale * value


def theorem_bound(terms: CltTerms, q: float, r: float, W_q_bound: float, C: float = 1.0,
                  split_root: bool = False) -> BoundReport:
    """Evaluate the four summands of the non-asymptotic bound."""
    if C <= 0:
        raise ValueError("C must be positive")
    root = solve_epsilon(terms, q, r, W_q_bound, split_root)
    eps = root.value
    p, d = terms.p, terms.d
    den = terms.denominator(split_root)
    numer = _numerator(terms, r, W_q_bound)(eps)

    term_leading = terms.leading_norm / 6.0
    term_lattice = C * math.sqrt(d * p) * terms.beta_W
    term_mixed = p ** (7.0 / 6.0) * numer ** (2.0 / 3.0) * den ** (1.0 / 3.0)

    L4 = terms.L4_tail(eps)
    Lp2 = terms.Lp2_tail(eps)
    log_eps = math.inf if eps == 0.0 else abs(math.log(eps))
    prime_part = math.sqrt(terms.Lprime_4) + (p * p * terms.Lprime_p2) ** (1.0 / p)
    term_tail = C * (p * math.sqrt(L4) + p ** (1.0 + 1.0 / p) * Lp2 ** (1.0 / p)
                     + _safe_product(log_eps, p**1.5 * prime_part))

    terms_all = (term_leading, term_lattice, term_mixed, term_tail)
    if any(math.isnan(v) for v in terms_all):
        raise FloatingPointError(f"NaN in bound terms {terms_all}")
    total = term_leading + term_lattice + term_mixed + term_tail

    inputs = {"label": terms.label, "n": terms.n, "d": d, "p": p, "beta_sq_X": terms.beta_sq_X,
              "split_root": split_root}
    diagnostics = [
        ("beta_W", terms.beta_W),
        ("norm_M3", terms.norm_M3),
        ("norm_M4", terms.norm_M4),
        ("leading_norm", terms.leading_norm),
        ("leading_norm_se", terms.leading_norm_se),
        ("leading_exact", terms.leading_exact),
        ("L_p", terms.L_p),
        ("L_4(eps)", L4),
        ("L_p+2(eps)", Lp2),
        ("L''_4(eps)", terms.Ldoubleprime_4_tail(eps)),
        ("L'_4", terms.Lprime_4),
        ("L'_p+2", terms.Lprime_p2),
        ("beta_2", terms.beta_2),
        ("beta_p", terms.beta_p),
        ("denominator", den),
        ("numerator", numer),
        ("epsilon_residual", root.residual),
        ("epsilon_degenerate", root.degenerate),
        ("epsilon_at_jump", root.at_jump),
        ("log_eps_infinite", math.isinf(log_eps)),
        ("term_lattice_beta_form", C * math.sqrt(d * terms.beta_sq_X / terms.n)),
        ("exact_pairs", terms.exact_pairs),
    ]
    return BoundReport(eps, term_leading, term_lattice, term_mixed, term_tail, C, W_q_bound, q, r,
                       total, inputs, diagnostics)


def corollary_constant(spec: dist.DistributionSpec, p: float, n_mc: int = 1 << 20, seed: int = 0) -> float:
    """``(1/6) ||E[X^{⊗3}] H_2(Z)||_p``, the limit of ``sqrt(n)`` times the leading term."""
    _check_standardized(spec)
    est = contracted_hermite_pnorm(dist.moment_tensor(spec, 3), 2, p, n_mc=n_mc, seed=seed)
    return (est.exact if est.exact is not None else est.value) / 6.0


# -- per-regime bounds on ||ρ_t||_p ------------------------------------------------

def psi1(t: float, terms: CltTerms, C: float = 1.0) -> float:
    """Small-time bound."""
    if t <= 0:
        raise ValueError("t must be positive")
    p, d = terms.p, terms.d
    return C * (math.sqrt(d * p) * (1.0 + 1.0 / math.sqrt(noise_ratio(t))) + p * terms.L_p ** (1.0 / p))


def psi2(t: float, terms: CltTerms, C: float = 1.0) -> float:
    """Medium-time bound; requires ``η_p(t) >= β_W^2``."""
    if t <= 0:
        raise ValueError("t must be positive")
    p, d = terms.p, terms.d
    if noise_ratio_p(t, p) < terms.beta_W**2:
        raise ValueError(f"psi2 domain: noise_ratio_p({t:g}) = {noise_ratio_p(t, p):.3e} < beta_W^2 = {terms.beta_W**2:.3e}")
    return C * (math.sqrt(p * (terms.beta_2 + d)) + p * (terms.beta_p + terms.L_p) ** (1.0 / p)
                + math.sqrt(d * p) * terms.beta_W**2 / noise_ratio(t) ** 1.5)


def psi3(t: float, terms: CltTerms, q: float, r: float, W_q_bound: float, C: float = 1.0) -> float:
    """Large-time bound."""
    if t <= 0:
        raise ValueError("t must be positive")
    p = terms.p
    e = noise_ratio_p(t, p)
    lead = math.exp(-3.0 * t) / 2.0 * terms.leading_norm
    wq = C * r * terms.norm_M3 * W_q_bound / e**1.5
    tails = C * (math.sqrt(p * terms.L4_tail(e) / e) + p * (terms.Lp2_tail(e) / e) ** (1.0 / p)
                 + math.sqrt(p * terms.Lprime_4) / e + p * terms.Lprime_p2 ** (1.0 / p) / e ** (0.5 + 2.0 / p))
    moments = C * (terms.Ldoubleprime_4_tail(e) + terms.norm_M4) / e**1.5
    return lead + wq + tails + moments


def psi_regime(t: float, eps1: float, eps2: float, terms: CltTerms) -> str:
    """Which bound covers time ``t`` when the split points are ``eps1 < eps2``."""
    if t < eps1:
        return "psi1"
    if t < eps2:
        return "psi2" if noise_ratio_p(t, terms.p) >= terms.beta_W**2 else "psi1"
    return "psi3"


def psi_envelope(t: float, terms: CltTerms, q: float, r: float, W_q_bound: float,
                 eps2: float, C: float = 1.0) -> tuple[str, float]:
    """Regime-wise bound with ``ε1 = β_W^2`` and ``ε2`` the solved ε."""
    regime = psi_regime(t, terms.beta_W**2, eps2, terms)
    if regime == "psi1":
        return regime, psi1(t, terms, C)
    if regime == "psi2":
        return regime, psi2(t, terms, C)
    return regime, psi3(t, terms, q, r, W_q_bound, C)
