"""Source laws: declarative specs, whitening, sampling, moments, convolution powers."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import signal, stats

from . import _rng
from .multilinear import MAX_DIM, MAX_ORDER, _multiplicities

FAMILIES = ("discrete", "gaussian_mixture", "product_1d", "point_mass")
MARGINALS = ("rademacher", "standardized_exponential", "uniform_pm", "two_point")

WEIGHT_TOL = 1e-12
DEFAULT_MC = 10**6
MAX_EXACT_PAIRS = 4 * 10**6
MAX_CONVOLUTION_ATOMS = 10**7


class SingularCovarianceError(ValueError):
    """Raised when a law cannot be whitened."""

    def __init__(self, smallest_eigenvalue: float):
        self.smallest_eigenvalue = smallest_eigenvalue
        super().__init__(f"covariance is singular (smallest eigenvalue {smallest_eigenvalue:.3e})")


class AtomExplosionError(RuntimeError):
    pass


def _normalized_weights(w, what: str = "weights") -> np.ndarray:
    w = np.asarray(w, dtype=float).ravel()
    if w.size == 0:
        raise ValueError(f"{what}: empty")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError(f"{what}: must be finite and non-negative")
    total = float(w.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{what}: sum to {total!r}, expected 1")
    return w / total


@dataclass(frozen=True)
class Marginal:
    """Named one-dimensional law used by product specs.

    ``two_point`` puts mass ``w`` on ``a`` and ``1 - w`` on ``b``; ``uniform_pm`` is
    uniform on [-1, 1]; ``standardized_exponential`` is ``Exp(1) - 1``.
    """

    name: str
    a: float = 0.0
    b: float = 0.0
    w: float = 0.5

    def __post_init__(self):
        if self.name not in MARGINALS:
            raise ValueError(f"unknown marginal {self.name!r}; expected one of {MARGINALS}")
        if self.name == "two_point":
            if not 0.0 < self.w < 1.0:
                raise ValueError("two_point: w must lie in (0, 1)")
            if self.a == self.b:
                raise ValueError("two_point: a and b must differ")

    @property
    def is_discrete(self) -> bool:
        return self.name in ("rademacher", "two_point")

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        if self.name == "rademacher":
            return np.array([-1.0, 1.0]), np.array([0.5, 0.5])
        if self.name == "two_point":
            pts = np.array([self.a, self.b])
            ws = np.array([self.w, 1.0 - self.w])
            order = np.argsort(pts)
            return pts[order], ws[order]
        raise ValueError(f"{self.name} has no atoms")

    def raw_moment(self, r: int) -> float:
        if r == 0:
            return 1.0
        if self.name == "rademacher":
            return 0.0 if r % 2 else 1.0
        if self.name == "uniform_pm":
            return 0.0 if r % 2 else 1.0 / (r + 1)
        if self.name == "two_point":
            return self.w * self.a**r + (1.0 - self.w) * self.b**r
        # central moments of Exp(1): E[(E-1)^r] = sum_k C(r,k) k! (-1)^{r-k}
        return float(sum(math.comb(r, k) * math.factorial(k) * (-1) ** (r - k) for k in range(r + 1)))

    def sample(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.name == "rademacher":
            return 2.0 * rng.integers(0, 2, size=shape) - 1.0
        if self.name == "uniform_pm":
            return rng.uniform(-1.0, 1.0, size=shape)
        if self.name == "two_point":
            return np.where(rng.random(shape) < self.w, self.a, self.b)
        return rng.standard_exponential(shape) - 1.0

    def sum_sample(self, rng: np.random.Generator, n: int, shape) -> np.ndarray:
        """Draws of the sum of ``n`` i.i.d. copies."""
        if self.name == "rademacher":
            return 2.0 * rng.binomial(n, 0.5, size=shape) - n
        if self.name == "two_point":
            k = rng.binomial(n, self.w, size=shape)
            return self.a * k + self.b * (n - k)
        if self.name == "standardized_exponential":
            return rng.standard_gamma(n, size=shape) - n
        total = np.zeros(shape)
        left = n
        while left > 0:
            chunk = min(left, 64)
            total += rng.uniform(-1.0, 1.0, size=(chunk,) + tuple(shape)).sum(axis=0)
            left -= chunk
        return total


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """Source law ``ν`` of one summand ``X``.

    Families: ``discrete`` (atoms/weights), ``gaussian_mixture``
    (means/covariances/weights), ``product_1d`` (``copies`` i.i.d. coordinates,
    each ``scale * (Y - loc)`` with ``Y`` a named marginal) and ``point_mass``.
    """

    dim: int
    family: str
    atoms: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None
    means: Optional[np.ndarray] = None
    covariances: Optional[np.ndarray] = None
    marginal: Optional[Marginal] = None
    loc: float = 0.0
    scale: float = 1.0
    standardized: bool = False
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        d = self.dim
        if not 1 <= d <= MAX_DIM:
            raise ValueError(f"dim must lie in [1, {MAX_DIM}], got {d}")
        if self.family in ("discrete", "point_mass"):
            atoms = np.asarray(self.atoms, dtype=float).reshape(-1, d)
            if self.family == "point_mass":
                if atoms.shape[0] != 1:
                    raise ValueError("point_mass takes a single location")
                weights = np.ones(1)
            else:
                weights = _normalized_weights(self.weights)
                if weights.size != atoms.shape[0]:
                    raise ValueError(f"{atoms.shape[0]} atoms but {weights.size} weights")
            if not np.all(np.isfinite(atoms)):
                raise ValueError("atoms must be finite")
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "weights", weights)
        elif self.family == "gaussian_mixture":
            means = np.asarray(self.means, dtype=float).reshape(-1, d)
            covs = np.asarray(self.covariances, dtype=float).reshape(-1, d, d)
            weights = _normalized_weights(self.weights)
            if not (means.shape[0] == covs.shape[0] == weights.size):
                raise ValueError("gaussian_mixture: means, covariances and weights disagree in length")
            for c in covs:
                if not np.allclose(c, c.T, atol=1e-12):
                    raise ValueError("gaussian_mixture: covariances must be symmetric")
                if np.linalg.eigvalsh(c)[0] < -1e-12:
                    raise ValueError("gaussian_mixture: covariances must be positive semi-definite")
            object.__setattr__(self, "means", means)
            object.__setattr__(self, "covariances", covs)
            object.__setattr__(self, "weights", weights)
        else:
            if not isinstance(self.marginal, Marginal):
                raise ValueError("product_1d needs a Marginal")
            if not self.scale > 0:
                raise ValueError("product_1d: scale must be positive")

    # -- constructors --------------------------------------------------
    @classmethod
    def discrete(cls, atoms, weights, name: str = "") -> "DistributionSpec":
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        return cls(dim=atoms.shape[1], family="discrete", atoms=atoms, weights=weights, name=name)

    @classmethod
    def gaussian_mixture(cls, means, covariances, weights, name: str = "") -> "DistributionSpec":
        means = np.atleast_2d(np.asarray(means, dtype=float))
        return cls(dim=means.shape[1], family="gaussian_mixture", means=means,
                   covariances=covariances, weights=weights, name=name)

    @classmethod
    def product(cls, marginal, copies: int = 1, name: str = "", **params) -> "DistributionSpec":
        if isinstance(marginal, str):
            marginal = Marginal(marginal, **params)
        return cls(dim=copies, family="product_1d", marginal=marginal, name=name)

    @classmethod
    def point_mass(cls, location, name: str = "") -> "DistributionSpec":
        loc = np.atleast_1d(np.asarray(location, dtype=float))
        return cls(dim=loc.size, family="point_mass", atoms=loc[None, :], name=name)

    # -- helpers --------------------------------------------------------
    @property
    def label(self) -> str:
        return self.name or self.family

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.family}|{self.dim}|{self.loc!r}|{self.scale!r}|{self.marginal!r}".encode())
        for arr in (self.atoms, self.weights, self.means, self.covariances):
            if arr is not None:
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    @property
    def is_finite_atom(self) -> bool:
        if self.family in ("discrete", "point_mass"):
            return True
        return self.family == "product_1d" and self.marginal.is_discrete


# -- exact first and second moments --------------------------------------

def mean(spec: DistributionSpec) -> np.ndarray:
    if spec.family in ("discrete", "point_mass"):
        return spec.weights @ spec.atoms
    if spec.family == "gaussian_mixture":
        return spec.weights @ spec.means
    m = spec.scale * (spec.marginal.raw_moment(1) - spec.loc)
    return np.full(spec.dim, m)


def covariance(spec: DistributionSpec) -> np.ndarray:
    mu = mean(spec)
    if spec.family in ("discrete", "point_mass"):
        c = spec.atoms - mu
        return (c * spec.weights[:, None]).T @ c
    if spec.family == "gaussian_mixture":
        c = spec.means - mu
        return np.einsum("k,kij->ij", spec.weights, spec.covariances) + (c * spec.weights[:, None]).T @ c
    mg = spec.marginal
    var = mg.raw_moment(2) - mg.raw_moment(1) ** 2
    return np.eye(spec.dim) * spec.scale**2 * var


def _inverse_sqrt(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] <= 1e-12 * max(1.0, vals[-1]):
        raise SingularCovarianceError(float(vals[0]))
    return (vecs / np.sqrt(vals)) @ vecs.T


def standardize(spec: DistributionSpec) -> DistributionSpec:
    """Law of ``Σ^{-1/2}(X - μ)`` with the symmetric inverse square root."""
    mu = mean(spec)
    cov = covariance(spec)
    if spec.family == "point_mass":
        raise SingularCovarianceError(0.0)
    if spec.family == "product_1d":
        var = cov[0, 0]
        if var <= 1e-12:
            raise SingularCovarianceError(float(var))
        sd = math.sqrt(var)
        return replace(spec, loc=spec.loc + mu[0] / spec.scale, scale=spec.scale / sd, standardized=True)
    A = _inverse_sqrt(cov)
    if spec.family == "discrete":
        return replace(spec, atoms=(spec.atoms - mu) @ A.T, standardized=True)
    covs = np.einsum("ij,kjl,ml->kim", A, spec.covariances, A)
    covs = 0.5 * (covs + np.swapaxes(covs, 1, 2))
    return replace(spec, means=(spec.means - mu) @ A.T, covariances=covs, standardized=True)


# -- finite-atom view ----------------------------------------------------

def as_discrete(spec: DistributionSpec, max_atoms: int = 1 << 16) -> Optional[tuple[np.ndarray, np.ndarray]]:
    """``(atoms, weights)`` when the law has finitely many atoms (and not too many)."""
    if spec.family in ("discrete", "point_mass"):
        return spec.atoms, spec.weights
    if spec.family == "product_1d" and spec.marginal.is_discrete:
        pts, ws = spec.marginal.atoms()
        pts = spec.scale * (pts - spec.loc)
        if pts.size**spec.dim > max_atoms:
            return None
        grids = np.meshgrid(*([pts] * spec.dim), indexing="ij")
        wgrids = np.meshgrid(*([ws] * spec.dim), indexing="ij")
        atoms = np.stack([g.ravel() for g in grids], axis=1)
        weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        return atoms, weights
    return None


# -- sampling -------------------------------------------------------------

def _sample_block(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    d = spec.dim
    if spec.family == "point_mass":
        return np.repeat(spec.atoms, size, axis=0)
    if spec.family == "discrete":
        idx = rng.choice(spec.weights.size, size=size, p=spec.weights)
        return spec.atoms[idx]
    if spec.family == "gaussian_mixture":
        comp = rng.choice(spec.weights.size, size=size, p=spec.weights)
        chol = np.array([_psd_root(c) for c in spec.covariances])
        z = rng.standard_normal((size, d))
        return spec.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)
    y = spec.marginal.sample(rng, (size, d))
    return spec.scale * (y - spec.loc)


def _psd_root(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(c)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample(spec: DistributionSpec, m: int, seed: int = 0, *key: int) -> np.ndarray:
    """``m`` i.i.d. draws as an ``(m, d)`` array; reproducible per seed."""
    if m < 1:
        raise ValueError("m must be positive")
    parts = [_sample_block(spec, rng, size) for rng, size in _rng.blocks(seed, m, *key)]
    return np.concatenate(parts, axis=0)


def _sum_block(spec: DistributionSpec, n: int, rng: np.random.Generator, size: int) -> np.ndarray:
    d = spec.dim
    if spec.family == "point_mass":
        return np.repeat(n * spec.atoms, size, axis=0)
    if spec.family == "discrete":
        counts = rng.multinomial(n, spec.weights, size=size)
        return counts @ spec.atoms
    if spec.family == "gaussian_mixture":
        counts = rng.multinomial(n, spec.weights, size=size).astype(float)
        mu = counts @ spec.means
        cov = np.einsum("nk,kij->nij", counts, spec.covariances)
        vals, vecs = np.linalg.eigh(cov)
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))[:, None, :]
        z = rng.standard_normal((size, d))
        return mu + np.einsum("nij,nj->ni", root, z)
    s = spec.marginal.sum_sample(rng, n, (size, d))
    return spec.scale * (s - n * spec.loc)


def sample_sum(spec: DistributionSpec, n: int, m: int, seed: int = 0, *key: int) -> np.ndarray:
    """``m`` draws of ``S_n = n^{-1/2} (X_1 + ... + X_n)``.

    Sums are drawn from their exact law (binomial, gamma, multinomial counts)
    instead of adding ``n`` separate draws.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    parts = [_sum_block(spec, n, rng, size) for rng, size in _rng.blocks(seed, m, *key)]
    return np.concatenate(parts, axis=0) / math.sqrt(n)


# -- moment tensors ---------------------------------------------------------

def _gaussian_moment_tensor(mu: np.ndarray, cov: np.ndarray, q: int) -> np.ndarray:
    """``E[X^{⊗q}]`` for ``X ~ N(mu, cov)`` via the Gaussian integration-by-parts recursion."""
    tensors = [np.array(1.0), mu.copy()]
    for k in range(2, q + 1):
        t = np.multiply.outer(mu, tensors[k - 1])
        outer = np.multiply.outer(cov, tensors[k - 2])
        for pos in range(k - 1):
            t = t + np.moveaxis(outer, 1, 1 + pos)
        tensors.append(t)
    return tensors[q]


def moment_tensor(spec: DistributionSpec, q: int) -> np.ndarray:
    """Exact ``E[X^{⊗q}]`` for every built-in family."""
    if not 0 <= q <= MAX_ORDER:
        raise ValueError(f"moment order must lie in [0, {MAX_ORDER}]")
    d = spec.dim
    if spec.family in ("discrete", "point_mass"):
        out = np.zeros((d,) * q)
        for start in range(0, spec.weights.size, 1024):
            a = spec.atoms[start:start + 1024]
            t = spec.weights[start:start + 1024].copy()
            for _ in range(q):
                t = t[..., None] * a.reshape((a.shape[0],) + (1,) * (t.ndim - 1) + (d,))
            out = out + t.sum(axis=0)
        return out
    if spec.family == "gaussian_mixture":
        return sum(w * _gaussian_moment_tensor(m, c, q)
                   for w, m, c in zip(spec.weights, spec.means, spec.covariances))
    # i.i.d. coordinates: the entry factorizes over coordinate multiplicities
    mg = spec.marginal
    mom = np.array([
        spec.scale**r * sum(math.comb(r, k) * mg.raw_moment(k) * (-spec.loc) ** (r - k) for k in range(r + 1))
        for r in range(q + 1)
    ])
    counts = _multiplicities(d, q)
    out = np.ones(counts.shape[1])
    for c in range(d):
        out *= mom[counts[c]]
    return out.reshape((d,) * q)


def moment_tensor_mc(spec: DistributionSpec, q: int, n_mc: int = DEFAULT_MC, seed: int = 0
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo ``E[X^{⊗q}]`` with entrywise standard errors."""
    d = spec.dim
    acc = np.zeros(d**q)
    acc2 = np.zeros(d**q)
    for rng, size in _rng.blocks(seed, n_mc):
        x = _sample_block(spec, rng, size)
        t = np.ones((size, 1))
        for _ in range(q):
            t = (t[:, :, None] * x[:, None, :]).reshape(size, -1)
        acc += t.sum(axis=0)
        acc2 += (t * t).sum(axis=0)
    m = acc / n_mc
    se = np.sqrt(np.clip(acc2 / n_mc - m * m, 0.0, None) / n_mc)
    return m.reshape((d,) * q), se.reshape((d,) * q)


# -- pairs (X, X') and difference moments --------------------------------------

@dataclass(eq=False)
class PairSample:
    """Weighted pairs ``(X, X')`` of independent copies, sorted by ``|X' - X|^2``.

    Exact (all atom pairs) for finite-atom laws, equal-weight Monte Carlo draws
    otherwise.  Every difference functional is an exact sum over this set, so
    tail functionals are monotone in the threshold by construction.
    """

    x: np.ndarray
    xp: np.ndarray
    weights: np.ndarray
    exact: bool
    sq: np.ndarray = field(init=False)
    _suffix: dict = field(init=False, default_factory=dict, repr=False)

    def __post_init__(self):
        diff = self.xp - self.x
        sq = np.einsum("ij,ij->i", diff, diff)
        order = np.argsort(sq, kind="stable")
        self.x = self.x[order]
        self.xp = self.xp[order]
        self.weights = self.weights[order]
        self.sq = sq[order]

    @property
    def diff(self) -> np.ndarray:
        return self.xp - self.x

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def _cut(self, threshold_sq: float, side: str) -> slice:
        if side == "above":
            return slice(int(np.searchsorted(self.sq, threshold_sq, side="left")), None)
        if side == "below":
            return slice(None, int(np.searchsorted(self.sq, threshold_sq, side="left")))
        if side == "at_most":
            return slice(None, int(np.searchsorted(self.sq, threshold_sq, side="right")))
        raise ValueError(f"side must be 'above', 'below' or 'at_most', got {side!r}")

    def _suffix_sums(self, key, values: np.ndarray) -> np.ndarray:
        if key not in self._suffix:
            s = np.cumsum(values[::-1], axis=0)[::-1]
            self._suffix[key] = np.concatenate([s, np.zeros((1,) + s.shape[1:])], axis=0)
        return self._suffix[key]

    def abs_moment(self, q: float, threshold_sq: Optional[float] = None, side: str = "above") -> float:
        """``E[|D|^q 1{...}]`` where the indicator compares ``|D|^2`` to ``threshold_sq``."""
        vals = self.weights * self.sq ** (q / 2.0)
        if threshold_sq is None:
            return float(vals.sum())
        if side == "above":
            start = int(np.searchsorted(self.sq, threshold_sq, side="left"))
            return float(self._suffix_sums(("abs", q), vals)[start])
        return float(vals[self._cut(threshold_sq, side)].sum())

    def weighted_second_moment_tail(self, power: float, threshold_sq: float) -> np.ndarray:
        """``E[X X^T |D|^power 1{|D|^2 >= threshold_sq}]`` as a ``d x d`` matrix."""
        start = int(np.searchsorted(self.sq, threshold_sq, side="left"))
        d = self.dim
        key = ("xxT", power)
        if key in self._suffix or self.x.shape[0] * d * d <= 2 * 10**7:
            vals = (self.weights * self.sq ** (power / 2.0))[:, None] * \
                np.einsum("ni,nj->nij", self.x, self.x).reshape(-1, d * d)
            return self._suffix_sums(key, vals)[start].reshape(d, d)
        sl = slice(start, None)
        wts = self.weights[sl] * self.sq[sl] ** (power / 2.0)
        return (self.x[sl] * wts[:, None]).T @ self.x[sl]

    def truncated_second_moment(self, beta_sq: float) -> np.ndarray:
        """``E[D D^T 1{|D|^2 <= beta_sq}]``."""
        sl = self._cut(beta_sq, "at_most")
        D = self.diff[sl]
        return (D * self.weights[sl, None]).T @ D


_PAIR_CACHE: dict = {}


def pair_sample(spec: DistributionSpec, n_mc: int = DEFAULT_MC, seed: int = 0,
                max_pairs: int = MAX_EXACT_PAIRS) -> PairSample:
    key = (spec.fingerprint(), n_mc, seed, max_pairs)
    if key in _PAIR_CACHE:
        return _PAIR_CACHE[key]
    disc = as_discrete(spec)
    if disc is not None and disc[1].size ** 2 <= max_pairs:
        atoms, w = disc
        A = w.size
        i, j = np.divmod(np.arange(A * A), A)
        ps = PairSample(atoms[i], atoms[j], w[i] * w[j], exact=True)
    else:
        x = sample(spec, n_mc, seed, 0)
        xp = sample(spec, n_mc, seed, 1)
        ps = PairSample(x, xp, np.full(n_mc, 1.0 / n_mc), exact=False)
    if len(_PAIR_CACHE) > 16:
        _PAIR_CACHE.clear()
    _PAIR_CACHE[key] = ps
    return ps


def difference_second_moment(spec: DistributionSpec, beta_sq: float, scale: float = 1.0,
                             pairs: Optional[PairSample] = None) -> np.ndarray:
    """``scale^2 E[(X'-X)(X'-X)^T 1{|X'-X|^2 <= beta_sq}]``."""
    if beta_sq <= 0 or scale <= 0:
        raise ValueError("beta_sq and scale must be positive")
    pairs = pairs if pairs is not None else pair_sample(spec)
    return scale**2 * pairs.truncated_second_moment(beta_sq)


def difference_abs_moment(spec: DistributionSpec, q: float, threshold_sq: Optional[float] = None,
                          side: str = "above", pairs: Optional[PairSample] = None) -> float:
    """``E[|X'-X|^q 1]``; ``above`` keeps ``|D|^2 >= t``, ``below`` keeps ``|D|^2 < t``."""
    if q < 0:
        raise ValueError("q must be non-negative")
    pairs = pairs if pairs is not None else pair_sample(spec)
    return pairs.abs_moment(q, threshold_sq, side)


# -- exact one-dimensional convolution powers -----------------------------------------

@dataclass(frozen=True, eq=False)
class Discrete1D:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.size != w.size or a.size == 0:
            raise ValueError("atoms and weights must be non-empty and of equal length")
        if np.any(np.diff(a) <= 0):
            raise ValueError("atoms must be strictly increasing")
        if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must be non-negative and sum to 1 (sum={w.sum()!r})")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_spec(cls, spec: DistributionSpec) -> "Discrete1D":
        if spec.dim != 1:
            raise ValueError("Discrete1D needs a one-dimensional law")
        disc = as_discrete(spec)
        if disc is None:
            raise ValueError(f"{spec.label} is not finite-atom")
        return _merged(disc[0].ravel(), disc[1], 0.0)

    def mean(self) -> float:
        return float(self.weights @ self.atoms)

    def variance(self) -> float:
        m = self.mean()
        return float(self.weights @ (self.atoms - m) ** 2)

    def moment_abs(self, p: float) -> float:
        return float(self.weights @ np.abs(self.atoms) ** p)


def _merged(atoms: np.ndarray, weights: np.ndarray, merge_eps: float) -> Discrete1D:
    order = np.argsort(atoms, kind="stable")
    a = atoms[order]
    w = weights[order]
    keep = w > 0
    a, w = a[keep], w[keep]
    if a.size == 0:
        raise ValueError("law has no positive-weight atoms")
    new_group = np.concatenate([[True], np.diff(a) > merge_eps])
    gid = np.cumsum(new_group) - 1
    wsum = np.bincount(gid, weights=w)
    # weighted position keeps the mean exact when float noise splits an atom
    apos = np.bincount(gid, weights=w * a) / wsum
    first = a[new_group]
    apos = np.where(np.isfinite(apos), apos, first)
    if np.any(np.diff(apos) <= 0):
        apos = first
    return Discrete1D(apos, wsum / wsum.sum())


def _lattice(atoms: np.ndarray, tol: float = 1e-9, max_den: int = 64) -> Optional[tuple[float, float, np.ndarray]]:
    """``(origin, step, integer offsets)`` when the atoms lie on a lattice."""
    if atoms.size == 1:
        return float(atoms[0]), 1.0, np.zeros(1, dtype=np.int64)
    a0 = atoms[0]
    gap = float(np.min(np.diff(atoms)))
    for den in range(1, max_den + 1):
        h = gap / den
        k = np.rint((atoms - a0) / h)
        if np.all(np.abs(k * h - (atoms - a0)) <= tol * max(1.0, float(np.max(np.abs(atoms))))):
            return float(a0), h, k.astype(np.int64)
    return None


def _pmf_power(pmf: np.ndarray, n: int) -> np.ndarray:
    def conv(a, b):
        if a.size * b.size <= 4 * 10**6:
            out = np.convolve(a, b)
        else:
            out = signal.fftconvolve(a, b)
        return np.clip(out, 0.0, None)

    result = np.ones(1)
    base = pmf
    while n:
        if n & 1:
            result = conv(result, base)
        n >>= 1
        if n:
            base = conv(base, base)
    return result / result.sum()


def convolve_power(law, n: int, merge_eps: float = 1e-12,
                   max_atoms: int = MAX_CONVOLUTION_ATOMS) -> Discrete1D:
    """Exact law of ``(X_1 + ... + X_n) / sqrt(n)`` for a 1-d finite-atom law."""
    if n < 1:
        raise ValueError("n must be positive")
    base = law if isinstance(law, Discrete1D) else Discrete1D.from_spec(law)
    if n == 1:
        return base
    a, w = base.atoms, base.weights
    root_n = math.sqrt(n)
    lat = _lattice(a)
    if lat is not None:
        a0, h, k = lat
        span = int(k.max()) * n + 1
        if span > max_atoms:
            raise AtomExplosionError(f"{span} lattice atoms exceed cap {max_atoms}")
        if k.size == 2:
            # two atoms: binomial pmf is exact in log space
            j = np.arange(n + 1)
            pw = stats.binom.pmf(j, n, w[1])
            offsets = j * int(k[1])
            pmf = np.zeros(span)
            pmf[offsets] = pw
        else:
            base_pmf = np.zeros(int(k.max()) + 1)
            np.add.at(base_pmf, k, w)
            pmf = _pmf_power(base_pmf, n)
        atoms = (n * a0 + h * np.arange(span)) / root_n
        keep = pmf > 0
        pmf = pmf[keep]
        return Discrete1D(atoms[keep], pmf / pmf.sum())

    # generic merge-based repeated squaring
    def add(x: Discrete1D, y: Discrete1D) -> Discrete1D:
        if x.atoms.size * y.atoms.size > max_atoms * 4:
            raise AtomExplosionError("pairwise sum table exceeds cap")
        out = _merged(np.add.outer(x.atoms, y.atoms).ravel(), np.multiply.outer(x.weights, y.weights).ravel(),
                      merge_eps)
        if out.atoms.size > max_atoms:
            raise AtomExplosionError(f"{out.atoms.size} atoms exceed cap {max_atoms}")
        return out

    result = None
    power = base
    m = n
    while m:
        if m & 1:
            result = power if result is None else add(result, power)
        m >>= 1
        if m:
            power = add(power, power)
    return Discrete1D(result.atoms / root_n, result.weights)
