"""Dense tensor algebra on (R^d)^{⊗k} and multidimensional Hermite tensors.

A tensor of order ``k`` over ``R^d`` is a numpy array of shape ``(d,) * k``
(row-major multi-index).  Order 0 is a 0-d array holding a scalar.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import _rng

MAX_ORDER = 6
MAX_DIM = 16

Tensor = np.ndarray


def _check_caps(d: int, k: int) -> None:
    if k < 0:
        raise ValueError(f"order must be non-negative, got {k}")
    if k > MAX_ORDER:
        raise ValueError(f"order {k} exceeds cap {MAX_ORDER}")
    if d < 1 or d > MAX_DIM:
        raise ValueError(f"dimension {d} outside [1, {MAX_DIM}]")


def order(a: Tensor) -> int:
    return np.ndim(a)


def outer_power(x, k: int) -> Tensor:
    """``x^{⊗k}``; the empty product (k=0) is the scalar 1."""
    x = np.asarray(x, dtype=float).ravel()
    _check_caps(x.size, k)
    out = np.array(1.0)
    for _ in range(k):
        out = np.multiply.outer(out, x)
    return out


def hs_dot(a: Tensor, b: Tensor) -> float:
    """Hilbert-Schmidt scalar product (sum of entrywise products)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def hs_norm(a: Tensor) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.sqrt(np.dot(a.ravel(), a.ravel())))


def contract(M: Tensor, y: Tensor) -> np.ndarray:
    """Vector ``(My)_i = sum_j M_{i,j} y_j`` for ``M`` of order ``k+1``, ``y`` of order ``k``."""
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float)
    if M.ndim != y.ndim + 1:
        raise ValueError(f"order mismatch: M has order {M.ndim}, y has order {y.ndim}")
    if M.ndim == 0 or any(s != M.shape[0] for s in M.shape) or any(s != M.shape[0] for s in y.shape):
        raise ValueError(f"dimension mismatch: {M.shape} vs {y.shape}")
    d = M.shape[0]
    return M.reshape(d, -1) @ y.reshape(-1)


def _he_table(x: np.ndarray, k: int) -> np.ndarray:
    """Monic probabilists' Hermite polynomials He_0..He_k at every entry of ``x``.

    Returns an array of shape ``x.shape + (k+1,)``.
    """
    table = np.empty(x.shape + (k + 1,))
    table[..., 0] = 1.0
    if k >= 1:
        table[..., 1] = x
    for m in range(1, k):
        table[..., m + 1] = x * table[..., m] - m * table[..., m - 1]
    return table


@lru_cache(maxsize=None)
def _multiplicities(d: int, k: int) -> np.ndarray:
    """``counts[c, J]`` = number of times coordinate ``c`` occurs in flat multi-index ``J``."""
    if k == 0:
        return np.zeros((d, 1), dtype=np.intp)
    idx = np.indices((d,) * k).reshape(k, -1)
    counts = np.stack([(idx == c).sum(axis=0) for c in range(d)])
    counts.setflags(write=False)
    return counts


def hermite_tensor_batch(X, k: int) -> np.ndarray:
    """Hermite tensors ``H_k(x)`` for every row of ``X``; shape ``(N,) + (d,)*k``.

    Uses ``H_k(x)_j = (-1)^k prod_c He_{m_c(j)}(x_c)`` where ``m_c(j)`` is the
    multiplicity of coordinate ``c`` in ``j``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, d = X.shape
    _check_caps(d, k)
    table = _he_table(X, k)  # (N, d, k+1)
    counts = _multiplicities(d, k)
    out = np.ones((N, counts.shape[1]))
    for c in range(d):
        out *= table[:, c, counts[c]]
    if k % 2:
        out = -out
    return out.reshape((N,) + (d,) * k)


def hermite_tensor(x, k: int) -> Tensor:
    """``H_k(x) = e^{|x|^2/2} ∇^k e^{-|x|^2/2}``; symmetric in its indices."""
    x = np.asarray(x, dtype=float).ravel()
    return hermite_tensor_batch(x[None, :], k)[0]


def is_trailing_symmetric(M: Tensor, atol: float = 1e-12) -> bool:
    """True when ``M`` is invariant under permutations of all indices but the first."""
    M = np.asarray(M, dtype=float)
    k = M.ndim - 1
    if k <= 1:
        return True
    scale = max(1.0, float(np.max(np.abs(M))))
    for perm in itertools.permutations(range(1, k + 1)):
        if not np.allclose(M, np.transpose(M, (0,) + perm), atol=atol * scale, rtol=0.0):
            return False
    return True


@dataclass(frozen=True)
class NormEstimate:
    """Monte Carlo estimate of an L_p norm.

    ``exact`` is filled in when a closed form is available for the configuration.
    """

    value: float
    std_error: float
    n_mc: int
    exact: Optional[float] = None


def pnorm_from_powers(powers_sum: float, squares_sum: float, n: int, p: float) -> tuple[float, float]:
    """Turn running sums of ``|v|^p`` and ``|v|^{2p}`` into ``(E|v|^p)^{1/p}`` and its delta-method SE."""
    mean = powers_sum / n
    var = max(squares_sum / n - mean * mean, 0.0)
    se_mean = math.sqrt(var / n) if n > 1 else 0.0
    if mean <= 0.0:
        return 0.0, 0.0
    value = mean ** (1.0 / p)
    return value, value / (p * mean) * se_mean


def contracted_hermite_pnorm(M: Tensor, k: int, p: float, n_mc: int = 1 << 18, seed: int = 0) -> NormEstimate:
    """Estimate ``||M H_k(Z)||_p = E[|M H_k(Z)|^p]^{1/p}`` with ``Z`` standard Gaussian.

    For ``p = 2`` and ``M`` symmetric in its trailing ``k`` indices the exact value
    ``sqrt(k!) ||M||`` is attached as ``exact``.
    """
    M = np.asarray(M, dtype=float)
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    if M.ndim != k + 1:
        raise ValueError(f"M must have order {k + 1}, got {M.ndim}")
    d = M.shape[0]
    _check_caps(d, k)
    flat = M.reshape(d, -1)

    acc = 0.0
    acc2 = 0.0
    for rng, size in _rng.blocks(seed, n_mc):
        Z = rng.standard_normal((size, d))
        H = hermite_tensor_batch(Z, k).reshape(size, -1)
        v = H @ flat.T
        norm_p = np.sum(v * v, axis=1) ** (p / 2.0)
        acc += float(norm_p.sum())
        acc2 += float(np.dot(norm_p, norm_p))
    if not (math.isfinite(acc) and math.isfinite(acc2)):
        raise FloatingPointError("non-finite accumulation in Hermite p-norm")
    value, se = pnorm_from_powers(acc, acc2, n_mc, p)

    exact = None
    if p == 2 and is_trailing_symmetric(M):
        exact = math.sqrt(math.factorial(k)) * hs_norm(M)
    return NormEstimate(value=value, std_error=se, n_mc=n_mc, exact=exact)
