"""Reference probability measures, orthonormal polynomial systems and Gauss rules.

All polynomial systems use the orthonormal three-term recurrence

    b_{k+1} p_{k+1}(x) = (x - a_k) p_k(x) - b_k p_{k-1}(x),   p_{-1} = 0, p_0 = 1,

so the leading-coefficient ratio gamma_{n-1}/gamma_n equals b_n.  Every measure
is a probability measure; discretized measures are normalized at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import betaln, roots_hermite

from .errors import (
    ConfigurationError,
    DegenerateMeasureError,
    InstabilityError,
    NumericalError,
    PreconditionError,
)

__all__ = [
    "RecurrenceCoefficients",
    "Measure",
    "chebyshev",
    "legendre",
    "jacobi",
    "varying_gaussian",
    "varying_gaussian_measure",
    "discretized",
    "register_weight",
    "classical_recurrence",
    "stieltjes_recurrence",
    "eval_orthonormal",
    "orthonormal_prefix",
    "design_matrix",
    "gauss_quadrature",
    "gauss_quadrature_scaled",
    "leading_ratio",
]


@dataclass(frozen=True)
class RecurrenceCoefficients:
    """Jacobi-matrix coefficients: diag a_0..a_{D-1}, offdiag b_1..b_D."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float)
        offdiag = np.asarray(self.offdiag, dtype=float)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)
        if diag.shape != offdiag.shape or diag.ndim != 1:
            raise ConfigurationError("diag and offdiag must be 1-d of equal length")
        if not np.all(np.isfinite(diag)) or not np.all(np.isfinite(offdiag)):
            raise ConfigurationError("non-finite recurrence coefficient")
        if np.any(offdiag <= 0.0):
            k = int(np.argmax(offdiag <= 0.0))
            raise InstabilityError(k + 1, float(offdiag[k]))

    @property
    def depth(self) -> int:
        return len(self.diag)


def eval_orthonormal(coeffs: RecurrenceCoefficients, k: int, x) -> np.ndarray | float:
    """Value of the orthonormal polynomial p_k at x (forward recurrence)."""
    return orthonormal_prefix(coeffs, k, x)[k]


def orthonormal_prefix(coeffs: RecurrenceCoefficients, k: int, x) -> np.ndarray:
    """All of p_0(x),...,p_k(x) in one forward-recurrence pass.

    Returns an array of shape (k+1,) + shape(x).
    """
    if k < 0 or k > coeffs.depth:
        raise PreconditionError(f"index {k} out of range for depth {coeffs.depth}")
    xv = np.asarray(x, dtype=float)
    out = np.empty((k + 1,) + xv.shape)
    out[0] = 1.0
    if k == 0:
        return out
    a, b = coeffs.diag, coeffs.offdiag
    out[1] = (xv - a[0]) / b[0]
    for j in range(1, k):
        out[j + 1] = ((xv - a[j]) * out[j] - b[j - 1] * out[j - 1]) / b[j]
    return out


def design_matrix(coeffs: RecurrenceCoefficients, n: int, x) -> np.ndarray:
    """Matrix P with P[i, j] = p_j(x_i), j < n."""
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    return orthonormal_prefix(coeffs, n - 1, xv).T


def gauss_quadrature(coeffs: RecurrenceCoefficients, m: int):
    """m-point Gauss rule for the underlying probability measure (Golub-Welsch).

    Exact for polynomials of degree <= 2m-1; weights are positive and sum to 1.
    """
    if m < 1 or m > coeffs.depth:
        raise PreconditionError(f"need 1 <= m <= depth, got m={m}, depth={coeffs.depth}")
    try:
        vals, vecs = eigh_tridiagonal(coeffs.diag[:m], coeffs.offdiag[: m - 1])
    except Exception as exc:  # pragma: no cover - eigensolver failures are rare
        raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc
    weights = vecs[0, :] ** 2
    return vals, weights


def gauss_quadrature_scaled(coeffs: RecurrenceCoefficients, m: int, ncols: int):
    """m-point Gauss rule plus the sqrt-weight-scaled design matrix.

    Returns (nodes, weights, S) with S[i, j] = sqrt(w_i) p_j(x_i) for j < ncols,
    read directly off the Jacobi-matrix eigenvectors.  Every entry of S is O(1)
    even where the weights underflow and the polynomial values overflow (e.g.
    Gaussian-type weights at large m), which the forward recurrence cannot
    guarantee.
    """
    if not (1 <= ncols <= m):
        raise PreconditionError(f"need 1 <= ncols <= m, got ncols={ncols}, m={m}")
    if m < 1 or m > coeffs.depth:
        raise PreconditionError(f"need 1 <= m <= depth, got m={m}, depth={coeffs.depth}")
    try:
        vals, vecs = eigh_tridiagonal(coeffs.diag[:m], coeffs.offdiag[: m - 1])
    except Exception as exc:  # pragma: no cover - eigensolver failures are rare
        raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc
    # column i of vecs is the unit eigenvector (s_i sqrt(w_i) p_j(x_i))_j
    sign = np.where(vecs[0, :] >= 0.0, 1.0, -1.0)
    weights = vecs[0, :] ** 2
    S = (vecs[:ncols, :] * sign[None, :]).T
    return vals, weights, S


def leading_ratio(coeffs: RecurrenceCoefficients, n: int) -> float:
    """The Christoffel-Darboux prefactor gamma_{n-1}/gamma_n, which equals b_n."""
    if n < 1 or n > coeffs.depth:
        raise PreconditionError(f"need 1 <= n <= depth, got n={n}")
    return float(coeffs.offdiag[n - 1])


# ---------------------------------------------------------------------------
# Closed-form recurrences for the classical families
# ---------------------------------------------------------------------------

def _chebyshev_coeffs(depth: int) -> RecurrenceCoefficients:
    b = np.full(depth, 0.5)
    b[0] = 1.0 / math.sqrt(2.0)
    return RecurrenceCoefficients(np.zeros(depth), b)


def _legendre_coeffs(depth: int) -> RecurrenceCoefficients:
    k = np.arange(1, depth + 1, dtype=float)
    b = k / np.sqrt(4.0 * k * k - 1.0)
    return RecurrenceCoefficients(np.zeros(depth), b)


def _jacobi_coeffs(depth: int, a: float, b: float) -> RecurrenceCoefficients:
    if a <= -1.0 or b <= -1.0:
        raise ConfigurationError("Jacobi exponents must exceed -1")
    diag = np.empty(depth)
    beta = np.empty(depth)
    diag[0] = (b - a) / (a + b + 2.0)
    if depth >= 1:
        beta[0] = 4.0 * (a + 1.0) * (b + 1.0) / ((a + b + 2.0) ** 2 * (a + b + 3.0))
    for k in range(1, depth):
        s = 2.0 * k + a + b
        diag[k] = (b * b - a * a) / (s * (s + 2.0))
        if k >= 1:
            kk = k + 1  # beta index: beta[k] = beta_{k+1} monic
            ss = 2.0 * kk + a + b
            beta[k] = (
                4.0 * kk * (kk + a) * (kk + b) * (kk + a + b)
                / (ss * ss * (ss + 1.0) * (ss - 1.0))
            )
    return RecurrenceCoefficients(diag, np.sqrt(beta))


def _varying_gaussian_coeffs(depth: int, n: int) -> RecurrenceCoefficients:
    k = np.arange(1, depth + 1, dtype=float)
    return RecurrenceCoefficients(np.zeros(depth), np.sqrt(k / float(n)))


_CLASSICAL = {
    "chebyshev1st": lambda depth, params: _chebyshev_coeffs(depth),
    "legendre": lambda depth, params: _legendre_coeffs(depth),
    "jacobi": lambda depth, params: _jacobi_coeffs(
        depth, params["a_exp"], params["b_exp"]
    ),
    "varying_gaussian": lambda depth, params: _varying_gaussian_coeffs(
        depth, params["n"]
    ),
}


def classical_recurrence(family: str, depth: int, params: dict | None = None) -> RecurrenceCoefficients:
    """Exact orthonormal recurrence coefficients for a classical family."""
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    try:
        builder = _CLASSICAL[family]
    except KeyError:
        raise ConfigurationError(f"no closed-form recurrence for family {family!r}")
    return builder(depth, params or {})


# ---------------------------------------------------------------------------
# Discretized Stieltjes procedure
# ---------------------------------------------------------------------------

def _chebyshev_grid(weight: Callable, lo: float, hi: float, grid: int):
    """Discretization of weight(x)dx on [lo, hi] by a Gauss-Chebyshev rule."""
    i = np.arange(1, grid + 1)
    theta = (2.0 * i - 1.0) * math.pi / (2.0 * grid)
    t = np.cos(theta)
    half = 0.5 * (hi - lo)
    x = 0.5 * (hi + lo) + half * t
    w = (math.pi / grid) * half * np.sin(theta) * np.asarray(weight(x), dtype=float)
    return x, w


def _hermite_grid(weight: Callable, grid: int, scale: float = 1.0):
    """Discretization of weight(x)dx on the line by a scaled Gauss-Hermite rule.

    The substitution x = scale * t keeps the correction factor e^{t^2} w(scale t)
    bounded for Gaussian-like weights of matching scale.
    """
    t, hw = roots_hermite(grid)
    x = scale * t
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        logw = np.log(np.asarray(weight(x), dtype=float))
        factor = np.exp(t * t + logw)
    factor = np.where(np.isfinite(factor), factor, 0.0)
    w = scale * hw * factor
    return x, np.where(np.isfinite(w), w, 0.0)


def _discrete_stieltjes(x: np.ndarray, w: np.ndarray, depth: int) -> RecurrenceCoefficients:
    """Lanczos/Stieltjes recursion on a discrete measure, fully reorthogonalized."""
    mass = float(np.sum(w))
    if not mass > 0.0:
        raise DegenerateMeasureError("weight integrates to zero on the support")
    w = w / mass
    diag = np.empty(depth)
    off = np.empty(depth)
    q_prev = np.zeros_like(x)
    q = np.ones_like(x)
    basis = [q]
    b = 0.0
    for k in range(depth):
        a = float(np.sum(w * x * q * q))
        v = (x - a) * q - b * q_prev
        for u in basis:  # full reorthogonalization; depth is small
            v -= np.sum(w * v * u) * u
        b2 = float(np.sum(w * v * v))
        if not (b2 > 0.0 and np.isfinite(b2)):
            raise InstabilityError(k + 1, b2)
        b = math.sqrt(b2)
        diag[k] = a
        off[k] = b
        q_prev, q = q, v / b
        basis.append(q)
    return RecurrenceCoefficients(diag, off)


def stieltjes_recurrence(
    weight: Callable,
    support: tuple[float, float],
    depth: int,
    grid: int,
    scale: float = 1.0,
) -> RecurrenceCoefficients:
    """Recurrence coefficients of the normalized measure weight(x)dx on support.

    Compact supports are discretized with a Gauss-Chebyshev rule, the whole
    line with a scaled Gauss-Hermite rule.  Increasing `grid` converges to the
    true coefficients.
    """
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    if grid < 50 * depth:
        raise PreconditionError(f"grid must be >= 50*depth = {50 * depth}")
    lo, hi = support
    if math.isinf(lo) or math.isinf(hi):
        x, w = _hermite_grid(weight, grid, scale=scale)
    else:
        x, w = _chebyshev_grid(weight, lo, hi, grid)
    if np.any(w < -1e-14 * max(1.0, float(np.max(np.abs(w))))):
        raise DegenerateMeasureError("weight is negative on the support")
    return _discrete_stieltjes(x, np.clip(w, 0.0, None), depth)


# ---------------------------------------------------------------------------
# Measure
# ---------------------------------------------------------------------------

_WEIGHT_REGISTRY: dict[str, Callable] = {}


def register_weight(key: str, evaluator: Callable) -> None:
    """Register a named weight evaluator for discretized measures."""
    _WEIGHT_REGISTRY[key] = evaluator


@dataclass
class Measure:
    """A reference probability measure with its orthonormal polynomial system."""

    family: str
    params: dict
    support: tuple[float, float]

    _diag: np.ndarray = field(default=None, repr=False, compare=False)
    _off: np.ndarray = field(default=None, repr=False, compare=False)
    _norm: float = field(default=1.0, repr=False, compare=False)
    _rules: dict = field(default_factory=dict, repr=False, compare=False)

    # -- weight density -----------------------------------------------------

    def weight(self, x) -> np.ndarray:
        """Density of the (normalized) measure with respect to Lebesgue."""
        xv = np.asarray(x, dtype=float)
        if self.family == "chebyshev1st":
            with np.errstate(divide="ignore", invalid="ignore"):
                val = 1.0 / (math.pi * np.sqrt(1.0 - xv * xv))
            return np.where(np.abs(xv) < 1.0, val, 0.0)
        if self.family == "legendre":
            return np.where(np.abs(xv) <= 1.0, 0.5, 0.0)
        if self.family == "jacobi":
            return np.exp(self.log_weight(xv))
        if self.family == "varying_gaussian":
            n = self.params["n"]
            return math.sqrt(n / (2.0 * math.pi)) * np.exp(-0.5 * n * xv * xv)
        if self.family == "discretized":
            ev = _WEIGHT_REGISTRY[self.params["weight_key"]]
            lo, hi = self.support
            inside = (xv >= lo) & (xv <= hi)
            return np.where(inside, np.asarray(ev(xv), dtype=float) / self._norm, 0.0)
        raise ConfigurationError(f"unknown family {self.family!r}")

    def log_weight(self, x) -> np.ndarray:
        """log of the density, computed stably (useful for large-n Gaussian)."""
        xv = np.asarray(x, dtype=float)
        if self.family == "varying_gaussian":
            n = self.params["n"]
            return 0.5 * math.log(n / (2.0 * math.pi)) - 0.5 * n * xv * xv
        if self.family == "jacobi":
            a, b = self.params["a_exp"], self.params["b_exp"]
            logc = (a + b + 1.0) * math.log(2.0) + betaln(a + 1.0, b + 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                lw = a * np.log(1.0 - xv) + b * np.log(1.0 + xv) - logc
            return np.where(np.abs(xv) < 1.0, lw, -np.inf)
        with np.errstate(divide="ignore"):
            return np.log(self.weight(xv))

    @property
    def compact(self) -> bool:
        return math.isfinite(self.support[0]) and math.isfinite(self.support[1])

    # -- recurrence coefficients, lazily extended ---------------------------

    def recurrence(self, depth: int) -> RecurrenceCoefficients:
        if depth < 1:
            raise PreconditionError("depth must be >= 1")
        if self._diag is None or len(self._diag) < depth:
            target = max(depth, 16)
            if self.family == "discretized":
                grid = max(int(self.params.get("grid", 0)), 50 * target)
                coeffs = stieltjes_recurrence(
                    self.weight, self.support, target, grid,
                    scale=self.params.get("scale", 1.0),
                )
            else:
                coeffs = classical_recurrence(self.family, target, self.params)
            self._diag, self._off = coeffs.diag, coeffs.offdiag
        return RecurrenceCoefficients(self._diag[:depth], self._off[:depth])

    def gauss_rule(self, m: int):
        """Cached m-point Gauss rule with respect to the measure."""
        if m not in self._rules:
            self._rules[m] = gauss_quadrature(self.recurrence(m), m)
        return self._rules[m]

    def gauss_rule_scaled(self, m: int, ncols: int):
        """Cached m-point Gauss rule with the sqrt-weight-scaled design."""
        key = ("scaled", m, ncols)
        if key not in self._rules:
            self._rules[key] = gauss_quadrature_scaled(self.recurrence(m), m, ncols)
        return self._rules[key]

    # -- serialization ------------------------------------------------------

    def to_json(self, depth: int = 0) -> dict:
        return {"family": self.family, "params": dict(self.params), "depth": depth}

    @classmethod
    def from_json(cls, obj: dict) -> "Measure":
        family = obj["family"]
        params = obj.get("params", {})
        if family == "chebyshev1st":
            return chebyshev()
        if family == "legendre":
            return legendre()
        if family == "jacobi":
            return jacobi(params["a_exp"], params["b_exp"])
        if family == "varying_gaussian":
            return varying_gaussian(int(params["n"]))
        if family == "discretized":
            return discretized(
                params["weight_key"],
                tuple(params["support"]),
                grid=int(params.get("grid", 1000)),
                scale=float(params.get("scale", 1.0)),
            )
        raise ConfigurationError(f"unknown family {family!r}")


def chebyshev() -> Measure:
    """Arcsine probability measure dx / (pi sqrt(1-x^2)) on [-1, 1]."""
    return Measure("chebyshev1st", {}, (-1.0, 1.0))


def legendre() -> Measure:
    """Uniform probability measure dx / 2 on [-1, 1]."""
    return Measure("legendre", {}, (-1.0, 1.0))


def jacobi(a_exp: float, b_exp: float) -> Measure:
    """Normalized Jacobi weight (1-x)^a (1+x)^b on [-1, 1]."""
    return Measure("jacobi", {"a_exp": float(a_exp), "b_exp": float(b_exp)}, (-1.0, 1.0))


def varying_gaussian(n: int) -> Measure:
    """Scaled Gaussian weight sqrt(n/2pi) exp(-n x^2 / 2) on the line."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    return Measure("varying_gaussian", {"n": int(n)}, (-math.inf, math.inf))


def varying_gaussian_measure(n: int) -> Measure:
    """Alias kept for symmetry with the classical constructors."""
    return varying_gaussian(n)


def discretized(
    weight_key: str,
    support: tuple[float, float],
    grid: int = 1000,
    scale: float = 1.0,
) -> Measure:
    """User-supplied weight, referenced by registry key, normalized to mass 1."""
    if weight_key not in _WEIGHT_REGISTRY:
        raise ConfigurationError(f"weight key {weight_key!r} not registered")
    ev = _WEIGHT_REGISTRY[weight_key]
    lo, hi = support
    if math.isinf(lo) or math.isinf(hi):
        x, w = _hermite_grid(ev, grid, scale=scale)
    else:
        x, w = _chebyshev_grid(ev, lo, hi, grid)
    mass = float(np.sum(w))
    if not mass > 0.0:
        raise DegenerateMeasureError("weight integrates to zero on the support")
    m = Measure(
        "discretized",
        {"weight_key": weight_key, "support": list(support), "grid": int(grid),
         "scale": float(scale)},
        (float(lo), float(hi)),
    )
    m._norm = mass
    return m
