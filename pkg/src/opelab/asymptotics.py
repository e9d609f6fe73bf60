"""Asymptotic diagnostics: Nevai functionals, bulk universality, equilibrium
densities, and finite-n decay trends standing in for o(1)/o(n) statements."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .kernel import CDKernel, kernel_sum, kernel_tilde, scaled_kernel
from .linstat import ScaledStatistic, TestFunction, exact_scaled_variance
from .measures import Measure

__all__ = [
    "EquilibriumDensity",
    "DecayDiagnostic",
    "arcsine_density",
    "semicircle_density",
    "sine_kernel",
    "nevai_integral",
    "alpha_nevai_functional",
    "concentration_mass",
    "universality_error",
    "totik_error",
    "variance_decay_diagnostic",
    "decay_diagnostic",
]

_DEFAULT_S_GRID = tuple(np.linspace(-2.0, 2.0, 21))


@dataclass(frozen=True)
class EquilibriumDensity:
    """A limiting spectral density with its support."""

    kind: str
    evaluator: Callable
    support: tuple[float, float]

    def __call__(self, x):
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)


def arcsine_density() -> EquilibriumDensity:
    """Equilibrium measure of [-1, 1]: 1 / (pi sqrt(1 - x^2))."""

    def ev(x):
        x = np.asarray(x, dtype=float)
        return 1.0 / (np.pi * np.sqrt(np.maximum(1.0 - x * x, 0.0)))

    return EquilibriumDensity("ArcsineUnitInterval", ev, (-1.0, 1.0))


def semicircle_density(measure: Measure, n: int) -> EquilibriumDensity:
    """Semicircle law for the varying Gaussian weight at rank n.

    The support radius is read off the recurrence: the spectral edge is
    max_k (a_k + 2 b_{k+1}) over the first n coefficients.
    """
    coeffs = measure.recurrence(n)
    a = coeffs.diag[:n]
    b = coeffs.offdiag[:n]
    radius = float(np.max(a + 2.0 * b))

    def ev(x):
        x = np.asarray(x, dtype=float)
        return 2.0 / (np.pi * radius * radius) * np.sqrt(
            np.maximum(radius * radius - x * x, 0.0))

    return EquilibriumDensity("SemicircleVaryingGaussian", ev, (-radius, radius))


@dataclass(frozen=True)
class DecayDiagnostic:
    """Values of a diagnostic along an n-grid, with trend summaries."""

    n_grid: tuple
    values: tuple
    is_decreasing: bool
    fit_slope: float


def decay_diagnostic(n_grid: Sequence[int], values: Sequence[float]) -> DecayDiagnostic:
    vals = np.asarray(values, dtype=float)
    ns = np.asarray(n_grid, dtype=float)
    if vals.size != ns.size or vals.size < 2:
        raise PreconditionError("need matching n_grid and values of length >= 2")
    if not np.all(np.isfinite(vals)):
        raise PreconditionError("diagnostic values must be finite")
    dec = bool(np.all(np.diff(vals) < 0.0))
    pos = vals > 0.0
    if np.count_nonzero(pos) >= 2:
        slope = float(np.polyfit(np.log(ns[pos]), np.log(vals[pos]), 1)[0])
    else:
        slope = 0.0
    return DecayDiagnostic(tuple(int(k) for k in n_grid), tuple(vals), dec, slope)


def sine_kernel(a: float, b: float) -> float:
    """sin(pi(b-a)) / (pi(b-a)), with the removable singularity set to 1."""
    return float(np.sinc(b - a))


# ---------------------------------------------------------------------------
# Panel quadrature against the weight, robust at support endpoints
# ---------------------------------------------------------------------------

def _panel_rule_theta(measure: Measure, lo: float, hi: float, n: int):
    """GL panels for int_{lo}^{hi} g(y) dmu(y) on a compact support.

    Works in theta = arccos of the affine map so that integrable endpoint
    singularities of the weight are tamed by the Jacobian.
    """
    slo, shi = measure.support
    half, mid = 0.5 * (shi - slo), 0.5 * (shi + slo)
    lo, hi = max(lo, slo), min(hi, shi)
    ta = math.acos(np.clip((hi - mid) / half, -1.0, 1.0))
    tb = math.acos(np.clip((lo - mid) / half, -1.0, 1.0))
    npanels = max(32, int(2 * n * (tb - ta)) + 1)
    gx, gw = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(ta, tb, npanels + 1)
    ph = 0.5 * np.diff(edges)
    pm = 0.5 * (edges[:-1] + edges[1:])
    theta = (pm[:, None] + ph[:, None] * gx[None, :]).ravel()
    y = mid + half * np.cos(theta)
    w = (ph[:, None] * gw[None, :]).ravel() * measure.weight(y) * half * np.sin(theta)
    return y, w


def _panel_rule_line(measure: Measure, lo: float, hi: float, n: int):
    dens = max(1.0, 2.0 * n / max(hi - lo, 1e-12))
    npanels = max(32, int(dens * (hi - lo)) + 1)
    gx, gw = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(lo, hi, npanels + 1)
    ph = 0.5 * np.diff(edges)
    pm = 0.5 * (edges[:-1] + edges[1:])
    y = (pm[:, None] + ph[:, None] * gx[None, :]).ravel()
    w = (ph[:, None] * gw[None, :]).ravel() * measure.weight(y)
    return y, w


def _restricted_rule(kern: CDKernel, lo: float, hi: float):
    slo, shi = kern.measure.support
    if math.isfinite(slo) and math.isfinite(shi):
        return _panel_rule_theta(kern.measure, lo, hi, kern.n)
    # truncate an unbounded window at the spectral edge plus a wide margin
    coeffs = kern.coeffs
    edge = float(np.max(np.abs(coeffs.diag[:kern.n]) + 2.0 * coeffs.offdiag[:kern.n]))
    pad = 8.0 * max(coeffs.offdiag[0], 1e-6)
    lo = max(lo, -(edge + pad))
    hi = min(hi, edge + pad)
    return _panel_rule_line(kern.measure, lo, hi, kern.n)


# ---------------------------------------------------------------------------
# Nevai-type functionals
# ---------------------------------------------------------------------------

def nevai_integral(kern: CDKernel, f: TestFunction, x: float, m: int | None = None) -> float:
    """int (f(y) - f(x)) K_n(x,y)^2 / K_n(x,x) dmu(y)."""
    kxx = float(kernel_sum(kern, x, x))
    if kxx <= 0.0:
        raise PreconditionError("kernel vanishes on the diagonal")
    nodes, weights = _nevai_nodes(kern, f, m)
    kxy = kernel_sum(kern, x, nodes)
    term1 = float(np.sum(weights * f(nodes) * kxy * kxy))
    return (term1 - f(x) * kxx) / kxx


def _nevai_nodes(kern: CDKernel, f: TestFunction, m: int | None):
    """Nodes resolving both f and the degree-(2n-2) kernel square."""
    if f.support is not None and all(math.isfinite(v) for v in f.support):
        return _restricted_rule(kern, f.support[0], f.support[1])
    size = m if m is not None else 4 * kern.n + 256
    if size < kern.n:
        raise PreconditionError(f"quadrature size {size} below rank {kern.n}")
    return kern.measure.gauss_rule(size)


def alpha_nevai_functional(kern: CDKernel, f: TestFunction, alpha: float, xstar: float,
                           s_grid: Optional[Sequence[float]] = None,
                           m: int | None = None) -> float:
    """sup_s |int (f(s) - f(n^a(y-x*))) K(x_s,y)^2 / K(x_s,x_s) dmu(y)|,
    where x_s = x* + s/n^a."""
    if not (0.0 <= alpha < 1.0):
        raise PreconditionError("alpha must lie in [0, 1)")
    if s_grid is None:
        s_grid = _DEFAULT_S_GRID
    n = kern.n
    scale = float(n) ** alpha
    lo, hi = kern.measure.support
    stat = ScaledStatistic(f, alpha, xstar)
    from .linstat import scaled_function

    ft = scaled_function(stat, n)
    nodes, weights = _nevai_nodes(kern, ft, m)
    fvals = ft(nodes)
    worst = 0.0
    for s in s_grid:
        xs = xstar + s / scale
        if not (lo <= xs <= hi):
            raise DomainError(f"evaluation point {xs} outside the support")
        kxy = kernel_sum(kern, xs, nodes)
        kss = float(kernel_sum(kern, xs, xs))
        mass = float(np.sum(weights * kxy * kxy))
        term = float(np.sum(weights * fvals * kxy * kxy))
        val = (float(f(s)) * mass - term) / kss
        worst = max(worst, abs(val))
    return worst


def concentration_mass(kern: CDKernel, xstar: float, delta: float,
                       m: int | None = None) -> float:
    """Mass of K_n(x*,y)^2 dmu(y) / K_n(x*,x*) within |y - x*| < delta."""
    if delta <= 0.0:
        raise PreconditionError("delta must be positive")
    kxx = float(kernel_sum(kern, xstar, xstar))
    lo, hi = kern.measure.support
    if math.isfinite(lo) and math.isfinite(hi) and xstar - delta <= lo and xstar + delta >= hi:
        # full support: use the exact mu-Gauss rule (reproducing property)
        nodes, weights = kern.measure.gauss_rule(max(kern.n, 64) if m is None else m)
    else:
        nodes, weights = _restricted_rule(kern, xstar - delta, xstar + delta)
    kxy = kernel_sum(kern, xstar, nodes)
    return float(np.sum(weights * kxy * kxy)) / kxx


# ---------------------------------------------------------------------------
# Universality and density convergence
# ---------------------------------------------------------------------------

def universality_error(kern: CDKernel, x: float, box: float = 2.0, grid: int = 41) -> float:
    """sup over an (a,b) grid in [-box, box]^2 of the deviation of the
    rescaled bulk kernel from the sine kernel."""
    pts = np.linspace(-box, box, grid)
    worst = 0.0
    for a in pts:
        for b in pts:
            err = abs(scaled_kernel(kern, x, float(a), float(b)) - sine_kernel(a, b))
            worst = max(worst, err)
    return worst


def totik_error(kern: CDKernel, rho: EquilibriumDensity, interval: tuple[float, float],
                grid: int = 201) -> float:
    """sup over the interval grid of |w(x) K_n(x,x) / n - rho(x)|."""
    x = np.linspace(interval[0], interval[1], grid)
    ktilde = np.asarray(kernel_tilde(kern, x, x))
    return float(np.max(np.abs(ktilde / kern.n - rho(x))))


def variance_decay_diagnostic(measure: Measure, f: TestFunction, alpha: float,
                              xstar: float, n_grid: Sequence[int]) -> DecayDiagnostic:
    """n^{alpha-1} Var X_{f,alpha,x*} along an n-grid (should tend to 0)."""
    if not (0.0 < alpha < 1.0):
        raise PreconditionError("alpha must lie in (0, 1)")
    values = []
    for n in n_grid:
        kern = CDKernel(measure, int(n))
        stat = ScaledStatistic(f, alpha, xstar)
        values.append(float(n) ** (alpha - 1.0) * exact_scaled_variance(kern, stat))
    return decay_diagnostic(list(n_grid), values)
