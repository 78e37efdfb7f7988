"""Cosine family of the skew Laplacian (method of images) and its dual.

Grid-based operators act by whole-cell shifts, so ``t`` must be a multiple
of the cell width.  The dual family acts on functions with limits at
+-infinity; those limits are stored next to the grid values and used for
any argument that falls outside the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .kernels import SkewParams, _as_skew
from .model import Grid, LineDensity
from .quadrature import integrate

SHIFT_TOL = 1e-9


class IncommensurateShiftError(ValueError):
    pass


@dataclass(frozen=True)
class GridFunction:
    """Cell-centre samples of a function with finite limits at -inf and +inf."""

    grid: Grid
    values: np.ndarray
    at_minus_inf: float = 0.0
    at_plus_inf: float = 0.0

    def sup_norm(self) -> float:
        return max(
            float(np.max(np.abs(self.values))), abs(self.at_minus_inf), abs(self.at_plus_inf)
        )


def shift_cells(grid: Grid, t: float) -> int:
    k = abs(t) / grid.dx
    n = round(k)
    if abs(k - n) > SHIFT_TOL * max(1.0, k):
        raise IncommensurateShiftError(
            f"t={t!r} is not a whole number of cells (dx={grid.dx!r})"
        )
    return int(n)


def _take(values, idx, below, above):
    n = values.size
    inside = np.clip(idx, 0, n - 1)
    return np.where(idx < 0, below, np.where(idx >= n, above, values[inside]))


def _regions(grid: Grid, k: int):
    i = np.arange(grid.n_cells)
    rel = i - grid.mid  # cell i spans [rel*dx, (rel+1)*dx]
    left_band = (rel < 0) & (rel >= -k)  # centre in (-t, 0)
    right_band = (rel >= 0) & (rel < k)  # centre in (0, t)
    return i, left_band, right_band


def cosine_apply(phi: LineDensity, t: float, params) -> LineDensity:
    """C_{p,q}(t) phi for an integrable density (zero outside the grid)."""
    sp = _as_skew(params)
    g = phi.grid
    k = shift_cells(g, t)
    if k == 0:
        return phi
    v = phi.values
    i, left_band, right_band = _regions(g, k)
    mirror = g.n_cells - 1 - i
    fwd = _take(v, i + k, 0.0, 0.0)
    back = _take(v, i - k, 0.0, 0.0)
    out = 0.5 * (fwd + back)
    c = (sp.q - sp.p) / (2.0 * (sp.p + sp.q))
    out = out + np.where(left_band, c * (_take(v, mirror - k, 0.0, 0.0) + fwd), 0.0)
    out = out + np.where(right_band, -c * (_take(v, mirror + k, 0.0, 0.0) + back), 0.0)
    return LineDensity(g, out)


def cosine_apply_even(phi: LineDensity, t: float, params) -> LineDensity:
    """Alternative form of C_{p,q}(t) valid for even ``phi``."""
    sp = _as_skew(params)
    g = phi.grid
    k = shift_cells(g, t)
    v = phi.values
    i, left_band, right_band = _regions(g, k)
    fwd = _take(v, i + k, 0.0, 0.0)
    back = _take(v, i - k, 0.0, 0.0)
    c = (sp.q - sp.p) / (sp.p + sp.q)
    out = 0.5 * (fwd + back) + c * (np.where(left_band, fwd, 0.0) - np.where(right_band, back, 0.0))
    return LineDensity(g, out)


def dual_cosine_apply(f: GridFunction, t: float, params) -> GridFunction:
    """C*_{p,q}(t) f on grid samples; limits at +-inf are preserved."""
    sp = _as_skew(params)
    g = f.grid
    k = shift_cells(g, t)
    if k == 0:
        return f
    v = f.values
    lo, hi = f.at_minus_inf, f.at_plus_inf
    i, left_band, right_band = _regions(g, k)
    mirror = g.n_cells - 1 - i
    fwd = _take(v, i + k, lo, hi)
    back = _take(v, i - k, lo, hi)
    out = 0.5 * (fwd + back)
    c = (sp.q - sp.p) / (2.0 * (sp.p + sp.q))
    out = out + np.where(left_band, c * (_take(v, mirror - k, lo, hi) - fwd), 0.0)
    out = out + np.where(right_band, -c * (_take(v, mirror + k, lo, hi) - back), 0.0)
    return GridFunction(g, out, lo, hi)


def norm_bound(params) -> float:
    sp = _as_skew(params)
    return 2.0 * max(sp.p, sp.q) / (sp.p + sp.q)


def dual_cosine_eval(f, s, x, params):
    """Pointwise C*_{p,q}(s) f(x) for a vectorised callable ``f``; broadcasts."""
    sp = _as_skew(params)
    s = np.abs(np.asarray(s, dtype=float))
    x = np.asarray(x, dtype=float)
    s, x = np.broadcast_arrays(s, x)
    out = 0.5 * (f(x + s) + f(x - s))
    c = (sp.q - sp.p) / (2.0 * (sp.p + sp.q))
    left = (x > -s) & (x <= 0)
    right = (x > 0) & (x < s)
    if np.any(left):
        out = out + np.where(left, c * (f(-x - s) - f(x + s)), 0.0)
    if np.any(right):
        out = out - np.where(right, c * (f(s - x) - f(x - s)), 0.0)
    return out


def weierstrass_apply(f, t: float, params, x, cutoff: float = 12.0):
    """exp(t/2 Delta*_{p,q}) f(x) via Gaussian averaging of the dual cosine family.

    The s-integral is split at s = |x| where the integrand has a kink and
    truncated at ``cutoff`` standard deviations.
    """
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t!r}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s_max = cutoff * math.sqrt(t)
    kink = np.minimum(np.abs(x), s_max)
    weight = lambda s: np.exp(-(s**2) / (2.0 * t))  # noqa: E731

    def body(s):
        return weight(s) * dual_cosine_eval(f, s, x[:, None], params)

    total = integrate(body, np.zeros_like(x), kink, 24, 16)
    total = total + integrate(body, kink, np.full_like(x, s_max), 24, 16)
    return math.sqrt(2.0 / (math.pi * t)) * total


def dual_cosine_laplace(g, lam: float, params, x, cutoff: float = 40.0):
    """integral_0^inf exp(-lam t) C*(t) g(x) dt by split Gauss-Legendre."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t_max = cutoff / lam
    kink = np.minimum(np.abs(x), t_max)

    def body(t):
        return np.exp(-lam * t) * dual_cosine_eval(g, t, x[:, None], params)

    return integrate(body, np.zeros_like(x), kink, 32, 16) + integrate(
        body, kink, np.full_like(x, t_max), 32, 16
    )


# --- resolvent of the dual generator ----------------------------------------


@dataclass(frozen=True)
class NodeFunction:
    """Samples on nodes x_k = -L + k dx (x = 0 is a node) with limits at +-inf."""

    x: np.ndarray
    values: np.ndarray
    at_minus_inf: float
    at_plus_inf: float

    @classmethod
    def sample(cls, f, half_width: float, dx: float, at_minus_inf: float, at_plus_inf: float):
        m = int(round(half_width / dx))
        x = np.arange(-m, m + 1) * dx
        return cls(x, np.asarray(f(x), dtype=float), at_minus_inf, at_plus_inf)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def zero_index(self) -> int:
        return (self.x.size - 1) // 2


@dataclass(frozen=True)
class DualResolventCoeffs:
    c_minus: float
    c_plus: float
    d_minus: float
    d_plus: float


@dataclass(frozen=True)
class DualResolventResult:
    """f = (lam^2 - Delta*)^{-1} g; ``values[zero_index]`` holds f(0+)."""

    f: NodeFunction
    coeffs: DualResolventCoeffs
    f_at_0m: float
    f_at_0p: float

    def one_sided_derivatives(self) -> tuple[float, float]:
        """(f'(0-), f'(0+)) by second-order one-sided differences."""
        v = self.f.values
        z = self.f.zero_index
        h = self.f.dx
        right = (-3.0 * self.f_at_0p + 4.0 * v[z + 1] - v[z + 2]) / (2.0 * h)
        left = (3.0 * self.f_at_0m - 4.0 * v[z - 1] + v[z - 2]) / (2.0 * h)
        return left, right


def _exp_weights(lam, h):
    """Weights of the two endpoint values for exponentially weighted linear pieces.

    integral_0^h e^{-lam s} (g0 (1 - s/h) + g1 s/h) ds = a g0 + b g1.
    """
    x = lam * h
    e0 = -math.expm1(-x) / lam
    b = (-math.expm1(-x) - x * math.exp(-x)) / (lam * lam * h)
    return e0 - b, b


def _one_sided(values, tail_value, lam, h):
    """For nodes y_0 = 0 < y_1 < ... (spacing h) and g beyond the last node
    equal to ``tail_value``, return
        A_j = int_0^{y_j} e^{-lam (y_j - y)} g(y) dy,
        B_j = int_{y_j}^inf e^{-lam (y - y_j)} g(y) dy.
    """
    near, far = _exp_weights(lam, h)
    decay = math.exp(-lam * h)
    # A_{j+1} = decay A_j + far g_j + near g_{j+1}
    drive_a = far * values[:-1] + near * values[1:]
    a = np.concatenate([[0.0], lfilter([1.0], [1.0, -decay], drive_a)])
    # B_j = decay B_{j+1} + near g_j + far g_{j+1}, started from the flat tail
    drive_b = (near * values[:-1] + far * values[1:])[::-1]
    b_end = tail_value / lam
    zi = np.array([decay * b_end])
    b_rev, _ = lfilter([1.0], [1.0, -decay], drive_b, zi=zi)
    b = np.concatenate([b_rev[::-1], [b_end]])
    return a, b


def dual_resolvent(g: NodeFunction, lam: float, params) -> DualResolventResult:
    """Solve lam^2 f - f'' = g with f continuous and p f'(0+) = q f'(0-).

    Uses f(x) = D+ e^{-lam x} + (1/2lam) int_0^inf e^{-lam|x-y|} g(y) dy on
    x >= 0 (and the mirrored form on x <= 0), integrating g exactly as a
    piecewise-linear function.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam!r}")
    sp: SkewParams = _as_skew(params)
    z = g.zero_index
    h = g.dx
    right = g.values[z:]
    left = g.values[: z + 1][::-1]  # left[j] = g(-j h)
    a_r, b_r = _one_sided(right, g.at_plus_inf, lam, h)
    a_l, b_l = _one_sided(left, g.at_minus_inf, lam, h)
    c_plus = b_r[0] / (2.0 * lam)
    c_minus = b_l[0] / (2.0 * lam)
    s = sp.p + sp.q
    d_minus = 2.0 * sp.p / s * c_plus + (sp.q - sp.p) / s * c_minus
    d_plus = (sp.p - sp.q) / s * c_plus + 2.0 * sp.q / s * c_minus
    xr = np.arange(right.size) * h
    f_right = d_plus * np.exp(-lam * xr) + (a_r + b_r) / (2.0 * lam)
    f_left = d_minus * np.exp(-lam * xr) + (a_l + b_l) / (2.0 * lam)
    values = np.concatenate([f_left[:0:-1], f_right])
    f = NodeFunction(g.x, values, g.at_minus_inf / lam**2, g.at_plus_inf / lam**2)
    return DualResolventResult(
        f=f,
        coeffs=DualResolventCoeffs(c_minus, c_plus, d_minus, d_plus),
        f_at_0m=float(f_left[0]),
        f_at_0p=float(f_right[0]),
    )


def dual_resolvent_sinh_form(g_callable, lam: float, coeffs: DualResolventCoeffs, x):
    """f from C+-, D+- and the sinh integral (cancellation-prone for large |x|)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    for idx, xi in enumerate(x):
        if xi >= 0:
            conv = integrate(lambda y: np.sinh(lam * (xi - y)) * g_callable(y), 0.0, xi, 8, 16)
            out[idx] = coeffs.c_plus * math.exp(lam * xi) + coeffs.d_plus * math.exp(-lam * xi) - conv / lam
        else:
            conv = integrate(lambda y: np.sinh(lam * (xi - y)) * g_callable(y), xi, 0.0, 8, 16)
            out[idx] = coeffs.c_minus * math.exp(-lam * xi) + coeffs.d_minus * math.exp(lam * xi) + conv / lam
    return out
