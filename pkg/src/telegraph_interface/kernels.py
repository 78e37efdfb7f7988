"""Transition densities of skew and killed Brownian motion, and their action on densities.

Conventions: the skew process has transmission conditions
p * rho(0-) = q * rho(0+) on densities, skewness theta = (p - q)/(p + q),
and generator one half of the second derivative away from 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as sp_integrate
from scipy.special import erf, erfc

from .model import Grid, LineDensity, ParameterError
from .quadrature import integrate

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class SkewParams:
    p: float
    q: float

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ParameterError("p and q must be non-negative")
        if not self.p + self.q > 0:
            raise ParameterError("skew Brownian motion needs p + q > 0")

    @property
    def theta(self) -> float:
        return (self.p - self.q) / (self.p + self.q)

    @property
    def right_weight(self) -> float:
        """2p/(p+q): crossing weight for paths started left of 0."""
        return 2.0 * self.p / (self.p + self.q)

    @property
    def left_weight(self) -> float:
        """2q/(p+q): crossing weight for paths started right of 0."""
        return 2.0 * self.q / (self.p + self.q)


def _as_skew(params) -> SkewParams:
    if isinstance(params, SkewParams):
        return params
    return SkewParams(params.p, params.q)


def _check_t(t):
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t!r}")


def heat_kernel(t, z):
    return np.exp(-np.square(z) / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


def gamma_plus(t, x, y, params):
    """Density at y at time t of skew BM started at x > 0."""
    _check_t(t)
    sp = _as_skew(params)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("gamma_plus needs x > 0")
    y = np.asarray(y, dtype=float)
    direct = heat_kernel(t, y - x)
    return np.where(
        y > 0,
        direct + sp.theta * heat_kernel(t, y + x),
        sp.left_weight * direct,
    )


def gamma_minus(t, x, y, params):
    """Density at y at time t of skew BM started at x < 0."""
    _check_t(t)
    sp = _as_skew(params)
    x = np.asarray(x, dtype=float)
    if np.any(x >= 0):
        raise ValueError("gamma_minus needs x < 0")
    y = np.asarray(y, dtype=float)
    direct = heat_kernel(t, y - x)
    return np.where(
        y < 0,
        direct - sp.theta * heat_kernel(t, y + x),
        sp.right_weight * direct,
    )


def gamma(t, x, y, params):
    """gamma_plus or gamma_minus according to the sign of scalar ``x``.

    At x = 0 both agree in the limit: weight 2p/(p+q) right, 2q/(p+q) left.
    """
    if x > 0:
        return gamma_plus(t, x, y, params)
    if x < 0:
        return gamma_minus(t, x, y, params)
    _check_t(t)
    sp = _as_skew(params)
    y = np.asarray(y, dtype=float)
    weight = np.where(y > 0, sp.right_weight, sp.left_weight)
    return weight * heat_kernel(t, y)


def gamma_integral(t, x, params, lower=-np.inf, upper=np.inf):
    """Adaptive quadrature of gamma(t, x, .) over (lower, upper), split at 0 and x."""
    f = lambda y: float(gamma(t, x, y, params))  # noqa: E731
    cuts = sorted({lower, upper, *(c for c in (0.0, x) if lower < c < upper)})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        total += sp_integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return total


def chapman_kolmogorov_lhs(t, s, x, z, params):
    """integral over y of gamma(t, x, y) gamma(s, y, z)."""
    def integrand(y):
        if y == 0.0:
            return 0.0
        return float(gamma(t, x, y, params) * gamma(s, y, z, params))

    cuts = sorted({0.0, x, z})
    edges = [-np.inf, *cuts, np.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if a == b:
            continue
        total += sp_integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return total


def gamma_expectation(f, t, x, params):
    """E_x f(w(t)) computed from the transition density by adaptive quadrature."""
    def integrand(y):
        return float(gamma(t, x, y, params) * f(y))

    edges = [-np.inf, *sorted({0.0, float(x)}), np.inf]
    return sum(
        sp_integrate.quad(integrand, a, b, epsabs=1e-12, epsrel=1e-12, limit=200)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )


# --- minimal (killed) Brownian motion ---------------------------------------


def minimal_bm_kernel(t, x, y):
    _check_t(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y < 0):
        raise ValueError("minimal_bm_kernel needs x > 0 and y >= 0")
    # difference of the two Gaussians written to avoid cancellation near y=0
    return heat_kernel(t, x - y) * -np.expm1(-2.0 * x * y / t)


def survival_probability(t, x):
    """P(BM from x has not hit 0 by time t) = erf(|x| / sqrt(2t))."""
    return erf(np.abs(np.asarray(x, dtype=float)) / math.sqrt(2.0 * t))


# --- cell-averaged action on densities --------------------------------------


def _eta(s):
    """h(-s) for s >= 0 where h(u) = u Phi(u) + phi(u)."""
    return np.exp(-0.5 * s * s) / SQRT_2PI - 0.5 * s * erfc(s / math.sqrt(2.0))


def cell_transfer_weights(grid: Grid, t: float) -> np.ndarray:
    """W[k + n - 1] = mean over a cell of the mass sent k cells away by the heat kernel.

    Exact double integral of the Gaussian over pairs of cells.
    """
    n = grid.n_cells
    sigma = math.sqrt(t)
    a = grid.dx / sigma
    k = np.arange(-(n - 1), n)
    s = np.abs(k).astype(float)
    second = _eta(np.abs(s + 1) * a) - 2.0 * _eta(s * a) + _eta(np.abs(s - 1) * a)
    # for k = 0 the argument s - 1 is negative: h(-a) + a accounts for the kink
    second = np.where(k == 0, 2.0 * _eta(a) - 2.0 * _eta(0.0) + a, second)
    return np.clip(sigma / grid.dx * second, 0.0, None)


def _heat(values, weights):
    n = values.size
    return np.convolve(values, weights)[n - 1:2 * n - 1]


def heat_evolve(psi0: LineDensity, t: float) -> LineDensity:
    if t == 0:
        return psi0
    _check_t(t)
    return LineDensity(psi0.grid, _heat(psi0.values, cell_transfer_weights(psi0.grid, t)))


def skew_density_evolve(psi0: LineDensity, t: float, params) -> LineDensity:
    """Density at time t of skew BM with initial density ``psi0`` (cell averages)."""
    sp = _as_skew(params)
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return psi0
    g = psi0.grid
    mid = g.mid
    w = cell_transfer_weights(g, t)
    right = np.where(np.arange(g.n_cells) >= mid, psi0.values, 0.0)
    left = psi0.values - right
    out = np.empty(g.n_cells)
    from_right = _heat(right, w)
    from_left = _heat(left, w)
    mirror_right = _heat(right[::-1], w)
    mirror_left = _heat(left[::-1], w)
    out[mid:] = (
        from_right[mid:] + sp.theta * mirror_right[mid:] + sp.right_weight * from_left[mid:]
    )
    out[:mid] = (
        from_left[:mid] - sp.theta * mirror_left[:mid] + sp.left_weight * from_right[:mid]
    )
    return LineDensity(g, np.clip(out, 0.0, None))


def minimal_density_evolve(psi0: LineDensity, t: float) -> LineDensity:
    """Density of BM killed at 0, on the two half lines separately."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return psi0
    g = psi0.grid
    mid = g.mid
    w = cell_transfer_weights(g, t)
    right = np.where(np.arange(g.n_cells) >= mid, psi0.values, 0.0)
    left = psi0.values - right
    out = np.empty(g.n_cells)
    out[mid:] = (_heat(right, w) - _heat(right[::-1], w))[mid:]
    out[:mid] = (_heat(left, w) - _heat(left[::-1], w))[:mid]
    return LineDensity(g, np.clip(out, 0.0, None))


def analytic_survival(psi0: LineDensity, t: float) -> float:
    """Surviving mass of killed BM from a cell-averaged initial density.

    Integrates erf(|x|/sqrt(2t)) exactly over each cell.
    """
    if t == 0:
        return psi0.mass()
    g = psi0.grid
    s = math.sqrt(2.0 * t)
    edges = np.abs(g.edges)

    # antiderivative of erf(u/s): u erf(u/s) + s/sqrt(pi) exp(-u^2/s^2)
    def anti(u):
        return u * erf(u / s) + s / math.sqrt(math.pi) * np.exp(-(u / s) ** 2)

    a = anti(edges)
    per_cell = np.abs(a[1:] - a[:-1])
    return float(np.sum(psi0.values * per_cell))


def killed_resolvent_apply(f, lam: float, tail: float = 36.0, order: int = 12):
    """Return x -> R_lam f(x), the resolvent of half the Laplacian killed at 0.

    ``f`` is a vectorised callable on [0, inf).  Each evaluation splits the
    kernel at y = x and truncates where exp(-sqrt(2 lam) |x - y|) < e^-tail.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam!r}")
    k = math.sqrt(2.0 * lam)
    reach = tail / k
    width = 2.0 / k

    def resolvent(x):
        x = np.asarray(x, dtype=float)
        shape = x.shape
        xs = x.reshape(-1)
        if np.any(xs < 0):
            raise ValueError("R_lam f is defined on x >= 0")
        out = np.empty(xs.size)
        chunk = max(1, 200_000 // (order * int(math.ceil(reach / width) + 1) * 3))
        for start in range(0, xs.size, chunk):
            xc = xs[start:start + chunk]
            lo = np.maximum(xc - reach, 0.0)
            n_near = int(math.ceil(max(np.max(xc - lo), width) / width))
            n_far = int(math.ceil(reach / width))
            below = integrate(
                lambda y: np.exp(-k * (xc[:, None] - y)) * f(y), lo, xc, n_near, order
            )
            above = integrate(
                lambda y: np.exp(-k * (y - xc[:, None])) * f(y), xc, xc + reach, n_far, order
            )
            image = np.exp(-k * xc) * integrate(
                lambda y: np.exp(-k * y) * f(y),
                np.zeros_like(xc), np.full_like(xc, reach), n_far, order,
            )
            out[start:start + chunk] = (below + above - image) / k
        return out.reshape(shape)

    return resolvent
