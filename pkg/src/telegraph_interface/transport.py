"""Finite-volume evolution of two-line densities under the scaled generator.

One macroscopic step of length dt is

    flip(dt / 2 eps^2) -> upwind transport at speed 1/eps -> flip(dt / 2 eps^2)

where the flip substep is the exact 2x2 exponential and transport is
first-order upwind with the interface acting as a flux redistribution at
the cell boundary x = 0.  With the default ``cfl=1`` the transport substep is
an exact one-cell shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Grid, InterfaceParams, TwoLineDensity, flip_weights

CFL_SLACK = 1e-12


class CFLError(ValueError):
    pass


@dataclass
class TransportLedger:
    """Mass that left the domain (edges) or was destroyed at the interface."""

    edge_outflow: float = 0.0
    killed: float = 0.0


@dataclass(frozen=True)
class SolverConfig:
    cfl: float = 1.0
    splitting: str = "strang"

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl!r}")
        if self.splitting not in ("strang", "lie"):
            raise ValueError(f"splitting must be 'strang' or 'lie', got {self.splitting!r}")

    def time_step(self, grid: Grid, eps: float) -> float:
        return self.cfl * eps * grid.dx


def _upwind(u, v, nu, params, mid):
    """One upwind step in units of cell averages; returns (u, v, out_edge, killed).

    ``u`` moves right, ``v`` moves left, ``nu`` is the Courant number.
    """
    flux_u = nu * u
    flux_v = nu * v
    new_u = u - flux_u
    new_v = v - flux_v
    new_u[1:] += flux_u[:-1]
    new_v[:-1] += flux_v[1:]
    # the interface: fluxes across x = 0 are redistributed, not passed through
    f_left = flux_u[mid - 1]
    f_right = flux_v[mid]
    new_u[mid] += params.p * f_left + params.q_prime * f_right - f_left
    new_v[mid - 1] += params.p_prime * f_left + params.q * f_right - f_right
    out_edge = flux_u[-1] + flux_v[0]
    killed = params.p0 * f_left + params.q0 * f_right
    return new_u, new_v, out_edge, killed


def advance_transport(
    d: TwoLineDensity,
    eps: float,
    dt: float,
    params: InterfaceParams,
    ledger: TransportLedger | None = None,
) -> TwoLineDensity:
    """Upwind transport over macroscopic time ``dt`` at speed ``1/eps``."""
    nu = dt / (eps * d.grid.dx)
    if nu > 1.0 + CFL_SLACK or nu < 0:
        raise CFLError(f"CFL violated: dt/(eps*dx) = {nu!r} > 1")
    nu = min(nu, 1.0)
    u, v, out_edge, killed = _upwind(
        d.values[0].copy(), d.values[1].copy(), nu, params, d.grid.mid
    )
    if ledger is not None:
        ledger.edge_outflow += d.grid.dx * out_edge
        ledger.killed += d.grid.dx * killed
    return d.with_values(np.stack([u, v]))


def evolve_G_epsilon(
    d0: TwoLineDensity,
    eps: float,
    t_macro: float,
    params: InterfaceParams,
    config: SolverConfig = SolverConfig(),
    ledger: TransportLedger | None = None,
) -> TwoLineDensity:
    """Approximate exp(t G_eps) d0 by split stepping."""
    if t_macro < 0:
        raise ValueError("t_macro must be >= 0")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if t_macro == 0:
        return d0
    grid = d0.grid
    dt_full = config.time_step(grid, eps)
    n_full = math.floor(t_macro / dt_full * (1 + 1e-14))
    last = t_macro - n_full * dt_full
    if last <= 1e-12 * dt_full:
        last = 0.0
    steps = [(dt_full, n_full)] + ([(last, 1)] if last > 0 else [])

    u = d0.values[0].copy()
    v = d0.values[1].copy()
    mid = grid.mid
    edge = 0.0
    killed = 0.0
    for dt, count in steps:
        nu = min(dt / (eps * grid.dx), 1.0)
        if config.splitting == "strang":
            stay, switch = flip_weights(dt / (2 * eps**2))
        else:
            stay, switch = flip_weights(dt / eps**2)
        for _ in range(count):
            if config.splitting == "strang":
                u, v = stay * u + switch * v, switch * u + stay * v
            u, v, out_edge, lost = _upwind(u, v, nu, params, mid)
            u, v = stay * u + switch * v, switch * u + stay * v
            edge += out_edge
            killed += lost
    if ledger is not None:
        ledger.edge_outflow += grid.dx * edge
        ledger.killed += grid.dx * killed
    return d0.with_values(np.stack([u, v]))


# --- resolvent of the transport generator A ---------------------------------


@dataclass(frozen=True)
class ResolventResult:
    """phi = (lambda - A)^{-1} psi at cell centres plus one-sided limits at 0."""

    density: TwoLineDensity
    plus_at_0m: float
    plus_at_0p: float
    minus_at_0m: float
    minus_at_0p: float


def _sweep(psi_cells, lam, dx, start):
    """Solve phi' = -lam phi + psi over cells left to right from ``start``.

    ``psi`` is piecewise constant, so the cell update is exact.
    Returns (values at cell centres, value at the final edge).
    """
    decay = math.exp(-lam * dx)
    half = math.exp(-0.5 * lam * dx)
    gain = -math.expm1(-lam * dx) / lam
    half_gain = -math.expm1(-0.5 * lam * dx) / lam
    centres = np.empty_like(psi_cells)
    edge = start
    for k, s in enumerate(psi_cells):
        centres[k] = half * edge + half_gain * s
        edge = decay * edge + gain * s
    return centres, edge


def resolvent_A(psi: TwoLineDensity, lam: float, params: InterfaceParams) -> ResolventResult:
    """Closed-form resolvent of A, exact for piecewise-constant ``psi``.

    Incoming mass on each half line is integrated towards the interface,
    giving C1 = phi(0-, +1) and C4 = phi(0+, -1); the outgoing branches
    start from p C1 + q' C4 and p' C1 + q C4.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam!r}")
    g = psi.grid
    mid = g.mid
    plus, minus = psi.values
    # line +1 is transported rightwards, line -1 leftwards (sweep reversed)
    left_plus, c1 = _sweep(plus[:mid], lam, g.dx, 0.0)
    right_minus_rev, c4 = _sweep(minus[mid:][::-1], lam, g.dx, 0.0)
    start_plus = params.p * c1 + params.q_prime * c4
    start_minus = params.p_prime * c1 + params.q * c4
    right_plus, _ = _sweep(plus[mid:], lam, g.dx, start_plus)
    left_minus_rev, _ = _sweep(minus[:mid][::-1], lam, g.dx, start_minus)
    values = np.stack(
        [
            np.concatenate([left_plus, right_plus]),
            np.concatenate([left_minus_rev[::-1], right_minus_rev[::-1]]),
        ]
    )
    return ResolventResult(
        density=psi.with_values(values),
        plus_at_0m=c1,
        plus_at_0p=start_plus,
        minus_at_0m=start_minus,
        minus_at_0p=c4,
    )


def interface_residuals(res: ResolventResult, params: InterfaceParams) -> tuple[float, float]:
    """Residuals of the two interface conditions for a resolvent output."""
    r1 = res.plus_at_0p - params.p * res.plus_at_0m - params.q_prime * res.minus_at_0p
    r2 = res.minus_at_0m - params.p_prime * res.plus_at_0m - params.q * res.minus_at_0p
    return r1, r2


# --- kernel of lambda - G_eps on the extended domain ------------------------


@dataclass(frozen=True)
class EigenPair:
    eps: float
    lam: float
    mu: float
    w_plus: float
    w_minus: float

    def phi_minus(self, x, line):
        """exp(mu x) * (1 on line +1, w_+ on line -1) for x < 0, else 0."""
        x = np.asarray(x, dtype=float)
        amp = np.where(np.asarray(line) == 1, 1.0, self.w_plus)
        return np.where(x < 0, amp * np.exp(self.mu * np.minimum(x, 0.0)), 0.0)

    def phi_plus(self, x, line):
        """exp(-mu x) * (1 on line +1, w_- on line -1) for x > 0, else 0."""
        x = np.asarray(x, dtype=float)
        amp = np.where(np.asarray(line) == 1, 1.0, self.w_minus)
        return np.where(x > 0, amp * np.exp(-self.mu * np.maximum(x, 0.0)), 0.0)

    def dphi_minus(self, x, line):
        return self.mu * self.phi_minus(x, line)

    def dphi_plus(self, x, line):
        return -self.mu * self.phi_plus(x, line)

    def residuals(self, which: str, x):
        """Both kernel equations evaluated on the pair (line +1, line -1).

        (lam eps^2 + 1) phi(x, 1) + eps phi'(x, 1) - phi(x, -1) and
        (lam eps^2 + 1) phi(x, -1) - eps phi'(x, -1) - phi(x, 1).
        """
        f = self.phi_minus if which == "minus" else self.phi_plus
        df = self.dphi_minus if which == "minus" else self.dphi_plus
        a = self.lam * self.eps**2 + 1.0
        r1 = a * f(x, 1) + self.eps * df(x, 1) - f(x, -1)
        r2 = a * f(x, -1) - self.eps * df(x, -1) - f(x, 1)
        return r1, r2


def kernel_eigenfunctions(eps: float, lam: float) -> EigenPair:
    if not (eps > 0 and lam > 0):
        raise ValueError("eps and lambda must be > 0")
    mu = math.sqrt(lam * (lam * eps**2 + 2.0))
    a = lam * eps**2 + 1.0
    return EigenPair(eps, lam, mu, a + mu * eps, a - mu * eps)


def det_M(eps: float, lam: float, params: InterfaceParams) -> float:
    """Determinant of the interface map restricted to the kernel of lam - G_eps."""
    pair = kernel_eigenfunctions(eps, lam)
    p, q, p0, q0 = params.p, params.q, params.p0, params.q0
    return (
        -2.0 * lam * eps**2
        - (p + q) * eps * (pair.mu - lam * eps)
        + (q0 * (1 - p) + p0 * (1 - q) - p0 * q0) * pair.w_minus
        - p0
        - q0
    )


def det_M_direct(eps: float, lam: float, params: InterfaceParams) -> float:
    """The same determinant from the 2x2 matrix entries, for cross-checking."""
    pair = kernel_eigenfunctions(eps, lam)
    m = np.array(
        [
            [-params.p, 1.0 - params.q_prime * pair.w_minus],
            [pair.w_plus - params.p_prime, -params.q * pair.w_minus],
        ]
    )
    return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
