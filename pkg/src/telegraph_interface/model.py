"""Interface parameters, grid densities and the line-averaging projection."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

PROB_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when interface or scaling parameters are inadmissible."""


class GridMismatchError(ValueError):
    """Raised when two densities do not live on the same grid."""


@dataclass(frozen=True)
class InterfaceParams:
    """Transmission/reflection probabilities at the interface.

    ``p``/``p_prime`` apply to particles arriving from the left (on line +1),
    ``q``/``q_prime`` to particles arriving from the right (on line -1).
    Build instances with :func:`validate`.
    """

    p: float
    p_prime: float
    q: float
    q_prime: float
    p0: float = field(init=False)
    q0: float = field(init=False)
    gamma_kill: float = field(init=False)

    def __post_init__(self):
        p0 = 1.0 - self.p - self.p_prime
        q0 = 1.0 - self.q - self.q_prime
        if abs(p0) <= PROB_TOL:
            p0 = 0.0
        if abs(q0) <= PROB_TOL:
            q0 = 0.0
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(
            self, "gamma_kill", self.p * q0 + self.q * p0 + p0 * q0
        )

    @property
    def no_kill(self) -> bool:
        return self.p0 == 0.0 and self.q0 == 0.0

    def as_dict(self) -> dict:
        return {
            "p": self.p,
            "p_prime": self.p_prime,
            "q": self.q,
            "q_prime": self.q_prime,
        }


def validate(p, p_prime, q, q_prime) -> InterfaceParams:
    """Check the four raw probabilities and derive the killing probabilities."""
    raw = {"p": p, "p'": p_prime, "q": q, "q'": q_prime}
    for name, value in raw.items():
        value = float(value)
        if not np.isfinite(value) or value < 0.0 or value > 1.0:
            raise ParameterError(f"{name}={value!r} is not a probability in [0, 1]")
    if p + p_prime > 1.0 + PROB_TOL:
        raise ParameterError(f"p+p'>1 (p+p'={p + p_prime!r})")
    if q + q_prime > 1.0 + PROB_TOL:
        raise ParameterError(f"q+q'>1 (q+q'={q + q_prime!r})")
    return InterfaceParams(float(p), float(p_prime), float(q), float(q_prime))


@dataclass(frozen=True)
class ScaledModel:
    """Diffusive scaling: macroscopic time t corresponds to t/eps**2 microscopic."""

    epsilon: float
    flip_intensity: float = 1.0
    t_macro: float = 0.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon!r}")
        if not self.flip_intensity > 0:
            raise ParameterError(
                f"flip_intensity must be > 0, got {self.flip_intensity!r}"
            )
        if self.t_macro < 0:
            raise ParameterError(f"t_macro must be >= 0, got {self.t_macro!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``n_cells`` cells on [-half_width, half_width].

    ``n_cells`` is even so that x=0 is the boundary between cells
    ``n_cells//2 - 1`` and ``n_cells//2``.
    """

    half_width: float
    n_cells: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ParameterError("half_width must be > 0")
        if self.n_cells < 2 or self.n_cells % 2:
            raise ParameterError(f"n_cells must be even and >= 2, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n_cells

    @property
    def mid(self) -> int:
        """Index of the first cell right of 0."""
        return self.n_cells // 2

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) - self.mid + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        return (np.arange(self.n_cells + 1) - self.mid) * self.dx

    def cell_of(self, x):
        """Cell index for positions ``x`` (-1 or n_cells when outside)."""
        idx = np.floor(np.asarray(x, dtype=float) / self.dx).astype(np.int64) + self.mid
        return np.clip(idx, -1, self.n_cells)


@dataclass(frozen=True)
class LineDensity:
    """Cell-averaged density on a single line."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise ValueError(
                f"values must have shape ({self.grid.n_cells},), got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    def mass(self) -> float:
        return self.grid.dx * float(np.sum(np.abs(self.values)))


@dataclass(frozen=True)
class TwoLineDensity:
    """Cell-averaged density on the two lines.

    ``values[0]`` is line +1 (right-moving), ``values[1]`` is line -1.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (2, self.grid.n_cells):
            raise ValueError(
                f"values must have shape (2, {self.grid.n_cells}), got {values.shape}"
            )
        object.__setattr__(self, "values", values)

    @property
    def plus(self) -> np.ndarray:
        return self.values[0]

    @property
    def minus(self) -> np.ndarray:
        return self.values[1]

    def with_values(self, values) -> "TwoLineDensity":
        return replace(self, values=values)

    @classmethod
    def zeros(cls, grid: Grid) -> "TwoLineDensity":
        return cls(grid, np.zeros((2, grid.n_cells)))

    @classmethod
    def from_functions(cls, grid: Grid, f_plus, f_minus=None) -> "TwoLineDensity":
        """Cell averages of callables, by 4-point Gauss-Legendre per cell."""
        nodes, weights = np.polynomial.legendre.leggauss(4)
        left = grid.edges[:-1, None]
        x = left + 0.5 * grid.dx * (nodes[None, :] + 1.0)

        def average(f):
            if f is None:
                return np.zeros(grid.n_cells)
            return 0.5 * np.sum(weights * f(x), axis=1)

        return cls(grid, np.stack([average(f_plus), average(f_minus)]))


def line_index(line: int) -> int:
    """Row of ``TwoLineDensity.values`` holding line ``line`` (+1 or -1)."""
    if line == 1:
        return 0
    if line == -1:
        return 1
    raise ValueError(f"line must be +1 or -1, got {line!r}")


def total_mass(d) -> float:
    return d.grid.dx * float(np.sum(np.abs(d.values)))


def l1_distance(d1, d2) -> float:
    if d1.grid != d2.grid or d1.values.shape != d2.values.shape:
        raise GridMismatchError(f"grids differ: {d1.grid} vs {d2.grid}")
    return d1.grid.dx * float(np.sum(np.abs(d1.values - d2.values)))


def project_P(d: TwoLineDensity) -> TwoLineDensity:
    """Average the two lines; the result lies in the equal-lines subspace."""
    avg = 0.5 * (d.values[0] + d.values[1])
    return d.with_values(np.stack([avg, avg.copy()]))


def flip_weights(s: float) -> tuple[float, float]:
    """(stay, switch) weights of exp(s(B - I)) for s >= 0."""
    if s < 0:
        raise ValueError(f"flip time must be >= 0, got {s!r}")
    # e^{-s} cosh s and e^{-s} sinh s without overflow for large s
    e2 = np.exp(-2.0 * s)
    return 0.5 * (1.0 + e2), 0.5 * (1.0 - e2)


def flip_exact(d: TwoLineDensity, s: float) -> TwoLineDensity:
    """Exact solution of the pure line-switching dynamics over time ``s``."""
    stay, switch = flip_weights(s)
    u, v = d.values
    return d.with_values(np.stack([stay * u + switch * v, switch * u + stay * v]))


def to_line(d: TwoLineDensity) -> LineDensity:
    """Total density on the line, u + v (equals twice either line when in L0)."""
    return LineDensity(d.grid, d.values[0] + d.values[1])


def from_line(rho: LineDensity) -> TwoLineDensity:
    """Split a line density evenly over the two lines."""
    half = 0.5 * rho.values
    return TwoLineDensity(rho.grid, np.stack([half, half.copy()]))
