"""Event-driven Monte Carlo for the two-line telegraph particle with interface.

Microscopic picture: unit speed, right on line +1 and left on line -1,
direction flips at rate ``flip_intensity``, and a hit of x=0 transmits,
reflects or kills according to the approach side.

A particle sitting exactly at the interface carries its side in the sign
of zero: +0.0 is 0+ and -0.0 is 0-.  Transmission leaves it on the far
side, reflection on the incoming side, so it cannot re-hit 0 without first
flipping and coming back.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import Grid, InterfaceParams, ScaledModel, TwoLineDensity
from .rng import STREAM_INIT, ParticleStream, uniform_pair

BATCH_SIZE = 1 << 16


class Side(enum.Enum):
    FROM_LEFT = "from_left"
    FROM_RIGHT = "from_right"


class Outcome(enum.Enum):
    TRANSMIT = "transmit"
    REFLECT = "reflect"
    KILL = "kill"


class Event(enum.Enum):
    FLIP = "flip"
    INTERFACE_HIT = "interface_hit"
    KILLED = "killed"


class DeadParticleError(RuntimeError):
    pass


@dataclass(frozen=True)
class ParticleState:
    """Microscopic particle state. ``line`` is +1 (moving right) or -1."""

    x: float
    line: int
    alive: bool = True
    t_micro: float = 0.0

    def __post_init__(self):
        if self.line not in (1, -1):
            raise ValueError(f"line must be +1 or -1, got {self.line!r}")


@dataclass(frozen=True)
class ParticleResult:
    x: float | None  # macroscopic position, None when killed
    line: int
    alive: bool
    n_events: int


@dataclass(frozen=True)
class EnsembleResult:
    density: TwoLineDensity
    killed_fraction: float
    n_particles: int
    n_killed: int
    n_outside: int
    counts: np.ndarray


def interface_interaction(side: Side, u: float, params: InterfaceParams) -> Outcome:
    if side is Side.FROM_LEFT:
        through, back = params.p, params.p_prime
    else:
        through, back = params.q, params.q_prime
    if u < through:
        return Outcome.TRANSMIT
    if u < through + back:
        return Outcome.REFLECT
    return Outcome.KILL


def heading_to_interface(x: float, line: int) -> bool:
    return (line == 1) == (math.copysign(1.0, x) < 0)


def time_to_interface(x: float, line: int) -> float:
    return abs(x) if heading_to_interface(x, line) else math.inf


def _clock(u: float, rate: float) -> float:
    return -math.log(u) / rate


def step_to_event(
    state: ParticleState,
    rng,
    params: InterfaceParams,
    flip_intensity: float = 1.0,
) -> tuple[ParticleState, Event]:
    """Advance one particle to its next flip or interface hit.

    ``rng`` supplies ``next_pair() -> (u_clock, u_interface)``.
    """
    if not state.alive:
        raise DeadParticleError("step_to_event called on a killed particle")
    u_clock, u_iface = rng.next_pair()
    clock = _clock(u_clock, flip_intensity)
    h = time_to_interface(state.x, state.line)
    t = state.t_micro + min(clock, h)
    if clock < h:
        x = state.x + state.line * clock
        return replace(state, x=x, line=-state.line, t_micro=t), Event.FLIP
    return _hit(state, u_iface, params, t)


def _hit(state, u_iface, params, t):
    side = Side.FROM_LEFT if state.line == 1 else Side.FROM_RIGHT
    outcome = interface_interaction(side, u_iface, params)
    if outcome is Outcome.KILL:
        return replace(state, x=0.0, alive=False, t_micro=t), Event.KILLED
    if outcome is Outcome.TRANSMIT:
        line = state.line
    else:
        line = -state.line
    # a particle on line +1 at 0 departs to the right: 0+, on line -1: 0-
    x = 0.0 if line == 1 else -0.0
    return replace(state, x=x, line=line, t_micro=t), Event.INTERFACE_HIT


def _start_position(x0: float, side: int | None) -> float:
    if x0 == 0.0:
        if side not in (1, -1):
            raise ValueError(
                "a start at x=0 is ambiguous; pass side=+1 (0+) or side=-1 (0-)"
            )
        return 0.0 if side == 1 else -0.0
    return float(x0)


def simulate_particle(
    x0: float,
    line0: int,
    t_end_macro: float,
    model: ScaledModel,
    params: InterfaceParams,
    rng,
    side: int | None = None,
) -> ParticleResult:
    """Run one particle over macroscopic time ``t_end_macro``.

    The start and end positions are macroscopic (x' = eps * x).
    """
    if t_end_macro < 0:
        raise ValueError("t_end_macro must be >= 0")
    eps = model.epsilon
    state = ParticleState(_start_position(x0, side) / eps, int(line0))
    horizon = t_end_macro / eps**2
    n_events = 0
    while state.t_micro < horizon:
        u_clock, u_iface = rng.next_pair()
        clock = _clock(u_clock, model.flip_intensity)
        h = time_to_interface(state.x, state.line)
        step = min(clock, h)
        remaining = horizon - state.t_micro
        if step >= remaining:
            state = replace(
                state, x=state.x + state.line * remaining, t_micro=horizon
            )
            break
        n_events += 1
        if clock < h:
            state = replace(
                state,
                x=state.x + state.line * clock,
                line=-state.line,
                t_micro=state.t_micro + clock,
            )
        else:
            state, event = _hit(state, u_iface, params, state.t_micro + h)
            if event is Event.KILLED:
                return ParticleResult(None, state.line, False, n_events)
    return ParticleResult(eps * state.x, state.line, True, n_events)


def _advance_batch(x, line, ids, horizon, params, rate, seed):
    """Vectorised event loop over a batch; returns final (x, line, alive)."""
    n = x.size
    x = x.copy()
    line = line.copy()
    t = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    event = np.zeros(n, dtype=np.uint64)
    active = np.arange(n)
    if horizon <= 0:
        return x, line, alive
    while active.size:
        xa, la, ta = x[active], line[active], t[active]
        u_clock, u_iface = uniform_pair(seed, ids[active], event[active])
        event[active] += np.uint64(1)
        clock = -np.log(u_clock) / rate
        toward = (la == 1) == np.signbit(xa)
        h = np.where(toward, np.abs(xa), np.inf)
        step = np.minimum(clock, h)
        remaining = horizon - ta
        finish = step >= remaining

        fin = active[finish]
        x[fin] = xa[finish] + la[finish] * remaining[finish]
        t[fin] = horizon

        go = ~finish
        flip = go & (clock < h)
        idx = active[flip]
        x[idx] = xa[flip] + la[flip] * clock[flip]
        line[idx] = -la[flip]
        t[idx] = ta[flip] + clock[flip]

        hit = go & ~flip
        idx = active[hit]
        from_left = la[hit] == 1
        u = u_iface[hit]
        through = np.where(from_left, params.p, params.q)
        back = np.where(from_left, params.p_prime, params.q_prime)
        transmit = u < through
        reflect = ~transmit & (u < through + back)
        kill = ~transmit & ~reflect
        new_line = np.where(reflect, -la[hit], la[hit])
        line[idx] = new_line
        x[idx] = np.where(new_line == 1, 0.0, -0.0)
        t[idx] = ta[hit] + h[hit]
        alive[idx[kill]] = False

        died = np.zeros(active.size, dtype=bool)
        died[np.flatnonzero(hit)[kill]] = True
        active = active[go & ~died]
    return x, line, alive


def _cells(grid: Grid, x_macro):
    idx = np.floor(x_macro / grid.dx).astype(np.int64) + grid.mid
    # -0.0 belongs to the cell left of the interface
    idx = np.where((x_macro == 0.0) & np.signbit(x_macro), grid.mid - 1, idx)
    return idx


def sample_initial(init, ids, seed, grid: Grid | None = None):
    """Initial microscopic-free (macroscopic) positions and lines.

    ``init`` is either a ``TwoLineDensity`` (inverse CDF over (line, cell),
    then uniform inside the cell) or a point mass ``(x0, line0)`` /
    ``(x0, line0, side)``.
    """
    n = ids.size
    if isinstance(init, TwoLineDensity):
        masses = np.abs(init.values).ravel() * init.grid.dx
        cdf = np.cumsum(masses)
        if cdf[-1] <= 0:
            raise ValueError("initial density has zero mass")
        u_pick, u_pos = uniform_pair(seed, ids, 0, STREAM_INIT)
        k = np.searchsorted(cdf, u_pick * cdf[-1], side="right")
        k = np.minimum(k, masses.size - 1)
        row, cell = np.divmod(k, init.grid.n_cells)
        x = init.grid.edges[cell] + u_pos * init.grid.dx
        line = np.where(row == 0, 1, -1).astype(np.int64)
        return x, line
    x0, line0, *rest = init
    side = rest[0] if rest else None
    x = np.full(n, _start_position(float(x0), side))
    line = np.full(n, int(line0), dtype=np.int64)
    return x, line


def _run_chunk(init, ids, model, params, seed, grid):
    counts = np.zeros((2, grid.n_cells), dtype=np.int64)
    killed = 0
    outside = 0
    horizon = model.t_macro / model.epsilon**2
    for start in range(0, ids.size, BATCH_SIZE):
        batch = ids[start:start + BATCH_SIZE]
        x_macro, line = sample_initial(init, batch, seed, grid)
        x, line, alive = _advance_batch(
            x_macro / model.epsilon, line, batch, horizon, params,
            model.flip_intensity, seed,
        )
        killed += int(np.count_nonzero(~alive))
        x_end = model.epsilon * x[alive]
        cell = _cells(grid, x_end)
        inside = (cell >= 0) & (cell < grid.n_cells)
        outside += int(np.count_nonzero(~inside))
        row = np.where(line[alive] == 1, 0, 1)
        np.add.at(counts, (row[inside], cell[inside]), 1)
    return counts, killed, outside


def simulate_ensemble(
    init,
    n_particles: int,
    model: ScaledModel,
    params: InterfaceParams,
    grid: Grid,
    seed: int,
    threads: int = 1,
) -> EnsembleResult:
    """Histogram of ``n_particles`` independent particles at ``model.t_macro``.

    Particle ``i`` always uses the stream keyed by ``(seed, i)``; workers
    build partial histograms over contiguous index ranges that are summed at
    the end, so the result does not depend on ``threads``.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    ids = np.arange(n_particles, dtype=np.uint64)
    threads = max(1, int(threads))
    chunks = np.array_split(ids, min(threads, n_particles))
    if threads == 1:
        parts = [_run_chunk(init, c, model, params, seed, grid) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(
                pool.map(lambda c: _run_chunk(init, c, model, params, seed, grid), chunks)
            )
    counts = sum(p[0] for p in parts)
    killed = sum(p[1] for p in parts)
    outside = sum(p[2] for p in parts)
    density = TwoLineDensity(grid, counts / (n_particles * grid.dx))
    return EnsembleResult(
        density=density,
        killed_fraction=killed / n_particles,
        n_particles=n_particles,
        n_killed=killed,
        n_outside=outside,
        counts=counts,
    )


def particle_stream(seed: int, particle: int) -> ParticleStream:
    """The stream particle ``particle`` uses inside :func:`simulate_ensemble`."""
    return ParticleStream(seed, particle)


def histogram_standard_error(result: EnsembleResult) -> float:
    """Plug-in estimate of sum over cells of dx * sd(density estimate)."""
    p = result.counts / result.n_particles
    return float(np.sum(np.sqrt(p * (1.0 - p) / result.n_particles)))


def simulate_endpoints(init, n_particles: int, model: ScaledModel, params: InterfaceParams, seed: int):
    """Macroscopic final positions, lines and alive flags of an ensemble.

    Same streams as :func:`simulate_ensemble`; killed particles keep the
    position at which they died (0).
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    ids = np.arange(n_particles, dtype=np.uint64)
    xs, lines, alives = [], [], []
    for start in range(0, n_particles, BATCH_SIZE):
        batch = ids[start:start + BATCH_SIZE]
        x0, line0 = sample_initial(init, batch, seed)
        x, line, alive = _advance_batch(
            x0 / model.epsilon, line0, batch, model.t_macro / model.epsilon**2,
            params, model.flip_intensity, seed,
        )
        xs.append(model.epsilon * x)
        lines.append(line)
        alives.append(alive)
    return np.concatenate(xs), np.concatenate(lines), np.concatenate(alives)
