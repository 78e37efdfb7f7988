import math

import numpy as np
import pytest
from scipy.stats import norm

from telegraph_interface.kinetic import (
    DeadParticleError,
    Event,
    Outcome,
    ParticleState,
    Side,
    heading_to_interface,
    interface_interaction,
    particle_stream,
    simulate_endpoints,
    simulate_ensemble,
    simulate_particle,
    step_to_event,
)
from telegraph_interface.model import Grid, ScaledModel, TwoLineDensity, total_mass, validate

NO_KILL = validate(0.7, 0.3, 0.3, 0.7)
HALF = validate(0.5, 0.5, 0.5, 0.5)


class FixedDraws:
    """Stand-in stream returning preset (u_clock, u_interface) pairs."""

    def __init__(self, *pairs):
        self.pairs = list(pairs)

    def next_pair(self):
        return self.pairs.pop(0)


def clock_u(e):
    return math.exp(-e)


def test_interface_interaction_examples():
    assert interface_interaction(Side.FROM_LEFT, 0.0, NO_KILL) is Outcome.TRANSMIT
    kill_left = validate(0.5, 0.3, 0.5, 0.5)
    assert interface_interaction(Side.FROM_LEFT, 0.99, kill_left) is Outcome.KILL
    assert interface_interaction(Side.FROM_RIGHT, 0.55, HALF) is Outcome.REFLECT


def test_interface_interaction_thresholds_use_approach_side():
    params = validate(0.2, 0.3, 0.6, 0.1)
    assert interface_interaction(Side.FROM_LEFT, 0.19, params) is Outcome.TRANSMIT
    assert interface_interaction(Side.FROM_LEFT, 0.2, params) is Outcome.REFLECT
    assert interface_interaction(Side.FROM_LEFT, 0.5, params) is Outcome.KILL
    assert interface_interaction(Side.FROM_RIGHT, 0.5, params) is Outcome.TRANSMIT
    assert interface_interaction(Side.FROM_RIGHT, 0.65, params) is Outcome.REFLECT
    assert interface_interaction(Side.FROM_RIGHT, 0.7, params) is Outcome.KILL


def test_step_hits_interface_before_clock():
    state = ParticleState(x=-1.0, line=1)
    new, event = step_to_event(state, FixedDraws((clock_u(2.0), 0.1)), NO_KILL)
    assert event is Event.INTERFACE_HIT
    assert new.t_micro == pytest.approx(1.0)
    # u=0.1 < p: transmitted, keeps moving right from 0+
    assert new.x == 0.0 and math.copysign(1.0, new.x) > 0 and new.line == 1


def test_step_reflection_stays_on_incoming_side():
    state = ParticleState(x=-1.0, line=1)
    new, event = step_to_event(state, FixedDraws((clock_u(2.0), 0.9)), NO_KILL)
    assert event is Event.INTERFACE_HIT
    assert new.line == -1 and math.copysign(1.0, new.x) < 0
    assert not heading_to_interface(new.x, new.line)


def test_step_flip_away_from_interface():
    state = ParticleState(x=-1.0, line=-1)
    new, event = step_to_event(state, FixedDraws((clock_u(0.5), 0.5)), NO_KILL)
    assert event is Event.FLIP
    assert new.x == pytest.approx(-1.5) and new.line == 1
    assert new.t_micro == pytest.approx(0.5)


def test_step_heading_away_always_flips():
    stream = particle_stream(3, 0)
    for _ in range(20):
        _, event = step_to_event(ParticleState(x=3.0, line=1), stream, NO_KILL)
        assert event is Event.FLIP


def test_step_kill_and_dead_particle():
    killer = validate(0.0, 0.0, 0.0, 0.0)
    dead, event = step_to_event(ParticleState(x=0.5, line=-1), FixedDraws((clock_u(5.0), 0.3)), killer)
    assert event is Event.KILLED and not dead.alive
    with pytest.raises(DeadParticleError):
        step_to_event(dead, FixedDraws((0.5, 0.5)), killer)


def test_particle_zero_horizon_and_ambiguous_start():
    res = simulate_particle(0.7, -1, 0.0, ScaledModel(0.1), NO_KILL, particle_stream(1, 0))
    assert (res.x, res.line, res.alive) == (0.7, -1, True)
    with pytest.raises(ValueError, match="ambiguous"):
        simulate_particle(0.0, 1, 1.0, ScaledModel(0.1), NO_KILL, particle_stream(1, 0))


def test_ensemble_matches_particle_loop():
    model = ScaledModel(0.2, t_macro=0.5)
    params = validate(0.6, 0.3, 0.2, 0.5)
    x, line, alive = simulate_endpoints((-0.3, 1), 300, model, params, seed=42)
    for i in range(300):
        res = simulate_particle(-0.3, 1, 0.5, model, params, particle_stream(42, i))
        assert res.alive == alive[i]
        if res.alive:
            assert res.x == pytest.approx(x[i], abs=1e-12)
            assert res.line == line[i]


def test_telegraph_variance():
    # transparent interface: classical telegraph process, velocity correlation e^{-2|s|}
    eps, t, n = 0.05, 1.0, 100_000
    x, _, alive = simulate_endpoints((0.3, 1), n, ScaledModel(eps, t_macro=t), validate(1, 0, 1, 0), seed=8)
    assert alive.all()
    expected = t - 0.5 * eps**2 * (1.0 - math.exp(-2.0 * t / eps**2))
    var = x.var()
    se = var * math.sqrt(2.0 / (n - 1))
    assert abs(var - expected) < 3 * se


def test_kill_probability_matches_reflection_principle():
    n = 100_000
    _, _, alive = simulate_endpoints((-0.5, 1), n, ScaledModel(0.05, t_macro=1.0), validate(0, 0, 0, 0), seed=9)
    oracle = 2.0 * (1.0 - norm.cdf(0.5))
    killed = 1.0 - alive.mean()
    sigma = math.sqrt(oracle * (1 - oracle) / n)
    # 3 sigma plus an O(eps) allowance for the kinetic boundary layer
    assert abs(killed - oracle) < 3 * sigma + 0.01


def test_single_particle_point_mass_histogram():
    grid = Grid(1.0, 10)
    res = simulate_ensemble((0.3, 1), 1, ScaledModel(0.1, t_macro=0.0), NO_KILL, grid, seed=0)
    cell = grid.cell_of(0.3)
    assert res.counts[0, cell] == 1 and res.counts.sum() == 1
    assert res.density.values[0, cell] == pytest.approx(1.0 / grid.dx)


def test_count_conservation_and_zero_n():
    grid = Grid(6.0, 60)
    params = validate(0.4, 0.3, 0.4, 0.3)
    res = simulate_ensemble((-0.5, 1), 5000, ScaledModel(0.2, t_macro=1.0), params, grid, seed=3)
    assert res.counts.sum() + res.n_killed + res.n_outside == 5000
    assert total_mass(res.density) + res.killed_fraction == pytest.approx(1.0 - res.n_outside / 5000, abs=1e-12)
    with pytest.raises(ValueError):
        simulate_ensemble((-0.5, 1), 0, ScaledModel(0.2, t_macro=1.0), params, grid, seed=3)


def test_no_kill_never_kills():
    grid = Grid(6.0, 60)
    res = simulate_ensemble((-0.2, 1), 5000, ScaledModel(0.1, t_macro=1.0), NO_KILL, grid, seed=4)
    assert res.killed_fraction == 0.0


def test_symmetric_interface_splits_evenly():
    # (0+, line -1) meets the interface at once: half goes to (0-, -1), half to
    # (0+, +1), two mirror images of each other, so P(x > 0) = 1/2 for any eps
    n = 100_000
    x, _, _ = simulate_endpoints((0.0, -1, 1), n, ScaledModel(0.1, t_macro=1.0), HALF, seed=10)
    frac = (x > 0).mean()
    assert abs(frac - 0.5) < 3 * math.sqrt(0.25 / n)


@pytest.mark.parametrize("line", [1, -1])
def test_skewness_from_right_of_interface(line):
    n = 100_000
    x, _, _ = simulate_endpoints((0.0, line, 1), n, ScaledModel(0.05, t_macro=1.0), NO_KILL, seed=11)
    frac = (x > 0).mean()
    target = NO_KILL.p / (NO_KILL.p + NO_KILL.q)
    assert abs(frac - target) < 3 * math.sqrt(target * (1 - target) / n) + 0.02


def test_density_sampling_and_thread_independence():
    grid = Grid(4.0, 80)
    init = TwoLineDensity.from_functions(grid, lambda x: np.exp(-(x + 1) ** 2), lambda x: 0.5 * np.exp(-x**2))
    model = ScaledModel(0.2, t_macro=0.5)
    params = validate(0.5, 0.4, 0.3, 0.6)
    one = simulate_ensemble(init, 20_000, model, params, grid, seed=77, threads=1)
    three = simulate_ensemble(init, 20_000, model, params, grid, seed=77, threads=3)
    np.testing.assert_array_equal(one.counts, three.counts)
    assert one.n_killed == three.n_killed
    other = simulate_ensemble(init, 20_000, model, params, grid, seed=78)
    assert not np.array_equal(one.counts, other.counts)


def test_initial_sampling_follows_density():
    grid = Grid(4.0, 40)
    init = TwoLineDensity.from_functions(grid, lambda x: np.where(x < 0, 1.0, 0.0), lambda x: np.where(x > 2, 1.0, 0.0))
    res = simulate_ensemble(init, 60_000, ScaledModel(0.1, t_macro=0.0), NO_KILL, grid, seed=5)
    expected = init.values / (init.values.sum() * grid.dx)
    # every cell within 5 standard errors of its target frequency
    p = expected * grid.dx
    se = np.sqrt(p * (1 - p) / 60_000) / grid.dx
    assert np.all(np.abs(res.density.values - expected) <= 5 * se + 1e-12)
