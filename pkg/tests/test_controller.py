"""Controller state machine, driven purely by synthetic measurements.

The brute-force grid argmin is the oracle for the greedy search; no
simulator is involved anywhere in this module.
"""

from __future__ import annotations

import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from emintrack.controller import (
    ControllerConfig,
    Mode,
    PlantFatalError,
    init,
    on_batch,
    on_stall,
)

CFG = ControllerConfig()


def grid_from(cfg: ControllerConfig) -> list[float]:
    """Voltages the initial search can visit, descending from v_init."""
    steps = int(round((cfg.v_init - cfg.v_min) / cfg.v_step))
    return [round(cfg.v_init - k * cfg.v_step, 12) for k in range(steps + 1)]


def run_search(cfg: ControllerConfig, energy_of, metric=1.0):
    """Drive the machine through the initial search until monitoring."""
    state, output = init(cfg)
    events = list(output.events)
    for _ in range(200):
        if state.mode is Mode.MONITOR:
            break
        state, output = on_batch(state, energy_of(output.command), metric)
        events.extend(output.events)
    assert state.mode is Mode.MONITOR
    return state, output, events


def acquire_reference(state, output, energy, metric):
    """One batch at the optimum to set the metric reference."""
    assert state.mode is Mode.MONITOR and state.metric_ref is None
    state, output = on_batch(state, energy, metric)
    assert state.metric_ref == metric
    return state, output


def test_init_defaults():
    state, output = init(CFG)
    assert output.command == 5.0
    assert state.mode is Mode.SEARCH
    assert [e.name for e in output.events] == ["search_started"]
    assert state.best_energy is None


def test_invalid_configs_rejected():
    with pytest.raises(ValueError):
        ControllerConfig(v_init=6.0)  # above v_max
    with pytest.raises(ValueError):
        ControllerConfig(v_min=5.0, v_max=5.0)
    with pytest.raises(ValueError):
        ControllerConfig(v_step=0.0)
    with pytest.raises(ValueError):
        ControllerConfig(averaging_cycles=2)
    with pytest.raises(ValueError):
        ControllerConfig(decrease_threshold=0.1)


def test_first_decrement_worse_settles_at_init():
    # Energy strictly increases at the very first step down: the optimum is
    # the initial voltage and monitoring starts after two batches.
    energies = {5.0: 1.0, 4.8: 1.1}
    state, output = init(CFG)
    state, output = on_batch(state, energies[round(output.command, 1)], 1.0)
    assert state.mode is Mode.SEARCH
    state, output = on_batch(state, energies[round(output.command, 1)], 1.0)
    assert state.mode is Mode.MONITOR
    assert state.best_voltage == 5.0
    assert any(e.name == "optimum_found" for e in output.events)


def test_monotone_curve_terminates_at_floor():
    commands = []
    state, output = init(CFG)
    events = list(output.events)
    while state.mode is Mode.SEARCH:
        commands.append(output.command)
        state, output = on_batch(state, 0.1 + output.command * 1e-3, 1.0)
        events.extend(output.events)
    assert state.best_voltage == pytest.approx(CFG.v_min)
    assert any(e.name == "optimum_found" for e in events)
    # The search command sequence descends strictly until termination.
    assert all(b < a for a, b in zip(commands, commands[1:]))


def test_tie_prefers_lower_voltage():
    # Flat section: the less-or-equal comparison keeps stepping down.
    state, _, _ = run_search(CFG, lambda v: 1.0 if v > 4.39 else 1.0 + (4.4 - v))
    assert state.best_voltage == pytest.approx(4.4)


@st.composite
def unimodal_curves(draw):
    cfg = CFG
    grid = grid_from(cfg)
    argmin_index = draw(st.integers(1, len(grid) - 2))
    dips = draw(
        st.lists(st.floats(1e-4, 0.3), min_size=argmin_index, max_size=argmin_index)
    )
    rises = draw(
        st.lists(
            st.floats(1e-4, 0.3),
            min_size=len(grid) - argmin_index - 1,
            max_size=len(grid) - argmin_index - 1,
        )
    )
    base = draw(st.floats(0.5, 2.0))
    values = [base]
    for d in dips:
        values.append(values[-1] - d)
    minimum = values[-1]
    if minimum <= 0.0:
        values = [v - minimum + 0.1 for v in values]
    tail = values[-1]
    for r in rises:
        tail = tail + r
        values.append(tail)
    return dict(zip(grid, values))


@given(unimodal_curves())
@settings(max_examples=100, deadline=None)
def test_greedy_matches_bruteforce_on_unimodal(curve):
    state, _, _ = run_search(CFG, lambda v: curve[round(v, 12)])
    oracle = min(curve, key=lambda v: (curve[v], v))
    assert state.best_voltage == pytest.approx(oracle)
    assert state.best_energy == pytest.approx(curve[oracle])


def test_constant_metric_never_leaves_monitoring():
    state, output, _ = run_search(CFG, lambda v: 1.0 + (v - 3.0) ** 2)
    state, output = acquire_reference(state, output, 1.0, metric=5.0e-3)
    for _ in range(50):
        state, output = on_batch(state, 1.0, 5.0e-3)
        assert state.mode is Mode.MONITOR
        assert output.command == state.best_voltage
        assert not output.events


def test_single_batch_excursions_are_rejected():
    # One-off spikes (for example the re-equilibration cycle right after a
    # load step lands in a batch) must not trigger a search.
    state, output, _ = _settled_machine(metric_ref=5.0e-3)
    for spike in (2.0e-2, 1.0e-4, 2.0e-2, 1.0e-4):
        state, output = on_batch(state, 1.0, spike)
        assert state.mode is Mode.MONITOR
        assert state.pending in ("increase", "decrease")
        state, output = on_batch(state, 1.0, 5.0e-3)  # back to normal
        assert state.mode is Mode.MONITOR
        assert state.pending is None
        assert not output.events
    # Alternating breach directions never confirm either.
    state, output = on_batch(state, 1.0, 2.0e-2)
    state, output = on_batch(state, 1.0, 1.0e-4)
    state, output = on_batch(state, 1.0, 2.0e-2)
    assert state.mode is Mode.MONITOR


def test_threshold_resolution_relative_and_absolute():
    state, output, _ = run_search(CFG, lambda v: 1.0 + (v - 3.0) ** 2)
    state, _ = acquire_reference(state, output, 1.0, metric=4.0e-3)
    assert state.increase_threshold == pytest.approx(0.5 * 4.0e-3)
    assert state.decrease_threshold == pytest.approx(-0.4 * 4.0e-3)
    assert state.convergence_tol == pytest.approx(0.05 * 4.0e-3)

    cfg = ControllerConfig(
        increase_threshold=1.0e-3, decrease_threshold=-2.0e-3, convergence_tol=5.0e-4
    )
    state, output, _ = run_search(cfg, lambda v: 1.0 + (v - 3.0) ** 2)
    state, _ = acquire_reference(state, output, 1.0, metric=4.0e-3)
    assert state.increase_threshold == 1.0e-3
    assert state.decrease_threshold == -2.0e-3
    assert state.convergence_tol == 5.0e-4


def test_metric_floor_guards_tiny_references():
    state, output, _ = run_search(CFG, lambda v: 1.0 + (v - 3.0) ** 2)
    state, _ = acquire_reference(state, output, 1.0, metric=1.0e-6)
    assert state.convergence_tol == pytest.approx(0.05 * CFG.convergence_floor)


def _settled_machine(metric_ref=5.0e-3):
    """Monitoring at the optimum of a parabola with its reference set."""
    curve = lambda v: 1.0 + (v - 3.0) ** 2
    state, output, _ = run_search(CFG, curve)
    state, output = acquire_reference(state, output, curve(state.best_voltage), metric_ref)
    return state, output, curve


def test_load_increase_raises_then_sweeps_to_higher_optimum():
    state, output, _ = _settled_machine()
    v_low = state.best_voltage
    # Metric jumps well past the increase threshold; the first breach only
    # arms the detection, the confirming batch fires it.
    state, output = on_batch(state, 1.2, 1.2e-2)
    assert state.mode is Mode.MONITOR and state.pending == "increase"
    assert output.command == v_low
    state, output = on_batch(state, 1.2, 1.2e-2)
    assert state.mode is Mode.RAISE
    assert any(e.name == "load_increase_detected" for e in output.events)
    assert output.command == pytest.approx(v_low + CFG.v_step)
    # While raising, the metric moves by 6e-4 per step (above the 2.5e-4
    # tolerance) until 4.0 V, then flattens and converges at 4.2 V.
    metric_of = lambda v: 3.0e-2 - 3.0e-3 * v if v < 4.0 else 1.8e-2
    raised = []
    for _ in range(40):
        if state.mode is not Mode.RAISE:
            break
        raised.append(output.command)
        state, output = on_batch(state, 1.2, metric_of(round(output.command, 12)))
    assert state.mode is Mode.SWEEP_DOWN
    assert state.voltage == pytest.approx(4.2)
    assert any(e.name == "metric_converged" for e in output.events)
    assert all(b > a for a, b in zip(raised, raised[1:]))
    # New-load energy curve has its minimum above the old optimum.
    new_curve = lambda v: 2.0 + (v - 3.8) ** 2
    for _ in range(40):
        if state.mode is Mode.MONITOR:
            break
        state, output = on_batch(state, new_curve(round(output.command, 12)), 1.5e-2)
    assert state.mode is Mode.MONITOR
    assert state.best_voltage > v_low
    assert state.best_voltage == pytest.approx(3.8, abs=CFG.v_step / 2 + 1e-9)


def test_raise_stops_at_upper_bound():
    state, output, _ = _settled_machine()
    state, output = on_batch(state, 1.2, 1.2e-2)
    state, output = on_batch(state, 1.2, 1.2e-2)  # confirmation
    # Metric never converges: jumps by 10% of reference every step.
    value = 1.2e-2
    for _ in range(40):
        if state.mode is not Mode.RAISE:
            break
        value *= 1.5
        state, output = on_batch(state, 1.2, value)
    assert state.mode is Mode.SWEEP_DOWN
    assert state.voltage == pytest.approx(CFG.v_max)
    assert output.command == pytest.approx(CFG.v_max)  # seeding batch held there


def test_load_decrease_sweeps_down_from_current_point():
    state, output, curve = _settled_machine()
    v_star = state.best_voltage
    new_curve = lambda v: 0.5 + (v - 2.0) ** 2
    # Metric collapses below the decrease threshold two batches in a row;
    # the confirming batch was measured under the new load at the optimum
    # and seeds the sweep.
    state, output = on_batch(state, new_curve(v_star), 1.0e-3)
    assert state.mode is Mode.MONITOR and state.pending == "decrease"
    state, output = on_batch(state, new_curve(v_star), 1.0e-3)
    assert any(e.name == "load_decrease_detected" for e in output.events)
    assert state.mode is Mode.SWEEP_DOWN
    assert state.best_energy == pytest.approx(new_curve(v_star))
    assert output.command == pytest.approx(v_star - CFG.v_step)
    for _ in range(40):
        if state.mode is Mode.MONITOR:
            break
        state, output = on_batch(state, new_curve(round(output.command, 12)), 1.0e-3)
    assert state.best_voltage == pytest.approx(2.0, abs=CFG.v_step / 2 + 1e-9)
    assert state.best_voltage < v_star


def test_stall_during_sweep_settles_at_best():
    state, output, _ = _settled_machine()
    v_star = state.best_voltage
    state, output = on_batch(state, 1.0, 1.0e-3)  # arms the decrease
    state, output = on_batch(state, 1.0, 1.0e-3)  # confirmed -> sweep down
    state, output = on_stall(state)
    assert state.mode is Mode.MONITOR
    assert state.best_voltage == v_star
    assert output.command == v_star
    names = [e.name for e in output.events]
    assert "stall_recovered" in names and "optimum_found" in names


def test_stall_while_monitoring_is_treated_as_load_increase():
    state, output, _ = _settled_machine()
    v_star = state.best_voltage
    state, output = on_stall(state)
    assert state.mode is Mode.RAISE
    assert output.command == pytest.approx(v_star + CFG.v_step)
    # Recovery: metric converges immediately, then a fresh sweep finds a
    # higher optimum without any fatal error.
    state, output = on_batch(state, 2.0, 8.0e-3)
    state, output = on_batch(state, 2.0, 8.05e-3)
    assert state.mode is Mode.SWEEP_DOWN


def test_stall_before_any_measurement_steps_back_up():
    state, output = init(CFG)
    assert state.best_energy is None
    # v_init == v_max: a stall right away is fatal.
    with pytest.raises(PlantFatalError):
        on_stall(state)
    cfg = ControllerConfig(v_init=3.0)
    state, output = init(cfg)
    state, output = on_batch(state, 1.0, 1.0)  # records 3.0, commands 2.8
    state = replace(state, best_energy=None)   # pretend nothing recorded yet
    state, output = on_stall(state)
    assert state.mode is Mode.SEARCH
    assert output.command == pytest.approx(3.0)


def test_stall_at_vmax_is_fatal():
    state, output, _ = _settled_machine()
    state = replace(state, voltage=CFG.v_max)
    with pytest.raises(PlantFatalError, match="plant cannot run"):
        on_stall(state)


def test_commands_stay_in_bounds_under_random_measurements():
    import random

    rng = random.Random(7)
    state, output = init(CFG)
    for _ in range(500):
        energy = rng.uniform(0.5, 2.0)
        metric = rng.uniform(0.0, 2.0e-2)
        if rng.random() < 0.05:
            try:
                state, output = on_stall(state)
            except PlantFatalError:
                state, output = init(CFG)
        else:
            state, output = on_batch(state, energy, metric)
        assert CFG.v_min - 1e-9 <= output.command <= CFG.v_max + 1e-9


def test_replay_reproduces_commands_and_events():
    import random

    rng = random.Random(11)
    sequence = [(rng.uniform(0.5, 2.0), rng.uniform(0.0, 2.0e-2)) for _ in range(300)]

    def run():
        state, output = init(CFG)
        trail = [(output.command, tuple(e.name for e in output.events))]
        for energy, metric in sequence:
            state, output = on_batch(state, energy, metric)
            trail.append((output.command, tuple(e.name for e in output.events)))
        return trail

    assert run() == run()


def test_invalid_measurements_rejected():
    state, _ = init(CFG)
    with pytest.raises(ValueError):
        on_batch(state, -1.0, 0.0)
    with pytest.raises(ValueError):
        on_batch(state, math.nan, 0.0)
    with pytest.raises(ValueError):
        on_batch(state, 1.0, math.inf)
