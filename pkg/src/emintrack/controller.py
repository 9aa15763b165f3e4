"""Two-phase energy-minimum tracking controller as a pure state machine.

Phase one searches downward from a safe initial voltage: after each batch of
averaged cycles the voltage is decremented while the averaged per-cycle
energy keeps improving, and the best voltage seen becomes the operating
point.  Phase two holds that point and watches the waveform load metric; a
metric drop triggers a fresh downward search from the operating point, a
metric rise first raises the voltage until the metric stops changing (or the
upper bound is hit) and then sweeps downward from there.

The controller is a pure transition system: :func:`on_batch` and
:func:`on_stall` map (state, measurement) to (state, output) with no hidden
mutability, so replaying a measurement sequence reproduces the command and
event sequence exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping

__all__ = [
    "Mode",
    "ControllerConfig",
    "ControllerState",
    "ControllerOutput",
    "Event",
    "PlantFatalError",
    "init",
    "on_batch",
    "on_stall",
]

_GRID_TOL = 1e-9


class Mode(Enum):
    SEARCH = "search"            # initial downward energy search
    MONITOR = "monitor"          # hold the optimum, watch the load metric
    SWEEP_DOWN = "sweep_down"    # downward energy search after a load change
    RAISE = "raise"              # raise voltage until the metric settles


class PlantFatalError(RuntimeError):
    """The plant stalled at the highest allowed voltage; no recovery exists."""


@dataclass(frozen=True)
class ControllerConfig:
    """Search bounds, step size, averaging depth and detection thresholds.

    The detection thresholds may be given as absolute values; when left as
    None they are resolved relative to the reference metric each time a new
    reference is acquired: increase at +rel_increase * reference, decrease
    at -rel_decrease * reference, and metric convergence within
    rel_convergence * max(reference, convergence_floor).
    """

    v_min: float = 1.0
    v_max: float = 5.0
    v_init: float = 5.0
    v_step: float = 0.2
    averaging_cycles: int = 3  # one of 1, 3, 5
    increase_threshold: float | None = None   # [A*s], > 0
    decrease_threshold: float | None = None   # [A*s], < 0
    convergence_tol: float | None = None      # [A*s], > 0
    rel_increase: float = 0.5
    rel_decrease: float = 0.4
    rel_convergence: float = 0.05
    convergence_floor: float = 1.0e-4  # [A*s]

    def __post_init__(self) -> None:
        if not self.v_min < self.v_max:
            raise ValueError("need v_min < v_max")
        if not 0 < self.v_step <= self.v_max - self.v_min:
            raise ValueError("need 0 < v_step <= v_max - v_min")
        if not self.v_min <= self.v_init <= self.v_max:
            raise ValueError("need v_min <= v_init <= v_max")
        if self.averaging_cycles not in (1, 3, 5):
            raise ValueError("averaging_cycles must be 1, 3 or 5")
        if self.increase_threshold is not None and self.increase_threshold <= 0:
            raise ValueError("increase_threshold must be positive")
        if self.decrease_threshold is not None and self.decrease_threshold >= 0:
            raise ValueError("decrease_threshold must be negative")
        if self.convergence_tol is not None and self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.rel_increase <= 0 or self.rel_decrease <= 0 or self.rel_convergence <= 0:
            raise ValueError("relative threshold factors must be positive")
        if self.convergence_floor <= 0:
            raise ValueError("convergence_floor must be positive")


@dataclass(frozen=True)
class ControllerState:
    """Complete controller memory between batches."""

    config: ControllerConfig
    mode: Mode
    voltage: float                     # currently commanded voltage [V]
    best_voltage: float                # best operating point found so far [V]
    best_energy: float | None = None   # averaged energy at best_voltage [J]
    metric_ref: float | None = None    # reference load metric at the optimum [A*s]
    metric_prev: float | None = None   # previous metric while raising [A*s]
    increase_threshold: float | None = None  # resolved thresholds [A*s]
    decrease_threshold: float | None = None
    convergence_tol: float | None = None
    pending: str | None = None         # unconfirmed breach direction while monitoring
    batch_index: int = 0


@dataclass(frozen=True)
class Event:
    """A controller event with a small payload for the audit log."""

    name: str
    data: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ControllerOutput:
    """Voltage to apply for the next batch plus any events this transition."""

    command: float
    events: tuple[Event, ...] = ()


def init(config: ControllerConfig) -> tuple[ControllerState, ControllerOutput]:
    """Start the downward search at the initial voltage."""
    state = ControllerState(
        config=config,
        mode=Mode.SEARCH,
        voltage=config.v_init,
        best_voltage=config.v_init,
    )
    output = ControllerOutput(
        command=config.v_init,
        events=(Event("search_started", {"voltage": config.v_init}),),
    )
    return state, output


def _resolve_thresholds(config: ControllerConfig, reference: float) -> tuple[float, float, float]:
    inc = config.increase_threshold
    dec = config.decrease_threshold
    tol = config.convergence_tol
    if inc is None:
        inc = config.rel_increase * reference
    if dec is None:
        dec = -config.rel_decrease * reference
    if tol is None:
        tol = config.rel_convergence * max(reference, config.convergence_floor)
    return inc, dec, tol


def _settle_at_optimum(state: ControllerState, events: list[Event]) -> tuple[ControllerState, ControllerOutput]:
    """Command the best voltage and start monitoring (reference pending)."""
    events.append(Event("optimum_found", {"voltage": state.best_voltage, "energy": state.best_energy}))
    new = replace(
        state,
        mode=Mode.MONITOR,
        voltage=state.best_voltage,
        metric_ref=None,
        metric_prev=None,
        pending=None,
    )
    return new, ControllerOutput(command=new.voltage, events=tuple(events))


def _descend(state: ControllerState, energy: float, events: list[Event]) -> tuple[ControllerState, ControllerOutput]:
    """Shared step of the initial search and the post-change downward sweep."""
    cfg = state.config
    if state.best_energy is None or energy <= state.best_energy:
        state = replace(state, best_energy=energy, best_voltage=state.voltage)
        next_voltage = state.voltage - cfg.v_step
        if next_voltage >= cfg.v_min - _GRID_TOL:
            state = replace(state, voltage=next_voltage)
            return state, ControllerOutput(command=next_voltage, events=tuple(events))
        return _settle_at_optimum(state, events)
    return _settle_at_optimum(state, events)


def on_batch(state: ControllerState, energy: float, metric: float) -> tuple[ControllerState, ControllerOutput]:
    """Consume one batch of averaged measurements taken at the commanded voltage.

    ``energy`` is the averaged per-cycle energy [J] and ``metric`` the
    averaged load metric [A*s] over the batch.
    """
    if not (math.isfinite(energy) and energy > 0):
        raise ValueError("energy must be finite and positive")
    if not math.isfinite(metric):
        raise ValueError("metric must be finite")

    cfg = state.config
    state = replace(state, batch_index=state.batch_index + 1)
    events: list[Event] = []

    if state.mode in (Mode.SEARCH, Mode.SWEEP_DOWN):
        return _descend(state, energy, events)

    if state.mode is Mode.MONITOR:
        if state.metric_ref is None:
            # First batch back at the optimum establishes the reference and
            # resolves the relative thresholds against it.
            inc, dec, tol = _resolve_thresholds(cfg, metric)
            state = replace(
                state,
                metric_ref=metric,
                increase_threshold=inc,
                decrease_threshold=dec,
                convergence_tol=tol,
            )
            return state, ControllerOutput(command=state.voltage)

        delta = metric - state.metric_ref
        if delta < state.decrease_threshold:
            direction = "decrease"
        elif delta > state.increase_threshold:
            direction = "increase"
        else:
            direction = None
        if direction is None:
            if state.pending is not None:
                state = replace(state, pending=None)
            return state, ControllerOutput(command=state.voltage)
        if state.pending != direction:
            # A single-batch excursion can be a measurement artifact (for
            # example the re-equilibration cycle right after a load step);
            # act only once the following batch confirms the direction.
            state = replace(state, pending=direction)
            return state, ControllerOutput(command=state.voltage)
        state = replace(state, pending=None)
        if direction == "decrease":
            events.append(Event("load_decrease_detected", {"delta": delta}))
            # The confirming batch was measured at the optimum under the new
            # load, so its energy seeds the downward sweep directly.
            state = replace(state, mode=Mode.SWEEP_DOWN, best_energy=None, metric_ref=None)
            return _descend(state, energy, events)
        events.append(Event("load_increase_detected", {"delta": delta}))
        state = replace(state, mode=Mode.RAISE, metric_prev=metric, metric_ref=None)
        return _raise_step(state, events)

    if state.mode is Mode.RAISE:
        tol = state.convergence_tol
        if tol is None:
            # Entered the raise without an established reference (stall path).
            tol = _resolve_thresholds(cfg, metric)[2]
            state = replace(state, convergence_tol=tol)
        if state.metric_prev is not None and abs(metric - state.metric_prev) < tol:
            events.append(Event("metric_converged", {"voltage": state.voltage}))
            return _start_sweep_here(state, events)
        state = replace(state, metric_prev=metric)
        return _raise_step(state, events)

    raise AssertionError(f"unhandled mode {state.mode}")


def _raise_step(state: ControllerState, events: list[Event]) -> tuple[ControllerState, ControllerOutput]:
    """Raise by one step, or begin the downward sweep at the upper bound."""
    cfg = state.config
    next_voltage = state.voltage + cfg.v_step
    if next_voltage <= cfg.v_max + _GRID_TOL:
        state = replace(state, mode=Mode.RAISE, voltage=min(next_voltage, cfg.v_max))
        return state, ControllerOutput(command=state.voltage, events=tuple(events))
    if not events or events[-1].name != "metric_converged":
        events.append(Event("metric_converged", {"voltage": state.voltage}))
    return _start_sweep_here(state, events)


def _start_sweep_here(state: ControllerState, events: list[Event]) -> tuple[ControllerState, ControllerOutput]:
    """Enter the downward sweep seeded by a fresh batch at the current voltage."""
    state = replace(
        state,
        mode=Mode.SWEEP_DOWN,
        best_voltage=state.voltage,
        best_energy=None,
        metric_prev=None,
        metric_ref=None,
        pending=None,
    )
    return state, ControllerOutput(command=state.voltage, events=tuple(events))


def on_stall(state: ControllerState) -> tuple[ControllerState, ControllerOutput]:
    """React to a stalled cycle at the commanded voltage.

    During a downward search the sweep ends at the last good operating
    point.  While monitoring, a stall means the load has grown beyond what
    the optimum can drive, so it is handled like a detected load increase.
    A stall at the upper voltage bound is fatal.
    """
    cfg = state.config
    state = replace(state, batch_index=state.batch_index + 1)
    if state.voltage >= cfg.v_max - _GRID_TOL:
        raise PlantFatalError("plant cannot run")

    if state.mode in (Mode.SEARCH, Mode.SWEEP_DOWN):
        if state.best_energy is None:
            # No optimum recorded yet: back off one step and keep searching.
            state = replace(state, voltage=min(state.voltage + cfg.v_step, cfg.v_max))
            return state, ControllerOutput(
                command=state.voltage,
                events=(Event("stall_recovered", {"voltage": state.voltage}),),
            )
        events = [Event("stall_recovered", {"voltage": state.best_voltage})]
        return _settle_at_optimum(state, events)

    # MONITOR or RAISE: raise one step; the metric comparison restarts.
    state = replace(
        state,
        mode=Mode.RAISE,
        metric_prev=None,
        metric_ref=None,
        pending=None,
        voltage=min(state.voltage + cfg.v_step, cfg.v_max),
    )
    return state, ControllerOutput(
        command=state.voltage,
        events=(Event("stall_recovered", {"voltage": state.voltage}),),
    )
