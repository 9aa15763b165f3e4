"""Scenario runner: voltage sweeps, load-transition trials, batch statistics.

The closed-loop driver feeds the controller one batch at a time: after every
commanded voltage change a configurable number of warm-up cycles is
discarded to shed the mechanical transient, then the averaging cycles are
measured and handed to the controller.  Load conditions switch at cycle
boundaries according to the scenario schedule.  Every controller event is
logged with its simulated timestamp; response times are computed from that
event log alone, never from simulator internals.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import controller as ctl
from .config import ConfigError, Scenario, scenario_to_dict
from .load import LoadCondition
from .metrics import average_over_cycles, cycle_energy, extract_features, load_metric, measure_cycle
from .motor import MotorState
from .sim import CycleRecord, StallError, run_cycle
from . import __version__

__all__ = [
    "LogRow",
    "TrackingResult",
    "TrialResult",
    "SweepRow",
    "NcStats",
    "BatchSummary",
    "ReportBundle",
    "voltage_grid",
    "run_tracking",
    "run_sweep",
    "sweep_argmin",
    "run_transition",
    "run_batch",
    "extract_response",
    "emit_reports",
    "dump_cycle_csv",
]

DEFAULT_GRID_TOP = 5.0
DEFAULT_GRID_BOTTOM = 1.0
DEFAULT_GRID_STEP = 0.2


@dataclass(frozen=True)
class LogRow:
    """One controller event with its batch context."""

    t: float
    batch: int
    mode: str
    voltage: float
    best_voltage: float
    energy: float | None
    metric: float | None
    event: str
    data: dict[str, Any] = field(default_factory=dict)


@dataclass
class TrackingResult:
    rows: list[LogRow]
    final_state: MotorState
    final_controller: ctl.ControllerState
    cycles_run: int


@dataclass(frozen=True)
class TrialResult:
    """Outcome of one seeded load-transition trial."""

    nc: int
    trial_index: int
    seed: int
    response_time: float | None      # [s], None when timed out
    convergence_voltage: float | None  # terminal operating point [V]
    energy_at_optimum: float | None  # averaged energy at the new optimum [J]
    timed_out: bool
    settled: bool                    # found the pre-transition optimum in time
    rows: tuple[LogRow, ...]
    event_log: str | None = None     # path, filled in by emit_reports


@dataclass(frozen=True)
class SweepRow:
    """Steady measurements at one grid voltage."""

    voltage: float       # [V]
    mean_speed: float    # output-shaft speed [rad/s]
    mean_power: float    # [W]
    mean_energy: float   # [J/cycle]
    mean_metric: float   # [A*s]
    n_cycles: int


@dataclass(frozen=True)
class NcStats:
    """Aggregate trial statistics for one averaging depth."""

    nc: int
    completed: int
    timed_out: int
    response_mean: float | None
    response_std: float | None
    voltage_mean: float | None
    voltage_std: float | None
    energy_mean: float | None


@dataclass
class BatchSummary:
    trials: list[TrialResult]
    stats: list[NcStats]


@dataclass
class ReportBundle:
    """Everything emit_reports may serialize for one invocation."""

    scenario: Scenario
    command: str = "run"
    sweeps: dict[str, list[SweepRow]] = field(default_factory=dict)
    trials: list[TrialResult] = field(default_factory=list)
    stats: list[NcStats] = field(default_factory=list)
    notes: dict[str, Any] = field(default_factory=dict)


def voltage_grid(
    top: float = DEFAULT_GRID_TOP,
    bottom: float = DEFAULT_GRID_BOTTOM,
    step: float = DEFAULT_GRID_STEP,
) -> tuple[float, ...]:
    """Descending voltage grid from ``top`` to ``bottom`` inclusive."""
    if not (top > bottom and step > 0):
        raise ValueError("need top > bottom and step > 0")
    count = int(round((top - bottom) / step))
    return tuple(round(top - k * step, 12) for k in range(count + 1))


def run_tracking(
    scenario: Scenario,
    seed: int,
    *,
    nc: int | None = None,
    stop_on_optimum_after: float | None = None,
) -> TrackingResult:
    """Drive the controller against the simulated plant until the horizon.

    With ``stop_on_optimum_after`` set, the run ends at the first
    optimum-found event strictly later than that time (used for response
    time trials, which are over once the new optimum is announced).
    """
    cfg = scenario.controller
    if nc is not None:
        cfg = replace(cfg, averaging_cycles=nc)
    rng = np.random.default_rng(seed)
    state = MotorState()
    ctrl, out = ctl.init(cfg)
    rows: list[LogRow] = [
        _log_row(0.0, ctrl, None, None, event) for event in out.events
    ]
    command = out.command
    prev_command: float | None = None
    cycles = 0

    while state.t < scenario.duration:
        try:
            if command != prev_command:
                for _ in range(scenario.warmup_cycles):
                    cond = scenario.condition_at(state.t)
                    _, state = run_cycle(
                        state, command, cond, scenario.motor,
                        scenario.sensors, rng, scenario.sim, index=cycles,
                    )
                    cycles += 1
            energies: list[float] = []
            metrics: list[float] = []
            for _ in range(cfg.averaging_cycles):
                cond = scenario.condition_at(state.t)
                record, state = run_cycle(
                    state, command, cond, scenario.motor,
                    scenario.sensors, rng, scenario.sim, index=cycles,
                )
                cycles += 1
                energies.append(cycle_energy(record))
                metrics.append(load_metric(extract_features(record)))
            e_bar = average_over_cycles(energies, cfg.averaging_cycles)
            l_bar = average_over_cycles(metrics, cfg.averaging_cycles)
            ctrl, out = ctl.on_batch(ctrl, e_bar, l_bar)
            rows.extend(_log_row(state.t, ctrl, e_bar, l_bar, ev) for ev in out.events)
        except StallError as stall:
            state = stall.state
            ctrl, out = ctl.on_stall(ctrl)  # PlantFatalError propagates
            rows.extend(_log_row(state.t, ctrl, None, None, ev) for ev in out.events)

        prev_command = command
        command = out.command
        if stop_on_optimum_after is not None and any(
            ev.name == "optimum_found" for ev in out.events
        ) and state.t > stop_on_optimum_after:
            break

    return TrackingResult(rows=rows, final_state=state, final_controller=ctrl, cycles_run=cycles)


def _log_row(
    t: float,
    ctrl: ctl.ControllerState,
    energy: float | None,
    metric: float | None,
    event: ctl.Event,
) -> LogRow:
    return LogRow(
        t=t,
        batch=ctrl.batch_index,
        mode=ctrl.mode.value,
        voltage=ctrl.voltage,
        best_voltage=ctrl.best_voltage,
        energy=energy,
        metric=metric,
        event=event.name,
        data=dict(event.data),
    )


def run_sweep(
    condition: LoadCondition,
    grid: Iterable[float],
    nc: int,
    scenario: Scenario,
) -> list[SweepRow]:
    """Open-loop grid sweep: warm up, then measure ``nc`` cycles per voltage.

    Voltages are visited in descending order.  A voltage whose cycle stalls
    produces no row, and since the stall boundary is monotonic in voltage
    the sweep stops at the first stall.
    """
    voltages = sorted({float(v) for v in grid}, reverse=True)
    if not voltages:
        raise ValueError("empty voltage grid")
    rng = np.random.default_rng(scenario.base_seed)
    state = MotorState()
    rows: list[SweepRow] = []
    cycles = 0
    for v in voltages:
        try:
            for _ in range(scenario.warmup_cycles):
                _, state = run_cycle(
                    state, v, condition, scenario.motor,
                    scenario.sensors, rng, scenario.sim, index=cycles,
                )
                cycles += 1
            measures = []
            for _ in range(nc):
                record, state = run_cycle(
                    state, v, condition, scenario.motor,
                    scenario.sensors, rng, scenario.sim, index=cycles,
                )
                cycles += 1
                measures.append(measure_cycle(record))
        except StallError:
            break
        rows.append(
            SweepRow(
                voltage=v,
                mean_speed=statistics.fmean(2.0 * math.pi / m.period for m in measures),
                mean_power=statistics.fmean(m.mean_power for m in measures),
                mean_energy=statistics.fmean(m.energy for m in measures),
                mean_metric=statistics.fmean(m.features.metric for m in measures),
                n_cycles=nc,
            )
        )
    if not rows:
        raise StallError("every grid voltage stalled", state)
    return rows


def sweep_argmin(rows: Iterable[SweepRow]) -> SweepRow:
    """Row with the least energy; exact ties resolve to the lower voltage."""
    return min(rows, key=lambda r: (r.mean_energy, r.voltage))


def extract_response(rows: Iterable[LogRow], t_switch: float) -> LogRow | None:
    """First optimum-found event strictly after the load switch, if any."""
    for row in rows:
        if row.event == "optimum_found" and row.t > t_switch:
            return row
    return None


def run_transition(
    scenario: Scenario,
    trial_seed: int,
    *,
    nc: int | None = None,
    trial_index: int = 0,
) -> TrialResult:
    """One seeded trial of the scenario's single load transition."""
    if len(scenario.load_schedule) != 2:
        raise ConfigError("transition trials need a schedule with exactly one transition")
    t_switch = scenario.load_schedule[1][0]
    result = run_tracking(
        scenario, trial_seed, nc=nc, stop_on_optimum_after=t_switch,
    )
    effective_nc = nc if nc is not None else scenario.controller.averaging_cycles
    optima = [r for r in result.rows if r.event == "optimum_found"]
    settled = any(r.t <= t_switch for r in optima)
    response = extract_response(result.rows, t_switch)
    if response is not None and settled:
        return TrialResult(
            nc=effective_nc,
            trial_index=trial_index,
            seed=trial_seed,
            response_time=response.t - t_switch,
            convergence_voltage=float(response.data["voltage"]),
            energy_at_optimum=float(response.data["energy"]),
            timed_out=False,
            settled=True,
            rows=tuple(result.rows),
        )
    return TrialResult(
        nc=effective_nc,
        trial_index=trial_index,
        seed=trial_seed,
        response_time=None,
        convergence_voltage=None,
        energy_at_optimum=None,
        timed_out=True,
        settled=settled,
        rows=tuple(result.rows),
    )


def run_batch(scenario: Scenario) -> BatchSummary:
    """Seeded transition trials for every averaging depth in the scenario."""
    trials: list[TrialResult] = []
    for nc in scenario.nc_values:
        for i in range(scenario.trials):
            trials.append(
                run_transition(scenario, scenario.base_seed + i, nc=nc, trial_index=i)
            )
    stats = [
        _nc_stats(nc, [t for t in trials if t.nc == nc]) for nc in scenario.nc_values
    ]
    return BatchSummary(trials=trials, stats=stats)


def _nc_stats(nc: int, trials: list[TrialResult]) -> NcStats:
    done = [t for t in trials if not t.timed_out]
    responses = [t.response_time for t in done]
    voltages = [t.convergence_voltage for t in done]
    energies = [t.energy_at_optimum for t in done]

    def mean(xs):
        return statistics.fmean(xs) if xs else None

    def std(xs):
        return statistics.stdev(xs) if len(xs) >= 2 else None

    return NcStats(
        nc=nc,
        completed=len(done),
        timed_out=len(trials) - len(done),
        response_mean=mean(responses),
        response_std=std(responses),
        voltage_mean=mean(voltages),
        voltage_std=std(voltages),
        energy_mean=mean(energies),
    )


# --- report emission ---------------------------------------------------------

def _nine(value: Any) -> Any:
    """Floats rounded to 9 significant digits for serialization."""
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return float(format(value, ".9g"))
    if isinstance(value, dict):
        return {k: _nine(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_nine(v) for v in value]
    return value


def _fmt_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt_cell(c) for c in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_json(path: Path, payload: Any) -> None:
    path.write_text(
        json.dumps(_nine(payload), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
        newline="\n",
    )


def write_event_log(rows: Iterable[LogRow], path: Path) -> None:
    """One JSON object per line per controller event."""
    lines = []
    for row in rows:
        payload = {
            "t": row.t,
            "batch": row.batch,
            "mode": row.mode,
            "voltage": row.voltage,
            "best_voltage": row.best_voltage,
            "energy": row.energy,
            "metric": row.metric,
            "event": row.event,
        }
        payload.update(row.data)
        lines.append(json.dumps(_nine(payload), sort_keys=True))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8", newline="\n")


def dump_cycle_csv(record: CycleRecord, path: Path) -> None:
    """Waveform dump of one traced cycle (needs capture_trace=True)."""
    if record.trace is None:
        raise ValueError("cycle was recorded without a trace")
    rows = [
        (t, record.voltage, measured, true, angle)
        for (t, true, angle), measured in zip(record.trace, record.samples)
    ]
    _write_csv(Path(path), ["t", "V", "I_measured", "I_true", "theta_out"], rows)


SWEEP_HEADER = ["V", "mean_speed", "mean_power", "mean_energy", "mean_metric", "n_cycles"]
TRIALS_HEADER = [
    "nc", "trial", "seed", "response_time", "convergence_voltage",
    "energy_at_optimum", "timed_out", "settled", "event_log",
]


def emit_reports(results: ReportBundle, out_dir: str | Path, *, figures: bool = True) -> list[Path]:
    """Write CSV/JSON reports (and figures) for one command invocation.

    Returns the created file paths.  Rendering of figures can be disabled;
    the delimited outputs are always written.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out}: {exc}") from None
    created: list[Path] = []

    for label, rows in sorted(results.sweeps.items()):
        path = out / f"sweep_{label}.csv"
        _write_csv(
            path,
            SWEEP_HEADER,
            (
                (r.voltage, r.mean_speed, r.mean_power, r.mean_energy, r.mean_metric, r.n_cycles)
                for r in rows
            ),
        )
        created.append(path)

    trials = results.trials
    if trials or results.command in ("batch", "track"):
        log_paths: list[str] = []
        for trial in trials:
            name = f"events_nc{trial.nc}_trial{trial.trial_index:03d}.jsonl"
            write_event_log(trial.rows, out / name)
            created.append(out / name)
            log_paths.append(name)
        if trials:
            results.trials = [
                replace(t, event_log=name) for t, name in zip(trials, log_paths)
            ]
        path = out / "trials.csv"
        _write_csv(
            path,
            TRIALS_HEADER,
            (
                (
                    t.nc, t.trial_index, t.seed, t.response_time, t.convergence_voltage,
                    t.energy_at_optimum, t.timed_out, t.settled, t.event_log,
                )
                for t in results.trials
            ),
        )
        created.append(path)

    summary = {
        "version": f"emintrack-v{__version__}",
        "command": results.command,
        "scenario": scenario_to_dict(results.scenario),
        "notes": results.notes,
        "stats": [
            {
                "nc": s.nc,
                "completed": s.completed,
                "timed_out": s.timed_out,
                "response_time_mean": s.response_mean,
                "response_time_std": s.response_std,
                "convergence_voltage_mean": s.voltage_mean,
                "convergence_voltage_std": s.voltage_std,
                "energy_at_optimum_mean": s.energy_mean,
            }
            for s in results.stats
        ],
        "sweeps": {
            label: {"voltages": [r.voltage for r in rows]}
            for label, rows in sorted(results.sweeps.items())
        },
    }
    summary_path = out / "summary.json"
    _write_json(summary_path, summary)
    created.append(summary_path)

    if figures:
        from . import plots  # deferred: pulling in matplotlib is slow

        created.extend(plots.render_reports(results, out))

    return sorted(created)
