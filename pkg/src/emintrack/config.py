"""Scenario assembly and the flat key-value configuration file format.

A scenario file is plain text, one ``section.key = value`` per line, with
``#`` comment lines and blank lines ignored.  Every key is optional and
falls back to the documented defaults; unknown keys are errors so that a
typo cannot silently fall back to a default.  The full key list lives in
the README and in :data:`SCHEMA` below.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

from .controller import ControllerConfig
from .load import (
    CONDITION_NAMES,
    DEFAULT_WINDOW_END,
    DEFAULT_WINDOW_START,
    LoadCondition,
    SpringLoadProfile,
    make_condition,
)
from .motor import MotorParams
from .sim import QUASI_STATIC_DT, SensorConfig, SimConfig

__all__ = [
    "ConfigError",
    "Scenario",
    "default_scenario",
    "parse_scenario",
    "parse_scenario_text",
    "scenario_to_text",
]


class ConfigError(ValueError):
    """A scenario file or CLI usage problem (exit code 1)."""


@dataclass(frozen=True)
class Scenario:
    """Everything one experiment needs, fully resolved."""

    motor: MotorParams
    sensors: SensorConfig
    sim: SimConfig
    controller: ControllerConfig
    load_schedule: tuple[tuple[float, LoadCondition], ...]
    duration: float = 150.0      # simulated time horizon [s]
    trials: int = 20
    base_seed: int = 0
    warmup_cycles: int = 2       # cycles discarded after every voltage change
    nc_values: tuple[int, ...] = (1, 3, 5)  # averaging depths covered by `batch`
    load_presets: tuple[LoadCondition, ...] | None = None  # resolved none/low/high

    def __post_init__(self) -> None:
        if self.load_presets is None:
            object.__setattr__(
                self, "load_presets", tuple(make_condition(n) for n in CONDITION_NAMES)
            )
        if not self.load_schedule:
            raise ConfigError("load schedule must not be empty")
        times = [t for t, _ in self.load_schedule]
        if times[0] != 0.0:
            raise ConfigError("load schedule must start at time 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("load schedule times must be strictly increasing")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.warmup_cycles < 0:
            raise ConfigError("warmup_cycles must be non-negative")
        if not self.nc_values or any(n not in (1, 3, 5) for n in self.nc_values):
            raise ConfigError("nc_values must be drawn from {1, 3, 5}")

    def condition_at(self, t: float) -> LoadCondition:
        """Active load condition at simulated time ``t``."""
        active = self.load_schedule[0][1]
        for start, cond in self.load_schedule:
            if t >= start:
                active = cond
            else:
                break
        return active

    def preset(self, name: str) -> LoadCondition:
        """One of the resolved none/low/high conditions."""
        assert self.load_presets is not None
        for cond in self.load_presets:
            if cond.name == name:
                return cond
        raise ConfigError(f"unknown load condition {name!r}")


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_float(text: str):
    if text.lower() in ("none", ""):
        return None
    return float(text)


def _parse_schedule(text: str) -> tuple[tuple[float, str], ...]:
    entries = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            time_text, name = chunk.split(":")
        except ValueError:
            raise ValueError(f"schedule entry {chunk!r} is not 'time:condition'") from None
        name = name.strip()
        if name not in CONDITION_NAMES:
            raise ValueError(f"unknown condition {name!r} in schedule")
        entries.append((float(time_text), name))
    if not entries:
        raise ValueError("empty schedule")
    return tuple(entries)


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


# key -> (parser, default accessor). The defaults are rendered by
# scenario_to_text, so parse(scenario_to_text(s)) == s.
SCHEMA: dict[str, Callable[[str], Any]] = {
    "motor.resistance": float,
    "motor.inductance": float,
    "motor.back_emf_constant": float,
    "motor.torque_constant": float,
    "motor.rotor_inertia": float,
    "motor.viscous_drag": float,
    "motor.gear_ratio": float,
    "sensors.sample_rate": float,
    "sensors.noise_sigma": float,
    "sensors.seed": int,
    "sim.dt": float,
    "sim.quasi_static": _parse_bool,
    "sim.max_cycle_time": float,
    "controller.v_min": float,
    "controller.v_max": float,
    "controller.v_init": float,
    "controller.v_step": float,
    "controller.averaging_cycles": int,
    "controller.increase_threshold": _parse_optional_float,
    "controller.decrease_threshold": _parse_optional_float,
    "controller.convergence_tol": _parse_optional_float,
    "controller.rel_increase": float,
    "controller.rel_decrease": float,
    "controller.rel_convergence": float,
    "controller.convergence_floor": float,
    "load.friction_torque": float,
    "load.peak_low": float,
    "load.peak_high": float,
    "load.window_start": float,
    "load.window_end": float,
    "load.schedule": _parse_schedule,
    "run.duration": float,
    "run.trials": int,
    "run.base_seed": int,
    "run.warmup_cycles": int,
    "run.nc_values": _parse_int_list,
}


def default_scenario() -> Scenario:
    """The documented defaults: low load throughout, quasi-static plant."""
    return Scenario(
        motor=MotorParams(),
        sensors=SensorConfig(),
        sim=SimConfig(dt=QUASI_STATIC_DT, quasi_static=True),
        controller=ControllerConfig(),
        load_schedule=((0.0, make_condition("low")),),
    )


def parse_scenario_text(text: str, source: str = "<string>") -> Scenario:
    """Parse scenario text; unknown keys and malformed values are errors."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = SCHEMA[key](value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return _build_scenario(values)


def parse_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from None
    return parse_scenario_text(text, source=str(path))


def _build_scenario(values: dict[str, Any]) -> Scenario:
    def take(key: str, default):
        return values[key] if key in values else default

    try:
        motor = MotorParams(
            resistance=take("motor.resistance", MotorParams.resistance),
            inductance=take("motor.inductance", MotorParams.inductance),
            back_emf_constant=take("motor.back_emf_constant", MotorParams.back_emf_constant),
            torque_constant=take("motor.torque_constant", MotorParams.torque_constant),
            rotor_inertia=take("motor.rotor_inertia", MotorParams.rotor_inertia),
            viscous_drag=take("motor.viscous_drag", MotorParams.viscous_drag),
            gear_ratio=take("motor.gear_ratio", MotorParams.gear_ratio),
        )
        sensors = SensorConfig(
            sample_rate=take("sensors.sample_rate", SensorConfig.sample_rate),
            noise_sigma=take("sensors.noise_sigma", SensorConfig.noise_sigma),
            seed=take("sensors.seed", SensorConfig.seed),
        )
        sim = SimConfig(
            dt=take("sim.dt", QUASI_STATIC_DT),
            quasi_static=take("sim.quasi_static", True),
            max_cycle_time=take("sim.max_cycle_time", SimConfig.max_cycle_time),
        )
        controller = ControllerConfig(
            v_min=take("controller.v_min", ControllerConfig.v_min),
            v_max=take("controller.v_max", ControllerConfig.v_max),
            v_init=take("controller.v_init", ControllerConfig.v_init),
            v_step=take("controller.v_step", ControllerConfig.v_step),
            averaging_cycles=take("controller.averaging_cycles", ControllerConfig.averaging_cycles),
            increase_threshold=take("controller.increase_threshold", None),
            decrease_threshold=take("controller.decrease_threshold", None),
            convergence_tol=take("controller.convergence_tol", None),
            rel_increase=take("controller.rel_increase", ControllerConfig.rel_increase),
            rel_decrease=take("controller.rel_decrease", ControllerConfig.rel_decrease),
            rel_convergence=take("controller.rel_convergence", ControllerConfig.rel_convergence),
            convergence_floor=take("controller.convergence_floor", ControllerConfig.convergence_floor),
        )
        friction = take("load.friction_torque", SpringLoadProfile.friction_torque)
        peak_overrides = {}
        if "load.peak_low" in values:
            peak_overrides["low"] = values["load.peak_low"]
        if "load.peak_high" in values:
            peak_overrides["high"] = values["load.peak_high"]
        window_start = take("load.window_start", DEFAULT_WINDOW_START)
        window_end = take("load.window_end", DEFAULT_WINDOW_END)

        def condition(name: str) -> LoadCondition:
            return make_condition(
                name,
                friction_torque=friction,
                peak_overrides=peak_overrides or None,
                window_start=window_start,
                window_end=window_end,
            )

        schedule_spec = take("load.schedule", ((0.0, "low"),))
        schedule = tuple((t, condition(name)) for t, name in schedule_spec)

        return Scenario(
            motor=motor,
            sensors=sensors,
            sim=sim,
            controller=controller,
            load_schedule=schedule,
            duration=take("run.duration", Scenario.duration),
            trials=take("run.trials", Scenario.trials),
            base_seed=take("run.base_seed", Scenario.base_seed),
            warmup_cycles=take("run.warmup_cycles", Scenario.warmup_cycles),
            nc_values=take("run.nc_values", Scenario.nc_values),
            load_presets=tuple(condition(n) for n in CONDITION_NAMES),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)  # shortest exact representation, round-trips
    return str(value)


def scenario_to_text(scenario: Scenario) -> str:
    """Render a scenario in the file format; parsing the result round-trips."""
    m = scenario.motor
    sensors = scenario.sensors
    sim = scenario.sim
    c = scenario.controller
    profile0 = scenario.preset("none").profile
    peak_low = scenario.preset("low").profile.peak_torque
    peak_high = scenario.preset("high").profile.peak_torque
    schedule = ", ".join(f"{_fmt(t)}:{cond.name}" for t, cond in scenario.load_schedule)
    lines = [
        "# emintrack scenario (all values SI unless noted)",
        f"motor.resistance = {_fmt(m.resistance)}",
        f"motor.inductance = {_fmt(m.inductance)}",
        f"motor.back_emf_constant = {_fmt(m.back_emf_constant)}",
        f"motor.torque_constant = {_fmt(m.torque_constant)}",
        f"motor.rotor_inertia = {_fmt(m.rotor_inertia)}",
        f"motor.viscous_drag = {_fmt(m.viscous_drag)}",
        f"motor.gear_ratio = {_fmt(m.gear_ratio)}",
        f"sensors.sample_rate = {_fmt(sensors.sample_rate)}",
        f"sensors.noise_sigma = {_fmt(sensors.noise_sigma)}",
        f"sensors.seed = {sensors.seed}",
        f"sim.dt = {_fmt(sim.dt)}",
        f"sim.quasi_static = {_fmt(sim.quasi_static)}",
        f"sim.max_cycle_time = {_fmt(sim.max_cycle_time)}",
        f"controller.v_min = {_fmt(c.v_min)}",
        f"controller.v_max = {_fmt(c.v_max)}",
        f"controller.v_init = {_fmt(c.v_init)}",
        f"controller.v_step = {_fmt(c.v_step)}",
        f"controller.averaging_cycles = {c.averaging_cycles}",
        f"controller.increase_threshold = {_fmt(c.increase_threshold) if c.increase_threshold is not None else 'none'}",
        f"controller.decrease_threshold = {_fmt(c.decrease_threshold) if c.decrease_threshold is not None else 'none'}",
        f"controller.convergence_tol = {_fmt(c.convergence_tol) if c.convergence_tol is not None else 'none'}",
        f"controller.rel_increase = {_fmt(c.rel_increase)}",
        f"controller.rel_decrease = {_fmt(c.rel_decrease)}",
        f"controller.rel_convergence = {_fmt(c.rel_convergence)}",
        f"controller.convergence_floor = {_fmt(c.convergence_floor)}",
        f"load.friction_torque = {_fmt(profile0.friction_torque)}",
        f"load.peak_low = {_fmt(peak_low)}",
        f"load.peak_high = {_fmt(peak_high)}",
        f"load.window_start = {_fmt(profile0.window_start)}",
        f"load.window_end = {_fmt(profile0.window_end)}",
        f"load.schedule = {schedule}",
        f"run.duration = {_fmt(scenario.duration)}",
        f"run.trials = {scenario.trials}",
        f"run.base_seed = {scenario.base_seed}",
        f"run.warmup_cycles = {scenario.warmup_cycles}",
        f"run.nc_values = {','.join(str(n) for n in scenario.nc_values)}",
    ]
    return "\n".join(lines) + "\n"


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    """Scenario as a flat JSON-friendly mapping (for the summary echo)."""
    result: dict[str, Any] = {}
    for line in scenario_to_text(scenario).splitlines():
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        result[key.strip()] = value.strip()
    return result
