"""Fixed-step plant simulation, cycle segmentation, and current sensing.

The plant is integrated with a classical 4-stage Runge-Kutta scheme at a
fixed step.  Two formulations are available:

* full: angle, speed and winding current are all states (needs a step small
  enough to resolve the electrical time constant L/R),
* quasi-static: the current is eliminated algebraically, I = (V - Ke*w)/R,
  leaving a non-stiff two-state system that tolerates much larger steps.

Cycles are segmented at exact multiples of 2*pi of the output-shaft angle
(ideal encoder); the crossing instant is located by linear interpolation and
the final integration step is shortened to land on it, so consecutive cycle
periods add up exactly to the elapsed simulation time.  Current samples are
taken at the sensor rate with optional additive Gaussian noise from a caller
supplied generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .load import LoadCondition, TWO_PI
from .motor import MotorParams, MotorState

__all__ = [
    "SimConfig",
    "SensorConfig",
    "CycleRecord",
    "EnergyBalance",
    "StallError",
    "QUASI_STATIC_DT",
    "step",
    "run_cycle",
    "sample_sensor",
]

QUASI_STATIC_DT = 5.0e-4  # recommended step [s] for quasi-static integration


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    The default step of 2e-5 s resolves the electrical time constant of the
    default motor (L/R = 25 us).  In quasi-static mode the electrical state
    is gone and the step may be much larger; ``QUASI_STATIC_DT`` works well.
    """

    dt: float = 2.0e-5            # integration step [s]
    quasi_static: bool = False    # eliminate the current state algebraically
    max_cycle_time: float = 10.0  # watchdog: a cycle longer than this is a stall [s]

    def __post_init__(self) -> None:
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive and finite")
        if self.max_cycle_time <= 0:
            raise ValueError("max_cycle_time must be positive")


@dataclass(frozen=True)
class SensorConfig:
    """Current-sensor sampling model.

    The default noise level is calibrated together with the default motor:
    the waveform thresholds behind the load metric key off the sampled
    extremes, so the noise floor must stay well below a tenth of the
    loaded-phase current swing (about 20 mA at the low-load optimum) for
    load detection to be usable.  0.2 mA is typical of an integrated
    current monitor at this rate.
    """

    sample_rate: float = 500.0   # [Hz]
    noise_sigma: float = 2.0e-4  # additive Gaussian noise std [A]
    seed: int = 0                # default RNG seed used by the harness

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class EnergyBalance:
    """Per-cycle energy bookkeeping [J], trapezoid-integrated along the run.

    Electrical side: electrical_in = resistive_loss + inductive_delta +
    emf_work.  Mechanical side: shaft_work = kinetic_delta + viscous_loss +
    load_work.  Residuals are relative to the side's input term.
    """

    electrical_in: float
    resistive_loss: float
    inductive_delta: float
    emf_work: float
    shaft_work: float
    kinetic_delta: float
    viscous_loss: float
    load_work: float

    def electrical_residual(self) -> float:
        scale = max(abs(self.electrical_in), 1e-30)
        return abs(self.electrical_in - self.resistive_loss - self.inductive_delta - self.emf_work) / scale

    def mechanical_residual(self) -> float:
        scale = max(abs(self.shaft_work), 1e-30)
        return abs(self.shaft_work - self.kinetic_delta - self.viscous_loss - self.load_work) / scale


@dataclass(frozen=True)
class CycleRecord:
    """One completed mechanical cycle of measurements.

    ``samples`` are the noisy sensor currents [A] taken at the sensor rate,
    the first one at the cycle start.  ``period`` is the exact duration of
    one output-shaft revolution [s].  The drive voltage is constant within a
    cycle by construction.
    """

    index: int
    voltage: float
    samples: tuple[float, ...]
    period: float
    t_start: float
    balance: EnergyBalance
    trace: tuple[tuple[float, float, float], ...] | None = None  # (t, true current, output angle)


class StallError(RuntimeError):
    """Raised when a cycle fails to complete within the watchdog time."""

    def __init__(self, message: str, state: MotorState):
        super().__init__(message)
        self.state = state


class _Stepper:
    """One-step RK4 integrator with the profile and params unpacked."""

    def __init__(self, voltage: float, condition: LoadCondition, params: MotorParams, quasi_static: bool):
        p = condition.profile
        self.voltage = voltage
        self.fric = p.friction_torque
        self.peak = p.peak_torque
        self.w0 = p.window_start
        self.w1 = p.window_end
        self.span = p.window_end - p.window_start
        self.resistance = params.resistance
        self.inductance = params.inductance
        self.ke = params.back_emf_constant
        self.kt = params.torque_constant
        self.inertia = params.rotor_inertia
        self.drag = params.viscous_drag
        self.gear = params.gear_ratio
        self.quasi_static = quasi_static
        if not quasi_static and params.inductance <= 0:
            raise ValueError("full dynamic integration needs inductance > 0")

    def load_torque(self, angle: float) -> float:
        """Output-shaft torque [N*m] at motor-shaft angle ``angle``."""
        x = (angle / self.gear) % TWO_PI
        if self.w0 <= x < self.w1:
            return self.fric + self.peak * (x - self.w0) / self.span
        return self.fric

    def stalled_at_rest(self, speed: float, current: float, angle: float) -> bool:
        """True when the shaft is stopped and cannot break away at this angle.

        With the angle frozen the load torque is frozen too, so if neither
        the present current nor the settled stall current V/R can overcome
        it, the plant stays put forever.
        """
        if speed > 0.0:
            return False
        drive = self.kt * max(current, self.voltage / self.resistance)
        return drive <= self.load_torque(angle) / self.gear

    def advance(self, angle: float, speed: float, current: float, dt: float) -> tuple[float, float, float]:
        """One RK4 step; returns (angle, speed, current) with speed clamped >= 0."""
        v = self.voltage
        kt = self.kt
        ke = self.ke
        drag = self.drag
        inertia = self.inertia
        gear = self.gear
        resistance = self.resistance
        torque = self.load_torque

        if self.quasi_static:
            def accel(th, om):
                cur = (v - ke * om) / resistance
                return (kt * cur - drag * om - torque(th) / gear) / inertia

            a1 = accel(angle, speed)
            s2 = speed + 0.5 * dt * a1
            a2 = accel(angle + 0.5 * dt * speed, s2)
            s3 = speed + 0.5 * dt * a2
            a3 = accel(angle + 0.5 * dt * s2, s3)
            s4 = speed + dt * a3
            a4 = accel(angle + dt * s3, s4)
            new_speed = speed + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            new_angle = angle + dt / 6.0 * (speed + 2.0 * s2 + 2.0 * s3 + s4)
            if new_speed < 0.0:
                new_speed = 0.0
            if new_angle < angle:
                new_angle = angle
            return new_angle, new_speed, (v - ke * new_speed) / resistance

        inductance = self.inductance

        def derivs(th, om, cur):
            dom = (kt * cur - drag * om - torque(th) / gear) / inertia
            dcur = (v - cur * resistance - ke * om) / inductance
            return om, dom, dcur

        d1t, d1w, d1i = derivs(angle, speed, current)
        d2t, d2w, d2i = derivs(angle + 0.5 * dt * d1t, speed + 0.5 * dt * d1w, current + 0.5 * dt * d1i)
        d3t, d3w, d3i = derivs(angle + 0.5 * dt * d2t, speed + 0.5 * dt * d2w, current + 0.5 * dt * d2i)
        d4t, d4w, d4i = derivs(angle + dt * d3t, speed + dt * d3w, current + dt * d3i)
        new_angle = angle + dt / 6.0 * (d1t + 2.0 * d2t + 2.0 * d3t + d4t)
        new_speed = speed + dt / 6.0 * (d1w + 2.0 * d2w + 2.0 * d3w + d4w)
        new_current = current + dt / 6.0 * (d1i + 2.0 * d2i + 2.0 * d3i + d4i)
        if new_speed < 0.0:
            new_speed = 0.0
        if new_angle < angle:
            new_angle = angle
        return new_angle, new_speed, new_current


def step(
    state: MotorState,
    voltage: float,
    condition: LoadCondition,
    params: MotorParams,
    dt: float,
    *,
    quasi_static: bool = False,
) -> MotorState:
    """Advance the plant by exactly one step ``dt`` at constant voltage."""
    if not (math.isfinite(voltage) and voltage >= 0):
        raise ValueError("voltage must be finite and non-negative")
    if dt <= 0:
        raise ValueError("dt must be positive")
    stepper = _Stepper(voltage, condition, params, quasi_static)
    current = state.current
    if quasi_static:
        current = (voltage - params.back_emf_constant * state.speed) / params.resistance
    angle, speed, current = stepper.advance(state.angle, state.speed, current, dt)
    if not (math.isfinite(angle) and math.isfinite(speed) and math.isfinite(current)):
        raise RuntimeError("integration diverged")
    return MotorState(angle=angle, speed=speed, current=current, t=state.t + dt)


def sample_sensor(true_current: float, sensors: SensorConfig, rng: np.random.Generator) -> float:
    """One sensor reading: the true current plus Gaussian noise (not clamped)."""
    if sensors.noise_sigma == 0.0:
        return true_current
    return true_current + float(rng.normal(0.0, sensors.noise_sigma))


def run_cycle(
    state: MotorState,
    voltage: float,
    condition: LoadCondition,
    params: MotorParams,
    sensors: SensorConfig,
    rng: np.random.Generator,
    sim: SimConfig = SimConfig(),
    *,
    index: int = 0,
    capture_trace: bool = False,
) -> tuple[CycleRecord, MotorState]:
    """Integrate one full output-shaft revolution at constant voltage.

    Returns the cycle record and the plant state exactly at the revolution
    boundary.  Raises :class:`StallError` when the cycle does not complete
    within ``sim.max_cycle_time`` of simulated time.
    """
    if not (math.isfinite(voltage) and voltage >= 0):
        raise ValueError("voltage must be finite and non-negative")

    stepper = _Stepper(voltage, condition, params, sim.quasi_static)
    dt = sim.dt
    stride = max(1, round(1.0 / (sensors.sample_rate * dt)))

    angle = state.angle
    speed = state.speed
    current = state.current
    if sim.quasi_static:
        current = (voltage - params.back_emf_constant * speed) / params.resistance
    t = state.t
    t0 = t
    target = angle + TWO_PI * params.gear_ratio

    gear = params.gear_ratio
    resistance = params.resistance
    ke = params.back_emf_constant
    kt = params.torque_constant
    drag = params.viscous_drag

    true_samples: list[float] = []
    trace: list[tuple[float, float, float]] = []

    # Trapezoid accumulators for the energy balance.
    e_in = e_res = e_emf = e_shaft = e_visc = e_load = 0.0
    speed_start = speed
    current_start = current

    def powers(th: float, om: float, cur: float) -> tuple[float, float, float, float, float, float]:
        return (
            voltage * cur,
            cur * cur * resistance,
            ke * om * cur,
            kt * cur * om,
            drag * om * om,
            (stepper.load_torque(th) / gear) * om,
        )

    prev_powers = powers(angle, speed, current)
    step_count = 0

    while True:
        if step_count % stride == 0:
            true_samples.append(current)
            if capture_trace:
                trace.append((t, current, angle / gear))

        if stepper.stalled_at_rest(speed, current, angle):
            # The shaft cannot break away; jump straight to the watchdog.
            if not sim.quasi_static:
                current = voltage / resistance
            stalled = MotorState(angle=angle, speed=0.0, current=current, t=t0 + sim.max_cycle_time)
            raise StallError("stall detected", stalled)

        a0, s0, c0 = angle, speed, current
        angle, speed, current = stepper.advance(a0, s0, c0, dt)
        dt_step = dt
        t += dt
        step_count += 1

        if not (math.isfinite(angle) and math.isfinite(speed) and math.isfinite(current)):
            raise RuntimeError("integration diverged")

        crossed = angle >= target
        if crossed and angle > a0:
            fraction = (target - a0) / (angle - a0)
            if 0.0 < fraction < 1.0:
                dt_step = dt * fraction
                angle, speed, current = stepper.advance(a0, s0, c0, dt_step)
                t += dt_step - dt

        cur_powers = powers(angle, speed, current)
        half = 0.5 * dt_step
        e_in += half * (prev_powers[0] + cur_powers[0])
        e_res += half * (prev_powers[1] + cur_powers[1])
        e_emf += half * (prev_powers[2] + cur_powers[2])
        e_shaft += half * (prev_powers[3] + cur_powers[3])
        e_visc += half * (prev_powers[4] + cur_powers[4])
        e_load += half * (prev_powers[5] + cur_powers[5])
        prev_powers = cur_powers

        if crossed:
            break
        if t - t0 > sim.max_cycle_time:
            raise StallError(
                "stall detected",
                MotorState(angle=angle, speed=speed, current=current, t=t),
            )

    period = t - t0
    n = len(true_samples)
    if sensors.noise_sigma > 0.0:
        noise = rng.normal(0.0, sensors.noise_sigma, n)
        measured = tuple(float(v + e) for v, e in zip(true_samples, noise))
    else:
        measured = tuple(float(v) for v in true_samples)

    inductive_delta = 0.0
    if not sim.quasi_static:
        inductive_delta = 0.5 * params.inductance * (current * current - current_start * current_start)
    balance = EnergyBalance(
        electrical_in=e_in,
        resistive_loss=e_res,
        inductive_delta=inductive_delta,
        emf_work=e_emf,
        shaft_work=e_shaft,
        kinetic_delta=0.5 * params.rotor_inertia * (speed * speed - speed_start * speed_start),
        viscous_loss=e_visc,
        load_work=e_load,
    )
    record = CycleRecord(
        index=index,
        voltage=voltage,
        samples=measured,
        period=period,
        t_start=t0,
        balance=balance,
        trace=tuple(trace) if capture_trace else None,
    )
    return record, MotorState(angle=angle, speed=speed, current=current, t=t)
