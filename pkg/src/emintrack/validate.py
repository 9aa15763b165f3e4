"""Built-in invariant suite behind the `validate` CLI subcommand.

A fast self-check of the core physics and measurement invariants, meant for
smoke-testing an installation or a modified configuration without the full
pytest suite.  Prints one PASS/FAIL line per check.
"""

from __future__ import annotations

import math

import numpy as np

from .config import default_scenario
from .load import make_condition, mean_torque, torque_at
from .metrics import cycle_energy, cycle_power, extract_features, load_metric
from .motor import MotorState, derivatives, steady_state_current, steady_state_speed
from .sim import CycleRecord, EnergyBalance, SensorConfig, SimConfig, run_cycle

CHECKS = []


def _check(name):
    def wrap(fn):
        CHECKS.append((name, fn))
        return fn
    return wrap


@_check("steady-state consistency: closed forms zero the derivatives")
def _steady_state_consistency() -> bool:
    scenario = default_scenario()
    params = scenario.motor
    cond = make_condition("none")
    ok = True
    for v in (1.0, 2.5, 5.0):
        tau_motor = mean_torque(cond.profile) / params.gear_ratio
        omega = steady_state_speed(v, tau_motor, params)
        current = steady_state_current(v, omega, params)
        state = MotorState(angle=0.0, speed=omega, current=current, t=0.0)
        _, dspeed, dcurrent = derivatives(state, v, mean_torque(cond.profile), params)
        ok &= abs(dspeed) < 1e-9 * max(omega, 1.0) and abs(dcurrent) < 1e-9 * max(current, 1.0)
    return ok


@_check("speed monotonicity: up in voltage, down in load")
def _speed_monotonic() -> bool:
    params = default_scenario().motor
    speeds_v = [steady_state_speed(v, 1e-5, params) for v in (1.0, 2.0, 3.0, 4.0, 5.0)]
    speeds_tau = [steady_state_speed(3.0, tau, params) for tau in (0.0, 1e-5, 2e-5, 4e-5)]
    return all(b > a for a, b in zip(speeds_v, speeds_v[1:])) and all(
        b < a for a, b in zip(speeds_tau, speeds_tau[1:])
    )


@_check("energy balance on simulated cycles (both residuals < 0.5%)")
def _energy_balance() -> bool:
    scenario = default_scenario()
    sensors = SensorConfig(noise_sigma=0.0)
    ok = True
    for quasi, dt in ((True, 5e-4), (False, 2e-5)):
        sim = SimConfig(dt=dt, quasi_static=quasi)
        state = MotorState()
        rng = np.random.default_rng(0)
        for _ in range(3):
            record, state = run_cycle(state, 2.0, make_condition("low"), scenario.motor, sensors, rng, sim)
        ok &= record.balance.electrical_residual() < 0.005
        ok &= record.balance.mechanical_residual() < 0.005
    return ok


@_check("waveform features on a synthetic step pulse")
def _features_pulse() -> bool:
    samples = (0.05,) * 400 + (0.15,) * 100
    record = CycleRecord(
        index=0, voltage=2.0, samples=samples, period=1.0, t_start=0.0,
        balance=EnergyBalance(0, 0, 0, 0, 0, 0, 0, 0),
    )
    f = extract_features(record)
    return (
        math.isclose(f.elevated, 0.15)
        and math.isclose(f.baseline, 0.05)
        and math.isclose(f.elevated_time, 0.2)
        and math.isclose(load_metric(f), 0.02)
        and math.isclose(cycle_power(record), 2.0 * 0.07)
        and math.isclose(cycle_energy(record), 2.0 * 0.07 * 1.0)
    )


@_check("load profile: periodic, ordered presets, closed-form mean")
def _load_profile() -> bool:
    ok = True
    for name in ("none", "low", "high"):
        prof = make_condition(name).profile
        ok &= torque_at(1.0, prof) == torque_at(1.0 + 2 * math.pi, prof)
        # The profile is piecewise linear, so a piecewise trapezoid is exact
        # once the pieces are split at the window edges.
        total = 0.0
        for a, b in ((0.0, prof.window_start), (prof.window_start, prof.window_end - 1e-12),
                     (prof.window_end, 2 * math.pi)):
            if b <= a:
                continue
            grid = np.linspace(a, b, 101)
            total += float(np.trapezoid([torque_at(x, prof) for x in grid], grid))
        numeric = total / (2 * math.pi)
        ok &= abs(numeric - mean_torque(prof)) < 1e-9 * max(mean_torque(prof), 1e-9)
    low = make_condition("low").profile
    high = make_condition("high").profile
    none = make_condition("none").profile
    for x in np.linspace(0, 2 * math.pi, 101):
        ok &= torque_at(x, high) >= torque_at(x, low) >= torque_at(x, none)
    return ok


@_check("determinism: identical seeds give identical cycle records")
def _determinism() -> bool:
    scenario = default_scenario()
    out = []
    for _ in range(2):
        rng = np.random.default_rng(1234)
        state = MotorState()
        record, _ = run_cycle(
            state, 3.0, make_condition("low"), scenario.motor, scenario.sensors, rng, scenario.sim
        )
        out.append(record)
    return out[0] == out[1]


def run_validation(verbose: bool = True) -> bool:
    """Run every check; returns True when all pass."""
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok = bool(fn())
        except Exception as exc:  # a crashed check is a failed check
            ok = False
            if verbose:
                print(f"FAIL {name} ({type(exc).__name__}: {exc})")
            all_ok = False
            continue
        if verbose:
            print(("PASS" if ok else "FAIL") + f" {name}")
        all_ok &= ok
    return all_ok
