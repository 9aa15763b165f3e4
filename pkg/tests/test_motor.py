"""Motor model: closed forms, derivative consistency, energy balance.

The steady-state formulas are cross-checked against an independent
scipy.integrate.solve_ivp integration of the same equations, not against
the package's own stepper.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from emintrack import (
    MotorParams,
    MotorState,
    derivatives,
    quasi_static_current,
    steady_state_current,
    steady_state_speed,
    stall_voltage,
)


def test_rest_stays_at_rest_with_no_drive(params):
    state = MotorState()
    dangle, dspeed, dcurrent = derivatives(state, 0.0, 0.0, params)
    assert (dangle, dspeed, dcurrent) == (0.0, 0.0, 0.0)


def test_current_slope_at_standstill():
    p = MotorParams(resistance=4.0, inductance=1.0e-4)
    _, _, dcurrent = derivatives(MotorState(), 2.0, 0.0, p)
    assert dcurrent == pytest.approx(2.0 / 1.0e-4)


def test_derivatives_require_finite_inputs(params):
    with pytest.raises(ValueError, match="invalid state"):
        derivatives(MotorState(), math.inf, 0.0, params)
    with pytest.raises(ValueError):
        MotorState(speed=math.nan)


def test_steady_state_zeroes_the_derivatives(params):
    # Substituting the closed-form equilibrium back into the dynamics must
    # leave residual derivatives below 1e-9 of their natural scales.
    for voltage in (0.8, 2.0, 3.7, 5.0):
        for tau_out in (0.0, 1.0e-3, 3.0e-3):
            tau_motor = tau_out / params.gear_ratio
            omega = steady_state_speed(voltage, tau_motor, params)
            if omega == 0.0:
                continue
            current = steady_state_current(voltage, omega, params)
            state = MotorState(speed=omega, current=current)
            _, dspeed, dcurrent = derivatives(state, voltage, tau_out, params)
            assert abs(dspeed) < 1e-9 * max(omega, 1.0)
            assert abs(dcurrent) < 1e-9 * max(current, 1.0)


def test_stall_voltage_zeroes_the_speed(params):
    tau = 2.5e-5
    v = stall_voltage(tau, params)
    assert steady_state_speed(v, tau, params) == 0.0
    assert steady_state_speed(v * 1.001, tau, params) > 0.0


def test_stall_voltage_is_linear_in_torque(params):
    assert stall_voltage(0.0, params) == 0.0
    assert stall_voltage(2.0e-5, params) == pytest.approx(2 * stall_voltage(1.0e-5, params))


def test_no_load_speed_is_linear_in_voltage(params):
    speeds = [steady_state_speed(v, 0.0, params) for v in (1.0, 2.0, 3.0)]
    assert speeds[1] == pytest.approx(2 * speeds[0])
    assert speeds[2] == pytest.approx(3 * speeds[0])


def test_stall_current_and_no_load_balance(params):
    assert steady_state_current(2.0, 0.0, params) == pytest.approx(2.0 / params.resistance)
    omega = 2.0 / params.back_emf_constant
    assert steady_state_current(2.0, omega, params) == 0.0


def test_regenerative_regime_rejected(params):
    omega = 3.0 / params.back_emf_constant
    with pytest.raises(ValueError, match="regenerative"):
        steady_state_current(2.0, omega, params)


@given(
    v=st.floats(0.5, 5.0),
    dv=st.floats(0.01, 1.0),
    tau=st.floats(0.0, 2.0e-5),
    dtau=st.floats(1.0e-7, 2.0e-5),
)
def test_speed_monotonic_in_voltage_and_load(v, dv, tau, dtau):
    p = MotorParams()
    base = ((p.torque_constant / p.resistance) * v - tau) / p.speed_loss_coefficient
    up = ((p.torque_constant / p.resistance) * (v + dv) - tau) / p.speed_loss_coefficient
    loaded = ((p.torque_constant / p.resistance) * v - tau - dtau) / p.speed_loss_coefficient
    # Before clamping the equilibrium speed rises with voltage, falls with load.
    assert up > base
    assert loaded < base
    assert steady_state_speed(v + dv, tau, p) >= steady_state_speed(v, tau, p)


def _independent_trajectory(params, voltage, tau_out, t_end):
    """solve_ivp oracle for the full dynamic model at constant load."""

    def rhs(_t, y):
        _theta, omega, current = y
        domega = (
            params.torque_constant * current
            - params.viscous_drag * omega
            - tau_out / params.gear_ratio
        ) / params.rotor_inertia
        dcurrent = (
            voltage - current * params.resistance - params.back_emf_constant * omega
        ) / params.inductance
        return (omega, domega, dcurrent)

    return solve_ivp(rhs, (0.0, t_end), (0.0, 0.0, 0.0), rtol=1e-9, atol=1e-12, max_step=1e-3)


def test_closed_forms_match_independent_integration(params):
    # Speed within 2% and current within 3% of a long solve_ivp run.
    tau_out = 1.9e-3
    tau_motor = tau_out / params.gear_ratio
    sol = _independent_trajectory(params, 3.0, tau_out, t_end=1.5)
    omega_sim = sol.y[1][-1]
    current_sim = sol.y[2][-1]
    omega_pred = steady_state_speed(3.0, tau_motor, params)
    current_pred = steady_state_current(3.0, omega_pred, params)
    assert omega_sim == pytest.approx(omega_pred, rel=0.02)
    assert current_sim == pytest.approx(current_pred, rel=0.03)


def test_quasi_static_current_matches_equilibrium(params):
    omega = steady_state_speed(2.5, 1.0e-5, params)
    assert quasi_static_current(2.5, omega, params) == pytest.approx(
        steady_state_current(2.5, omega, params)
    )


def test_parameter_validation():
    with pytest.raises(ValueError):
        MotorParams(resistance=0.0)
    with pytest.raises(ValueError):
        MotorParams(gear_ratio=0.5)
    with pytest.raises(ValueError):
        MotorParams(rotor_inertia=-1.0)
