"""Lumped-parameter model of a brushed DC micro motor with a planetary gearbox.

Electrical side:  V = I*R + L*dI/dt + Ke*w
Mechanical side (motor shaft):  J*dw/dt = Kt*I - b*w - tau_out/G

The output-shaft load torque ``tau_out`` is reflected to the motor shaft
through an ideal (lossless, rigid) gearbox of ratio G.  The drive is
unidirectional: shaft speed is clamped at zero from below, so the mechanism
never rotates backwards.

Besides the dynamic derivatives, this module provides the closed-form
steady-state speed/current predictions and the stall-voltage boundary.  Those
closed forms are used throughout the test suite as independent oracles for
the numerical integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "MotorParams",
    "MotorState",
    "derivatives",
    "quasi_static_current",
    "steady_state_speed",
    "steady_state_current",
    "stall_voltage",
]


@dataclass(frozen=True)
class MotorParams:
    """Physical constants of the motor and gearbox, SI units throughout.

    The defaults describe a small geared micro motor calibrated so that the
    per-cycle energy curve of the bundled spring-load presets has its minimum
    in the low-voltage region of a 1.0-5.0 V sweep (tens of mJ per cycle at
    the optimum).  They are a documented configuration default, not a
    measurement of any particular device.
    """

    resistance: float = 20.0            # winding resistance [ohm]
    inductance: float = 5.0e-4          # winding inductance [H]
    back_emf_constant: float = 6.25e-4  # speed-to-EMF constant [V*s/rad]
    torque_constant: float = 6.25e-4    # current-to-torque constant [N*m/A]
    rotor_inertia: float = 2.0e-9       # rotor + gear train inertia [kg*m^2]
    viscous_drag: float = 3.5e-9        # viscous drag at the motor shaft [N*m*s/rad]
    gear_ratio: float = 136.0           # output-shaft reduction, dimensionless

    def __post_init__(self) -> None:
        if not all(
            math.isfinite(v)
            for v in (
                self.resistance,
                self.inductance,
                self.back_emf_constant,
                self.torque_constant,
                self.rotor_inertia,
                self.viscous_drag,
                self.gear_ratio,
            )
        ):
            raise ValueError("motor parameters must be finite")
        if self.resistance <= 0:
            raise ValueError("resistance must be positive")
        if self.inductance < 0:
            raise ValueError("inductance must be non-negative")
        if self.back_emf_constant <= 0:
            raise ValueError("back_emf_constant must be positive")
        if self.torque_constant <= 0:
            raise ValueError("torque_constant must be positive")
        if self.rotor_inertia <= 0:
            raise ValueError("rotor_inertia must be positive")
        if self.viscous_drag < 0:
            raise ValueError("viscous_drag must be non-negative")
        if self.gear_ratio < 1:
            raise ValueError("gear_ratio must be at least 1")

    @property
    def speed_loss_coefficient(self) -> float:
        """Effective speed-proportional loss b + Kt*Ke/R [N*m*s/rad]."""
        return self.viscous_drag + self.torque_constant * self.back_emf_constant / self.resistance


@dataclass(frozen=True)
class MotorState:
    """Instantaneous plant state at the motor shaft."""

    angle: float = 0.0    # cumulative motor-shaft angle [rad]
    speed: float = 0.0    # motor-shaft angular velocity [rad/s], >= 0
    current: float = 0.0  # winding current [A]
    t: float = 0.0        # simulation time [s]

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.angle, self.speed, self.current, self.t)):
            raise ValueError("invalid state")

    def output_angle(self, params: MotorParams) -> float:
        """Output-shaft angle [rad] behind the gearbox."""
        return self.angle / params.gear_ratio


def derivatives(
    state: MotorState,
    voltage: float,
    load_torque_out: float,
    params: MotorParams,
) -> tuple[float, float, float]:
    """Time derivatives (dangle, dspeed, dcurrent) of the full dynamic model.

    ``load_torque_out`` is the torque at the output shaft [N*m]; it is
    reflected to the motor shaft by division by the gear ratio.  Requires
    a strictly positive winding inductance; with inductance zero use the
    algebraic :func:`quasi_static_current` instead.
    """
    if not (math.isfinite(voltage) and math.isfinite(load_torque_out)):
        raise ValueError("invalid state")
    if voltage < 0:
        raise ValueError("voltage must be non-negative")
    if load_torque_out < 0:
        raise ValueError("load torque must be non-negative")
    if params.inductance <= 0:
        raise ValueError("full dynamic model needs inductance > 0")

    dcurrent = (
        voltage
        - state.current * params.resistance
        - params.back_emf_constant * state.speed
    ) / params.inductance
    dspeed = (
        params.torque_constant * state.current
        - params.viscous_drag * state.speed
        - load_torque_out / params.gear_ratio
    ) / params.rotor_inertia
    return state.speed, dspeed, dcurrent


def quasi_static_current(voltage: float, speed: float, params: MotorParams) -> float:
    """Winding current with the inductance transient neglected: (V - Ke*w)/R."""
    return (voltage - params.back_emf_constant * speed) / params.resistance


def steady_state_speed(voltage: float, load_torque_motor: float, params: MotorParams) -> float:
    """Equilibrium motor-shaft speed [rad/s] at constant voltage and load.

    ``load_torque_motor`` is already reflected to the motor shaft.  The
    result is clamped at zero: below the stall boundary the shaft does not
    turn.
    """
    if not (math.isfinite(voltage) and math.isfinite(load_torque_motor)):
        raise ValueError("invalid state")
    if voltage < 0 or load_torque_motor < 0:
        raise ValueError("voltage and load torque must be non-negative")
    numerator = (params.torque_constant / params.resistance) * voltage - load_torque_motor
    omega = numerator / params.speed_loss_coefficient
    return max(omega, 0.0)


def steady_state_current(voltage: float, speed: float, params: MotorParams) -> float:
    """Equilibrium winding current [A] in the motoring regime."""
    if not (math.isfinite(voltage) and math.isfinite(speed)):
        raise ValueError("invalid state")
    emf = params.back_emf_constant * speed
    if voltage < emf:
        raise ValueError("regenerative regime unsupported")
    return (voltage - emf) / params.resistance


def stall_voltage(load_torque_motor: float, params: MotorParams) -> float:
    """Voltage below which the equilibrium speed is zero for this load.

    ``load_torque_motor`` is reflected to the motor shaft.
    """
    if load_torque_motor < 0:
        raise ValueError("load torque must be non-negative")
    return params.resistance * load_torque_motor / params.torque_constant
