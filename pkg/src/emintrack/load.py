"""Periodic output-shaft load profiles for the spring-compression mechanism.

One output-shaft revolution is one mechanical cycle.  Over the compression
window the reaction torque ramps linearly from zero up to a peak and then
releases instantly (cam drop-off) at the window end; outside the window only
a constant friction torque remains.  Three named presets (none/low/high)
model springs of increasing stiffness on top of the same mechanism friction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "SpringLoadProfile",
    "LoadCondition",
    "CONDITION_NAMES",
    "torque_at",
    "mean_torque",
    "peak_torque",
    "make_condition",
]

TWO_PI = 2.0 * math.pi

CONDITION_NAMES = ("none", "low", "high")

# Peak spring torque at the output shaft [N*m] for the named presets.  The
# values are calibration targets chosen together with the MotorParams
# defaults so that the three per-cycle energy curves have separated interior
# minima on a 1.0-5.0 V sweep.
_PRESET_PEAKS = {"none": 0.0, "low": 1.9e-3, "high": 4.75e-3}

DEFAULT_FRICTION_TORQUE = 1.9e-3  # [N*m] at the output shaft

# The compression window sits mid-cycle so the elevated-current phase (ramp
# top plus release tail) is contiguous inside one cycle record instead of
# wrapping the cycle boundary.
DEFAULT_WINDOW_START = math.pi / 2
DEFAULT_WINDOW_END = 3 * math.pi / 2


@dataclass(frozen=True)
class SpringLoadProfile:
    """Torque at the output shaft as a function of output-shaft angle.

    The profile is 2*pi-periodic.  Inside ``[window_start, window_end)`` the
    spring adds ``peak_torque * r`` on top of ``friction_torque`` where r
    rises linearly 0 -> 1 across the window; at ``window_end`` the spring
    releases and only friction remains.
    """

    friction_torque: float = DEFAULT_FRICTION_TORQUE  # [N*m]
    peak_torque: float = 0.0                          # [N*m]
    window_start: float = DEFAULT_WINDOW_START        # [rad] in [0, 2*pi)
    window_end: float = DEFAULT_WINDOW_END            # [rad], > start, <= 2*pi

    def __post_init__(self) -> None:
        if self.friction_torque < 0 or self.peak_torque < 0:
            raise ValueError("torques must be non-negative")
        if not 0.0 <= self.window_start < self.window_end <= TWO_PI:
            raise ValueError("need 0 <= window_start < window_end <= 2*pi")


@dataclass(frozen=True)
class LoadCondition:
    """A named loading condition wrapping one spring profile."""

    name: str
    profile: SpringLoadProfile


def torque_at(angle_out: float, profile: SpringLoadProfile) -> float:
    """Load torque [N*m] at output-shaft angle ``angle_out`` [rad].

    The angle is reduced modulo 2*pi, so any cumulative angle is accepted.
    """
    x = angle_out % TWO_PI
    if profile.window_start <= x < profile.window_end:
        rise = (x - profile.window_start) / (profile.window_end - profile.window_start)
        return profile.friction_torque + profile.peak_torque * rise
    return profile.friction_torque


def mean_torque(profile: SpringLoadProfile) -> float:
    """Mean torque over one revolution [N*m], closed form for the linear ramp."""
    window_fraction = (profile.window_end - profile.window_start) / TWO_PI
    return profile.friction_torque + profile.peak_torque * window_fraction / 2.0


def peak_torque(profile: SpringLoadProfile) -> float:
    """Largest torque anywhere in the cycle [N*m] (supremum of the ramp)."""
    return profile.friction_torque + profile.peak_torque


def make_condition(
    name: str,
    *,
    friction_torque: float = DEFAULT_FRICTION_TORQUE,
    peak_overrides: dict[str, float] | None = None,
    window_start: float = DEFAULT_WINDOW_START,
    window_end: float = DEFAULT_WINDOW_END,
) -> LoadCondition:
    """Build one of the named preset conditions, optionally overridden.

    ``peak_overrides`` maps condition names to replacement peak torques; the
    "none" condition always has zero spring torque.
    """
    if name not in _PRESET_PEAKS:
        raise ValueError(f"unknown load condition {name!r}, expected one of {CONDITION_NAMES}")
    peaks = dict(_PRESET_PEAKS)
    if peak_overrides:
        for key, value in peak_overrides.items():
            if key not in peaks:
                raise ValueError(f"unknown load condition {key!r} in overrides")
            peaks[key] = float(value)
    if peaks["none"] != 0.0:
        raise ValueError("the 'none' condition must have zero peak torque")
    if not peaks["low"] < peaks["high"]:
        raise ValueError("need peak torque low < high")
    profile = SpringLoadProfile(
        friction_torque=friction_torque,
        peak_torque=peaks[name],
        window_start=window_start,
        window_end=window_end,
    )
    return LoadCondition(name=name, profile=profile)


def scaled_profile(profile: SpringLoadProfile, factor: float) -> SpringLoadProfile:
    """Profile with the spring peak scaled by ``factor`` (friction unchanged)."""
    return replace(profile, peak_torque=profile.peak_torque * factor)
