"""Shared fixtures: default plant, fast sim settings, scenario builders."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from emintrack import MotorParams, SensorConfig, SimConfig, make_condition
from emintrack.config import Scenario, default_scenario
from emintrack.sim import QUASI_STATIC_DT

# Property tests must not flake from run to run.
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


@pytest.fixture(scope="session")
def params() -> MotorParams:
    return MotorParams()


@pytest.fixture(scope="session")
def quasi_sim() -> SimConfig:
    return SimConfig(dt=QUASI_STATIC_DT, quasi_static=True)


@pytest.fixture(scope="session")
def full_sim() -> SimConfig:
    return SimConfig(dt=2.0e-5, quasi_static=False)


@pytest.fixture(scope="session")
def noiseless() -> SensorConfig:
    return SensorConfig(noise_sigma=0.0)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def conditions():
    return {name: make_condition(name) for name in ("none", "low", "high")}


def noiseless_scenario(**overrides) -> Scenario:
    """Default scenario with sensor noise switched off."""
    base = default_scenario()
    from dataclasses import replace

    scenario = replace(base, sensors=SensorConfig(noise_sigma=0.0))
    if overrides:
        scenario = replace(scenario, **overrides)
    return scenario


def transition_scenario(direction: str, *, t_switch: float = 60.0, duration: float = 220.0,
                        base_seed: int = 0, noise_sigma: float | None = None,
                        trials: int = 20) -> Scenario:
    """low_to_high or high_to_low schedule around one switch time."""
    from dataclasses import replace

    if direction == "low_to_high":
        schedule = ((0.0, make_condition("low")), (t_switch, make_condition("high")))
    elif direction == "high_to_low":
        schedule = ((0.0, make_condition("high")), (t_switch, make_condition("low")))
    else:
        raise ValueError(direction)
    scenario = replace(
        default_scenario(),
        load_schedule=schedule,
        duration=duration,
        trials=trials,
        base_seed=base_seed,
    )
    if noise_sigma is not None:
        scenario = replace(scenario, sensors=SensorConfig(noise_sigma=noise_sigma))
    return scenario
