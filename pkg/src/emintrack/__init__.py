"""Energy-minimum operating point tracking testbed for geared DC motors.

A simulated brushed DC micro motor with a planetary gearbox drives a
spring-compression mechanism whose reaction torque varies over each output
revolution.  The per-cycle electrical energy is a non-monotonic function of
the drive voltage with a load-dependent minimum; this package provides the
plant model, per-cycle measurements, the two-phase voltage tracking
controller that finds and follows that minimum online, and an experiment
harness with CLI, CSV/JSON reports and figures.
"""

from .motor import (
    MotorParams,
    MotorState,
    derivatives,
    quasi_static_current,
    steady_state_speed,
    steady_state_current,
    stall_voltage,
)
from .load import LoadCondition, SpringLoadProfile, make_condition, mean_torque, torque_at
from .sim import (
    CycleRecord,
    EnergyBalance,
    SensorConfig,
    SimConfig,
    StallError,
    run_cycle,
    sample_sensor,
    step,
)
from .metrics import (
    CycleMeasurement,
    WaveformFeatures,
    average_over_cycles,
    cycle_energy,
    cycle_power,
    extract_features,
    load_metric,
    measure_cycle,
)

__version__ = "0.1.0"

__all__ = [
    "MotorParams",
    "MotorState",
    "derivatives",
    "quasi_static_current",
    "steady_state_speed",
    "steady_state_current",
    "stall_voltage",
    "LoadCondition",
    "SpringLoadProfile",
    "make_condition",
    "mean_torque",
    "torque_at",
    "CycleRecord",
    "EnergyBalance",
    "SensorConfig",
    "SimConfig",
    "StallError",
    "run_cycle",
    "sample_sensor",
    "step",
    "CycleMeasurement",
    "WaveformFeatures",
    "average_over_cycles",
    "cycle_energy",
    "cycle_power",
    "extract_features",
    "load_metric",
    "measure_cycle",
    "__version__",
]
