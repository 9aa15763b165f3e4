"""Per-cycle measurements derived from a cycle's current waveform.

Energy per cycle is estimated as mean power times cycle period from the
sampled current at constant drive voltage.  The waveform is additionally
summarized by adaptive threshold statistics: the elevated component is the
mean of samples above 90% of the peak-to-valley range, the baseline
component the mean of samples below 10%, and the elevated time is the span
between the first and last sample above the upper threshold.  The load
metric (elevated - baseline) * elevated_time grows with both the amplitude
and the duration of the loaded phase, which makes it a cheap current-domain
indicator of mechanical load.

Note: "elevated" and "baseline" are levels of one cycle's waveform; they
have nothing to do with alternating versus direct current.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sim import CycleRecord

__all__ = [
    "WaveformFeatures",
    "CycleMeasurement",
    "DEGENERATE_RANGE",
    "cycle_energy",
    "cycle_power",
    "extract_features",
    "load_metric",
    "average_over_cycles",
    "measure_cycle",
]

ELEVATED_FRACTION = 0.9   # upper threshold at valley + 0.9 * range
BASELINE_FRACTION = 0.1   # lower threshold at valley + 0.1 * range
DEGENERATE_RANGE = 1.0e-4  # [A]; flatter waveforms carry no load information


@dataclass(frozen=True)
class WaveformFeatures:
    """Threshold statistics of one cycle's current waveform."""

    peak: float           # max sample [A]
    valley: float         # min sample [A]
    elevated: float       # mean of samples above the upper threshold [A]
    baseline: float       # mean of samples below the lower threshold [A]
    elevated_time: float  # duration of the elevated phase [s]
    metric: float         # (elevated - baseline) * elevated_time [A*s]


@dataclass(frozen=True)
class CycleMeasurement:
    """Everything the controller consumes about one cycle."""

    energy: float      # [J]
    mean_power: float  # [W]
    features: WaveformFeatures
    period: float      # [s]
    voltage: float     # [V]


def cycle_power(record: CycleRecord) -> float:
    """Mean electrical power over the cycle [W]: voltage times mean current."""
    if len(record.samples) == 0:
        raise ValueError("cycle record has no samples")
    return record.voltage * float(np.mean(record.samples))


def cycle_energy(record: CycleRecord) -> float:
    """Energy consumed over the cycle [J]: mean power times period."""
    if record.period <= 0:
        raise ValueError("cycle period must be positive")
    return cycle_power(record) * record.period


def extract_features(record: CycleRecord) -> WaveformFeatures:
    """Threshold-based waveform statistics of one cycle.

    A waveform whose peak-to-valley range is below ``DEGENERATE_RANGE`` is
    treated as flat: elevated and baseline collapse to the mean and the
    metric is zero.  This is a defined value, not an error, so an unloaded
    plant simply reports zero load.
    """
    samples = np.asarray(record.samples, dtype=float)
    if samples.size < 2:
        raise ValueError("need at least 2 samples to extract features")

    peak = float(samples.max())
    valley = float(samples.min())
    spread = peak - valley
    if spread < DEGENERATE_RANGE:
        level = float(samples.mean())
        return WaveformFeatures(peak, valley, level, level, 0.0, 0.0)

    upper = valley + ELEVATED_FRACTION * spread
    lower = valley + BASELINE_FRACTION * spread
    above = samples > upper
    below = samples < lower
    # Strict inequalities guarantee the extreme samples qualify, so these
    # fallbacks only guard against floating-point edge cases.  The subset
    # means are clamped into [valley, peak]: mathematically they lie there,
    # but summation rounding can drift past an extreme by one ulp.
    elevated = float(samples[above].mean()) if above.any() else peak
    baseline = float(samples[below].mean()) if below.any() else valley
    elevated = min(max(elevated, valley), peak)
    baseline = min(max(baseline, valley), peak)

    idx = np.flatnonzero(above)
    sample_dt = record.period / samples.size
    if idx.size:
        elevated_time = float(idx[-1] - idx[0] + 1) * sample_dt
    else:
        elevated_time = 0.0
    metric = (elevated - baseline) * elevated_time
    return WaveformFeatures(peak, valley, elevated, baseline, elevated_time, metric)


def load_metric(features: WaveformFeatures) -> float:
    """Load indicator [A*s]: current-rise magnitude times elevated duration."""
    return (features.elevated - features.baseline) * features.elevated_time


def average_over_cycles(values: Sequence[float], count: int) -> float:
    """Arithmetic mean of exactly ``count`` per-cycle scalars."""
    if len(values) != count:
        raise ValueError(f"expected {count} values, got {len(values)}")
    return math.fsum(values) / count


def measure_cycle(record: CycleRecord) -> CycleMeasurement:
    """Bundle energy, power and waveform features for one cycle."""
    power = cycle_power(record)
    return CycleMeasurement(
        energy=power * record.period,
        mean_power=power,
        features=extract_features(record),
        period=record.period,
        voltage=record.voltage,
    )
