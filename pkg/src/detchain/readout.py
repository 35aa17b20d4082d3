"""Readout chain: charge to voltage pulse, discriminator, counter memory.

The pulse is a two-exponential shape whose sampled maximum is normalized
to charge * amplitude_per_coulomb, so the discriminator decision is the
strict comparison peak > threshold regardless of sampling grid. Optional
additive white Gaussian noise (off by default) lets tests demonstrate
threshold-based noise rejection.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidShapingError


@dataclass(frozen=True)
class PulseShaping:
    amplitude_per_coulomb: float   # V / C
    rise_time_s: float
    decay_time_s: float

    def __post_init__(self):
        if min(self.amplitude_per_coulomb, self.rise_time_s,
               self.decay_time_s) <= 0.0:
            raise InvalidShapingError("shaping parameters must be > 0")
        if self.decay_time_s <= self.rise_time_s:
            raise InvalidShapingError("decay_time must exceed rise_time")


@dataclass(frozen=True)
class PulseTrace:
    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be > 0")
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def peak(self) -> float:
        return float(np.max(self.samples)) if len(self.samples) else 0.0

    @property
    def peak_time(self) -> float:
        return self.t0 + self.dt * int(np.argmax(self.samples))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))


@dataclass(frozen=True)
class DiscriminatorSpec:
    threshold_v: float
    logic_high_v: float = 1.0
    logic_low_v: float = 0.0

    def __post_init__(self):
        if self.threshold_v < 0.0:
            raise ValueError("threshold_v must be >= 0")
        if self.logic_high_v <= self.logic_low_v:
            raise ValueError("logic_high must exceed logic_low")


class CounterMemory:
    """Per-detector event counters; counts only ever increase during a run."""

    def __init__(self, n_detectors: int):
        self.counts = np.zeros(n_detectors, dtype=np.int64)

    def increment(self, detector_index: int) -> None:
        self.counts[detector_index - 1] += 1

    def merge(self, other: "CounterMemory") -> "CounterMemory":
        merged = CounterMemory(len(self.counts))
        merged.counts = self.counts + other.counts
        return merged

    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, detector_index: int) -> int:
        return int(self.counts[detector_index - 1])


def peak_time(shaping: PulseShaping) -> float:
    """Stationary point of exp(-t/decay) - exp(-t/rise)."""
    r, d = shaping.rise_time_s, shaping.decay_time_s
    return (r * d / (d - r)) * math.log(d / r)


def shape_pulse(charge_c: float, shaping: PulseShaping, dt: float,
                duration: float, noise_sigma_v: float = 0.0,
                rng=None) -> PulseTrace:
    """Two-exponential voltage pulse sampled on [0, duration] at step dt.

    The trace is scaled so its maximum sample equals
    charge * amplitude_per_coulomb exactly; the sample grid places that
    maximum within one dt of the analytic stationary point.
    """
    if dt <= 0.0 or duration <= 0.0:
        raise ValueError("dt and duration must be > 0")
    n = int(math.floor(duration / dt)) + 1
    t = dt * np.arange(n)
    raw = np.exp(-t / shaping.decay_time_s) - np.exp(-t / shaping.rise_time_s)
    m = float(np.max(raw))
    if charge_c == 0.0 or m <= 0.0:
        samples = np.zeros(n)
    else:
        samples = raw * (charge_c * shaping.amplitude_per_coulomb / m)
    if noise_sigma_v > 0.0:
        if rng is None:
            raise ValueError("noise requires a random stream")
        noise = np.array([rng.normal() for _ in range(n)])
        samples = samples + noise_sigma_v * noise
    return PulseTrace(0.0, dt, samples)


def discriminate(trace: PulseTrace, disc: DiscriminatorSpec) -> float:
    """Logic-high voltage iff any sample strictly exceeds the threshold."""
    if np.any(trace.samples > disc.threshold_v):
        return disc.logic_high_v
    return disc.logic_low_v


def count(signal_v: float, counter: CounterMemory, detector_index: int,
          logic_high_v: float = 1.0) -> CounterMemory:
    """Increment the counter for ``detector_index`` iff the signal is high."""
    if signal_v == logic_high_v:
        counter.increment(detector_index)
    return counter
