"""Discretized 1-D quantum states and Born-rule window statistics.

A state is a complex amplitude density on a uniform spatial grid; every
probability in the package ultimately comes from integrating |psi|^2 over
a detector entrance window. Grid cells are centered on the grid points,
and windows weight boundary cells by the overlapped fraction of the cell,
which keeps window probabilities exactly additive under splitting.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ZeroNormError

NORM_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Wavefunction:
    """Complex amplitudes (units m^-1/2) sampled on a uniform grid."""

    grid_min: float
    grid_step: float
    amplitudes: np.ndarray

    def __post_init__(self):
        if not self.grid_step > 0.0:
            raise ValueError("grid_step must be > 0")
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size == 0:
            raise ValueError("amplitudes must be a non-empty 1-D sequence")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @property
    def positions(self) -> np.ndarray:
        return self.grid_min + self.grid_step * np.arange(len(self.amplitudes))

    @property
    def grid_max(self) -> float:
        return self.grid_min + self.grid_step * (len(self.amplitudes) - 1)

    def density(self) -> np.ndarray:
        """|psi|^2 on the grid."""
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.sum(self.density()) * self.grid_step)

    def is_normalized(self, tol: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def displaced(self, shift: float) -> "Wavefunction":
        """Rigidly displaced copy (grid moves, amplitudes unchanged)."""
        return Wavefunction(self.grid_min + shift, self.grid_step,
                            self.amplitudes)


@dataclass(frozen=True)
class EntranceWindow:
    """Spatial aperture of one detector, 1-based index within its array."""

    center: float
    width: float
    detector_index: int

    def __post_init__(self):
        if not self.width > 0.0:
            raise ValueError("window width must be > 0")
        if self.detector_index < 1:
            raise ValueError("detector_index is 1-based")

    @property
    def lo(self) -> float:
        return self.center - 0.5 * self.width

    @property
    def hi(self) -> float:
        return self.center + 0.5 * self.width


@dataclass(frozen=True)
class Hit:
    detector_index: int


@dataclass(frozen=True)
class Miss:
    pass


MISS = Miss()

ArrivalOutcome = Hit | Miss


def validate_windows(windows) -> None:
    """Windows of one array must be sorted by center and non-overlapping."""
    for a, b in zip(windows, windows[1:]):
        if b.center < a.center:
            raise ValueError(
                f"windows {a.detector_index} and {b.detector_index} "
                "are not sorted by center")
        if b.lo < a.hi - 1e-12 * max(a.width, b.width):
            raise ValueError(
                f"windows {a.detector_index} and {b.detector_index} overlap")


def normalize(psi: Wavefunction) -> Wavefunction:
    """Scale amplitudes by one positive real factor to unit norm."""
    n2 = psi.norm_squared()
    if n2 <= 0.0:
        raise ZeroNormError("wavefunction has vanishing norm")
    return Wavefunction(psi.grid_min, psi.grid_step,
                        psi.amplitudes / np.sqrt(n2))


def window_probability(psi: Wavefunction, window: EntranceWindow) -> float:
    """Born probability that the object passes the entrance window.

    Sum of |psi_i|^2 * grid_step over cells inside the window, with
    boundary cells weighted by the overlapped fraction of the cell.
    A window outside the grid support yields 0.
    """
    xs = psi.positions
    half = 0.5 * psi.grid_step
    overlap = np.minimum(xs + half, window.hi) - np.maximum(xs - half, window.lo)
    np.clip(overlap, 0.0, None, out=overlap)
    return float(np.dot(psi.density(), overlap))


def window_probabilities(psi: Wavefunction, windows) -> np.ndarray:
    return np.array([window_probability(psi, w) for w in windows])


class ArrivalSampler:
    """Categorical sampler over an array of windows for one fixed state.

    Precomputes the cumulative window probabilities so repeated draws are
    cheap; ``sample_arrival`` wraps it for one-shot use.
    """

    def __init__(self, psi: Wavefunction, windows):
        if not psi.is_normalized():
            raise ValueError("wavefunction must be normalized")
        validate_windows(windows)
        self.windows = tuple(windows)
        self.probabilities = window_probabilities(psi, windows)
        self.cumulative = np.cumsum(self.probabilities)

    def sample(self, rng) -> ArrivalOutcome:
        u = rng.uniform()
        for j, edge in enumerate(self.cumulative):
            if u < edge:
                return Hit(self.windows[j].detector_index)
        return MISS


def sample_arrival(psi: Wavefunction, windows, rng) -> ArrivalOutcome:
    """Collapse the arrival to one window (or Miss) with Born weights."""
    return ArrivalSampler(psi, windows).sample(rng)


def expected_counts(n_source: int, probs) -> np.ndarray:
    """Mean number of objects through each window: N_s * prob (real valued)."""
    if n_source < 0:
        raise ValueError("n_source must be >= 0")
    probs = np.asarray(probs, dtype=float)
    if np.any((probs < 0.0) | (probs > 1.0)):
        raise ValueError("probabilities must lie in [0, 1]")
    return n_source * probs


def overlap_integral(a: Wavefunction, b: Wavefunction) -> complex:
    """<a|b> for two states on step-aligned grids (zero where disjoint)."""
    if abs(a.grid_step - b.grid_step) > 1e-15 * a.grid_step:
        raise ValueError("grids must share the same step")
    offset = (b.grid_min - a.grid_min) / a.grid_step
    k = round(offset)
    if abs(offset - k) > 1e-9:
        raise ValueError("grids are not aligned")
    if k >= 0:
        ai = a.amplitudes[k:]
        bi = b.amplitudes[:len(ai)]
    else:
        bi = b.amplitudes[-k:]
        ai = a.amplitudes[:len(bi)]
    n = min(len(ai), len(bi))
    if n <= 0:
        return 0.0 + 0.0j
    return complex(np.sum(np.conj(ai[:n]) * bi[:n]) * a.grid_step)


def gaussian_packet(mean: float, sigma: float, grid_min: float,
                    grid_max: float, points: int) -> Wavefunction:
    """Real Gaussian packet; |psi|^2 is the normal density N(mean, sigma^2)."""
    if sigma <= 0.0:
        raise ValueError("sigma must be > 0")
    step = (grid_max - grid_min) / (points - 1)
    xs = grid_min + step * np.arange(points)
    amps = (2.0 * np.pi * sigma**2) ** -0.25 \
        * np.exp(-((xs - mean) ** 2) / (4.0 * sigma**2))
    return normalize(Wavefunction(grid_min, step, amps.astype(np.complex128)))


def uniform_packet(lo: float, hi: float, grid_min: float, grid_max: float,
                   points: int) -> Wavefunction:
    """Constant amplitude on [lo, hi], zero outside."""
    if hi <= lo:
        raise ValueError("hi must exceed lo")
    step = (grid_max - grid_min) / (points - 1)
    xs = grid_min + step * np.arange(points)
    amps = np.where((xs >= lo) & (xs <= hi), 1.0, 0.0)
    return normalize(Wavefunction(grid_min, step, amps.astype(np.complex128)))


def two_gaussian_packet(means, sigmas, weights, grid_min: float,
                        grid_max: float, points: int) -> Wavefunction:
    """Coherent superposition of two Gaussian packets with complex weights."""
    if not (len(means) == len(sigmas) == len(weights) == 2):
        raise ValueError("two_gaussian needs exactly two components")
    step = (grid_max - grid_min) / (points - 1)
    xs = grid_min + step * np.arange(points)
    amps = np.zeros(points, dtype=np.complex128)
    for mu, sig, w in zip(means, sigmas, weights):
        if sig <= 0.0:
            raise ValueError("sigma must be > 0")
        amps += complex(w) * (2.0 * np.pi * sig**2) ** -0.25 \
            * np.exp(-((xs - mu) ** 2) / (4.0 * sig**2))
    return normalize(Wavefunction(grid_min, step, amps))


def packet_from_table(rows) -> Wavefunction:
    """Build a state from (position, re, im) rows on a uniform grid."""
    rows = sorted((float(x), float(re), float(im)) for x, re, im in rows)
    if len(rows) < 2:
        raise ValueError("table needs at least two rows")
    xs = np.array([r[0] for r in rows])
    steps = np.diff(xs)
    step = steps[0]
    if step <= 0 or np.any(np.abs(steps - step) > 1e-9 * step):
        raise ValueError("table positions must form a uniform grid")
    amps = np.array([complex(re, im) for _, re, im in rows])
    return normalize(Wavefunction(xs[0], step, amps))
