"""Experiment orchestration over an array of detectors.

Drives N_s independent trials through the full chain (arrival collapse,
start reaction, avalanche, discriminator, counter), accumulates counter
statistics, and verifies the structural claims: exclusive logical outputs,
one-to-one correlation between gated start reactions and counts, exact
count conservation, and statistical agreement between counter-derived
probabilities and the window probabilities computed from the state.

Trials are independent with per-trial random substreams derived from the
master seed, so serial and worker-parallel execution produce identical
aggregates.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernel_py
from .amplify import (AvalancheResult, DynodeChain, GasGain,
                      charge_per_carrier, mean_final_carriers,
                      mean_primary_carriers)
from .detector import (NO_REACTION, Occurred, Particle,
                       deposited_energy, reaction_channel,
                       start_reaction_probability)
from .errors import ConfigMismatchError, IncompleteLogError
from .kernel import TrialParams, run_trials
from .readout import DiscriminatorSpec, PulseShaping
from .rng import RandomStream
from .wavefunction import (MISS, Hit, Wavefunction, validate_windows,
                           window_probabilities)

Z_LIMIT = 4.0
_RESERVOIR_STREAM_TAG = (1 << 62) + (7 << 32)

KIND_CODE = {"gas": 0, "semiconductor": 1, "dynode": 2}

# expected avalanche sizes above this lose exact integer representation in
# the compiled kernel (and no physical counting chain comes anywhere near)
MAX_MEAN_CARRIERS = 1.0e12


@dataclass(frozen=True)
class SourceSpec:
    """Everything the source emits: one state, one particle template."""

    wavefunction: Wavefunction
    particle: Particle


@dataclass(frozen=True)
class EventRecord:
    """Full trace of one trial across the detector array."""

    trial_id: int
    arrival: object                 # Hit | Miss
    start: object                   # Occurred | NoReaction | None on Miss
    avalanche: AvalancheResult | None
    logical_outputs: tuple
    fired_detector: int | None      # 1-based, None when no discriminator fired


@dataclass
class EventLog:
    records: list
    complete: bool
    n_trials: int


@dataclass(frozen=True)
class DetectorStats:
    detector_index: int
    center_m: float
    width_m: float
    counts: int
    start_reactions: int          # gated reactions in this (operable) detector
    window_prob: float            # Born probability through the window
    detection_prob: float         # predicted counter probability
    empirical_prob: float
    stderr: float
    z_score: float
    degenerate: bool              # detection_prob is exactly 0 or 1


@dataclass(frozen=True)
class ExperimentReport:
    n_source: int
    seed: int
    detectors: tuple
    miss_count: int
    no_reaction_count: int
    dead_channel_count: int
    below_threshold_count: int
    discriminator_low_count: int
    chi_square: float
    chi_square_dof: int

    def __post_init__(self):
        total = sum(d.counts for d in self.detectors) + self.miss_count \
            + self.no_signal_count
        if total != self.n_source:
            raise AssertionError(
                f"count conservation violated: {total} != {self.n_source}")
        for d in self.detectors:
            if not 0.0 <= d.empirical_prob <= 1.0:
                raise AssertionError("empirical probability outside [0, 1]")

    @property
    def no_signal_count(self) -> int:
        return (self.no_reaction_count + self.dead_channel_count
                + self.below_threshold_count + self.discriminator_low_count)


def build_trial_params(source: SourceSpec, detectors, shaping: PulseShaping,
                       discriminator: DiscriminatorSpec):
    """Flatten the detector array into kernel arrays.

    Returns (TrialParams, channels) where channels[j] is the start-reaction
    channel for detector j or None when the particle/material pair cannot
    react.
    """
    detectors = tuple(detectors)
    if not detectors:
        raise ValueError("detector array must not be empty")
    if not source.wavefunction.is_normalized(tol=1e-8):
        raise ValueError("source wavefunction must be normalized")
    windows = [d.window for d in detectors]
    validate_windows(windows)

    z = len(detectors)
    probs = window_probabilities(source.wavefunction, windows)
    p_start = np.zeros(z)
    edep = np.zeros(z)
    pass_thr = np.zeros(z, dtype=np.uint8)
    operable = np.zeros(z, dtype=np.uint8)
    kind = np.zeros(z, dtype=np.int32)
    pmean = np.zeros(z)
    cpc = np.zeros(z)
    deltas = []
    doff = np.zeros(z + 1, dtype=np.int64)
    channels = []

    for j, det in enumerate(detectors):
        try:
            ch = reaction_channel(source.particle, det.material)
        except ValueError:
            ch = None
        e = deposited_energy(source.particle, ch) if ch is not None else 0.0
        p = start_reaction_probability(source.particle, det)
        if e <= 0.0:
            p = 0.0   # zero-energy exit channel cannot seed the avalanche
            ch = None
        channels.append(ch)
        p_start[j] = p
        edep[j] = e
        pass_thr[j] = 1 if e > det.threshold_energy_ev else 0
        operable[j] = 1 if det.operable else 0
        amp = det.amplifier
        if isinstance(amp, DynodeChain):
            kind[j] = KIND_CODE["dynode"]
            deltas.extend(amp.stage_means)
        elif isinstance(amp, GasGain):
            kind[j] = KIND_CODE["gas"]
        else:
            kind[j] = KIND_CODE["semiconductor"]
        pmean[j] = mean_primary_carriers(e, amp)
        cpc[j] = charge_per_carrier(amp)
        doff[j + 1] = len(deltas)
        mean_final = mean_final_carriers(pmean[j], amp)
        if p > 0.0 and mean_final > MAX_MEAN_CARRIERS:
            raise ValueError(
                f"detector {det.window.detector_index}: expected avalanche "
                f"of {mean_final:.3g} carriers exceeds the supported "
                f"{MAX_MEAN_CARRIERS:.0e}")

    if not np.any(p_start > 0.0):
        raise ConfigMismatchError(
            f"{type(source.particle).__name__} cannot start a reaction in "
            "any configured detector")

    params = TrialParams(
        cum_probs=np.cumsum(probs),
        p_start=p_start,
        operable=operable,
        edep=edep,
        pass_thr=pass_thr,
        kind=kind,
        pmean=pmean,
        cpc=cpc,
        deltas=np.array(deltas, dtype=np.float64),
        doff=doff,
        volts_per_coulomb=shaping.amplitude_per_coulomb,
        threshold_v=discriminator.threshold_v,
    )
    return params, channels


def detection_probabilities(params) -> np.ndarray:
    """Predicted counter probability per detector.

    Window probability times the conditional start-reaction probability,
    zeroed where the energy gate blocks the chain. For charged projectiles
    above threshold this reduces to the window probability itself.
    """
    probs = np.diff(params.cum_probs, prepend=0.0)
    return probs * params.p_start * params.pass_thr


def _select_record_ids(n_source, seed, retain, cap):
    if retain or cap >= n_source:
        return np.arange(n_source, dtype=np.int64), True
    if cap <= 0:
        return np.empty(0, dtype=np.int64), False
    # Floyd's subset sampling: uniform over cap-subsets, deterministic
    stream = RandomStream(seed, _RESERVOIR_STREAM_TAG)
    chosen = set()
    for j in range(n_source - cap, n_source):
        t = int(stream.uniform() * (j + 1))
        chosen.add(j if t in chosen else t)
    return np.array(sorted(chosen), dtype=np.int64), False


def _run_worker(args):
    seed, lo, hi, params, rec_ids, lane = args
    return run_trials(seed, lo, hi, params, record_ids=rec_ids, impl_name=lane)


def _execute(seed, n_source, params, record_ids, workers, kernel_lane):
    if workers <= 1:
        return run_trials(seed, 0, n_source, params, record_ids=record_ids,
                          impl_name=kernel_lane)
    bounds = np.linspace(0, n_source, workers + 1).astype(np.int64)
    jobs = []
    for w in range(workers):
        lo, hi = int(bounds[w]), int(bounds[w + 1])
        ids = record_ids[np.searchsorted(record_ids, lo):
                         np.searchsorted(record_ids, hi)]
        jobs.append((seed, lo, hi, params, ids, kernel_lane))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(_run_worker, jobs))
    result = chunks[0]
    for other in chunks[1:]:
        result.merge(other)
    return result


def _assemble_records(chunk, params, detectors, channels, discriminator):
    """Materialize EventRecord objects from kernel record columns."""
    recs = chunk.records
    z = len(detectors)
    high = discriminator.logic_high_v
    low = discriminator.logic_low_v
    out = []
    for r in range(len(chunk.record_ids)):
        arr = int(recs["arrival"][r])
        fired = int(recs["fired"][r])
        if arr < 0:
            arrival, start = MISS, None
        else:
            arrival = Hit(detectors[arr].window.detector_index)
            if recs["reacted"][r]:
                start = Occurred(channels[arr], params.edep[arr])
            else:
                start = NO_REACTION
        avalanche = None
        if arr >= 0 and recs["passed"][r]:
            avalanche = AvalancheResult(int(recs["carriers"][r]),
                                        float(recs["charge"][r]))
        outputs = tuple(high if j == fired else low for j in range(z))
        fired_det = detectors[fired].window.detector_index if fired >= 0 else None
        if fired >= 0 and (not isinstance(start, Occurred) or fired != arr):
            raise AssertionError("logical output without a matching start reaction")
        out.append(EventRecord(int(chunk.record_ids[r]), arrival, start,
                               avalanche, outputs, fired_det))
    return out


def _chi_square(counts, det_probs, n_source):
    """Pearson statistic over detector categories plus a residual category.

    Categories with zero expectation are excluded (their counts are
    structurally zero); the residual (miss / no signal) category is
    included only when at least one event is expected there.
    """
    chi = 0.0
    ncat = 0
    for c, p in zip(counts, det_probs):
        e = n_source * p
        if e > 0.0:
            chi += (c - e) ** 2 / e
            ncat += 1
    residual_p = max(1.0 - float(np.sum(det_probs)), 0.0)
    residual_e = n_source * residual_p
    if residual_e >= 1.0:
        observed = n_source - int(np.sum(counts))
        chi += (observed - residual_e) ** 2 / residual_e
        ncat += 1
    return chi, max(ncat - 1, 0)


def run_experiment(source: SourceSpec, detectors, n_source: int, seed: int,
                   shaping: PulseShaping, discriminator: DiscriminatorSpec,
                   workers: int = 1, retain_event_log: bool = False,
                   event_log_cap: int = 1000, kernel_lane=None):
    """Run N_s trials and return (ExperimentReport, EventLog).

    Identical (configuration, seed) pairs reproduce the report exactly;
    worker count only affects wall time, never the aggregates. The event
    log holds every trial when ``retain_event_log`` is set and a seeded
    uniform sample of at most ``event_log_cap`` trials otherwise.
    """
    if n_source < 1:
        raise ValueError("n_source must be >= 1")
    detectors = tuple(detectors)
    params, channels = build_trial_params(source, detectors, shaping,
                                          discriminator)
    record_ids, complete = _select_record_ids(
        n_source, seed, retain_event_log, event_log_cap)
    chunk = _execute(seed, n_source, params, record_ids, workers, kernel_lane)

    det_probs = detection_probabilities(params)
    window_probs = np.diff(params.cum_probs, prepend=0.0)
    stats = []
    for j, det in enumerate(detectors):
        c = int(chunk.counts[j])
        p = float(det_probs[j])
        emp = c / n_source
        degenerate = p <= 0.0 or p >= 1.0
        if degenerate:
            stderr, z = 0.0, 0.0
        else:
            stderr = math.sqrt(p * (1.0 - p) / n_source)
            z = (emp - p) / stderr
        stats.append(DetectorStats(
            detector_index=det.window.detector_index,
            center_m=det.window.center,
            width_m=det.window.width,
            counts=c,
            start_reactions=int(chunk.start_ok[j]),
            window_prob=float(window_probs[j]),
            detection_prob=p,
            empirical_prob=emp,
            stderr=stderr,
            z_score=z,
            degenerate=degenerate,
        ))

    chi, dof = _chi_square(chunk.counts, det_probs, n_source)
    report = ExperimentReport(
        n_source=n_source,
        seed=seed,
        detectors=tuple(stats),
        miss_count=int(chunk.tallies[0]),
        no_reaction_count=int(chunk.tallies[1]),
        dead_channel_count=int(chunk.tallies[2]),
        below_threshold_count=int(chunk.tallies[3]),
        discriminator_low_count=int(chunk.tallies[4]),
        chi_square=chi,
        chi_square_dof=dof,
    )
    records = _assemble_records(chunk, params, detectors, channels,
                                discriminator)
    log = EventLog(records=records, complete=complete, n_trials=n_source)
    return report, log


@dataclass(frozen=True)
class AgreementResult:
    z_scores: tuple
    max_abs_z: float
    chi_square: float
    chi_square_dof: int
    chi_square_limit: float
    exact_failures: tuple      # degenerate detectors whose counts mismatch
    passed: bool


def verify_born_agreement(report: ExperimentReport,
                          quantile: float = 0.999) -> AgreementResult:
    """Statistical check that counter probabilities match the predictions.

    Recomputes every statistic from the counts so a doctored report cannot
    pass on stale snapshots. Nondegenerate detectors get a binomial z-score
    (pass: |z| <= 4); detectors whose predicted probability is exactly 0
    or 1 cannot carry a z-score and are checked for an exact count match
    instead. The Pearson statistic must stay below the requested quantile.
    """
    from scipy.stats import chi2

    n = report.n_source
    z_scores = []
    exact_failures = []
    for d in report.detectors:
        if d.degenerate:
            expected = 0 if d.detection_prob <= 0.0 else n
            if d.counts != expected:
                exact_failures.append(d.detector_index)
        else:
            stderr = math.sqrt(d.detection_prob * (1.0 - d.detection_prob) / n)
            z_scores.append((d.counts / n - d.detection_prob) / stderr)
    max_abs_z = max((abs(z) for z in z_scores), default=0.0)
    chi, dof = _chi_square(
        np.array([d.counts for d in report.detectors]),
        np.array([d.detection_prob for d in report.detectors]), n)
    if dof >= 1:
        limit = float(chi2.ppf(quantile, dof))
        chi_ok = chi <= limit
    else:
        limit = 0.0
        chi_ok = True
    passed = (max_abs_z <= Z_LIMIT) and chi_ok and not exact_failures
    return AgreementResult(
        z_scores=tuple(z_scores),
        max_abs_z=max_abs_z,
        chi_square=chi,
        chi_square_dof=dof,
        chi_square_limit=limit,
        exact_failures=tuple(exact_failures),
        passed=passed,
    )


@dataclass(frozen=True)
class OneToOneResult:
    ok: bool
    mismatched_indices: tuple        # 1-based detector indices
    reactions_passing: tuple         # per detector, threshold-passing reactions
    logic_highs: tuple               # per detector, counted logical outputs
    index_violations: int


def verify_one_to_one(log: EventLog, detectors) -> OneToOneResult:
    """Per-detector equality of gated start reactions and logical outputs.

    Needs the complete event log. A reaction counts when it occurred and
    its deposited energy strictly exceeds the detector threshold,
    regardless of the operability flag; a dead detector therefore shows
    reactions without outputs and is reported by index.
    """
    if not log.complete:
        raise IncompleteLogError(
            "one-to-one verification needs the full event log")
    detectors = tuple(detectors)
    index_of = {d.window.detector_index: j for j, d in enumerate(detectors)}
    z = len(detectors)
    reactions = [0] * z
    highs = [0] * z
    index_violations = 0
    for rec in log.records:
        if isinstance(rec.arrival, Hit) and isinstance(rec.start, Occurred):
            j = index_of[rec.arrival.detector_index]
            if rec.start.deposited_energy_ev > detectors[j].threshold_energy_ev:
                reactions[j] += 1
        if rec.fired_detector is not None:
            j = index_of[rec.fired_detector]
            highs[j] += 1
            if not (isinstance(rec.arrival, Hit)
                    and rec.arrival.detector_index == rec.fired_detector
                    and isinstance(rec.start, Occurred)):
                index_violations += 1
    mismatched = tuple(detectors[j].window.detector_index
                       for j in range(z) if reactions[j] != highs[j])
    ok = not mismatched and index_violations == 0
    return OneToOneResult(ok, mismatched, tuple(reactions), tuple(highs),
                          index_violations)


def one_to_one_from_report(report: ExperimentReport, detectors):
    """Aggregate one-to-one check from counters alone (no event log).

    True when every gated start reaction was counted and no dead-channel
    reactions occurred.
    """
    detectors = tuple(detectors)
    mismatched = [d.detector_index for s, d in zip(report.detectors, detectors)
                  if s.start_reactions != s.counts]
    if report.dead_channel_count > 0:
        mismatched.extend(d.window.detector_index for d in detectors
                          if not d.operable)
    return (not mismatched, tuple(sorted(set(mismatched))))


def simulate_single_trial(params, stream):
    """One trial on an externally supplied stream (pure-Python path).

    Returns the raw kernel row: (arrival, reacted, dead, passed, carriers,
    charge, peak, fired) with 0-based indices.
    """
    return _kernel_py.simulate_trial(
        stream, params.cum_probs, params.p_start, params.operable,
        params.edep, params.pass_thr, params.kind, params.pmean, params.cpc,
        params.deltas, params.doff, params.volts_per_coulomb,
        params.threshold_v)
