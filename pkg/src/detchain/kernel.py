"""Trial-kernel lane selection and dispatch.

Two interchangeable kernels run the per-trial hot loop: a Cython extension
(built at install time) and a pure-Python reference. Both implement the
same arithmetic draw for draw, so they produce bit-identical results; the
compiled lane is selected at import when present. Set ``DETCHAIN_KERNEL``
to ``python`` to force the fallback or ``cython`` to require the extension.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import _kernel_py

_requested = os.environ.get("DETCHAIN_KERNEL", "auto").strip().lower()

_compiled = None
if _requested not in ("python", "py"):
    try:
        from . import _kernel as _compiled
    except ImportError:
        if _requested in ("cython", "compiled", "c"):
            raise
        _compiled = None

backend = "cython" if _compiled is not None else "python"


def implementations():
    """Mapping of available kernel lanes, name -> module."""
    impls = {"python": _kernel_py}
    if _compiled is not None:
        impls["cython"] = _compiled
    return impls


def get_impl(name=None):
    """Resolve a kernel lane by name; None/'auto' picks the fast one."""
    if name is None or name == "auto":
        return _compiled if _compiled is not None else _kernel_py
    return implementations()[name]


@dataclass(frozen=True)
class TrialParams:
    """Flattened per-detector arrays consumed by the trial kernels.

    Detector indices here are 0-based array positions; ``kind`` uses the
    codes from ``_kernel_py`` (0 gas gain, 1 semiconductor, 2 dynode chain).
    """

    cum_probs: np.ndarray       # float64[Z], cumulative window probabilities
    p_start: np.ndarray         # float64[Z]
    operable: np.ndarray        # uint8[Z]
    edep: np.ndarray            # float64[Z], deposited energy per detector
    pass_thr: np.ndarray        # uint8[Z], edep > threshold_energy
    kind: np.ndarray            # int32[Z]
    pmean: np.ndarray           # float64[Z], mean primary carriers
    cpc: np.ndarray             # float64[Z], coulomb per final carrier
    deltas: np.ndarray          # float64[*], dynode stage means, flattened
    doff: np.ndarray            # int64[Z+1], per-detector slice into deltas
    volts_per_coulomb: float
    threshold_v: float

    @property
    def n_detectors(self):
        return len(self.cum_probs)


@dataclass
class ChunkResult:
    """Aggregates (and optional per-trial records) from one trial range."""

    counts: np.ndarray          # int64[Z] discriminator fires per detector
    start_ok: np.ndarray        # int64[Z] gated start reactions per detector
    tallies: np.ndarray         # int64[5]: miss, no_reaction, dead_channel,
                                #           below_threshold, discriminator_low
    record_ids: np.ndarray
    records: dict               # column name -> array, aligned with record_ids

    def merge(self, other):
        self.counts += other.counts
        self.start_ok += other.start_ok
        self.tallies += other.tallies
        self.record_ids = np.concatenate([self.record_ids, other.record_ids])
        self.records = {k: np.concatenate([self.records[k], other.records[k]])
                        for k in self.records}
        return self


_EMPTY_IDS = np.empty(0, dtype=np.int64)


def run_trials(seed, lo, hi, params, record_ids=None, impl_name=None):
    """Run trials [lo, hi) on the selected lane and return a ChunkResult."""
    impl = get_impl(impl_name)
    z = params.n_detectors
    counts = np.zeros(z, dtype=np.int64)
    start_ok = np.zeros(z, dtype=np.int64)
    tallies = np.zeros(5, dtype=np.int64)

    if record_ids is None:
        record_ids = _EMPTY_IDS
    record_ids = np.ascontiguousarray(record_ids, dtype=np.int64)
    n_rec = len(record_ids)
    records = {
        "arrival": np.zeros(n_rec, dtype=np.int32),
        "reacted": np.zeros(n_rec, dtype=np.uint8),
        "dead": np.zeros(n_rec, dtype=np.uint8),
        "passed": np.zeros(n_rec, dtype=np.uint8),
        "carriers": np.zeros(n_rec, dtype=np.int64),
        "charge": np.zeros(n_rec, dtype=np.float64),
        "peak": np.zeros(n_rec, dtype=np.float64),
        "fired": np.zeros(n_rec, dtype=np.int32),
    }

    impl.run_chunk(
        seed, lo, hi,
        params.cum_probs, params.p_start, params.operable, params.edep,
        params.pass_thr, params.kind, params.pmean, params.cpc,
        params.deltas, params.doff,
        params.volts_per_coulomb, params.threshold_v,
        counts, start_ok, tallies,
        record_ids,
        records["arrival"], records["reacted"], records["dead"],
        records["passed"], records["carriers"], records["charge"],
        records["peak"], records["fired"],
    )
    return ChunkResult(counts, start_ok, tallies, record_ids, records)
