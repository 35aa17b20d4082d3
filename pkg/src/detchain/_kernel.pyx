# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled trial kernel.

Mirrors ``_kernel_py`` operation for operation: same SplitMix64 stream,
same Poisson samplers (Knuth below mean 10, Hoermann PTRS above), same
draw order per trial. Both lanes call the platform libm for exp/log/sqrt,
and the extension is compiled with FP contraction off, so results are
bit-identical with the pure-Python lane.
"""

from libc.math cimport exp, fabs, floor, log, sqrt

BACKEND = "cython"

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15
cdef unsigned long long MIX_A = 0xBF58476D1CE4E5B9
cdef unsigned long long MIX_B = 0x94D049BB133111EB

cdef double U53 = 1.0 / 9007199254740992.0
cdef double HALF_LN_TWO_PI = 0.9189385332046727

cdef enum:
    LOGFACT_TABLE_SIZE = 1024

cdef double[LOGFACT_TABLE_SIZE] LOGFACT


def _init_logfact():
    cdef int k
    cdef double acc = 0.0
    LOGFACT[0] = 0.0
    for k in range(1, LOGFACT_TABLE_SIZE):
        acc += log(<double>k)
        LOGFACT[k] = acc


_init_logfact()


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * MIX_A
    z = (z ^ (z >> 27)) * MIX_B
    return z ^ (z >> 31)


cdef inline double _uniform(unsigned long long *state) nogil:
    state[0] = state[0] + GOLDEN
    return <double>(_mix64(state[0]) >> 11) * U53


cdef inline double _log_factorial(double k) nogil:
    cdef double r, r2, corr
    if k < LOGFACT_TABLE_SIZE:
        return LOGFACT[<long>k]
    r = 1.0 / k
    r2 = r * r
    corr = ((1.0 / 12.0) - ((1.0 / 360.0) - (1.0 / 1260.0) * r2) * r2) * r
    return (k + 0.5) * log(k) - k + HALF_LN_TWO_PI + corr


cdef long long _poisson_knuth(unsigned long long *state, double lam) nogil:
    cdef double limit = exp(-lam)
    cdef long long k = 0
    cdef double prod = 1.0
    while True:
        prod *= _uniform(state)
        if prod <= limit:
            return k
        k += 1


cdef long long _poisson_ptrs(unsigned long long *state, double lam) nogil:
    cdef double log_lam = log(lam)
    cdef double b = 0.931 + 2.53 * sqrt(lam)
    cdef double a = -0.059 + 0.02483 * b
    cdef double inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    cdef double v_r = 0.9277 - 3.6224 / (b - 2.0)
    cdef double u, v, us, k, lhs
    while True:
        u = _uniform(state) - 0.5
        v = _uniform(state)
        us = 0.5 - fabs(u)
        if us <= 0.0:
            continue
        k = floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return <long long>k
        if k < 0.0 or (us < 0.013 and v > us):
            continue
        if v <= 0.0:  # log(v) -> -inf, always accepted
            return <long long>k
        lhs = log(v) + log(inv_alpha) - log(a / (us * us) + b)
        if lhs <= k * log_lam - lam - _log_factorial(k):
            return <long long>k


cdef inline long long _poisson(unsigned long long *state, double lam) nogil:
    if lam <= 0.0:
        return 0
    if lam < 10.0:
        return _poisson_knuth(state, lam)
    return _poisson_ptrs(state, lam)


def run_chunk(unsigned long long seed, long long lo, long long hi,
              const double[::1] cum_probs, const double[::1] p_start,
              const unsigned char[::1] operable, const double[::1] edep,
              const unsigned char[::1] pass_thr, const int[::1] kind,
              const double[::1] pmean, const double[::1] cpc,
              const double[::1] deltas, const long long[::1] doff,
              double apc, double u_thr,
              long long[::1] counts, long long[::1] start_ok,
              long long[::1] tallies,
              const long long[::1] record_ids,
              int[::1] rec_arrival, unsigned char[::1] rec_reacted,
              unsigned char[::1] rec_dead, unsigned char[::1] rec_passed,
              long long[::1] rec_carriers, double[::1] rec_charge,
              double[::1] rec_peak, int[::1] rec_fired):
    """Simulate trials [lo, hi); see ``_kernel_py.run_chunk``."""
    cdef unsigned long long seedmix = _mix64(seed)
    cdef unsigned long long state
    cdef long long trial, carriers, pop, s, r = 0
    cdef long long n_rec = record_ids.shape[0]
    cdef int z = <int>cum_probs.shape[0]
    cdef int arrival, j, reacted, dead, passed, fired
    cdef double u, u2, charge, peak

    with nogil:
        for trial in range(lo, hi):
            state = _mix64(seedmix + GOLDEN * <unsigned long long>trial)
            u = _uniform(&state)
            arrival = -1
            for j in range(z):
                if u < cum_probs[j]:
                    arrival = j
                    break
            reacted = 0
            dead = 0
            passed = 0
            carriers = 0
            charge = 0.0
            peak = 0.0
            fired = -1
            if arrival < 0:
                tallies[0] += 1
            else:
                u2 = _uniform(&state)
                if u2 >= p_start[arrival]:
                    tallies[1] += 1
                elif not operable[arrival]:
                    reacted = 1
                    dead = 1
                    tallies[2] += 1
                elif not pass_thr[arrival]:
                    reacted = 1
                    tallies[3] += 1
                else:
                    reacted = 1
                    passed = 1
                    if kind[arrival] == 2:
                        pop = 1 if edep[arrival] > 0.0 else 0
                        for s in range(doff[arrival], doff[arrival + 1]):
                            if pop == 0:
                                break
                            pop = _poisson(&state, <double>pop * deltas[s])
                        carriers = pop
                    else:
                        carriers = _poisson(&state, pmean[arrival])
                    charge = <double>carriers * cpc[arrival]
                    peak = charge * apc
                    start_ok[arrival] += 1
                    if peak > u_thr:
                        fired = arrival
                        counts[arrival] += 1
                    else:
                        tallies[4] += 1

            if r < n_rec and record_ids[r] == trial:
                rec_arrival[r] = arrival
                rec_reacted[r] = <unsigned char>reacted
                rec_dead[r] = <unsigned char>dead
                rec_passed[r] = <unsigned char>passed
                rec_carriers[r] = carriers
                rec_charge[r] = charge
                rec_peak[r] = peak
                rec_fired[r] = fired
                r += 1


def sample_poisson_array(unsigned long long seed, long long stream_id,
                         double lam, long long[::1] out):
    """Fill ``out`` with Poisson draws from one stream (parity test hook)."""
    cdef unsigned long long state = _mix64(
        _mix64(seed) + GOLDEN * <unsigned long long>stream_id)
    cdef Py_ssize_t i
    for i in range(out.shape[0]):
        out[i] = _poisson(&state, lam)


def sample_uniform_array(unsigned long long seed, long long stream_id,
                         double[::1] out):
    """Fill ``out`` with uniform draws from one stream (parity test hook)."""
    cdef unsigned long long state = _mix64(
        _mix64(seed) + GOLDEN * <unsigned long long>stream_id)
    cdef Py_ssize_t i
    for i in range(out.shape[0]):
        out[i] = _uniform(&state)
