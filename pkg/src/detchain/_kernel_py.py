"""Pure-Python trial kernel: the reference lane.

Runs the per-trial pipeline (arrival draw, start reaction, avalanche,
peak discrimination) for a contiguous block of trial ids. The compiled
kernel in ``_kernel.pyx`` implements the identical algorithm; given the
same seed the two lanes must produce bit-identical aggregates and records.

Model kinds: 0 = gas gain, 1 = semiconductor, 2 = dynode chain.
"""

from .rng import RandomStream

BACKEND = "python"

KIND_GAS = 0
KIND_SEMICONDUCTOR = 1
KIND_DYNODE = 2

# tallies[] slots
T_MISS = 0
T_NO_REACTION = 1
T_DEAD_CHANNEL = 2
T_BELOW_THRESHOLD = 3
T_DISCRIMINATOR_LOW = 4


def simulate_trial(stream, cum_probs, p_start, operable, edep, pass_thr,
                   kind, pmean, cpc, deltas, doff, apc, u_thr):
    """Run one trial on ``stream``; every random draw comes from it.

    Returns (arrival, reacted, dead, passed, carriers, charge, peak, fired)
    where arrival and fired are 0-based detector indices or -1.
    """
    z = len(cum_probs)
    u = stream.uniform()
    arrival = -1
    for j in range(z):
        if u < cum_probs[j]:
            arrival = j
            break
    if arrival < 0:
        return (-1, 0, 0, 0, 0, 0.0, 0.0, -1)

    u2 = stream.uniform()
    if u2 >= p_start[arrival]:
        return (arrival, 0, 0, 0, 0, 0.0, 0.0, -1)

    if not operable[arrival]:
        return (arrival, 1, 1, 0, 0, 0.0, 0.0, -1)

    if not pass_thr[arrival]:
        return (arrival, 1, 0, 0, 0, 0.0, 0.0, -1)

    k = kind[arrival]
    if k == KIND_DYNODE:
        pop = 1 if edep[arrival] > 0.0 else 0
        for s in range(doff[arrival], doff[arrival + 1]):
            if pop == 0:
                break
            pop = stream.poisson(pop * deltas[s])
        carriers = pop
    else:
        carriers = stream.poisson(pmean[arrival])

    charge = carriers * cpc[arrival]
    peak = charge * apc
    fired = arrival if peak > u_thr else -1
    return (arrival, 1, 0, 1, carriers, charge, peak, fired)


def run_chunk(seed, lo, hi, cum_probs, p_start, operable, edep, pass_thr,
              kind, pmean, cpc, deltas, doff, apc, u_thr,
              counts, start_ok, tallies,
              record_ids, rec_arrival, rec_reacted, rec_dead, rec_passed,
              rec_carriers, rec_charge, rec_peak, rec_fired):
    """Simulate trials [lo, hi) and accumulate into the output arrays.

    ``record_ids`` must be sorted and contained in [lo, hi); trials listed
    there additionally get a full row in the rec_* arrays.
    """
    # unbox array arguments once; this lane may loop over millions of trials
    cum_probs = [float(x) for x in cum_probs]
    p_start = [float(x) for x in p_start]
    operable = [int(x) for x in operable]
    edep = [float(x) for x in edep]
    pass_thr = [int(x) for x in pass_thr]
    kind = [int(x) for x in kind]
    pmean = [float(x) for x in pmean]
    cpc = [float(x) for x in cpc]
    deltas = [float(x) for x in deltas]
    doff = [int(x) for x in doff]
    apc = float(apc)
    u_thr = float(u_thr)
    record_list = [int(x) for x in record_ids]
    z = len(cum_probs)

    c_counts = [0] * z
    c_start_ok = [0] * z
    c_tallies = [0] * 5

    n_rec = len(record_list)
    r = 0
    for trial in range(lo, hi):
        stream = RandomStream(seed, trial)
        out = simulate_trial(stream, cum_probs, p_start, operable, edep,
                             pass_thr, kind, pmean, cpc, deltas, doff,
                             apc, u_thr)
        arrival, reacted, dead, passed, carriers, charge, peak, fired = out

        if arrival < 0:
            c_tallies[T_MISS] += 1
        elif not reacted:
            c_tallies[T_NO_REACTION] += 1
        elif dead:
            c_tallies[T_DEAD_CHANNEL] += 1
        elif not passed:
            c_tallies[T_BELOW_THRESHOLD] += 1
        else:
            c_start_ok[arrival] += 1
            if fired >= 0:
                c_counts[fired] += 1
            else:
                c_tallies[T_DISCRIMINATOR_LOW] += 1

        if r < n_rec and record_list[r] == trial:
            rec_arrival[r] = arrival
            rec_reacted[r] = reacted
            rec_dead[r] = dead
            rec_passed[r] = passed
            rec_carriers[r] = carriers
            rec_charge[r] = charge
            rec_peak[r] = peak
            rec_fired[r] = fired
            r += 1

    for j in range(z):
        counts[j] += c_counts[j]
        start_ok[j] += c_start_ok[j]
    for j in range(5):
        tallies[j] += c_tallies[j]


def sample_poisson_array(seed, stream_id, lam, out):
    """Fill ``out`` with Poisson draws from one stream (parity test hook)."""
    stream = RandomStream(seed, stream_id)
    for i in range(len(out)):
        out[i] = stream.poisson(lam)


def sample_uniform_array(seed, stream_id, out):
    """Fill ``out`` with uniform draws from one stream (parity test hook)."""
    stream = RandomStream(seed, stream_id)
    for i in range(len(out)):
        out[i] = stream.uniform()
