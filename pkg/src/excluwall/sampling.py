"""Fast law-equivalent sampler for one-sided Monte Carlo ensembles.

The event-driven engine in `dynamics` consults a clock at every occupied
site, which is what makes couplings exact but costs one heap transaction per
clock ring.  When only the law of a single process is needed (no shared
clocks), the classical service-time construction is equivalent and much
cheaper: by memorylessness, particle j makes its k-th jump an Exp(1) time
after the jump becomes possible, i.e.

    J_j(k) = max(J_j(k-1), J_{j-1}(k - gap_j + 1), enable_k) + Exp(1),

where gap_j is the initial spacing to the particle ahead and, for the
rightmost particle under a right wall, enable_k is the first time the
nondecreasing wall admits the target site.  One draw per jump, no event
queue.  Distributional agreement with the engine is pinned by tests (exact
small-system oracles plus two-sample KS checks).

Only 'none' and 'right_wall' constraints are supported here; couplings and
site-based suppression always go through `dynamics`.
"""

import math

import numpy as np
from numba import njit

from .clocks import _GOLDEN, _MASK, _MIX1, _mix64, stream_gap
from .walls import WallSpec

__all__ = ["sample_finals", "sample_tracked"]

_BIG = 1e300


@njit(cache=True, nogil=True)
def _attempt_key(seed, label):
    # distinct from clocks.site_key so attempt streams never alias site streams
    a = _mix64(_mix64(np.uint64(seed)))
    b = _mix64(np.uint64(label) * np.uint64(0x9E3779B97F4A7C15))
    return _mix64((a ^ b) * _MIX1 & _MASK)


@njit(cache=True, nogil=True)
def _wall_enable_times(knots, values, slopes, levels):
    """First time the wall reaches each level; BIG if never (within any time)."""
    out = np.empty(levels.shape[0], np.float64)
    for i in range(levels.shape[0]):
        lev = levels[i]
        t = _BIG
        for p in range(knots.shape[0]):
            v0 = values[p]
            if v0 >= lev:
                t = knots[p]
                break
            if slopes[p] > 0.0:
                t1 = knots[p + 1] if p + 1 < knots.shape[0] else _BIG
                v1 = v0 + slopes[p] * (t1 - knots[p])
                if v1 >= lev:
                    t = knots[p] + (lev - v0) / slopes[p]
                    break
        out[i] = t
    return out


@njit(cache=True, nogil=True)
def _service_replica(seed, pos0, horizon, enable1, track, prev, cur, track_out, finals):
    """One replica of the service-time recursion.

    prev/cur are scratch rows of length K+1 holding J_j(k) at index k
    (index 0 is time zero).  Returns (status, tracked jump count); status 1
    means the jump capacity K was insufficient.
    """
    n = pos0.shape[0]
    K = prev.shape[0] - 1
    ntrack = 0
    for j in range(1, n + 1):
        key = _attempt_key(seed, j)
        cur[0] = 0.0
        count = 0
        gap = 0 if j == 1 else pos0[j - 2] - pos0[j - 1]
        stopped = False
        for k in range(1, K + 1):
            t = cur[k - 1]
            if j == 1:
                e = enable1[k - 1] if enable1.shape[0] > 0 else 0.0
            else:
                idx = k - gap + 1
                e = prev[idx] if idx >= 1 else 0.0
            if e > t:
                t = e
            if t > horizon:
                cur[k] = _BIG
                stopped = True
            else:
                t += stream_gap(key, k - 1)
                cur[k] = t
            if cur[k] <= horizon:
                count += 1
            if stopped:
                for k2 in range(k + 1, K + 1):
                    cur[k2] = _BIG
                break
        if not stopped and cur[K] <= horizon:
            return 1, ntrack  # capacity reached with jumps still inside horizon
        finals[j - 1] = pos0[j - 1] + count
        if track == j:
            ntrack = count
            for k in range(1, count + 1):
                track_out[k - 1] = cur[k]
        prev, cur = cur, prev
    return 0, ntrack


@njit(cache=True, nogil=True)
def _service_batch(seeds, pos0s, horizon, enable1, track, K, max_track):
    nrep = seeds.shape[0]
    n = pos0s.shape[1]
    finals = np.empty((nrep, n), np.int64)
    times = np.empty((nrep, max_track), np.float64)
    counts = np.zeros(nrep, np.int64)
    status = np.zeros(nrep, np.int64)
    prev = np.empty(K + 1, np.float64)
    cur = np.empty(K + 1, np.float64)
    for r in range(nrep):
        st, nt = _service_replica(seeds[r], pos0s[r], horizon, enable1, track, prev, cur, times[r], finals[r])
        status[r] = st
        counts[r] = nt
    return status, finals, times, counts


def _enable_for_wall(wall, pos0s, horizon, K):
    if wall.mode == "none":
        return np.zeros(0, dtype=np.float64)
    if wall.mode != "right_wall":
        raise ValueError("the service sampler supports only 'none' and 'right_wall'")
    x1 = int(pos0s[:, 0].max())
    if int(pos0s[:, 0].min()) != x1:
        raise ValueError("right-wall sampling needs a common rightmost position")
    if x1 > wall.f(0.0):
        raise ValueError("rightmost particle starts beyond the wall")
    knots, values, slopes = wall.f.to_breakpoint_arrays()
    levels = np.arange(1, K + 1, dtype=np.float64) + x1
    return _wall_enable_times(knots, values, slopes, levels)


def _run(seeds, pos0s, wall, horizon, track, max_track):
    seeds = np.asarray(seeds, dtype=np.uint64)
    pos0s = np.asarray(pos0s, dtype=np.int64)
    if pos0s.ndim == 1:
        pos0s = np.broadcast_to(pos0s, (seeds.size, pos0s.size)).copy()
    if pos0s.shape[1] > 1 and np.any(np.diff(pos0s, axis=1) >= 0):
        raise ValueError("positions must be strictly decreasing in label")
    wall = wall if isinstance(wall, WallSpec) else WallSpec.none()
    K = int(horizon + 10.0 * math.sqrt(horizon + 1.0) + 50)
    while True:
        enable1 = _enable_for_wall(wall, pos0s, horizon, K)
        status, finals, times, counts = _service_batch(
            seeds, pos0s, float(horizon), enable1, track, K, max_track
        )
        bad = np.flatnonzero(status != 0)
        if bad.size == 0:
            return finals, times, counts
        K *= 2
        max_track = max(max_track, K)


def sample_finals(seeds, pos0s, wall, horizon):
    """Final positions, one row per replica (law-equivalent to the engine)."""
    finals, _, _ = _run(seeds, pos0s, wall, horizon, track=0, max_track=1)
    return finals


def sample_tracked(seeds, pos0s, wall, horizon, label):
    """Finals plus the ascending jump times of one label per replica."""
    cap = int(horizon + 10.0 * math.sqrt(horizon + 1.0) + 50)
    return _run(seeds, pos0s, wall, horizon, track=int(label), max_track=cap)
