"""Exact event-driven single-species TASEP with walls and general initial data.

The engine is the standard graphical construction: every lattice site carries
a rate-1 Poisson clock (see `clocks`); at each clock event the particle at
that site, if any, jumps one step right provided the target is empty and the
wall admits the move.  Only clocks of currently occupied sites are consulted
(events at empty sites are no-ops), which keeps the work proportional to
n_particles * horizon while remaining exact.

Because a particle is never influenced by higher-labelled (left) particles,
simulating the first n labels of an infinite initial condition is exact.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .clocks import ClockField, site_key, stream_gap
from .walls import (
    MODE_MIN_SITE,
    MODE_MIN_SITE_REVERSED,
    MODE_NONE,
    MODE_RIGHT_WALL,
    PiecewiseFn,
    WallSpec,
    eval_wall,
)

__all__ = [
    "InitialConditionSpec",
    "Trajectory",
    "materialize_ic",
    "simulate",
    "simulate_reference",
    "simulate_finals_batch",
    "simulate_tracked_batch",
    "eval_wall",
]

TRACK_NONE = 0
TRACK_ALL = -2


# ---------------------------------------------------------------------------
# initial conditions


@dataclass(frozen=True)
class InitialConditionSpec:
    """Tagged initial-condition description.

    kind: 'step' | 'explicit' | 'half_d_periodic' | 'half_bernoulli' | 'stationary'
    """

    kind: str
    n_max: int
    offset: int = 0
    positions: tuple = ()
    d: float = 1.0
    rho: float = 0.5
    window: int = 0

    @classmethod
    def step(cls, n_max, offset=0):
        return cls("step", n_max, offset=int(offset))

    @classmethod
    def explicit(cls, positions):
        return cls("explicit", len(positions), positions=tuple(int(x) for x in positions))

    @classmethod
    def half_d_periodic(cls, n_max, d):
        return cls("half_d_periodic", n_max, d=float(d))

    @classmethod
    def half_bernoulli(cls, n_max, rho):
        return cls("half_bernoulli", n_max, rho=float(rho))

    @classmethod
    def stationary(cls, n_max, rho, window=0):
        return cls("stationary", n_max, rho=float(rho), window=int(window))

    @property
    def random(self):
        return self.kind in ("half_bernoulli", "stationary")


def materialize_ic(spec, rng=None):
    """Strictly decreasing positions x_1 > ... > x_{n_max} for the spec.

    Deterministic variants ignore `rng`; random variants accept a seed or a
    numpy Generator (independent of any ClockField randomness).
    """
    n = spec.n_max
    if n < 1:
        raise ValueError("n_max must be >= 1")
    if spec.kind == "step":
        return spec.offset - np.arange(n, dtype=np.int64)
    if spec.kind == "explicit":
        pos = np.asarray(spec.positions, dtype=np.int64)
        if pos.size != n or np.any(np.diff(pos) >= 0):
            raise ValueError("explicit positions must be strictly decreasing")
        return pos
    if spec.kind == "half_d_periodic":
        if spec.d < 1:
            raise ValueError("half_d_periodic requires d >= 1")
        return -np.floor(spec.d * np.arange(n, dtype=np.float64)).astype(np.int64)
    if not (0.0 < spec.rho < 1.0):
        raise ValueError("density must lie in (0,1)")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if spec.kind == "half_bernoulli":
        # particle 1 pinned at the origin; sites < 0 filled independently
        pos = np.empty(n, dtype=np.int64)
        pos[0] = 0
        k, z = 1, -1
        while k < n:
            room = n - k
            block = max(64, int(room / spec.rho * 1.5))
            hits = np.flatnonzero(rng.random(block) < spec.rho)[:room]
            pos[k : k + hits.size] = z - hits  # noqa: E203
            k += hits.size
            z -= block
        return pos
    if spec.kind == "stationary":
        gaps = rng.geometric(spec.rho, size=n - 1).astype(np.int64) - 1
        pos = np.empty(n, dtype=np.int64)
        pos[0] = 0
        pos[1:] = -np.cumsum(gaps + 1)
        if spec.window:
            while pos[-1] > -spec.window:
                extra = rng.geometric(spec.rho, size=max(16, n // 2)).astype(np.int64)
                pos = np.concatenate([pos, pos[-1] - np.cumsum(extra)])
        return pos
    raise ValueError(f"unknown initial condition kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """Full jump history of a finite-label simulation on [0, horizon]."""

    initial: np.ndarray
    jump_times: list
    horizon: float

    @property
    def n_labels(self):
        return len(self.initial)

    def position_at(self, label, t):
        """x_label(t), cadlag (value after any jump at exactly t)."""
        if not 1 <= label <= self.n_labels:
            raise ValueError(f"label {label} out of range 1..{self.n_labels}")
        if not 0 <= t <= self.horizon:
            raise ValueError(f"time {t} outside [0, {self.horizon}]")
        jumps = self.jump_times[label - 1]
        return int(self.initial[label - 1]) + int(np.searchsorted(jumps, t, side="right"))

    def final_positions(self):
        return self.initial + np.array([len(j) for j in self.jump_times], dtype=np.int64)

    def to_csv(self, path):
        """Write rows (label, jump_index, time, new_position)."""
        with open(path, "w") as fh:
            fh.write("label,jump_index,time,new_position\n")
            for lab in range(1, self.n_labels + 1):
                x = int(self.initial[lab - 1])
                for k, t in enumerate(self.jump_times[lab - 1]):
                    fh.write(f"{lab},{k},{float(t)!r},{x + k + 1}\n")


# ---------------------------------------------------------------------------
# jitted engine


@njit(cache=True, nogil=True)
def _pw_eval(knots, values, slopes, t):
    i = knots.shape[0] - 1
    while i > 0 and knots[i] > t:
        i -= 1
    return values[i] + slopes[i] * (t - knots[i])


@njit(cache=True, nogil=True)
def _admits(wmode, wk, wv, ws, wshift, wT, z, t, label):
    if wmode == MODE_NONE:
        return True
    if wmode == MODE_RIGHT_WALL:
        if label != 1:
            return True
        return z + 1 <= _pw_eval(wk, wv, ws, t)
    if wmode == MODE_MIN_SITE:
        return z >= _pw_eval(wk, wv, ws, t)
    return z >= wshift + 1.0 - _pw_eval(wk, wv, ws, wT - t)


@njit(cache=True, nogil=True)
def _heap_push(ht, hz, hn, t, z):
    i = hn
    ht[i] = t
    hz[i] = z
    while i > 0:
        p = (i - 1) >> 1
        if ht[p] < ht[i] or (ht[p] == ht[i] and hz[p] <= hz[i]):
            break
        ht[p], ht[i] = ht[i], ht[p]
        hz[p], hz[i] = hz[i], hz[p]
        i = p
    return hn + 1


@njit(cache=True, nogil=True)
def _heap_pop(ht, hz, hn):
    t, z = ht[0], hz[0]
    hn -= 1
    ht[0] = ht[hn]
    hz[0] = hz[hn]
    i = 0
    while True:
        l = 2 * i + 1
        if l >= hn:
            break
        r = l + 1
        m = l
        if r < hn and (ht[r] < ht[l] or (ht[r] == ht[l] and hz[r] < hz[l])):
            m = r
        if ht[i] < ht[m] or (ht[i] == ht[m] and hz[i] <= hz[m]):
            break
        ht[i], ht[m] = ht[m], ht[i]
        hz[i], hz[m] = hz[m], hz[i]
        i = m
    return t, z, hn


@njit(cache=True, nogil=True)
def _simulate_core(
    seed,
    pos0,
    horizon,
    wmode,
    wk,
    wv,
    ws,
    wshift,
    wT,
    lo,
    hi,
    track,
    jump_labels,
    jump_times,
):
    """One replica.  Returns (status, n_jumps, final positions).

    status: 0 ok, 1 window overflow (site > hi needed), 2 jump buffer full.
    """
    n = pos0.shape[0]
    width = hi - lo + 1
    occ = np.zeros(width, np.int64)
    pos = pos0.copy()
    for i in range(n):
        occ[pos0[i] - lo] = i + 1

    cnt = np.zeros(width, np.int64)  # gaps consumed per site
    tnxt = np.zeros(width, np.float64)  # cumulative time of last consumed gap
    pend = np.full(width, np.inf, np.float64)  # valid scheduled event per site

    cap = 4 * n + 64
    ht = np.empty(cap, np.float64)
    hz = np.empty(cap, np.int64)
    hn = 0

    for i in range(n):
        zi = pos0[i] - lo
        key = site_key(seed, pos0[i])
        t = tnxt[zi]
        k = cnt[zi]
        while t <= 0.0:
            t += stream_gap(key, k)
            k += 1
        cnt[zi] = k
        tnxt[zi] = t
        if t <= horizon:
            pend[zi] = t
            hn = _heap_push(ht, hz, hn, t, zi)

    njumps = 0
    cap_jumps = jump_times.shape[0]
    while hn > 0:
        t, zi, hn = _heap_pop(ht, hz, hn)
        if t > horizon:
            break
        lab = occ[zi]
        if lab == 0 or pend[zi] != t:
            continue  # stale entry
        pend[zi] = np.inf
        z = zi + lo
        moved = False
        if zi + 1 >= width:
            return 1, njumps, pos  # would need occupancy beyond the window
        if occ[zi + 1] == 0 and _admits(wmode, wk, wv, ws, wshift, wT, z, t, lab):
            occ[zi] = 0
            occ[zi + 1] = lab
            pos[lab - 1] = z + 1
            moved = True
            if track == TRACK_ALL or track == lab:
                if njumps >= cap_jumps:
                    return 2, njumps, pos
                jump_labels[njumps] = lab
                jump_times[njumps] = t
                njumps += 1
        # consult the destination's clock from now on; a blocked or empty-target
        # event leaves the particle in place and reschedules the same site
        zi_next = zi + 1 if moved else zi
        key = site_key(seed, zi_next + lo)
        tn = tnxt[zi_next]
        k = cnt[zi_next]
        while tn <= t:
            tn += stream_gap(key, k)
            k += 1
        cnt[zi_next] = k
        tnxt[zi_next] = tn
        if tn <= horizon:
            pend[zi_next] = tn
            if hn >= ht.shape[0]:
                ht2 = np.empty(ht.shape[0] * 2, np.float64)
                hz2 = np.empty(hz.shape[0] * 2, np.int64)
                ht2[:hn] = ht
                hz2[:hn] = hz
                ht = ht2
                hz = hz2
            hn = _heap_push(ht, hz, hn, tn, zi_next)
    return 0, njumps, pos


@njit(cache=True, nogil=True)
def _simulate_batch(
    seeds,
    pos0s,
    horizon,
    wmode,
    wk,
    wv,
    ws,
    wshift,
    wT,
    lo,
    hi,
    track,
    max_jumps,
):
    nrep = seeds.shape[0]
    n = pos0s.shape[1]
    finals = np.empty((nrep, n), np.int64)
    times = np.empty((nrep, max_jumps), np.float64)
    counts = np.zeros(nrep, np.int64)
    status = np.zeros(nrep, np.int64)
    labels_buf = np.empty(max_jumps, np.int64)
    for r in range(nrep):
        st, nj, pos = _simulate_core(
            seeds[r], pos0s[r], horizon, wmode, wk, wv, ws, wshift, wT,
            lo, hi, track, labels_buf, times[r],
        )
        status[r] = st
        counts[r] = nj
        finals[r] = pos
    return status, finals, times, counts


# ---------------------------------------------------------------------------
# wrappers


def _window(positions, wall, horizon):
    lo = int(positions[-1])
    if wall.mode == "right_wall":
        hi = max(int(positions[0]) + 1, int(math.floor(wall.f(horizon))) + 1)
    else:
        hi = int(positions[0]) + int(horizon + 12.0 * math.sqrt(horizon + 1.0) + 64)
    return lo, hi


def _check_positions(positions, wall):
    positions = np.asarray(positions, dtype=np.int64)
    if positions.ndim != 1 or positions.size < 1:
        raise ValueError("need at least one particle")
    if np.any(np.diff(positions) >= 0):
        raise ValueError("positions must be strictly decreasing in label")
    if wall.mode == "right_wall" and positions[0] > wall.f(0.0):
        raise ValueError("rightmost particle starts beyond the wall")
    return positions


def simulate(positions, wall, horizon, clocks):
    """Run the event-driven dynamics, recording the full jump history.

    `clocks` supplies the per-site event streams; coupled processes are
    obtained by passing fields with the same seed (or the same field).
    """
    if horizon > clocks.horizon:
        raise ValueError("horizon exceeds the clock field horizon")
    wall = wall if isinstance(wall, WallSpec) else WallSpec.none()
    positions = _check_positions(positions, wall)
    n = positions.size
    wmode, wk, wv, ws, wshift, wT = wall.kernel_args()
    lo, hi = _window(positions, wall, horizon)
    cap = int(n * horizon + 10.0 * math.sqrt(n * horizon + 1.0) + 64)
    while True:
        jl = np.empty(cap, np.int64)
        jt = np.empty(cap, np.float64)
        st, nj, pos = _simulate_core(
            np.uint64(clocks.seed), positions, float(horizon), wmode, wk, wv, ws, wshift, wT,
            lo, hi, TRACK_ALL, jl, jt,
        )
        if st == 0:
            break
        if st == 1:
            hi += max(64, hi - lo)
        else:
            cap *= 2
    jumps = [jt[:nj][jl[:nj] == lab] for lab in range(1, n + 1)]
    return Trajectory(initial=positions, jump_times=jumps, horizon=float(horizon))


def simulate_finals_batch(seeds, pos0s, wall, horizon):
    """Final positions only, one row per replica seed.

    pos0s may be a single position vector (shared) or one row per replica.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    pos0s = np.asarray(pos0s, dtype=np.int64)
    if pos0s.ndim == 1:
        pos0s = np.broadcast_to(pos0s, (seeds.size, pos0s.size)).copy()
    finals, _, _ = _run_batch(seeds, pos0s, wall, horizon, TRACK_NONE, 1)
    return finals

def simulate_tracked_batch(seeds, pos0s, wall, horizon, label):
    """Final positions plus the jump times of one tracked label.

    Returns (finals, times, counts): times[r, :counts[r]] are the ascending
    jump times of `label` in replica r.
    """
    seeds = np.asarray(seeds, dtype=np.uint64)
    pos0s = np.asarray(pos0s, dtype=np.int64)
    if pos0s.ndim == 1:
        pos0s = np.broadcast_to(pos0s, (seeds.size, pos0s.size)).copy()
    cap = int(horizon + 10.0 * math.sqrt(horizon + 1.0) + 32)
    return _run_batch(seeds, pos0s, wall, horizon, int(label), cap)


def _run_batch(seeds, pos0s, wall, horizon, track, max_jumps):
    wall = wall if isinstance(wall, WallSpec) else WallSpec.none()
    if pos0s.shape[1] > 1 and np.any(np.diff(pos0s, axis=1) >= 0):
        raise ValueError("positions must be strictly decreasing in label")
    if wall.mode == "right_wall" and pos0s[:, 0].max() > wall.f(0.0):
        raise ValueError("rightmost particle starts beyond the wall")
    lo = int(pos0s[:, -1].min())
    first = int(pos0s[:, 0].max())
    if wall.mode == "right_wall":
        hi = max(first + 1, int(math.floor(wall.f(horizon))) + 1)
    else:
        hi = first + int(horizon + 12.0 * math.sqrt(horizon + 1.0) + 64)
    wmode, wk, wv, ws, wshift, wT = wall.kernel_args()
    status, finals, times, counts = _simulate_batch(
        seeds, pos0s, float(horizon), wmode, wk, wv, ws, wshift, wT,
        lo, hi, track, max_jumps,
    )
    bad = np.flatnonzero(status != 0)
    while bad.size:
        # rare tail: rerun the affected replicas with a wider window / buffer
        hi += max(64, hi - lo)
        max_jumps *= 2
        st2, f2, t2, c2 = _simulate_batch(
            seeds[bad], pos0s[bad], float(horizon), wmode, wk, wv, ws, wshift, wT,
            lo, hi, track, max_jumps,
        )
        finals[bad] = f2
        if t2.shape[1] > times.shape[1]:
            grown = np.empty((times.shape[0], t2.shape[1]), np.float64)
            grown[:, : times.shape[1]] = times
            times = grown
        times[bad, : t2.shape[1]] = t2
        counts[bad] = c2
        status[bad] = st2
        bad = np.flatnonzero(status != 0)
    return finals, times, counts


def simulate_reference(positions, wall, horizon, clocks):
    """Slow reference: replay every clock event in the window in time order.

    Used to cross-validate the engine; consults ClockField.site_events
    directly, so it also pins the engine/stream consistency.
    """
    wall = wall if isinstance(wall, WallSpec) else WallSpec.none()
    positions = _check_positions(positions, wall)
    lo, hi = _window(positions, wall, horizon)
    events = []
    for z in range(lo, hi + 1):
        events.extend((t, z) for t in clocks.site_events(z, horizon))
    events.sort()
    occ = {int(p): i + 1 for i, p in enumerate(positions)}
    pos = [int(p) for p in positions]
    jumps = [[] for _ in positions]
    for t, z in events:
        lab = occ.get(z)
        if lab is None or z + 1 in occ:
            continue
        if wall.mode == "right_wall" and lab == 1 and z + 1 > wall.f(t):
            continue
        if wall.mode == "min_site":
            thr = (
                wall.threshold(t)
                if wall.threshold is not None
                else wall.shift + 1.0 - wall.f(wall.total_time - t)
            )
            if z < thr:
                continue
        del occ[z]
        occ[z + 1] = lab
        pos[lab - 1] = z + 1
        jumps[lab - 1].append(t)
    return Trajectory(
        initial=positions,
        jump_times=[np.array(j, dtype=np.float64) for j in jumps],
        horizon=float(horizon),
    )
