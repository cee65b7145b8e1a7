"""Small-system master-equation oracles via uniformization.

These provide reference probabilities (absolute error well below 1e-6) for
systems of up to a few particles, independently of the event-driven engine:
states are enumerated breadth-first with a total-jump cap, the uniformized
transition matrix is applied through a truncated Poisson series, and walls
enter through piecewise-constant admissibility segments.  Boundary times and
kill thresholds are computed in exact rational arithmetic so that walls
sitting exactly on integer levels (f = 0, staircases) are handled without
floating-point ambiguity.

Every oracle returns (probability, error_bound); the bound adds the Poisson
truncation mass and the probability mass that hit the jump cap.
"""

import math
from fractions import Fraction

import numpy as np
from numba import njit
from scipy.stats import poisson

__all__ = [
    "wall_final_probability",
    "free_event_probability",
    "identity_rhs_probability",
    "coupled_min_probability",
]

_EPS_SEG = 1e-11


def _jump_cap(lam, T, tail=1e-12, factor=1):
    return int(poisson.isf(tail, max(lam * T, 1e-9))) * factor + 8


# ---------------------------------------------------------------------------
# single-process state space


_ENUM_CACHE = {}


def _enumerate_states(ic, cap, x1_cap=None):
    """Reachable positions with total displacement <= cap.

    targets[s, i] is the state index after particle i+1 jumps: -2 if the jump
    is excluded (occupied target, or particle 1 above a hard cap), -1 if it
    would exceed the displacement cap (sink).  Results are cached; the
    returned arrays are shared and must not be mutated.
    """
    ic = tuple(int(x) for x in ic)
    key = (ic, cap, x1_cap)
    if key in _ENUM_CACHE:
        return _ENUM_CACHE[key]
    n = len(ic)
    index = {ic: 0}
    states = [ic]
    frontier = [ic]
    while frontier:
        nxt = []
        for st in frontier:
            for i in range(n):
                if i > 0 and st[i] + 1 == st[i - 1]:
                    continue
                if i == 0 and x1_cap is not None and st[0] + 1 > x1_cap:
                    continue
                used = sum(a - b for a, b in zip(st, ic))
                if used >= cap:
                    continue
                new = st[:i] + (st[i] + 1,) + st[i + 1 :]  # noqa: E203
                if new not in index:
                    index[new] = len(states)
                    states.append(new)
                    nxt.append(new)
        frontier = nxt
    S = len(states)
    pos = np.array(states, dtype=np.int64)
    targets = np.full((S, n), -2, dtype=np.int64)
    for sidx, st in enumerate(states):
        used = sum(a - b for a, b in zip(st, ic))
        for i in range(n):
            if i > 0 and st[i] + 1 == st[i - 1]:
                continue
            if i == 0 and x1_cap is not None and st[0] + 1 > x1_cap:
                continue
            if used >= cap:
                targets[sidx, i] = -1
                continue
            new = st[:i] + (st[i] + 1,) + st[i + 1 :]  # noqa: E203
            targets[sidx, i] = index[new]
    _ENUM_CACHE[key] = (pos, targets)
    return pos, targets


@njit(cache=True)
def _uni_matvec(v, targets, p1_ok, lam):
    S, n = targets.shape
    w = np.zeros(v.shape[0], np.float64)
    w[S] = v[S]  # sink is absorbing
    for sidx in range(S):
        vs = v[sidx]
        if vs == 0.0:
            continue
        stay = vs
        share = vs / lam
        for m in range(n):
            tg = targets[sidx, m]
            if tg == -2 or (m == 0 and not p1_ok[sidx]):
                continue
            stay -= share
            if tg == -1:
                w[S] += share
            else:
                w[tg] += share
        w[sidx] += stay
    return w


def _evolve(v, targets, p1_ok, lam, delta, eps=_EPS_SEG):
    """v -> v exp(Q delta) by uniformization; returns (v, truncation_mass)."""
    x = lam * float(delta)
    if x <= 0.0:
        return v, 0.0
    w = math.exp(-x)
    acc = v * w
    cum = w
    u = v
    k = 0
    while cum < 1.0 - eps:
        k += 1
        u = _uni_matvec(u, targets, p1_ok, lam)
        w *= x / k
        acc += w * u
        cum += w
    return acc, 1.0 - cum


# ---------------------------------------------------------------------------
# exact wall geometry


def _wall_fractions(f):
    knots = [Fraction(float(t)) for t in f.knots]
    values = [Fraction(float(v)) for v in f.values]
    slopes = [Fraction(float(s)) for s in f.slopes]
    return knots, values, slopes


def _f_eval(fr, t):
    knots, values, slopes = fr
    i = len(knots) - 1
    while i > 0 and knots[i] > t:
        i -= 1
    return values[i] + slopes[i] * (t - knots[i])


def _f_left_limit(fr, t):
    knots, values, slopes = fr
    if t <= 0:
        return _f_eval(fr, Fraction(0))
    i = len(knots) - 1
    while i > 0 and knots[i] >= t:
        i -= 1
    return values[i] + slopes[i] * (t - knots[i])


def _crossing_times(fr, levels, T):
    """First times in (0, T) at which f reaches each level, exactly."""
    knots, values, slopes = fr
    out = set()
    for lev in levels:
        lev = Fraction(lev)
        for i in range(len(knots)):
            t0 = knots[i]
            t1 = knots[i + 1] if i + 1 < len(knots) else Fraction(T)
            if t0 >= T:
                break
            t1 = min(t1, Fraction(T))
            v0 = values[i]
            if slopes[i] > 0:
                v1 = v0 + slopes[i] * (t1 - t0)
                if v0 < lev <= v1:
                    t = t0 + (lev - v0) / slopes[i]
                    if Fraction(0) < t < Fraction(T):
                        out.add(t)
                    break
            elif v0 >= lev:
                break
    return out


# ---------------------------------------------------------------------------
# oracles


def wall_final_probability(ic, f, T, n, s):
    """P(x^f_n(T) > s) for the right-wall dynamics with initial positions ic."""
    ic = [int(x) for x in ic]
    npart = len(ic)
    lam = float(npart)
    cap = _jump_cap(lam, T)
    fr = _wall_fractions(f)
    x1_cap = math.floor(_f_eval(fr, Fraction(float(T))))
    pos, targets = _enumerate_states(ic, cap, x1_cap=x1_cap)
    S = pos.shape[0]

    levels = [Fraction(c) for c in range(ic[0] + 1, x1_cap + 2)]
    bounds = {Fraction(0), Fraction(float(T))}
    bounds.update(k for k in fr[0] if Fraction(0) < k < Fraction(float(T)))
    bounds.update(_crossing_times(fr, levels, float(T)))
    bounds = sorted(bounds)

    v = np.zeros(S + 1)
    v[0] = 1.0
    err = 0.0
    x1 = pos[:, 0]
    for a, b in zip(bounds[:-1], bounds[1:]):
        level = math.floor(_f_eval(fr, a))
        p1_ok = (x1 + 1) <= level
        v, tr = _evolve(v, targets, p1_ok, lam, b - a)
        err += tr
    err += v[S]
    prob = float(v[:S][pos[:, n - 1] > s].sum())
    return prob, err


def free_event_probability(ic, T, predicate):
    """P(predicate(x(T))) for unconstrained dynamics from positions ic.

    predicate receives the (S, n) array of final positions and returns a
    boolean mask of accepted states.
    """
    ic = [int(x) for x in ic]
    lam = float(len(ic))
    cap = _jump_cap(lam, T)
    pos, targets = _enumerate_states(ic, cap)
    S = pos.shape[0]
    v = np.zeros(S + 1)
    v[0] = 1.0
    p1_ok = np.ones(S, dtype=bool)
    v, err = _evolve(v, targets, p1_ok, lam, T)
    err += v[S]
    prob = float(v[:S][predicate(pos)].sum())
    return prob, err


def identity_rhs_probability(ic_values, f, T, n, s):
    """Probability of the step-process event in the wall identity.

    The process has step initial data (0, -1, ..., -(n-1)); the event is
    {x_n(t) >= s + 1 - f(T-t) for all t} and {x_{n-j}(T) > s - ic_values[j]
    for j = 0..n-1}.  The path clause mirrors the site suppression the
    identity couples against; killing by the moving level is applied exactly
    at its integer crossing times.
    """
    step = [-(k) for k in range(n)]
    lam = float(n)
    cap = _jump_cap(lam, T)
    pos, targets = _enumerate_states(step, cap)
    S = pos.shape[0]
    xn = pos[:, n - 1]
    fr = _wall_fractions(f)
    Tf = Fraction(float(T))
    s = int(s)

    # psi(t) = s + 1 - f(T-t) crosses integer level c when f reaches s + 1 - c
    levels = [Fraction(s + 1 - c) for c in range(int(xn.min()), int(xn.max()) + 2)]
    bounds = {Fraction(0), Tf}
    bounds.update(Tf - k for k in fr[0] if Fraction(0) < Tf - k < Tf)
    bounds.update(Tf - u for u in _crossing_times(fr, levels, float(T)))
    bounds = sorted(bounds)

    v = np.zeros(S + 1)
    v[0] = 1.0
    err = 0.0
    p1_ok = np.ones(S, dtype=bool)
    for i, t in enumerate(bounds):
        if i + 1 < len(bounds):
            # psi crosses no integer strictly inside the segment, so a state
            # below the segment supremum sup psi = psi(t_{i+1}) fails
            # immediately after t_i and cannot outrun the level
            psi = Fraction(s + 1) - _f_eval(fr, Tf - bounds[i + 1])
        else:
            psi = Fraction(s + 1) - _f_eval(fr, Fraction(0))
        kill = xn <= math.ceil(psi) - 1  # x_n < psi
        v[:S][kill] = 0.0
        if i + 1 < len(bounds):
            v, tr = _evolve(v, targets, p1_ok, lam, bounds[i + 1] - t)
            err += tr
    err += v[S]
    ok = np.ones(S, dtype=bool)
    for j in range(n):
        ok &= pos[:, n - 1 - j] > s - int(ic_values[j])
    prob = float(v[:S][ok].sum())
    return prob, err


def coupled_min_probability(processes, T, s):
    """P(min over processes of x^(step at Z)_n(T) <= s) under basic coupling.

    processes: list of (n, Z) pairs; process (n, Z) has n particles started in
    step formation with the rightmost at Z, and the tagged label is n.  All
    processes read the same site clocks: sites occupied in several processes
    move those particles simultaneously (each subject to its own exclusion).
    """
    procs = [(int(n), int(Z)) for n, Z in processes]
    sizes = [n for n, _ in procs]
    offs = np.cumsum([0] + sizes)
    ntot = int(offs[-1])
    ic = []
    for n, Z in procs:
        ic.extend(Z - k for k in range(n))
    ic = tuple(ic)
    lam = float(ntot)
    cap = _jump_cap(lam, T, factor=len(procs))

    def moves(st):
        occupied = {}
        for p in range(len(procs)):
            lo, hi = offs[p], offs[p + 1]
            for i in range(lo, hi):
                occupied.setdefault(st[i], []).append((p, i))
        out = []
        for z in sorted(occupied):
            new = list(st)
            changed = False
            for p, i in occupied[z]:
                lo, hi = offs[p], offs[p + 1]
                if i == lo or st[i] + 1 < st[i - 1]:
                    new[i] = st[i] + 1
                    changed = True
            if changed:
                out.append(tuple(new))
        return out

    index = {ic: 0}
    states = [ic]
    frontier = [ic]
    while frontier:
        nxt = []
        for st in frontier:
            used = sum(a - b for a, b in zip(st, ic))
            if used >= cap:
                continue
            for new in moves(st):
                if new not in index:
                    index[new] = len(states)
                    states.append(new)
                    nxt.append(new)
        frontier = nxt
    S = len(states)
    max_moves = ntot
    targets = np.full((S, max_moves), -2, dtype=np.int64)
    for sidx, st in enumerate(states):
        used = sum(a - b for a, b in zip(st, ic))
        for m, new in enumerate(moves(st)):
            targets[sidx, m] = -1 if used >= cap else index[new]
    pos = np.array(states, dtype=np.int64)
    v = np.zeros(S + 1)
    v[0] = 1.0
    p1_ok = np.ones(S, dtype=bool)
    v, err = _evolve(v, targets, p1_ok, lam, T)
    err += v[S]
    tagged = np.stack([pos[:, offs[p + 1] - 1] for p in range(len(procs))], axis=1)
    prob = float(v[:S][tagged.min(axis=1) <= s].sum())
    return prob, err
