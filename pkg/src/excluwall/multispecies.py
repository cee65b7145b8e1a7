"""Permutation-valued multi-species TASEP and colour-position machinery.

Configurations are bijections of the integers equal to the identity outside a
finite window.  Lower colours have priority: the swap operator at the pair
(z, z+1) exchanges the occupants iff the colour at z is smaller.  Driving the
swaps with per-site Poisson clocks gives the multi-species process; bundling
colours below a cutoff recovers single-species marginals.
"""

import numpy as np

__all__ = [
    "PermutationConfig",
    "SwapSequence",
    "apply_swap",
    "apply_word",
    "invert",
    "marginal",
    "simulate_multi",
    "colour_position_check",
    "build_ic_permutation",
    "hole_transfer_check",
    "marginal_consistency_check",
]


class PermutationConfig:
    """Bijection of Z, identity outside the window [lo, hi].

    forward[site - lo] is the colour at `site`; inverse[colour - lo] is the
    site holding `colour`.  Both arrays always describe mutually inverse
    bijections of the window onto itself.
    """

    def __init__(self, lo, hi, forward=None):
        if hi < lo:
            raise ValueError("empty window")
        self.lo = int(lo)
        self.hi = int(hi)
        size = self.hi - self.lo + 1
        if forward is None:
            self.forward = np.arange(self.lo, self.hi + 1, dtype=np.int64)
        else:
            self.forward = np.asarray(forward, dtype=np.int64).copy()
            if sorted(self.forward) != list(range(self.lo, self.hi + 1)):
                raise ValueError("forward array is not a bijection of the window")
        self.inverse = np.empty(size, dtype=np.int64)
        self.inverse[self.forward - self.lo] = np.arange(self.lo, self.hi + 1, dtype=np.int64)

    @classmethod
    def identity(cls, lo, hi):
        return cls(lo, hi)

    def copy(self):
        out = PermutationConfig.__new__(PermutationConfig)
        out.lo, out.hi = self.lo, self.hi
        out.forward = self.forward.copy()
        out.inverse = self.inverse.copy()
        return out

    def colour_at(self, site):
        if self.lo <= site <= self.hi:
            return int(self.forward[site - self.lo])
        return int(site)

    def site_of(self, colour):
        if self.lo <= colour <= self.hi:
            return int(self.inverse[colour - self.lo])
        return int(colour)

    def extend(self, lo, hi):
        """Grow the window, filling the new range with identity colours."""
        lo, hi = min(lo, self.lo), max(hi, self.hi)
        if lo == self.lo and hi == self.hi:
            return
        fwd = np.arange(lo, hi + 1, dtype=np.int64)
        fwd[self.lo - lo : self.hi - lo + 1] = self.forward  # noqa: E203
        self.lo, self.hi = lo, hi
        self.forward = fwd
        self.inverse = np.empty(hi - lo + 1, dtype=np.int64)
        self.inverse[self.forward - lo] = np.arange(lo, hi + 1, dtype=np.int64)

    def __eq__(self, other):
        lo = min(self.lo, other.lo)
        hi = max(self.hi, other.hi)
        return all(self.colour_at(z) == other.colour_at(z) for z in range(lo, hi + 1))

    def check_bijection(self):
        f = self.forward - self.lo
        return np.array_equal(self.inverse[f] - self.lo, np.arange(f.size))


class SwapSequence:
    """Ordered list of swap sites z, each encoding the pair (z, z+1)."""

    def __init__(self, sites):
        self.sites = [int(z) for z in sites]

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def window(self):
        if not self.sites:
            return (0, 0)
        return (min(self.sites), max(self.sites) + 1)


def apply_swap(cfg, z):
    """Apply the swap operator at (z, z+1) in place; swaps iff colour(z) < colour(z+1)."""
    if z < cfg.lo or z + 1 > cfg.hi:
        cfg.extend(min(z, cfg.lo), max(z + 1, cfg.hi))
    i = z - cfg.lo
    a, b = cfg.forward[i], cfg.forward[i + 1]
    if a < b:
        cfg.forward[i], cfg.forward[i + 1] = b, a
        cfg.inverse[a - cfg.lo] = z + 1
        cfg.inverse[b - cfg.lo] = z
    return cfg


def apply_word(word, cfg=None):
    """Apply swaps in list order, starting from the identity by default."""
    sites = list(word)
    if cfg is None:
        lo = min(sites) if sites else 0
        hi = max(sites) + 1 if sites else 0
        cfg = PermutationConfig.identity(lo, hi)
    else:
        cfg = cfg.copy()
    for z in sites:
        apply_swap(cfg, z)
    return cfg


def invert(cfg):
    """Inverse permutation: forward and inverse arrays exchanged."""
    out = cfg.copy()
    out.forward, out.inverse = out.inverse.copy(), out.forward.copy()
    return out


def compose(outer, inner):
    """Permutation composition outer(inner(.)) as a new config."""
    lo = min(outer.lo, inner.lo)
    hi = max(outer.hi, inner.hi)
    fwd = np.array([outer.colour_at(inner.colour_at(z)) for z in range(lo, hi + 1)], dtype=np.int64)
    return PermutationConfig(lo, hi, fwd)


def marginal(cfg, cutoff, lo=None, hi=None):
    """Occupied sites (colour <= cutoff) within [lo, hi], ascending.

    Sites outside the config window carry their own colour, so they are
    occupied exactly when site <= cutoff.
    """
    lo = cfg.lo if lo is None else int(lo)
    hi = cfg.hi if hi is None else int(hi)
    out = []
    for z in range(lo, hi + 1):
        if cfg.colour_at(z) <= cutoff:
            out.append(z)
    return np.array(out, dtype=np.int64)


def simulate_multi(cfg0, admissible, horizon, clocks, window=None):
    """Drive swaps by the clock field over a site window, in time order.

    At every event (z, t) with z in the window and admissible(z, t) true the
    swap operator W_(z,z+1) is applied.  The window defaults to the config
    window; it should be chosen large enough that the colours of interest
    cannot interact with its edges before the horizon.
    """
    cfg = cfg0.copy()
    lo, hi = window if window is not None else (cfg.lo, cfg.hi)
    events = []
    for z in range(lo, hi):
        events.extend((t, z) for t in clocks.site_events(z, horizon))
    events.sort()
    for t, z in events:
        if admissible(z, t):
            apply_swap(cfg, z)
    return cfg


def colour_position_check(word):
    """Deterministic colour-position identity for one swap word.

    True iff applying the word in order to the identity equals the inverse of
    applying the reversed word to the identity.
    """
    forward = apply_word(word)
    reverse = apply_word(list(reversed(list(word))))
    return forward == invert(reverse)


def _transposition_word(a, b):
    """Adjacent-swap expansion of the permutation exchanging a < b.

    First fan: sites b-1 down to a (carries the value at b to a); second fan:
    a+1 up to b-1 (carries the displaced value to b).
    """
    if a == b:
        return []
    if a > b:
        raise ValueError("need a <= b")
    return list(range(b - 1, a - 1, -1)) + list(range(a + 1, b))


def build_ic_permutation(u, n=None):
    """Swap word realizing the initial-condition permutation for positions u.

    u = (u_1 > u_2 > ... > u_n) with u_1 <= 0.  The word, applied to the
    identity, produces a configuration whose colours <= u_n + n - 1 occupy
    exactly the sites {u_n, ..., u_1} on [u_n, inf).  Returns
    (SwapSequence, PermutationConfig).  The realized permutation is an
    involution.
    """
    u = [int(x) for x in u]
    if n is None:
        n = len(u)
    if n > len(u):
        raise ValueError("need at least n positions")
    u = u[:n]
    if any(u[i] <= u[i + 1] for i in range(n - 1)):
        raise ValueError("positions must be strictly decreasing")
    if u[0] > 0:
        raise ValueError("rightmost particle must start at a site <= 0")
    if n == 1:
        cfg = PermutationConfig.identity(u[0] - 1, u[0] + 1)
        return SwapSequence([]), cfg

    def u1(j):  # 1-based access
        return u[j - 1]

    target = u1(n) + n - 1
    k = None
    for cand in range(n - 1):
        if u1(n - cand) < target <= u1(n - cand - 1):
            k = cand
            break
    if k is None:
        raise ValueError("no valid fan index; positions are not strictly decreasing")

    word = []
    for j in range(k + 1):
        if j < k:
            top = u1(n - j - 1) - u1(n - j) - 2
        else:
            top = target - u1(n - k) - 1
        for i in range(top + 1):
            a = u1(n - j) + 1 + i
            label = 1 + u1(n - j) - u1(n) - j + i
            if not 1 <= label <= n:
                raise AssertionError("fan label out of range")
            b = u1(label)
            if a > b:
                raise AssertionError("fan endpoints out of order")
            word.extend(_transposition_word(a, b))
    cfg = apply_word(word) if word else PermutationConfig.identity(u1(n), u1(1) + 1)
    cfg.extend(u1(n) - 1, u1(1) + 1)
    return SwapSequence(word), cfg


def hole_transfer_check(occupied, a, b, x):
    """Exchange a and b via the two transposition fans and check hole motion.

    occupied: boolean occupancy over the sites a..b (single-species; True is a
    particle).  Requires a <= x < b, a hole in {x+1..b} and a particle in
    {a..x}; otherwise returns 'hypothesis_not_met'.  On valid input returns
    True iff (i) the hole count in {a..x} increases by one, (ii) a hole ends
    at a, (iii) a particle ends at b.
    """
    occ = np.asarray(occupied, dtype=bool)
    if occ.size != b - a + 1:
        raise ValueError("occupancy must cover a..b")
    if not a <= x < b:
        raise ValueError("need a <= x < b")
    if not (~occ[x + 1 - a : b - a + 1]).any() or not occ[0 : x - a + 1].any():  # noqa: E203
        return "hypothesis_not_met"
    holes_before = int((~occ[: x - a + 1]).sum())
    cur = occ.copy()
    for z in _transposition_word(a, b):
        i = z - a
        if cur[i] and not cur[i + 1]:
            cur[i], cur[i + 1] = False, True
    holes_after = int((~cur[: x - a + 1]).sum())
    return holes_after == holes_before + 1 and not cur[0] and bool(cur[b - a])


def marginal_consistency_check(n_labels, wall_f, horizon, clocks, slack=24):
    """Pathwise equality of a multi-species marginal and the single-species engine.

    Starts the multi-species process from the packed configuration (identity)
    and suppresses swaps at pairs with z + 1 > f(t); the colours <= 0 marginal
    is compared, at every applied event time, against the step-initial-condition
    single-species simulation with the right-wall constraint, for labels
    1..n_labels.  Both read the same clock field.  Returns True on exact
    pathwise agreement.
    """
    from . import dynamics
    from .walls import WallSpec

    if wall_f is None:
        wall = WallSpec.none()
        reach = int(horizon + 12 * np.sqrt(horizon + 1) + slack)
    else:
        wall = WallSpec.right_wall(wall_f)
        reach = int(np.floor(wall_f(horizon))) + 2
    step_ic = -np.arange(n_labels, dtype=np.int64)
    traj = dynamics.simulate(step_ic, wall, horizon, clocks)

    lo = -(n_labels - 1) - slack
    hi = reach + slack
    cfg = PermutationConfig.identity(lo, hi)
    events = []
    for z in range(lo, hi):
        events.extend((t, z) for t in clocks.site_events(z, horizon))
    events.sort()
    for t, z in events:
        if wall_f is not None and z + 1 > wall_f(t):
            continue
        apply_swap(cfg, z)
        occ_sites = marginal(cfg, 0, lo, hi)
        tops = occ_sites[-n_labels:][::-1]  # labels 1..n are the n rightmost
        for lab in range(1, n_labels + 1):
            if traj.position_at(lab, t) != tops[lab - 1]:
                return False
    finals = traj.final_positions()
    if finals.max() >= hi - 1:
        raise RuntimeError("window too small for an exact comparison")
    return True
