"""Nondecreasing cadlag piecewise-linear wall functions and wall modes."""

import math

import numpy as np

__all__ = ["PiecewiseFn", "WallSpec", "reference_wall"]


class PiecewiseFn:
    """Nondecreasing, right-continuous, piecewise-linear function on [0, inf).

    Stored as knots t_0=0 < t_1 < ... with f(t) = value_i + slope_i*(t - t_i)
    on [t_i, t_{i+1}); upward jumps are allowed at the knots (value_i may
    exceed the left limit of the previous piece).  The last piece extends to
    infinity.
    """

    def __init__(self, knots, values, slopes):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if knots.ndim != 1 or knots.shape != values.shape or knots.shape != slopes.shape:
            raise ValueError("knots, values, slopes must be 1-d arrays of equal length")
        if len(knots) == 0 or knots[0] != 0.0:
            raise ValueError("first knot must be t=0")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(slopes < 0):
            raise ValueError("function must be nondecreasing: negative slope")
        left = values[:-1] + slopes[:-1] * np.diff(knots)
        if np.any(values[1:] < left - 1e-12):
            raise ValueError("function must be nondecreasing: downward jump at a knot")
        self.knots = knots
        self.values = values
        self.slopes = slopes

    @classmethod
    def constant(cls, c):
        return cls([0.0], [float(c)], [0.0])

    @classmethod
    def from_breakpoints(cls, points):
        """Build from config-style breakpoints [(t, value, jump?), ...].

        The (t, value) pairs are nodes of a continuous piecewise-linear base
        path; the optional third entry adds an upward jump of that size at t,
        cumulatively: f(t) = interp(t) + sum of jumps at times <= t.
        """
        pts = [(float(p[0]), float(p[1]), float(p[2]) if len(p) > 2 else 0.0) for p in points]
        pts.sort(key=lambda p: p[0])
        if not pts or pts[0][0] != 0.0:
            raise ValueError("breakpoints must start at t=0")
        knots, values, slopes = [], [], []
        cum_jump = 0.0
        for i, (t, v, j) in enumerate(pts):
            if j < 0:
                raise ValueError("jumps must be nonnegative")
            cum_jump += j
            if i + 1 < len(pts):
                t2, v2, _ = pts[i + 1]
                slope = (v2 - v) / (t2 - t)
            else:
                slope = 0.0
            knots.append(t)
            values.append(v + cum_jump)
            slopes.append(slope)
        return cls(knots, values, slopes)

    def __call__(self, t):
        """Cadlag evaluation f(t); domain error for t < 0."""
        if t < 0:
            raise ValueError("wall functions are defined on t >= 0")
        i = int(np.searchsorted(self.knots, t, side="right")) - 1
        return float(self.values[i] + self.slopes[i] * (t - self.knots[i]))

    def left_limit(self, t):
        """lim_{u -> t-} f(u); equals f(0) at t=0."""
        if t <= 0:
            return self(0.0)
        i = int(np.searchsorted(self.knots, t, side="left")) - 1
        return float(self.values[i] + self.slopes[i] * (t - self.knots[i]))

    def breakpoints(self):
        return [float(t) for t in self.knots]

    def to_breakpoint_arrays(self):
        """(knots, values, slopes) float64 arrays for the jitted kernels."""
        return self.knots, self.values, self.slopes


# wall-mode codes shared with the jitted engine
MODE_NONE = 0
MODE_RIGHT_WALL = 1
MODE_MIN_SITE = 2
MODE_MIN_SITE_REVERSED = 3


class WallSpec:
    """Wall constraint applied to a simulation.

    none:       unconstrained (wall at +inf).
    right_wall: particle 1 may move z -> z+1 only if z+1 <= f(t); requires
                f(0) = 0 so the step-like rightmost particle starts admissibly.
    min_site:   any particle may jump from z only if z >= m(t).  The threshold
                is either given directly, or derived from a forward wall f via
                m(t) = shift + 1 - f(T - t) (the time-reversed suppression used
                when checking the finite-time wall identity pathwise).
    """

    def __init__(self, mode, f=None, threshold=None, shift=None, total_time=None):
        if mode not in ("none", "right_wall", "min_site"):
            raise ValueError(f"unknown wall mode {mode!r}")
        self.mode = mode
        self.f = f
        self.threshold = threshold
        self.shift = shift
        self.total_time = total_time
        if mode == "right_wall":
            if f is None:
                raise ValueError("right_wall requires a wall function")
            if f(0.0) != 0.0:
                raise ValueError("right_wall requires f(0) = 0")
        if mode == "min_site" and threshold is None and (f is None or shift is None or total_time is None):
            raise ValueError("min_site requires a threshold or (f, shift, total_time)")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def right_wall(cls, f):
        return cls("right_wall", f=f)

    @classmethod
    def min_site(cls, threshold):
        return cls("min_site", threshold=threshold)

    @classmethod
    def reversed_right_wall(cls, f, shift, total_time):
        """Suppression 'jump from z allowed iff z >= shift + 1 - f(T - t)'."""
        return cls("min_site", f=f, shift=int(shift), total_time=float(total_time))

    def kernel_args(self):
        """(mode_code, knots, values, slopes, shift, total_time) for the engine."""
        empty = np.zeros(1, dtype=float)
        if self.mode == "none":
            return MODE_NONE, empty, empty, empty, 0.0, 0.0
        if self.mode == "right_wall":
            k, v, s = self.f.to_breakpoint_arrays()
            return MODE_RIGHT_WALL, k, v, s, 0.0, 0.0
        if self.threshold is not None:
            k, v, s = self.threshold.to_breakpoint_arrays()
            return MODE_MIN_SITE, k, v, s, 0.0, 0.0
        k, v, s = self.f.to_breakpoint_arrays()
        return MODE_MIN_SITE_REVERSED, k, v, s, float(self.shift), float(self.total_time)


def eval_wall(wall, t):
    """Cadlag wall value at time t; +inf when the wall is absent."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if wall is None:
        return math.inf
    if isinstance(wall, WallSpec):
        if wall.mode == "none":
            return math.inf
        return wall.f(t)
    return wall(t)


def reference_wall(T):
    """Two-slope benchmark wall used throughout the verification runs.

    f(t) = (2/3) t on [0, 0.35 T) and (1/15) T + (1/2) t on [0.35 T, T],
    extended with slope 1/2 beyond T.  It is nondecreasing with a single
    upward jump of T/120 at t = 0.35 T and final value f(T) = (17/30) T.
    """
    T = float(T)
    t1 = 0.35 * T
    return PiecewiseFn(
        knots=[0.0, t1],
        values=[0.0, T / 15.0 + 0.5 * t1],
        slopes=[2.0 / 3.0, 0.5],
    )
