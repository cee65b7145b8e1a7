"""Closed-form large-time formulas and rescaling transforms.

Conventions: alpha in (0,1) is the macroscopic label (tagged particle
alpha*T), xi its macroscopic velocity coefficient (position ~ xi*T), and
d >= 1 the inverse density of half-d-periodic initial data.  Fluctuations
live on the T^(1/3) scale with spatial correlations on T^(2/3); every
rescaler below floors real-valued labels, since O(1) label shifts vanish at
the fluctuation scale.
"""

import math

import numpy as np

__all__ = [
    "ScalingContext",
    "wall_envelope",
    "influence_constants",
    "influence_drift",
    "tagged_constants",
    "periodic_constants",
    "wall_fluctuation_profile",
    "ic_fluctuation_profile",
    "macroscopic_tagged_position",
    "density_profile",
    "shock_densities",
    "classify_reference_wall",
    "rescale_tagged",
    "rescale_fixed_time",
]


def wall_envelope(beta, alpha, xi):
    """Macroscopic level a wall must dominate away from its influence times.

    Piecewise in the backward time fraction beta in [0, 1]:
    xi - sqrt(1-beta)*(sqrt(1-beta) - 2*sqrt(alpha)) below 1-alpha, xi + alpha
    above; the branches agree at beta = 1 - alpha.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if beta < 1.0 - alpha:
        r = math.sqrt(1.0 - beta)
        return xi - r * (r - 2.0 * math.sqrt(alpha))
    return xi + alpha


def influence_constants(alpha, alpha_i):
    """(c1, c2) fluctuation/correlation constants of one wall-influence time.

    c1 = alpha^(-1/6) alpha_i^(1/6) (sqrt(alpha_i) - sqrt(alpha))^(2/3),
    c2 = 2 alpha^(-1/3) alpha_i^(5/6) (sqrt(alpha_i) - sqrt(alpha))^(1/3).
    Degenerate alpha_i == alpha is rejected: both constants vanish and every
    downstream formula divides by c1.
    """
    if not 0.0 < alpha < alpha_i <= 1.0:
        raise ValueError("need 0 < alpha < alpha_i <= 1")
    gap = math.sqrt(alpha_i) - math.sqrt(alpha)
    c1 = alpha ** (-1.0 / 6.0) * alpha_i ** (1.0 / 6.0) * gap ** (2.0 / 3.0)
    c2 = 2.0 * alpha ** (-1.0 / 3.0) * alpha_i ** (5.0 / 6.0) * gap ** (1.0 / 3.0)
    return c1, c2


def influence_drift(alpha, alpha_i, tau, T):
    """Centering mu(tau, T) of the wall around an influence time alpha_i."""
    if not 0.0 < alpha < alpha_i <= 1.0:
        raise ValueError("need 0 < alpha < alpha_i <= 1")
    gap = math.sqrt(alpha_i) - math.sqrt(alpha)
    lead = math.sqrt(alpha_i) * (math.sqrt(alpha_i) - 2.0 * math.sqrt(alpha)) * T
    return lead - 2.0 * tau * alpha ** (-1.0 / 3.0) * alpha_i ** (1.0 / 3.0) * gap ** (4.0 / 3.0) * T ** (2.0 / 3.0)


def tagged_constants(alpha):
    """(c1, c2_hat) for the tagged-particle scale: c1 = (1-sqrt a)^(2/3) a^(-1/6)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    r = math.sqrt(alpha)
    return (1.0 - r) ** (2.0 / 3.0) * alpha ** (-1.0 / 6.0), 2.0 * alpha ** (2.0 / 3.0) * (1.0 - r) ** (1.0 / 3.0)


def periodic_constants(d):
    """(c1, c2_hat) for density-1/d initial data: c1 = (1-1/d)^(2/3) d^(1/3)."""
    if d <= 1.0:
        raise ValueError("d must exceed 1")
    return (1.0 - 1.0 / d) ** (2.0 / 3.0) * d ** (1.0 / 3.0), 2.0 * d ** (-4.0 / 3.0) * (1.0 - 1.0 / d) ** (1.0 / 3.0)


class ScalingContext:
    """Bundle of (alpha, xi, influence times) with the derived constants."""

    def __init__(self, alpha, xi, influence_times, d=None):
        times = tuple(float(a) for a in influence_times)
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha must lie in (0,1)")
        if any(a <= alpha or a > 1.0 for a in times):
            raise ValueError("influence times must lie in (alpha, 1]")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("influence times must be strictly increasing")
        if d is not None and d < 1.0:
            raise ValueError("d must be >= 1")
        self.alpha = float(alpha)
        self.xi = float(xi)
        self.influence_times = times
        self.d = d
        self.constants = [influence_constants(alpha, a) for a in times]

    def c1(self, i):
        return self.constants[i][0]

    def c2(self, i):
        return self.constants[i][1]


def wall_fluctuation_profile(f, ctx, i, T, tau_grid):
    """Rescaled wall profile g_T around influence time i, on a tau grid.

    Inverts the parametrization f(T-t) = xi*T - mu(tau,T) - c1*(tau^2 -
    g_T(tau))*T^(1/3) with T - t = (1-alpha_i)*T + c2*tau*T^(2/3).  Returns
    (values, margin) where margin = min(g_T - tau^2/2); a wall satisfying the
    quadratic-growth lower bound keeps the margin bounded below.
    """
    c1, c2 = ctx.constants[i]
    alpha_i = ctx.influence_times[i]
    tau_grid = np.asarray(tau_grid, dtype=float)
    out = np.empty(tau_grid.size)
    for k, tau in enumerate(tau_grid):
        u = (1.0 - alpha_i) * T + c2 * tau * T ** (2.0 / 3.0)
        if u < 0:
            u = 0.0
        fu = f(u)
        mu = influence_drift(ctx.alpha, alpha_i, tau, T)
        out[k] = tau * tau - (ctx.xi * T - mu - fu) / (c1 * T ** (1.0 / 3.0))
    margin = float(np.min(out - 0.5 * tau_grid**2))
    return out, margin


def ic_fluctuation_profile(positions, T, tau_grid, alpha, d, mode="wall_boundary"):
    """Diffusively rescaled initial-condition profile y_T on a tau grid.

    mode 'wall_boundary': label 1 + c2_hat*tau*T^(2/3) with the tagged-scale
    constants of alpha (tau >= 0).  mode 'free_characteristic': label
    (alpha - d^-2)*T + c2_hat*tau*T^(2/3) with the density-d constants
    (two-sided tau).  Labels are floored and clamped to >= 1; a grid point
    whose label exceeds the materialized positions raises.
    """
    positions = np.asarray(positions)
    tau_grid = np.asarray(tau_grid, dtype=float)
    if mode == "wall_boundary":
        c1, c2h = tagged_constants(alpha)
        raw = 1.0 + c2h * tau_grid * T ** (2.0 / 3.0)
        offset = d * c2h * tau_grid * T ** (2.0 / 3.0)
    elif mode == "free_characteristic":
        c1, c2h = periodic_constants(d)
        base = (alpha - d**-2) * T
        raw = base + c2h * tau_grid * T ** (2.0 / 3.0)
        offset = d * raw
    else:
        raise ValueError(f"unknown mode {mode!r}")
    labels = np.maximum(np.floor(raw).astype(np.int64), 1)
    if labels.max() > positions.size:
        raise ValueError("grid needs more materialized labels than provided")
    return (positions[labels - 1] + offset) / (c1 * T ** (1.0 / 3.0))


def macroscopic_tagged_position(alpha, d):
    """Velocity coefficient of particle alpha*T under half-d-periodic data."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    if d < 1.0:
        raise ValueError("d must be >= 1")
    if alpha <= d**-2:
        return 1.0 - 2.0 * math.sqrt(alpha)
    return 1.0 - 1.0 / d - d * alpha


def density_profile(x, T, d):
    """Hydrodynamic density at position x, time T, half-d-periodic data."""
    if T <= 0:
        raise ValueError("T must be positive")
    if x <= (1.0 - 2.0 / d) * T:
        return 1.0 / d
    if x >= T:
        return 0.0
    return 0.5 * (1.0 - x / T)


def shock_densities(alpha, alpha_0, alpha_n):
    """(right density, left-density bound) at a wall-influenced tagged particle.

    The density just right of the particle is sqrt(alpha/alpha_0); the
    density just left is bounded by sqrt(alpha/alpha_n).
    """
    if not (0.0 < alpha <= alpha_0 <= alpha_n <= 1.0):
        raise ValueError("need 0 < alpha <= alpha_0 <= alpha_n <= 1")
    return math.sqrt(alpha / alpha_0), math.sqrt(alpha / alpha_n)


def rescale_tagged(x, xi, T):
    """Fluctuation variable S with x = xi*T - S*T^(1/3)."""
    if T <= 0:
        raise ValueError("T must be positive")
    return (xi * T - np.asarray(x, dtype=float)) / T ** (1.0 / 3.0)


def rescale_fixed_time(finals, alpha, T, tau_grid):
    """Rescaled fixed-time label process X_T on a tau grid.

    finals: positions by label (1-d, or replicas x labels).  X_T(tau) uses
    label floor(alpha*T + c2_hat*tau*T^(2/3)) and centering (1-2 sqrt a)T -
    c2_hat*tau*T^(2/3)/sqrt(a), divided by -c1*T^(1/3).
    """
    finals = np.asarray(finals)
    one_d = finals.ndim == 1
    if one_d:
        finals = finals[None, :]
    c1, c2h = tagged_constants(alpha)
    tau_grid = np.asarray(tau_grid, dtype=float)
    labels = np.floor(alpha * T + c2h * tau_grid * T ** (2.0 / 3.0)).astype(np.int64)
    if labels.min() < 1 or labels.max() > finals.shape[1]:
        raise ValueError("tau grid maps to labels outside the simulated range")
    center = (1.0 - 2.0 * math.sqrt(alpha)) * T - c2h * tau_grid * T ** (2.0 / 3.0) / math.sqrt(alpha)
    out = (finals[:, labels - 1] - center) / (-c1 * T ** (1.0 / 3.0))
    return out[0] if one_d else out


# ---------------------------------------------------------------------------
# benchmark-wall regime classification


def _c1_of(alpha):
    return (1.0 - math.sqrt(alpha)) ** (2.0 / 3.0) * alpha ** (-1.0 / 6.0)


def classify_reference_wall(d, alpha):
    """Limit-law regime for the two-slope benchmark wall and density-1/d data.

    Tabulated for d = 1 (step data), d = 2, d = 3 and real d >= 4; other d
    raise 'not tabulated'.  Returns a record with the velocity coefficient
    xi, the law label ('GOE', 'GUE', 'Airy2to1' or a product), the scale
    factors multiplying S inside each factor, the macroscopic wall-influence
    times, and the free-process coefficient g_alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0,1)")
    d = float(d)
    g_alpha = macroscopic_tagged_position(alpha, d) if d > 1 else 1.0 - 2.0 * math.sqrt(alpha)

    def rec(xi, law, scales, times):
        return {
            "d": d,
            "alpha": alpha,
            "xi": xi,
            "law": law,
            "scales": tuple(scales),
            "influence_times": tuple(times),
            "g_alpha": g_alpha,
        }

    goe_early = (2.0 / alpha) ** (1.0 / 3.0)  # influence at 4*alpha, slope-1/2 piece
    goe_late = (3.0 * alpha) ** (-1.0 / 3.0)  # influence at 9*alpha, slope-2/3 piece

    if d == 1.0:
        if alpha < 0.1:
            return rec(17.0 / 30.0 - 2.0 * alpha, "GOE", [goe_early], [4.0 * alpha])
        if alpha == 0.1:
            return rec(11.0 / 30.0, "GOE*GOE", [goe_early, goe_late], [0.4, 0.9])
        if alpha < 1.0 / 9.0:
            return rec(2.0 / 3.0 - 3.0 * alpha, "GOE", [goe_late], [9.0 * alpha])
        if alpha == 1.0 / 9.0:
            return rec(1.0 / 3.0, "Airy2to1", [2.0 ** (-2.0 / 3.0) * 3.0 ** (1.0 / 3.0)], [1.0])
        return rec(1.0 - 2.0 * math.sqrt(alpha), "GUE", [1.0 / _c1_of(alpha)], [])

    if d == 2.0:
        if alpha <= 1.0 / 9.0:
            return classify_reference_wall(1.0, alpha) | {"d": d, "g_alpha": g_alpha}
        if alpha < 0.25:
            return rec(g_alpha, "GUE", [1.0 / _c1_of(alpha)], [])
        if alpha == 0.25:
            return rec(g_alpha, "Airy2to1", [1.0 / _c1_of(alpha)], [])
        return rec(g_alpha, "GOE", [2.0 ** (2.0 / 3.0) / periodic_constants(d)[0]], [])

    if d == 3.0:
        if alpha < 1.0 / 9.0:
            return classify_reference_wall(1.0, alpha) | {"d": d, "g_alpha": g_alpha}
        if alpha == 1.0 / 9.0:
            return rec(1.0 / 3.0, "GOE", [3.0 ** (1.0 / 3.0)], [1.0])
        return rec(g_alpha, "GOE", [2.0 ** (2.0 / 3.0) / periodic_constants(d)[0]], [])

    if d >= 4.0:
        alpha_d = (13.0 * d - 30.0) / (30.0 * (d - 2.0) * d)
        goe_ic = 2.0 ** (2.0 / 3.0) / periodic_constants(d)[0]
        if alpha < alpha_d:
            return rec(17.0 / 30.0 - 2.0 * alpha, "GOE", [goe_early], [4.0 * alpha])
        if alpha == alpha_d:
            return rec(17.0 / 30.0 - 2.0 * alpha, "GOE*GOE", [goe_early, goe_ic], [4.0 * alpha])
        return rec(g_alpha, "GOE", [goe_ic], [])

    raise ValueError(f"not tabulated for d={d}")
