"""Estimators, confidence machinery and file emitters for the verification runs."""

import json
import math

import numpy as np
from scipy.stats import norm

__all__ = [
    "ECDF",
    "ecdf",
    "ks_distance",
    "wilson_ci",
    "dkw_band",
    "empirical_density",
    "decoupling_check",
    "write_csv",
    "write_json",
]


class ECDF:
    """Right-continuous empirical distribution function."""

    def __init__(self, samples):
        xs = np.asarray(samples, dtype=float)
        if xs.size == 0:
            raise ValueError("need at least one sample")
        self.xs = np.sort(xs)
        self.n = xs.size

    def __call__(self, x):
        return np.searchsorted(self.xs, x, side="right") / self.n

    def left(self, x):
        """Left limit F(x-)."""
        return np.searchsorted(self.xs, x, side="left") / self.n

    def jump_points(self):
        return np.unique(self.xs)


def ecdf(samples):
    return ECDF(samples)


def ks_distance(F, G):
    """sup |F - G| for two ECDFs, evaluated over the union of jump points."""
    pts = np.union1d(F.jump_points(), G.jump_points())
    d_right = np.abs(F(pts) - G(pts)).max()
    d_left = np.abs(F.left(pts) - G.left(pts)).max()
    return float(max(d_right, d_left))


def wilson_ci(k, n, level=0.99):
    """Wilson score interval for k successes out of n trials."""
    if not 0 <= k <= n or n < 1:
        raise ValueError("need 0 <= k <= n, n >= 1")
    z = norm.ppf(0.5 + level / 2.0)
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


def dkw_band(n, level=0.95):
    """DKW half-width: sup |F_hat - F| <= band with probability >= level."""
    if n < 1:
        raise ValueError("n must be >= 1")
    delta = 1.0 - level
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def empirical_density(finals, bin_width, region):
    """Per-bin occupied fraction averaged over an ensemble of configurations.

    finals: (replicas, labels) final positions.  Bins are aligned to integer
    site boundaries: [lo, lo+w), [lo+w, lo+2w), ... up to hi.  Returns
    (bin_left_edges, density).
    """
    finals = np.atleast_2d(np.asarray(finals))
    if finals.size == 0:
        raise ValueError("empty ensemble")
    if bin_width < 1:
        raise ValueError("bin width must be at least one site")
    lo, hi = int(region[0]), int(region[1])
    nbins = (hi - lo) // int(bin_width)
    edges = lo + np.arange(nbins + 1) * int(bin_width)
    counts, _ = np.histogram(finals.ravel(), bins=edges)
    density = counts / (finals.shape[0] * int(bin_width))
    return edges[:-1], density


def decoupling_check(lhs_samples, comp1_samples, comp2_samples, grid):
    """sup over the grid of |S_lhs - S_1 * S_2| in survival form (S = 1 - F).

    Survival functions are used because the product structure under test is a
    product of exceedance probabilities.
    """
    grid = np.asarray(grid, dtype=float)
    s_l = 1.0 - ECDF(lhs_samples)(grid)
    s_1 = 1.0 - ECDF(comp1_samples)(grid)
    s_2 = 1.0 - ECDF(comp2_samples)(grid)
    return float(np.abs(s_l - s_1 * s_2).max())


# ---------------------------------------------------------------------------
# deterministic file emitters (byte-identical for identical inputs)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_plain(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    return obj
