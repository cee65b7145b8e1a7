"""Finite-time identity verifiers.

Three families of checks on the event-driven engine:

* the moving-wall identity: the law of the n-th particle under a wall f and
  general initial data equals, at any integer level s, the probability that a
  free step-initial-condition process stays above the reversed wall along its
  whole path and clears shifted levels at the final time.  LHS and RHS are
  estimated from independent randomness and compared through Wilson
  confidence intervals (the identity equates distributions, not paths).

* the pathwise minimum coupling: under shared clocks, a general-initial-data
  process equals, almost surely and exactly, the label-wise minimum of
  shifted step processes.  Verified with zero tolerance.

* distributional shift equivalence: the minimum of basic-coupled shifted step
  processes has the same law as a single step process with the shifts added
  afterwards; and the no-wall variational formula for one-point laws.
"""

import math

import numpy as np

from . import stats
from .dynamics import InitialConditionSpec, materialize_ic, simulate, simulate_finals_batch
from .sampling import sample_finals, sample_tracked
from .walls import WallSpec

__all__ = [
    "path_wall_infimum",
    "wall_margin_infimum",
    "rhs_indicator",
    "wall_identity_report",
    "shifted_step_minimum_check",
    "shift_equivalence_report",
    "variational_onepoint_report",
    "decoupling_ensembles",
]


# ---------------------------------------------------------------------------
# exact path functionals


def path_wall_infimum(x0, jump_times, f, T):
    """inf over t in [0, T] of x(t) + f(T - t) for a single cadlag jump path.

    x(t) = x0 + #{jumps <= t}.  The map t -> f(T - t) is nonincreasing, so the
    infimum is attained on the critical set {0, T}, the left limits at the
    jump times of x, and the images T - u of the breakpoints of f; on each
    constancy interval of x the supremum-over-interval convention for the
    moving level corresponds to evaluating f at the reversed endpoint.
    """
    if f is None:
        return math.inf
    jump_times = np.asarray(jump_times, dtype=float)
    fixed = {0.0, float(T)}
    fixed.update(float(T) - u for u in f.breakpoints() if 0.0 <= float(T) - u <= float(T))
    best = math.inf
    for t in sorted(fixed):
        x_now = x0 + int(np.searchsorted(jump_times, t, side="right"))
        best = min(best, x_now + f(T - t))
    for k, t in enumerate(jump_times):
        if t > T:
            break
        best = min(best, x0 + k + f(T - t))
    return best


def wall_margin_infimum(traj, n, f, T, s):
    """inf_t [x_n(t) - (s - f(T-t))].

    The path clause of the identity holds iff this margin is >= 1, i.e.
    x_n(t) + f(T-t) >= s + 1 for all t.  For integer-valued walls this
    coincides with margin > 0; for fractional walls the >= s+1 form is the
    exact one (it mirrors the site suppression 'jumps from z allowed iff
    z >= s+1-f(T-t)' that the identity couples against).
    """
    if traj.horizon < T:
        raise ValueError("trajectory horizon shorter than T")
    jumps = traj.jump_times[n - 1]
    return path_wall_infimum(int(traj.initial[n - 1]), jumps, f, T) - s


def rhs_indicator(traj_step, ic, f, n, s, T):
    """Step-process event of the wall identity for one realization."""
    s = math.floor(s)
    if wall_margin_infimum(traj_step, n, f, T, s) < 1:
        return False
    for j in range(n):
        if traj_step.position_at(n - j, T) <= s - int(ic[j]):
            return False
    return True


# ---------------------------------------------------------------------------
# batched statistics


def _eval_f_array(f, ts):
    return np.array([f(t) for t in ts], dtype=float)


def _path_infimum_batch(x0, times, counts, f, T):
    """Vectorized path_wall_infimum over replicas (one tracked label)."""
    nrep, cap = times.shape
    pad = times.copy()
    idx = np.arange(cap)[None, :] >= counts[:, None]
    pad[idx] = np.inf
    best = np.full(nrep, np.inf)
    fixed = sorted({0.0, float(T)} | {float(T) - u for u in f.breakpoints() if 0.0 <= float(T) - u <= float(T)})
    for t in fixed:
        cnt = (pad <= t).sum(axis=1)
        np.minimum(best, x0 + cnt + f(T - t), out=best)
    f_at = np.where(np.isfinite(pad), _pw_vec(f, np.maximum(T - pad, 0.0)), np.inf)
    cand = x0 + np.arange(cap)[None, :] + f_at
    cand[pad > T] = np.inf
    np.minimum(best, cand.min(axis=1), out=best)
    return best


def _pw_vec(f, ts):
    i = np.clip(np.searchsorted(f.knots, ts, side="right") - 1, 0, len(f.knots) - 1)
    return f.values[i] + f.slopes[i] * (ts - f.knots[i])


def _materialize_rows(ic_spec, samples, rng):
    if not ic_spec.random:
        row = materialize_ic(ic_spec)
        return np.broadcast_to(row, (samples, row.size)).copy()
    return np.stack([materialize_ic(ic_spec, rng) for _ in range(samples)])


def _report(params, k_lhs, k_rhs, samples, level=0.99):
    p_lhs = k_lhs / samples
    p_rhs = k_rhs / samples
    ci_lhs = stats.wilson_ci(k_lhs, samples, level)
    ci_rhs = stats.wilson_ci(k_rhs, samples, level)
    verdict = ci_lhs[0] <= ci_rhs[1] and ci_rhs[0] <= ci_lhs[1]
    return {
        "params": params,
        "p_lhs": p_lhs,
        "ci_lhs": list(ci_lhs),
        "p_rhs": p_rhs,
        "ci_rhs": list(ci_rhs),
        "n_samples": samples,
        "verdict": bool(verdict),
    }


def wall_identity_report(ic_spec, f, n, T, s_values, samples, base_seed, level=0.99):
    """Two-sided Monte Carlo check of the moving-wall identity.

    LHS: the wall-constrained process with initial data ic_spec, final
    position of label n.  RHS: an independent step process (fresh seeds),
    path clause against the reversed wall plus the shifted final-time clauses
    with an independently sampled initial condition per replica.  Returns one
    report per s, each with Wilson confidence intervals at `level` and an
    interval-overlap verdict.
    """
    if samples < 100:
        raise ValueError("need at least 100 samples")
    if n < 1:
        raise ValueError("label must be >= 1")
    s_values = [math.floor(s) for s in s_values]
    ic_spec = _as_spec(ic_spec, n)

    lhs_seeds = np.arange(samples, dtype=np.uint64) + np.uint64(base_seed)
    rhs_seeds = lhs_seeds + np.uint64(samples)
    rng_lhs = np.random.default_rng([int(base_seed) & 0xFFFFFFFF, 0x1C, 1])
    rng_rhs = np.random.default_rng([int(base_seed) & 0xFFFFFFFF, 0x1C, 2])

    lhs_rows = _materialize_rows(ic_spec, samples, rng_lhs)[:, :n]
    finals_lhs = sample_finals(lhs_seeds, lhs_rows, WallSpec.right_wall(f), T)[:, n - 1]

    step = -np.arange(n, dtype=np.int64)
    finals, times, counts = sample_tracked(rhs_seeds, step, WallSpec.none(), T, label=n)
    h_inf = _path_infimum_batch(int(step[n - 1]), times, counts, f, T)
    rhs_rows = _materialize_rows(ic_spec, samples, rng_rhs)[:, :n] if ic_spec.random else lhs_rows
    # min_j x_{n-j}(T) + u_{1+j}: reverse the label order to align with j
    m2 = (finals[:, ::-1] + rhs_rows).min(axis=1)

    reports = []
    for s in s_values:
        k_lhs = int((finals_lhs > s).sum())
        k_rhs = int(((h_inf >= s + 1) & (m2 > s)).sum())
        params = {
            "ic": _spec_params(ic_spec),
            "wall": [list(map(float, p)) for p in zip(f.knots, f.values, f.slopes)],
            "n": n,
            "T": float(T),
            "s": int(s),
        }
        reports.append(_report(params, k_lhs, k_rhs, samples, level))
    return reports


def _as_spec(ic_spec, n):
    if isinstance(ic_spec, InitialConditionSpec):
        if ic_spec.n_max < n:
            raise ValueError("spec materializes fewer labels than requested")
        return ic_spec
    return InitialConditionSpec.explicit(ic_spec)


def _spec_params(spec):
    out = {"kind": spec.kind, "n_max": spec.n_max}
    if spec.kind == "step":
        out["offset"] = spec.offset
    elif spec.kind == "explicit":
        out["positions"] = list(spec.positions)
    elif spec.kind == "half_d_periodic":
        out["d"] = spec.d
    else:
        out["rho"] = spec.rho
    return out


# ---------------------------------------------------------------------------
# exact pathwise coupling


def shifted_step_minimum_check(ic, n, T, clocks):
    """Exact pathwise identity x~_n(T) = min_j x^(step at ic_j)_{n-j}(T).

    All processes read the same clock field, so the identity must hold
    realization by realization with zero tolerance.  Returns True on exact
    equality at the horizon.
    """
    ic = np.asarray(ic, dtype=np.int64)
    if n > ic.size:
        raise ValueError("need at least n initial positions")
    traj = simulate(ic[:n], WallSpec.none(), T, clocks)
    lhs = int(traj.final_positions()[n - 1])
    best = None
    for j in range(n):
        step = int(ic[j]) - np.arange(n - j, dtype=np.int64)
        tj = simulate(step, WallSpec.none(), T, clocks)
        val = int(tj.final_positions()[n - j - 1])
        best = val if best is None else min(best, val)
    return lhs == best


def shift_equivalence_report(processes, T, s, samples, base_seed, level=0.99):
    """Distributional check: coupled shifted-step minima vs a single process.

    processes: list of (n, Z) pairs.  LHS couples one shifted step process
    per pair through shared seeds and takes the minimum tagged position; RHS
    runs a single step process at the origin and adds the shifts afterwards.
    """
    s = math.floor(s)
    procs = [(int(n), int(Z)) for n, Z in processes]
    lhs_seeds = np.arange(samples, dtype=np.uint64) + np.uint64(base_seed)
    rhs_seeds = lhs_seeds + np.uint64(samples)

    mins = np.full(samples, np.iinfo(np.int64).max, dtype=np.int64)
    for n, Z in procs:
        step = Z - np.arange(n, dtype=np.int64)
        finals = simulate_finals_batch(lhs_seeds, step, WallSpec.none(), T)
        np.minimum(mins, finals[:, n - 1], out=mins)
    k_lhs = int((mins <= s).sum())

    n_top = max(n for n, _ in procs)
    step = -np.arange(n_top, dtype=np.int64)
    finals = simulate_finals_batch(rhs_seeds, step, WallSpec.none(), T)
    shifted = np.stack([finals[:, n - 1] + Z for n, Z in procs], axis=1)
    k_rhs = int((shifted.min(axis=1) <= s).sum())

    params = {"processes": procs, "T": float(T), "s": int(s)}
    return _report(params, k_lhs, k_rhs, samples, level)


def variational_onepoint_report(ic_spec, n, T, s_values, samples, base_seed, level=0.99):
    """No-wall variational formula: direct law vs step-process minimum."""
    s_values = [math.floor(s) for s in s_values]
    ic_spec = _as_spec(ic_spec, n)
    lhs_seeds = np.arange(samples, dtype=np.uint64) + np.uint64(base_seed)
    rhs_seeds = lhs_seeds + np.uint64(samples)
    rng_lhs = np.random.default_rng([int(base_seed) & 0xFFFFFFFF, 0x2A, 1])
    rng_rhs = np.random.default_rng([int(base_seed) & 0xFFFFFFFF, 0x2A, 2])

    lhs_rows = _materialize_rows(ic_spec, samples, rng_lhs)[:, :n]
    finals_lhs = sample_finals(lhs_seeds, lhs_rows, WallSpec.none(), T)[:, n - 1]

    step = -np.arange(n, dtype=np.int64)
    finals = sample_finals(rhs_seeds, step, WallSpec.none(), T)
    rhs_rows = _materialize_rows(ic_spec, samples, rng_rhs)[:, :n] if ic_spec.random else lhs_rows
    m = (finals[:, ::-1] + rhs_rows).min(axis=1)

    reports = []
    for s in s_values:
        params = {"ic": _spec_params(ic_spec), "n": n, "T": float(T), "s": int(s)}
        reports.append(_report(params, int((finals_lhs > s).sum()), int((m > s).sum()), samples, level))
    return reports


def decoupling_ensembles(ic_spec, f, n, T, samples, base_seed):
    """Three independent sample sets probing the product structure at the
    boundary of the wall-influenced region.

    Returns (lhs, wall_clause, free), all in position units at the horizon:
    lhs is the wall-constrained tagged position; wall_clause is the shifted
    path statistic inf_t [x_n(t) + f(T-t)] - 1 of an independent step process
    (the wall factor of the identity survives level theta exactly when the
    unshifted statistic is >= theta + 1); free is the tagged position without
    a wall.  The product hypothesis is then P(lhs > theta) ~ P(wall_clause >
    theta) * P(free > theta) on a grid avoiding the statistic's atoms.
    """
    ic_spec = _as_spec(ic_spec, n)
    row = materialize_ic(ic_spec)[:n]
    step = -np.arange(n, dtype=np.int64)
    seeds = np.arange(samples, dtype=np.uint64) + np.uint64(base_seed)

    lhs = sample_finals(seeds, row, WallSpec.right_wall(f), T)[:, n - 1]
    _, times, counts = sample_tracked(seeds + np.uint64(samples), step, WallSpec.none(), T, label=n)
    wall_clause = _path_infimum_batch(int(step[n - 1]), times, counts, f, T) - 1.0
    free = sample_finals(seeds + np.uint64(2 * samples), row, WallSpec.none(), T)[:, n - 1]
    return lhs, wall_clause, free
