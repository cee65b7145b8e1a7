import math

import numpy as np

from excluwall import oracles
from excluwall.clocks import ClockField
from excluwall.dynamics import InitialConditionSpec, Trajectory, materialize_ic, simulate
from excluwall.identities import (
    path_wall_infimum,
    rhs_indicator,
    shift_equivalence_report,
    shifted_step_minimum_check,
    variational_onepoint_report,
    wall_identity_report,
    wall_margin_infimum,
)
from excluwall.sampling import sample_finals
from excluwall.stats import wilson_ci
from excluwall.walls import PiecewiseFn, WallSpec

ZERO = PiecewiseFn.constant(0.0)
STAIR = PiecewiseFn([0.0, 1.0], [0.0, 1.0], [0.0, 0.0])  # one jump to 1 at t=1


def _step_traj(seed, n, T):
    return simulate(-np.arange(n, dtype=np.int64), WallSpec.none(), T, ClockField(seed, T))


# ---------------------------------------------------------------------------
# path functionals


def test_margin_zero_wall_step():
    for seed in range(30):
        traj = _step_traj(seed, 1, 1.0)
        # x_1(0) = 0 sits exactly at s - f(T) for s = 0
        assert wall_margin_infimum(traj, 1, ZERO, 1.0, 0) <= 0
        # and clears s = -1 with a full unit to spare
        assert wall_margin_infimum(traj, 1, ZERO, 1.0, -1) >= 1


def test_margin_constant_path():
    for v, a in ((3, 0.5), (0, 2.0), (-2, 1.0)):
        traj = Trajectory(initial=np.array([v]), jump_times=[np.array([])], horizon=1.0)
        f = PiecewiseFn([0.0], [0.0], [a])  # linear, f(T) = a
        # the moving level s - f(T-t) peaks at t = T where f vanishes
        assert math.isclose(wall_margin_infimum(traj, 1, f, 1.0, 0), v)


def test_margin_infimum_matches_brute_force():
    rng = np.random.default_rng(0)
    f = PiecewiseFn([0.0, 0.6], [0.0, 0.8], [0.5, 1.5])
    for seed in range(40):
        traj = _step_traj(seed, 3, 2.0)
        h = path_wall_infimum(int(traj.initial[2]), traj.jump_times[2], f, 2.0)
        ts = np.union1d(np.linspace(0.0, 2.0, 20001), rng.uniform(0.0, 2.0, 500))
        vals = [traj.position_at(3, t) + f(2.0 - t) for t in ts]
        assert h <= min(vals) + 1e-12
        assert min(vals) - h < 2e-3  # dense grid approaches the infimum


def test_rhs_indicator_trivia():
    for seed in range(50):
        traj = _step_traj(seed, 1, 1.0)
        assert rhs_indicator(traj, [0], ZERO, 1, -1, 1.0) is True
        assert rhs_indicator(traj, [0], ZERO, 1, 0, 1.0) is False


def test_rhs_indicator_no_wall_reduction():
    # with f = +infinity only the final-time minimum clauses remain
    ic = [0, -2, -5]
    for seed in range(40):
        traj = _step_traj(seed, 3, 2.0)
        finals = traj.final_positions()
        for s in (-3, -1, 0):
            want = min(finals[3 - 1 - j] + ic[j] for j in range(3)) > s
            assert rhs_indicator(traj, ic, None, 3, s, 2.0) == want


# ---------------------------------------------------------------------------
# two-sided Monte Carlo


def test_wall_identity_degenerate_levels():
    spec = InitialConditionSpec.step(1)
    reps = wall_identity_report(spec, ZERO, 1, 1.0, [-1, 0], 500, 7)
    assert reps[0]["p_lhs"] == 1.0 and reps[0]["p_rhs"] == 1.0 and reps[0]["verdict"]
    assert reps[1]["p_lhs"] == 0.0 and reps[1]["p_rhs"] == 0.0 and reps[1]["verdict"]


def test_wall_identity_monotone_in_s():
    spec = InitialConditionSpec.half_d_periodic(2, 2.0)
    reps = wall_identity_report(spec, STAIR, 2, 2.0, [-2, -1, 0, 1], 2000, 11)
    p_lhs = [r["p_lhs"] for r in reps]
    p_rhs = [r["p_rhs"] for r in reps]
    assert all(a >= b for a, b in zip(p_lhs, p_lhs[1:]))
    assert all(a >= b for a, b in zip(p_rhs, p_rhs[1:]))


def test_wall_identity_against_oracle_staircase():
    # half-2-periodic data, staircase wall, label 2 at T = 2
    spec = InitialConditionSpec.half_d_periodic(2, 2.0)
    ic = materialize_ic(spec).tolist()
    samples = 20000
    reps = wall_identity_report(spec, STAIR, 2, 2.0, [-1, 0, 1], samples, 23)
    for r in reps:
        s = r["params"]["s"]
        p_ref, err = oracles.wall_final_probability(ic, STAIR, 2.0, 2, s)
        assert err < 1e-6
        assert r["verdict"]
        for side in ("lhs", "rhs"):
            lo, hi = r[f"ci_{side}"]
            assert abs(r[f"p_{side}"] - p_ref) <= 3 * (hi - lo) / 2


def test_wall_identity_random_ic():
    spec = InitialConditionSpec.half_bernoulli(2, 0.5)
    reps = wall_identity_report(spec, STAIR, 2, 1.0, [-2, -1, 0], 20000, 99)
    assert all(r["verdict"] for r in reps)


# ---------------------------------------------------------------------------
# exact minimum coupling


def test_minimum_coupling_single_label():
    for seed in range(20):
        assert shifted_step_minimum_check([-3], 1, 1.5, ClockField(seed, 1.5))


def test_minimum_coupling_step_ic():
    for seed in range(20):
        assert shifted_step_minimum_check([0, -1, -2, -3], 4, 2.0, ClockField(seed, 2.0))


def test_minimum_coupling_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        pos = np.sort(rng.choice(np.arange(-18, 1), size=n, replace=False))[::-1]
        T = float(rng.uniform(0.3, 4.0))
        assert shifted_step_minimum_check(pos, n, T, ClockField(int(rng.integers(0, 2**62)), T))


# ---------------------------------------------------------------------------
# distributional shift equivalence


def test_shift_equivalence_single_process():
    rep = shift_equivalence_report([(1, 0)], 1.0, 0, 3000, 17)
    assert rep["verdict"]


def test_shift_equivalence_equal_shifts():
    rep = shift_equivalence_report([(1, -1), (2, -1)], 1.0, 0, 5000, 19)
    assert rep["verdict"]


def test_shift_equivalence_against_oracle():
    procs = [(1, 0), (2, -2)]
    samples = 20000
    rep = shift_equivalence_report(procs, 1.0, 0, samples, 29)
    assert rep["verdict"]
    p_ref, err = oracles.coupled_min_probability(procs, 1.0, 0)
    assert err < 1e-6
    for side in ("lhs", "rhs"):
        lo, hi = rep[f"ci_{side}"]
        assert abs(rep[f"p_{side}"] - p_ref) <= 3 * (hi - lo) / 2


def test_variational_first_particle_poisson():
    reps = variational_onepoint_report(InitialConditionSpec.step(1), 1, 1.0, [2], 20000, 31)
    r = reps[0]
    target = 1.0 - 2.5 * math.exp(-1.0)
    assert r["verdict"]
    for side in ("lhs", "rhs"):
        lo, hi = wilson_ci(round(r[f"p_{side}"] * r["n_samples"]), r["n_samples"], 0.999)
        assert lo <= target <= hi


def test_variational_step_minimum_at_first_term():
    # for step data the minimum is attained at j = 0 identically
    seeds = np.arange(2000, dtype=np.uint64)
    finals = sample_finals(seeds, -np.arange(4, dtype=np.int64), WallSpec.none(), 2.0)
    shifts = -np.arange(4)[::-1]
    mins = (finals + shifts[None, :]).min(axis=1)
    assert np.array_equal(mins, finals[:, -1])


def test_variational_against_oracle():
    spec = InitialConditionSpec.half_d_periodic(3, 2.0)
    samples = 20000
    reps = variational_onepoint_report(spec, 3, 2.0, [-2], samples, 37)
    r = reps[0]
    assert r["verdict"]
    ic = materialize_ic(spec).tolist()
    p_ref, err = oracles.free_event_probability(ic, 2.0, lambda pos: pos[:, 2] > -2)
    assert err < 1e-6
    for side in ("lhs", "rhs"):
        lo, hi = r[f"ci_{side}"]
        assert abs(r[f"p_{side}"] - p_ref) <= 3 * (hi - lo) / 2
