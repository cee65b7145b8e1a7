import math

import numpy as np
import pytest

from excluwall.walls import PiecewiseFn, WallSpec, eval_wall, reference_wall


def test_reference_wall_values():
    f = reference_wall(1.0)
    assert math.isclose(f(0.35), 0.35 * 0.5 + 1.0 / 15.0)  # cadlag right value at the jump
    assert math.isclose(f(0.35), 29.0 / 120.0)
    assert math.isclose(f(1.0), 17.0 / 30.0)
    assert math.isclose(f(0.2), 2.0 / 15.0)
    assert math.isclose(f.left_limit(0.35), 2.0 / 3.0 * 0.35)
    assert f.left_limit(0.35) < f(0.35)


def test_constant_zero():
    f = PiecewiseFn.constant(0.0)
    for t in (0.0, 0.1, 3.0, 100.0):
        assert f(t) == 0.0


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        PiecewiseFn.constant(1.0)(-0.5)
    with pytest.raises(ValueError):
        eval_wall(WallSpec.none(), -1.0)


def test_monotonicity_enforced():
    with pytest.raises(ValueError):
        PiecewiseFn([0.0, 1.0], [0.0, -0.5], [0.0, 0.0])  # downward jump
    with pytest.raises(ValueError):
        PiecewiseFn([0.0], [0.0], [-0.1])  # negative slope


def test_from_breakpoints_jump_semantics():
    # nodes are the continuous base path; jumps accumulate on top
    f = PiecewiseFn.from_breakpoints([(0.0, 0.0), (1.0, 0.5, 0.25), (2.0, 1.0)])
    assert math.isclose(f(0.5), 0.25)
    assert math.isclose(f.left_limit(1.0), 0.5)
    assert math.isclose(f(1.0), 0.75)
    assert math.isclose(f(2.0), 1.25)
    # the benchmark wall is expressible in this format
    g = PiecewiseFn.from_breakpoints([(0.0, 0.0), (0.35, 7.0 / 30.0, 1.0 / 120.0), (1.0, 7.0 / 30.0 + 0.325)])
    for t in (0.0, 0.2, 0.35, 0.7, 1.0):
        assert math.isclose(g(t), reference_wall(1.0)(t), abs_tol=1e-12)


def test_eval_wall_modes():
    assert eval_wall(WallSpec.none(), 3.0) == math.inf
    assert eval_wall(None, 1.0) == math.inf
    f = reference_wall(2.0)
    assert eval_wall(WallSpec.right_wall(f), 1.0) == f(1.0)


def test_right_wall_requires_zero_start():
    with pytest.raises(ValueError):
        WallSpec.right_wall(PiecewiseFn([0.0], [1.0], [0.0]))


def test_eval_array_consistency():
    f = reference_wall(3.0)
    ts = np.linspace(0.0, 3.0, 17)
    from excluwall.identities import _pw_vec

    assert np.allclose(_pw_vec(f, ts), [f(t) for t in ts])
