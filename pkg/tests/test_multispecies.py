import numpy as np
import pytest

from excluwall.clocks import ClockField
from excluwall.multispecies import (
    PermutationConfig,
    apply_swap,
    apply_word,
    build_ic_permutation,
    colour_position_check,
    compose,
    hole_transfer_check,
    invert,
    marginal,
    marginal_consistency_check,
    simulate_multi,
)
from excluwall.walls import PiecewiseFn


def test_swap_on_identity():
    cfg = apply_swap(PermutationConfig.identity(-2, 2), 0)
    assert cfg.colour_at(0) == 1 and cfg.colour_at(1) == 0
    assert cfg.check_bijection()


def test_swap_requires_increasing_pair():
    cfg = PermutationConfig(-1, 2, forward=[2, 1, 0, -1])
    # colour 2 at site -1, colour 1 at site 0: no swap since 2 >= 1
    before = cfg.forward.copy()
    apply_swap(cfg, -1)
    assert np.array_equal(cfg.forward, before)


def test_double_swap_is_noop_second_time():
    cfg = apply_swap(PermutationConfig.identity(-2, 2), 0)
    again = apply_swap(cfg.copy(), 0)
    assert again == cfg


def test_swap_auto_extends_window():
    cfg = PermutationConfig.identity(0, 1)
    apply_swap(cfg, 5)
    assert cfg.hi >= 6 and cfg.colour_at(5) == 6 and cfg.colour_at(6) == 5


def test_invert_involution():
    assert invert(PermutationConfig.identity(-3, 3)) == PermutationConfig.identity(-3, 3)
    single = apply_word([0])
    assert invert(single) == single  # a transposition is self-inverse
    rng = np.random.default_rng(3)
    for _ in range(50):
        word = rng.integers(-5, 5, size=rng.integers(0, 10)).tolist()
        cfg = apply_word(word)
        assert invert(invert(cfg)) == cfg
        assert cfg.check_bijection()


def test_marginal_trivia():
    ident = PermutationConfig.identity(-4, 4)
    assert marginal(ident, 0, -4, 4).tolist() == [-4, -3, -2, -1, 0]
    assert marginal(ident, -10, -4, 4).size == 0
    # below the window everything keeps its own colour
    assert marginal(ident, -6, -8, 4).tolist() == [-8, -7, -6]
    swapped = apply_word([0])
    assert marginal(swapped, 0, -3, 3).tolist() == [-3, -2, -1, 1]


def test_simulate_multi_trivia():
    cfg0 = PermutationConfig.identity(-5, 5)
    clocks = ClockField(8, 2.0)
    assert simulate_multi(cfg0, lambda z, t: False, 2.0, clocks) == cfg0
    assert simulate_multi(cfg0, lambda z, t: True, 0.0, clocks) == cfg0


def test_colour_position_symmetry():
    assert colour_position_check([])
    assert colour_position_check([3])
    rng = np.random.default_rng(4)
    for _ in range(1000):
        k = int(rng.integers(0, 13))
        word = rng.integers(-6, 6, size=k).tolist()
        assert colour_position_check(word)


def test_ic_permutation_two_particle_example():
    word, cfg = build_ic_permutation([0, -2])
    assert list(word) == [-1]
    # particles are colours <= u_n + n - 1 = -1: sites -2 and 0, hole at -1
    assert marginal(cfg, -1, -2, 0).tolist() == [-2, 0]
    assert cfg.colour_at(-1) > -1


def test_ic_permutation_step_is_identity():
    for n in (2, 3, 6):
        word, cfg = build_ic_permutation(list(range(0, -n, -1)))
        assert len(word) == 0
        assert cfg == PermutationConfig.identity(cfg.lo, cfg.hi)


def test_ic_permutation_involution_and_marginal():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = int(rng.integers(1, 13))
        pos = np.sort(rng.choice(np.arange(-3 * 12, 1), size=n, replace=False))[::-1]
        word, cfg = build_ic_permutation(pos.tolist())
        ident = PermutationConfig.identity(cfg.lo, cfg.hi)
        assert compose(cfg, cfg) == ident
        cutoff = int(pos[-1]) + n - 1
        assert np.array_equal(marginal(cfg, cutoff, int(pos[-1]), 0), np.sort(pos))
        if len(word):
            # the word applied in either order realizes the same involution
            assert apply_word(list(reversed(list(word)))) == cfg


def test_hole_transfer_core_case():
    # particle at a, hole at b, x = a
    assert hole_transfer_check([True, False], 0, 1, 0) is True


def test_hole_transfer_hypothesis_not_met():
    assert hole_transfer_check([False, True], 0, 1, 0) == "hypothesis_not_met"


def test_hole_transfer_exhaustive_small():
    for width in range(1, 7):
        for bits in range(2 ** (width + 1)):
            occ = [(bits >> i) & 1 == 1 for i in range(width + 1)]
            for x in range(width):
                res = hole_transfer_check(occ, 0, width, x)
                assert res is True or res == "hypothesis_not_met"


def test_marginal_matches_single_species():
    rng = np.random.default_rng(6)
    for trial in range(12):
        n = int(rng.integers(1, 5))
        T = float(rng.uniform(0.5, 3.0))
        clocks = ClockField(int(rng.integers(0, 2**62)), T)
        wall_f = None if trial % 2 == 0 else PiecewiseFn([0.0], [0.0], [0.9])
        assert marginal_consistency_check(n, wall_f, T, clocks)


def test_bad_configs_rejected():
    with pytest.raises(ValueError):
        PermutationConfig(0, 2, forward=[0, 0, 2])
    with pytest.raises(ValueError):
        build_ic_permutation([0, -1, -1])
    with pytest.raises(ValueError):
        build_ic_permutation([2, 0])
