import math

import numpy as np
import pytest

from excluwall.asymptotics import (
    ScalingContext,
    classify_reference_wall,
    density_profile,
    ic_fluctuation_profile,
    influence_constants,
    influence_drift,
    macroscopic_tagged_position,
    periodic_constants,
    rescale_fixed_time,
    rescale_tagged,
    shock_densities,
    tagged_constants,
    wall_envelope,
    wall_fluctuation_profile,
)
from excluwall.dynamics import InitialConditionSpec, materialize_ic
from excluwall.walls import PiecewiseFn, reference_wall


def test_wall_envelope_branches():
    assert math.isclose(wall_envelope(1.0, 0.25, 0.3), 0.55)
    # branch point continuity at beta = 1 - alpha
    a, xi = 0.25, 0.1
    left = wall_envelope(1.0 - a - 1e-12, a, xi)
    assert math.isclose(left, xi + a, abs_tol=1e-6)
    assert math.isclose(wall_envelope(0.0, 0.25, 0.0), 0.0)
    with pytest.raises(ValueError):
        wall_envelope(1.2, 0.5, 0.0)


def test_influence_constants_values():
    c1, c2 = influence_constants(0.25, 1.0)
    assert math.isclose(c1, 2.0 ** (-1.0 / 3.0))
    # at alpha_i = 1 the influence constant reduces to the tagged-particle one
    assert math.isclose(c1, tagged_constants(0.25)[0])
    assert math.isclose(c1, (1 - math.sqrt(0.25)) ** (2 / 3) / 0.25 ** (1 / 6))
    assert c2 > 0
    with pytest.raises(ValueError):
        influence_constants(0.3, 0.3)


def test_influence_drift_at_zero():
    for a, ai in ((0.1, 0.5), (0.25, 1.0)):
        mu = influence_drift(a, ai, 0.0, 100.0)
        assert math.isclose(mu, math.sqrt(ai) * (math.sqrt(ai) - 2 * math.sqrt(a)) * 100.0)


def test_tagged_and_periodic_constants_agree():
    # at alpha = d^-2 the tagged-scale constants match the density-d ones
    d = 2.0
    a = d**-2
    c1a, c2a = tagged_constants(a)
    c1d, c2d = periodic_constants(d)
    assert math.isclose(c1a, c1d)
    assert math.isclose(c2a, c2d)


def test_scaling_context_validation():
    ctx = ScalingContext(0.1, 11.0 / 30.0, [0.4, 0.9])
    assert ctx.c1(0) > 0 and ctx.c2(1) > 0
    with pytest.raises(ValueError):
        ScalingContext(0.1, 0.0, [0.1])  # degenerate alpha_i = alpha
    with pytest.raises(ValueError):
        ScalingContext(0.1, 0.0, [0.9, 0.4])


def test_wall_profile_inversion():
    # build f so that the rescaled profile is identically zero, then recover it
    ctx = ScalingContext(0.1, 11.0 / 30.0, [0.4])
    T = 1.0e6
    c1, c2 = ctx.constants[0]
    taus = np.linspace(-2.0, 2.0, 41)
    us = (1.0 - 0.4) * T + c2 * taus * T ** (2.0 / 3.0)
    fs = ctx.xi * T - np.array([influence_drift(0.1, 0.4, t, T) for t in taus]) - c1 * taus**2 * T ** (1.0 / 3.0)
    order = np.argsort(us)
    knots = us[order]
    vals = fs[order]
    slopes = np.append(np.diff(vals) / np.diff(knots), 0.0)
    f = PiecewiseFn(np.concatenate([[0.0], knots]), np.concatenate([[vals[0]], vals]), np.concatenate([[0.0], slopes]))
    g, margin = wall_fluctuation_profile(f, ctx, 0, T, taus)
    assert np.abs(g).max() < 1e-6
    # adding delta * c1 * T^(1/3) shifts the profile by +delta uniformly
    delta = 0.37
    f2 = PiecewiseFn(f.knots, f.values + delta * c1 * T ** (1.0 / 3.0), f.slopes)
    g2, _ = wall_fluctuation_profile(f2, ctx, 0, T, taus)
    assert np.allclose(g2 - g, -delta, atol=1e-6)


def test_wall_profile_reference_wall_growth():
    # benchmark wall at its early influence time: finite at 0, quadratic growth
    T = 1.0e6
    ctx = ScalingContext(0.1, 11.0 / 30.0, [0.4, 0.9])
    taus = np.linspace(-6.0, 6.0, 121)
    g, margin = wall_fluctuation_profile(reference_wall(T), ctx, 0, T, taus)
    at0 = g[np.abs(taus).argmin()]
    assert abs(at0) < 1.0
    assert g[0] >= 0.5 * taus[0] ** 2 - 1.0 and g[-1] >= 0.5 * taus[-1] ** 2 - 1.0
    assert margin > -1.0


def test_ic_profile_periodic_floor_only():
    T = 1000.0
    for d in (1.0, 2.0):
        pos = materialize_ic(InitialConditionSpec.half_d_periodic(4000, d))
        taus = np.linspace(0.0, 2.0, 21)
        y = ic_fluctuation_profile(pos, T, taus, alpha=0.25, d=d, mode="wall_boundary")
        c1, _ = tagged_constants(0.25)
        assert np.all(y >= -1e-12)
        assert np.abs(y).max() <= d / (c1 * T ** (1.0 / 3.0)) + 1e-12


def test_ic_profile_at_zero():
    pos = materialize_ic(InitialConditionSpec.half_d_periodic(100, 2.0))
    y = ic_fluctuation_profile(pos, 500.0, [0.0], alpha=0.25, d=2.0, mode="wall_boundary")
    assert y[0] == 0.0


def test_ic_profile_bernoulli_brownian_variance():
    # half-Bernoulli gaps make y_T diffusive with variance 2*tau
    alpha = 0.25
    rho = math.sqrt(alpha)
    T = 2000.0
    taus = np.array([0.5, 1.0, 1.5, 2.0])
    rng = np.random.default_rng(8)
    spec = InitialConditionSpec.half_bernoulli(400, rho)
    ys = np.stack(
        [ic_fluctuation_profile(materialize_ic(spec, rng), T, taus, alpha=alpha, d=1 / rho, mode="wall_boundary") for _ in range(3000)]
    )
    var = ys.var(axis=0)
    slope = np.polyfit(taus, var, 1)[0]
    assert abs(slope - 2.0) < 0.25


def test_macroscopic_tagged_position():
    assert macroscopic_tagged_position(0.25, 1.0) == 0.0  # paper formula, 1 - 2 sqrt(alpha)
    assert math.isclose(macroscopic_tagged_position(1.0 / 9.0, 2.0), 1.0 / 3.0)
    assert math.isclose(macroscopic_tagged_position(0.5, 2.0), 1.0 - 0.5 - 1.0)


def test_density_profile_values():
    assert density_profile(500.0, 500.0, 2.0) == 0.0
    assert density_profile(0.0, 500.0, 2.0) == 0.5  # plateau boundary = fan value
    assert density_profile(-500.0, 500.0, 4.0) == 0.25
    # branch continuity at the left kink
    d, T = 3.0, 100.0
    xk = (1.0 - 2.0 / d) * T
    assert math.isclose(density_profile(xk, T, d), density_profile(xk + 1e-9, T, d), abs_tol=1e-6)


def test_shock_densities_values():
    assert shock_densities(0.2, 0.2, 0.2) == (1.0, 1.0)
    assert math.isclose(shock_densities(0.25, 1.0, 1.0)[0], 0.5)
    assert math.isclose(shock_densities(0.09, 0.36, 0.36)[1], 0.5)
    with pytest.raises(ValueError):
        shock_densities(0.5, 0.4, 0.9)


def test_classifier_step_table():
    rec = classify_reference_wall(1, 1.0 / 9.0)
    assert rec["law"] == "Airy2to1"
    assert math.isclose(rec["scales"][0], 2.0 ** (-2.0 / 3.0) * 3.0 ** (1.0 / 3.0))
    assert math.isclose(rec["xi"], 1.0 / 3.0)
    rec = classify_reference_wall(1, 0.1)
    assert rec["law"] == "GOE*GOE"
    assert rec["influence_times"] == (0.4, 0.9)
    rec = classify_reference_wall(1, 0.05)
    assert rec["law"] == "GOE" and math.isclose(rec["xi"], 17.0 / 30.0 - 0.1)
    assert math.isclose(rec["scales"][0], (2.0 / 0.05) ** (1.0 / 3.0))


def test_classifier_alpha_d():
    rec = classify_reference_wall(4, 11.0 / 120.0)
    assert rec["law"] == "GOE*GOE"
    assert math.isclose(11.0 / 120.0, 22.0 / 240.0)
    assert math.isclose(rec["xi"], rec["g_alpha"])


def test_classifier_gue_region():
    rec = classify_reference_wall(2, 0.2)
    assert rec["law"] == "GUE"
    c1 = (1.0 - math.sqrt(0.2)) ** (2.0 / 3.0) * 0.2 ** (-1.0 / 6.0)
    assert math.isclose(rec["scales"][0], 1.0 / c1)
    assert rec["influence_times"] == ()


def test_classifier_not_tabulated():
    with pytest.raises(ValueError):
        classify_reference_wall(2.5, 0.1)


def test_classifier_matches_shock_and_speed_formulas():
    # the product-regime record is consistent with the shock densities and
    # the free-process speed wherever both apply
    rec = classify_reference_wall(4, 11.0 / 120.0)
    assert math.isclose(rec["g_alpha"], macroscopic_tagged_position(11.0 / 120.0, 4.0))
    rr, lb = shock_densities(0.1, 0.4, 0.9)
    assert math.isclose(rr, 0.5) and math.isclose(lb, 1.0 / 3.0)


def test_rescale_tagged():
    assert rescale_tagged(30.0, 0.3, 100.0) == 0.0
    assert rescale_tagged(30.0 - 100.0 ** (1.0 / 3.0), 0.3, 100.0) == 1.0


def test_rescale_fixed_time_centering():
    alpha, T = 0.25, 400.0
    c1, c2h = tagged_constants(alpha)
    finals = np.zeros(int(alpha * T) + 50, dtype=np.int64)
    lab0 = int(alpha * T)
    finals[lab0 - 1] = int((1.0 - 2.0 * math.sqrt(alpha)) * T)
    x = rescale_fixed_time(finals, alpha, T, [0.0])
    assert abs(x[0]) < 1e-12
    with pytest.raises(ValueError):
        rescale_fixed_time(finals[:10], alpha, T, [0.0])
