"""Config-driven experiment runner.

Every subcommand reads a JSON config with a top-level "experiment"
discriminator matching the subcommand, validates it against a strict key
schema (unknown keys are rejected), runs the experiment and writes CSV/JSON
artifacts whose names embed the seed and a digest of the config.  Outputs are
byte-identical for identical (config, seed), at any --replicas-in-flight.

Exit codes: 0 success, 1 usage/config error, 2 verification failure.
"""

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import asymptotics, identities, multispecies, oracles, stats
from .clocks import ClockField
from .dynamics import InitialConditionSpec, materialize_ic, simulate, simulate_finals_batch
from .sampling import sample_finals
from .walls import PiecewiseFn, WallSpec, reference_wall

ENV_SEED = "EXCLUWALL_SEED"


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config parsing


def _require_keys(obj, required, optional=(), where="config"):
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


def _parse_ic(obj, where="ic"):
    _require_keys(obj, ["kind"], ["n_max", "offset", "positions", "d", "rho", "window"], where)
    kind = obj["kind"]
    if kind == "step":
        return InitialConditionSpec.step(obj.get("n_max", 1), obj.get("offset", 0))
    if kind == "explicit":
        return InitialConditionSpec.explicit(obj["positions"])
    if kind == "half_d_periodic":
        return InitialConditionSpec.half_d_periodic(obj["n_max"], obj["d"])
    if kind == "half_bernoulli":
        return InitialConditionSpec.half_bernoulli(obj["n_max"], obj["rho"])
    if kind == "stationary":
        return InitialConditionSpec.stationary(obj["n_max"], obj["rho"], obj.get("window", 0))
    raise ConfigError(f"unknown ic kind {kind!r}")


def _parse_wall_fn(obj, where="wall"):
    if obj == "reference":
        return None  # resolved against T by the caller
    if not isinstance(obj, list):
        raise ConfigError(f"{where}: expected breakpoint list or 'reference'")
    return PiecewiseFn.from_breakpoints(obj)


def _resolve_wall(obj, T):
    f = _parse_wall_fn(obj)
    return reference_wall(T) if f is None else f


def _digest(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _out_path(args, cfg, ext, tag=""):
    name = f"{cfg['experiment']}{tag}_{args.seed}_{_digest(cfg)}.{ext}"
    return os.path.join(args.out_dir, name)


def _chunked_seeds(samples, base_seed, chunk):
    seeds = np.arange(samples, dtype=np.uint64) + np.uint64(base_seed)
    return [seeds[i : i + chunk] for i in range(0, samples, chunk)]  # noqa: E203


def _run_batches(fn, samples, base_seed, chunk):
    """Replica-parallel map with order-independent (indexed) aggregation."""
    parts = _chunked_seeds(samples, base_seed, chunk)
    with ThreadPoolExecutor(max_workers=min(8, len(parts))) as pool:
        results = list(pool.map(fn, parts))
    return [np.concatenate(r) for r in zip(*results)] if results else []


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(cfg, args):
    _require_keys(cfg, ["experiment", "ic", "T"], ["wall", "n_max", "replicas"])
    T = float(cfg["T"])
    ic_spec = _parse_ic(cfg["ic"])
    if "n_max" in cfg and ic_spec.kind != "explicit":
        ic_spec = dataclasses.replace(ic_spec, n_max=int(cfg["n_max"]))
    wall_cfg = cfg.get("wall")
    wall = WallSpec.none() if wall_cfg is None else WallSpec.right_wall(_resolve_wall(wall_cfg, T))
    replicas = int(cfg.get("replicas", 1))

    if replicas == 1:
        pos = materialize_ic(ic_spec, args.seed ^ 0x5EED1C)
        traj = simulate(pos, wall, T, ClockField(args.seed, T))
        path = _out_path(args, cfg, "csv")
        traj.to_csv(path)
        return 0, [path]

    def run(seed_chunk):
        rows = (
            np.stack([materialize_ic(ic_spec, int(s) ^ 0x5EED1C) for s in seed_chunk])
            if ic_spec.random
            else materialize_ic(ic_spec)
        )
        return (simulate_finals_batch(seed_chunk, rows, wall, T),)

    (finals,) = _run_batches(run, replicas, args.seed, args.replicas_in_flight)
    path = _out_path(args, cfg, "csv")
    stats.write_csv(
        path,
        ["replica", "label", "position"],
        ((r, lab + 1, finals[r, lab]) for r in range(replicas) for lab in range(finals.shape[1])),
    )
    return 0, [path]


def _cmd_verify_identity(cfg, args):
    _require_keys(cfg, ["experiment", "cases"], ["samples", "level"])
    samples = int(cfg.get("samples", args.samples or 10000))
    level = float(cfg.get("level", 0.99))
    reports = []
    ok = True
    for i, case in enumerate(cfg["cases"]):
        _require_keys(case, ["ic", "wall", "n", "T", "s_values"], where=f"cases[{i}]")
        T = float(case["T"])
        f = _resolve_wall(case["wall"], T)
        reps = identities.wall_identity_report(
            _parse_ic(case["ic"]), f, int(case["n"]), T, case["s_values"], samples, args.seed + i * 2 * samples, level
        )
        reports.extend(reps)
        ok &= all(r["verdict"] for r in reps)
    path = _out_path(args, cfg, "json")
    stats.write_json(path, {"reports": reports, "all_verdicts_pass": ok})
    return (0 if ok else 2), [path]


def _cmd_verify_coupling(cfg, args):
    _require_keys(cfg, ["experiment"], ["pathwise", "shift", "variational", "samples"])
    samples = int(cfg.get("samples", args.samples or 10000))
    out = {}
    ok = True
    if "pathwise" in cfg:
        sec = cfg["pathwise"]
        _require_keys(sec, ["cases", "n", "T"], ["span"], "pathwise")
        rng = np.random.default_rng(args.seed)
        exact = 0
        for _ in range(int(sec["cases"])):
            n = int(rng.integers(1, sec["n"] + 1))
            span = int(sec.get("span", 3 * sec["n"]))
            pos = np.sort(rng.choice(np.arange(-span, 1), size=n, replace=False))[::-1].copy()
            T = float(rng.uniform(0.5, sec["T"]))
            clocks = ClockField(int(rng.integers(0, 2**63)), T)
            exact += identities.shifted_step_minimum_check(pos, n, T, clocks)
        out["pathwise"] = {"cases": int(sec["cases"]), "exact": exact}
        ok &= exact == int(sec["cases"])
    if "shift" in cfg:
        sec = cfg["shift"]
        _require_keys(sec, ["processes", "T", "s"], (), "shift")
        rep = identities.shift_equivalence_report(sec["processes"], float(sec["T"]), sec["s"], samples, args.seed)
        out["shift"] = rep
        ok &= rep["verdict"]
    if "variational" in cfg:
        sec = cfg["variational"]
        _require_keys(sec, ["ic", "n", "T", "s_values"], (), "variational")
        reps = identities.variational_onepoint_report(
            _parse_ic(sec["ic"]), int(sec["n"]), float(sec["T"]), sec["s_values"], samples, args.seed
        )
        out["variational"] = reps
        ok &= all(r["verdict"] for r in reps)
    path = _out_path(args, cfg, "json")
    stats.write_json(path, {"results": out, "all_verdicts_pass": ok})
    return (0 if ok else 2), [path]


def _cmd_colour_position(cfg, args):
    _require_keys(cfg, ["experiment"], ["words", "max_len", "window", "hole_span", "ic_permutations", "n_max"])
    rng = np.random.default_rng(args.seed)
    out = {}
    ok = True

    words = int(cfg.get("words", 1000))
    max_len = int(cfg.get("max_len", 12))
    w = int(cfg.get("window", 6))
    good = 0
    for _ in range(words):
        k = int(rng.integers(0, max_len + 1))
        word = rng.integers(-w, w, size=k).tolist()
        good += multispecies.colour_position_check(word)
    out["colour_position"] = {"words": words, "exact": good}
    ok &= good == words

    span = int(cfg.get("hole_span", 8))
    total = checked = 0
    for width in range(1, span + 1):
        for bits in range(2**(width + 1)):
            occ = [(bits >> i) & 1 == 1 for i in range(width + 1)]
            for x in range(width):
                res = multispecies.hole_transfer_check(occ, 0, width, x)
                if res != "hypothesis_not_met":
                    total += 1
                    checked += bool(res)
    out["hole_transfer"] = {"instances": total, "exact": checked}
    ok &= checked == total

    nperm = int(cfg.get("ic_permutations", 200))
    n_max = int(cfg.get("n_max", 12))
    good = 0
    for _ in range(nperm):
        n = int(rng.integers(1, n_max + 1))
        pos = np.sort(rng.choice(np.arange(-3 * n_max, 1), size=n, replace=False))[::-1]
        word, cfg0 = multispecies.build_ic_permutation(pos.tolist())
        invol = multispecies.compose(cfg0, cfg0) == multispecies.PermutationConfig.identity(cfg0.lo, cfg0.hi)
        cutoff = int(pos[-1]) + n - 1
        occ = multispecies.marginal(cfg0, cutoff, int(pos[-1]), 0)
        good += invol and np.array_equal(occ, np.sort(pos))
    out["ic_permutation"] = {"cases": nperm, "exact": good}
    ok &= good == nperm

    path = _out_path(args, cfg, "json")
    stats.write_json(path, {"results": out, "all_verdicts_pass": ok})
    return (0 if ok else 2), [path]


def profile_labels(d, T, extra=0):
    """Labels needed for an exact empirical density over [-T, T].

    Simulating this many labels guarantees (checked post hoc) that every
    omitted particle stays left of the region, so truncation cannot bias the
    histogram.
    """
    alpha_star = min(1.0, (2.0 - 1.0 / d) / d)
    return int(np.ceil(alpha_star * T)) + int(5.0 * T ** (1.0 / 3.0)) + 25 + extra


def _cmd_density(cfg, args):
    _require_keys(cfg, ["experiment", "d", "T", "replicas"], ["bin_width", "margin_factor", "n_max"])
    d = float(cfg["d"])
    T = float(cfg["T"])
    replicas = int(cfg["replicas"])
    bin_width = int(cfg.get("bin_width", 25))
    n_max = int(cfg.get("n_max", profile_labels(d, T)))
    ic = materialize_ic(InitialConditionSpec.half_d_periodic(n_max, d))

    def run(seed_chunk):
        return (sample_finals(seed_chunk, ic, WallSpec.none(), T),)

    (finals,) = _run_batches(run, replicas, args.seed, args.replicas_in_flight)
    region = (-int(T), int(T))
    if int(finals[:, -1].max()) >= region[0]:
        raise RuntimeError("label truncation reached the density region; raise n_max")
    edges, density = stats.empirical_density(finals, bin_width, region)
    target = np.array([asymptotics.density_profile(e + bin_width / 2.0, T, d) for e in edges])
    margin = float(cfg.get("margin_factor", 3.0)) * T ** (2.0 / 3.0)
    kinks = [(1.0 - 2.0 / d) * T, T]
    keep = np.ones(edges.size, dtype=bool)
    for kink in kinks:
        keep &= np.abs(edges + bin_width / 2.0 - kink) > margin
    sup_err = float(np.abs(density[keep] - target[keep]).max())
    csv_path = _out_path(args, cfg, "csv")
    stats.write_csv(csv_path, ["bin_left", "density", "hydrodynamic"], zip(edges, density, target))
    verdict = sup_err <= 0.05
    json_path = _out_path(args, cfg, "json")
    stats.write_json(json_path, {"sup_error": sup_err, "margin_sites": margin, "verdict": verdict})
    return (0 if verdict else 2), [csv_path, json_path]


def _cmd_fluctuations(cfg, args):
    _require_keys(cfg, ["experiment", "mode"], ["alpha", "d", "T", "T_values", "samples"])
    mode = cfg["mode"]
    samples = int(cfg.get("samples", args.samples or 2000))
    out_files = []
    if mode == "tagged":
        alpha = float(cfg["alpha"])
        T = float(cfg["T"])
        n = int(alpha * T)
        ic = -np.arange(n, dtype=np.int64)

        def run(seed_chunk):
            return (sample_finals(seed_chunk, ic, WallSpec.none(), T)[:, n - 1],)

        (finals,) = _run_batches(run, samples, args.seed, args.replicas_in_flight)
        S = asymptotics.rescale_tagged(finals, 1.0 - 2.0 * np.sqrt(alpha), T)
        path = _out_path(args, cfg, "csv")
        stats.write_csv(path, ["replica", "S"], enumerate(S))
        return 0, [path]
    if mode == "decoupling":
        rec = _decoupling_run(cfg, args, samples)
        path = _out_path(args, cfg, "json")
        stats.write_json(path, rec)
        return (0 if rec["verdict"] else 2), [path]
    if mode == "tail":
        alpha = float(cfg.get("alpha", 0.25))
        T = float(cfg.get("T", 500.0))
        n = int(alpha * T)
        ic = -np.arange(n, dtype=np.int64)

        def run(seed_chunk):
            return (sample_finals(seed_chunk, ic, WallSpec.none(), T)[:, n - 1],)

        (finals,) = _run_batches(run, samples, args.seed, args.replicas_in_flight)
        S = asymptotics.rescale_tagged(finals, 1.0 - 2.0 * np.sqrt(alpha), T)
        tail = {f"P(S>={s})": float((S >= s).mean()) for s in (1, 2, 3, 4)}
        mono = all(tail[f"P(S>={s})"] >= tail[f"P(S>={s+1})"] for s in (1, 2, 3))
        decay = tail["P(S>=4)"] < tail["P(S>=1)"] / 10.0
        path = _out_path(args, cfg, "json")
        stats.write_json(path, {"tails": tail, "monotone": mono, "decay": decay, "verdict": mono and decay})
        return (0 if mono and decay else 2), [path]
    raise ConfigError(f"unknown fluctuations mode {mode!r}")


def decoupling_discrepancy(d, alpha, T, samples, base_seed, s_grid=None):
    """Decoupling discrepancy at one horizon for the benchmark wall.

    sup over an S-grid of |S_lhs - S_wall * S_free| in survival form, with
    thresholds xi*T - S*T^(1/3) per the regime classifier's xi.
    """
    rec = asymptotics.classify_reference_wall(d, alpha)
    n = int(alpha * T)
    ic_spec = InitialConditionSpec.half_d_periodic(n, d)
    lhs, comp1, comp2 = identities.decoupling_ensembles(ic_spec, reference_wall(T), n, T, samples, base_seed)
    if s_grid is None:
        s_grid = np.linspace(-3.0, 5.0, 33)
    thresholds = rec["xi"] * T - np.asarray(s_grid) * T ** (1.0 / 3.0)
    return stats.decoupling_check(lhs, comp1, comp2, thresholds)


def _decoupling_run(cfg, args, samples):
    d = float(cfg.get("d", 4.0))
    alpha = float(cfg.get("alpha", 11.0 / 120.0))
    T_values = [float(t) for t in cfg.get("T_values", [100, 200, 400])]
    discs = {}
    for i, T in enumerate(T_values):
        discs[str(int(T))] = decoupling_discrepancy(d, alpha, T, samples, args.seed + 3 * samples * i)
    band = stats.dkw_band(samples, 0.95)
    largest = discs[str(int(max(T_values)))]
    verdict = largest < 4.0 * band
    return {"discrepancies": discs, "dkw_band": band, "verdict": verdict}


def _cmd_classify(cfg, args):
    _require_keys(cfg, ["experiment", "cases"], [])
    records = []
    for d, alpha in cfg["cases"]:
        rec = asymptotics.classify_reference_wall(float(d), float(alpha))
        times = rec["influence_times"]
        if times:
            rr, ll = asymptotics.shock_densities(rec["alpha"], times[0], times[-1])
            rec = dict(rec, rho_right=rr, rho_left_bound=ll)
        records.append(rec)
    path = _out_path(args, cfg, "json")
    stats.write_json(path, {"records": records})
    return 0, [path]


def _cmd_selfcheck(cfg, args):
    checks = _selfcheck_list(args.seed)
    failures = []
    for name, fn in checks:
        try:
            fn()
            print(f"PASS {name}")
        except AssertionError as exc:
            failures.append(name)
            print(f"FAIL {name}: {exc}")
    print(f"selfcheck: {len(checks) - len(failures)}/{len(checks)} passed")
    return (0 if not failures else 2), []


def _selfcheck_list(seed):
    import math

    def clock_checks():
        cf, cf2 = ClockField(seed, 8.0), ClockField(seed, 8.0)
        a = cf.site_events(3, 8.0)
        assert np.array_equal(a, cf2.site_events(3, 8.0))
        assert np.array_equal(cf.site_events(3, 2.0), a[a <= 2.0])
        assert cf.site_events(3, 0.0).size == 0

    def wall_checks():
        f = reference_wall(1.0)
        assert math.isclose(f(0.35), 29.0 / 120.0)
        assert math.isclose(f(1.0), 17.0 / 30.0)
        assert PiecewiseFn.constant(0.0)(2.0) == 0.0

    def ic_checks():
        assert materialize_ic(InitialConditionSpec.step(3)).tolist() == [0, -1, -2]
        assert materialize_ic(InitialConditionSpec.half_d_periodic(3, 2.0)).tolist() == [0, -2, -4]
        assert materialize_ic(InitialConditionSpec.half_d_periodic(4, 1.5)).tolist() == [0, -1, -3, -4]

    def dynamics_checks():
        cf = ClockField(seed + 1, 1.0)
        traj = simulate(np.array([0, -1, -2]), WallSpec.right_wall(PiecewiseFn.constant(0.0)), 1.0, cf)
        assert traj.final_positions()[0] == 0
        t2 = simulate(np.array([0, -1, -2]), WallSpec.right_wall(PiecewiseFn.constant(0.0)), 1.0, ClockField(seed + 1, 1.0))
        assert all(np.array_equal(a, b) for a, b in zip(traj.jump_times, t2.jump_times))

    def multi_checks():
        assert multispecies.colour_position_check([])
        assert multispecies.colour_position_check([0])
        word, cfg0 = multispecies.build_ic_permutation([0, -2])
        assert list(word) == [-1]
        assert multispecies.marginal(cfg0, -1, -2, 0).tolist() == [-2, 0]

    def asym_checks():
        assert math.isclose(asymptotics.wall_envelope(1.0, 0.25, 0.0), 0.25)
        assert math.isclose(asymptotics.wall_envelope(0.0, 0.25, 0.0), 0.0)
        c1, _ = asymptotics.influence_constants(0.25, 1.0)
        assert math.isclose(c1, 2 ** (-1.0 / 3.0))
        assert asymptotics.macroscopic_tagged_position(0.25, 1.0) == 0.0
        assert asymptotics.density_profile(500.0, 500.0, 2.0) == 0.0
        assert math.isclose(asymptotics.classify_reference_wall(4, 0.2)["g_alpha"], 0.75 - 0.8)

    def stats_checks():
        F = stats.ecdf([0.0])
        assert F(0.0) == 1.0 and F(-1e-9) == 0.0
        assert stats.ks_distance(stats.ecdf([0.0]), stats.ecdf([1.0])) == 1.0
        assert stats.wilson_ci(0, 10, 0.95)[0] == 0.0
        assert stats.wilson_ci(10, 10, 0.95)[1] == 1.0

    return [
        ("clockfield determinism and prefix", clock_checks),
        ("wall evaluation", wall_checks),
        ("initial conditions", ic_checks),
        ("blocked wall and determinism", dynamics_checks),
        ("colour-position and ic permutation", multi_checks),
        ("closed-form formulas", asym_checks),
        ("stats primitives", stats_checks),
    ]


# ---------------------------------------------------------------------------
# entry point

_COMMANDS = {
    "simulate": _cmd_simulate,
    "verify-identity": _cmd_verify_identity,
    "verify-coupling": _cmd_verify_coupling,
    "colour-position": _cmd_colour_position,
    "density": _cmd_density,
    "fluctuations": _cmd_fluctuations,
    "classify": _cmd_classify,
    "selfcheck": _cmd_selfcheck,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="excluwall", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config path (selfcheck runs without one)")
        p.add_argument("--seed", type=int, default=None, help=f"base seed (default: ${ENV_SEED} or 0)")
        p.add_argument("--samples", type=int, default=None, help="override sample count where applicable")
        p.add_argument("--out-dir", default=".", help="artifact directory")
        p.add_argument("--replicas-in-flight", type=int, default=1024, dest="replicas_in_flight",
                       help="replica batch size; results are independent of this value")
    args = parser.parse_args(argv)

    if args.seed is None:
        args.seed = int(os.environ.get(ENV_SEED, "0"))
    if args.replicas_in_flight < 1:
        print("error: --replicas-in-flight must be >= 1", file=sys.stderr)
        return 1

    if args.command == "selfcheck" and not args.config:
        cfg = {"experiment": "selfcheck"}
    else:
        if not args.config:
            print("error: --config is required", file=sys.stderr)
            return 1
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 1
    if cfg.get("experiment") != args.command:
        print(f"error: config experiment {cfg.get('experiment')!r} does not match subcommand", file=sys.stderr)
        return 1

    os.makedirs(args.out_dir, exist_ok=True)
    try:
        code, files = _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in files:
        print(path)
    return code


if __name__ == "__main__":
    sys.exit(main())
