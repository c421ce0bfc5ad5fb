"""Benchmark and verification harness.

Subcommands:
  run     Monte Carlo suite on one configured instance -> trace.csv + summary.json
  verify  numerical checkers on the configured instance -> verify.json
  sweep   one-axis parameter sweep -> sweep.csv + sweep_summary.json
  oracle  recompute the worked example values and print them

Configuration is a single JSON file. CLI flags override file keys, and the
environment variable OJAK_SEED is the seed of last resort. The fully resolved
configuration is echoed into every summary so each result file identifies the
exact inputs that produced it. Nothing is written to disk until the whole
configuration has resolved: a bad config exits 2 with no partial outputs,
any runtime failure exits 1.
"""

import argparse
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from . import analysis
from ._batch import run_suite
from .errors import ConfigError, OjakError
from .linalg import (
    gram_schmidt_qr,
    hermitian_dilation,
    singular_values,
    spectral_norm,
    subspace_distance,
    symmetric_eigendecompose,
)
from .oja import (
    CSV_HEADER,
    DEFAULT_GAMMA,
    ConstantProfile,
    StepSchedule,
    compute_schedule,
    default_record_grid,
    run,
)
from .rng import GENERATOR_ID, derive_seed, make_generator
from .streams import (
    FiniteSupportDistribution,
    distribution_from_config,
    ghost_couple,
    make_finite_support,
    make_spiked_support,
    verify_assumptions,
)

SWEEP_AXES = ("T", "delta", "d", "k", "noise_scale", "beta")
SCHEDULE_FIELDS = ("t0", "phase1_eta", "alpha", "beta", "rho_k")
QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)

# instance used by `verify` and `oracle` when the config names none
DEFAULT_INSTANCE = {
    "kind": "spiked_support",
    "eigenvalues": [1.0, 0.8, 0.3, 0.22, 0.17, 0.14, 0.12, 0.1],
    "k": 2,
    "noise_scale": 0.4,
    "n_pairs": 2,
    "seed": 99,
}


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved inputs for one CLI invocation."""

    command: str
    dist: object
    schedule: StepSchedule
    T: int
    trials: int
    delta: float
    p_grid: tuple
    seed: int
    threads: int
    out_dir: str
    profile_kind: str
    checkers: tuple
    warm_start_w: float | None
    gamma: float | None
    axis: str | None
    values: tuple
    echo: dict


@dataclasses.dataclass
class ExperimentSummary:
    """Aggregates of one suite, JSON-shaped."""

    d: int
    k: int
    T: int
    trials: int
    seed: int
    generator: str
    schedule: dict
    per_t: dict
    survival_final: float
    slope: float | None
    wall_clock_s: float
    config: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# config resolution


def _load_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object at top level")
    return data


def _resolve_dist_cfg(cfg: dict) -> dict:
    """Expand a generated-eigenvalue spec {head: [...], tail: [hi, lo]} into a
    concrete list, so sweeps over d can rescale the same instance family."""
    if not isinstance(cfg, dict):
        raise ConfigError("distribution section must be a mapping")
    out = dict(cfg)
    ev = out.get("eigenvalues")
    if isinstance(ev, dict):
        try:
            head = [float(x) for x in ev["head"]]
            hi, lo = (float(x) for x in ev["tail"])
            d = int(out["d"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad generated eigenvalue spec: {exc}")
        if d <= len(head):
            raise ConfigError(f"d = {d} leaves no room for the eigenvalue tail")
        out["eigenvalues"] = head + np.linspace(hi, lo, d - len(head)).tolist()
    return out


def _build_distribution(cfg: dict, relaxed: bool):
    cfg = _resolve_dist_cfg(cfg)
    if relaxed and cfg.get("kind") == "finite_support":
        # `verify` builds finite supports without the construction-time atom
        # audit, so that a deliberately broken atom reaches the checkers and
        # is reported instead of refused
        try:
            return FiniteSupportDistribution(
                np.asarray(cfg["atoms"], dtype=float), cfg["weights"],
                int(cfg["k"]), validate=False)
        except KeyError as exc:
            raise ConfigError(f"distribution config missing key {exc}")
    return distribution_from_config(cfg)


def _build_schedule(model, delta: float, profile_kind: str, overrides: dict) -> StepSchedule:
    profile = (ConstantProfile.theoretical() if profile_kind == "theoretical"
               else ConstantProfile.practical())
    sched = compute_schedule(model, model.d, delta, profile)
    if overrides:
        unknown = set(overrides) - set(SCHEDULE_FIELDS)
        if unknown:
            raise ConfigError(f"unknown schedule override(s): {sorted(unknown)}")
        typed = {key: (int(v) if key == "t0" else float(v))
                 for key, v in overrides.items()}
        sched = dataclasses.replace(sched, **typed)
    return sched


def _parse_values(raw) -> tuple:
    if raw is None:
        return ()
    if isinstance(raw, str):
        raw = [piece for piece in raw.split(",") if piece.strip()]
    try:
        return tuple(float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sweep values must be numbers: {exc}")


def resolve_config(args) -> ExperimentConfig:
    """Validate everything up front; no partial outputs past this point."""
    try:
        return _resolve_config(args)
    except ConfigError:
        raise
    except OjakError as exc:
        raise ConfigError(f"config does not resolve: {exc}") from exc


def _resolve_config(args) -> ExperimentConfig:
    data = _load_config_file(args.config) if args.config else {}
    command = args.command

    if args.seed is not None:
        seed = int(args.seed)
    elif "seed" in data:
        seed = int(data["seed"])
    elif os.environ.get("OJAK_SEED"):
        try:
            seed = int(os.environ["OJAK_SEED"])
        except ValueError:
            raise ConfigError(f"OJAK_SEED is not an integer: {os.environ['OJAK_SEED']!r}")
    else:
        seed = 0
    if not 0 <= seed < 2 ** 64:
        raise ConfigError(f"seed must fit in a u64, got {seed}")

    threads = int(args.threads if args.threads is not None else data.get("threads", 1))
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")

    out_dir = args.out if args.out is not None else data.get("out", "ojak_out")

    delta = float(data.get("delta", 0.1))

    dist_cfg = data.get("distribution")
    if dist_cfg is None:
        if command in ("verify", "oracle"):
            dist_cfg = dict(DEFAULT_INSTANCE)
        else:
            raise ConfigError(f"'{command}' needs a distribution section in the config")
    dist = _build_distribution(dist_cfg, relaxed=(command == "verify"))
    model = dist.model

    sched_cfg = data.get("schedule") or {}
    if not isinstance(sched_cfg, dict):
        raise ConfigError("schedule section must be a mapping")
    profile_kind = args.profile if args.profile else sched_cfg.get("profile", "practical")
    if profile_kind not in ("theoretical", "practical"):
        raise ConfigError(f"profile must be theoretical or practical, got {profile_kind!r}")
    schedule = _build_schedule(model, delta, profile_kind,
                               sched_cfg.get("overrides") or {})

    if command in ("run", "sweep"):
        if "T" not in data or "trials" not in data:
            raise ConfigError(f"'{command}' needs both T and trials in the config")
        T = int(data["T"])
        trials = int(data["trials"])
    else:
        T = int(data.get("T", 1024))
        trials = int(data.get("trials", 1))
    if T < 1 or trials < 1:
        raise ConfigError(f"need T >= 1 and trials >= 1, got T = {T}, trials = {trials}")

    raw_grid = data.get("p_grid")
    if raw_grid is None:
        p_grid = tuple(analysis.default_p_grid(model.k, delta))
    else:
        p_grid = tuple(float(p) for p in raw_grid)
        if any(p < 2 for p in p_grid):
            raise ConfigError(f"every p in p_grid must be >= 2, got {list(p_grid)}")

    raw_checkers = data.get("checkers")
    if raw_checkers is None:
        checkers = tuple(CHECKERS)
    else:
        checkers = tuple(raw_checkers)
        unknown = set(checkers) - set(CHECKERS)
        if unknown:
            raise ConfigError(f"unknown checker(s): {sorted(unknown)}")

    warm = data.get("warm_start_w")
    warm = None if warm is None else float(warm)
    gamma = data.get("gamma")
    gamma = None if gamma is None else float(gamma)

    axis = getattr(args, "axis", None) or data.get("axis")
    values = _parse_values(getattr(args, "values", None) or data.get("values"))
    if command == "sweep":
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {axis!r}")
        if not values:
            raise ConfigError("sweep needs a nonempty values list")
        if axis == "d" and not isinstance(dist_cfg.get("eigenvalues"), dict):
            raise ConfigError(
                "a d sweep needs the generated eigenvalue form "
                "{\"head\": [...], \"tail\": [hi, lo]}")

    if command != "oracle":
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out_dir!r}: {exc}")
        if not os.access(out_dir, os.W_OK):
            raise ConfigError(f"output directory {out_dir!r} is not writable")

    echo = {
        "T": T,
        "trials": trials,
        "delta": delta,
        "seed": seed,
        "threads": threads,
        "out": out_dir,
        "profile": profile_kind,
        "distribution": dist_cfg,
        "schedule": _schedule_dict(schedule),
        "schedule_overrides": dict(sched_cfg.get("overrides") or {}),
        "p_grid": list(p_grid),
        "checkers": list(checkers),
        "warm_start_w": warm,
        "gamma": gamma,
        "axis": axis,
        "values": list(values),
    }
    return ExperimentConfig(
        command=command, dist=dist, schedule=schedule, T=T, trials=trials,
        delta=delta, p_grid=p_grid, seed=seed, threads=threads,
        out_dir=out_dir, profile_kind=profile_kind, checkers=checkers,
        warm_start_w=warm, gamma=gamma, axis=axis, values=values, echo=echo,
    )


def _schedule_dict(sched: StepSchedule) -> dict:
    return {"t0": sched.t0, "phase1_eta": sched.phase1_eta,
            "alpha": sched.alpha, "beta": sched.beta, "rho_k": sched.rho_k}


# ---------------------------------------------------------------------------
# suite collection shared by run and sweep


@dataclasses.dataclass
class _Collected:
    ts: np.ndarray
    eta: np.ndarray
    phase: np.ndarray
    subspace_dist: np.ndarray
    w_norm: np.ndarray
    good_event: np.ndarray
    traces: object  # callable yielding RunTrace per trial


def _collect(dist, schedule, T, trials, seed, warm, gamma, threads) -> _Collected:
    record = default_record_grid(T)
    if isinstance(dist, FiniteSupportDistribution):
        suite = run_suite(dist, schedule, T, trials=trials, seed=seed,
                          record=record, warm_start_w=warm, gamma=gamma,
                          threads=threads)
        return _Collected(
            ts=suite.ts, eta=suite.eta, phase=suite.phase,
            subspace_dist=suite.subspace_dist, w_norm=suite.w_norm,
            good_event=suite.good_event,
            traces=lambda: (suite.trace(b) for b in range(trials)),
        )
    # sampled streams go through the sequential kernel, one trial at a time,
    # with the same per-trial seed derivation the suite engine uses
    traces = []
    for b in range(trials):
        _, trace = run(dist, schedule, T, warm_start_w=warm,
                       seed=derive_seed(seed, b), record=record, gamma=gamma,
                       trial=b)
        traces.append(trace)
    first = traces[0]
    return _Collected(
        ts=first.ts, eta=first.eta, phase=first.phase,
        subspace_dist=np.stack([tr.subspace_dist for tr in traces]),
        w_norm=np.stack([tr.w_norm for tr in traces]),
        good_event=np.stack([tr.good_event for tr in traces]),
        traces=lambda: iter(traces),
    )


def _json_float(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def _quantile_block(arr: np.ndarray) -> dict:
    q = np.quantile(arr, QUANTILES, axis=0)
    # medians and surrounding quantiles must come out ordered
    assert (np.diff(q, axis=0) >= -1e-12).all()
    return {f"q{int(100 * lev)}": [_json_float(v) for v in q[i]]
            for i, lev in enumerate(QUANTILES)}


def _aggregate(col: _Collected, schedule: StepSchedule, cfg: ExperimentConfig,
               wall: float) -> ExperimentSummary:
    survival = col.good_event.mean(axis=0)
    assert (np.diff(survival) <= 1e-12).all()
    t0, beta = schedule.t0, schedule.beta
    bound = []
    violations = []
    for r, t in enumerate(col.ts):
        t = int(t)
        if t > t0:
            b = analysis.phase2_highprob_bound(beta, t - t0)
            bound.append(_json_float(b))
            violations.append(int((col.subspace_dist[:, r] > b).sum()))
        else:
            bound.append(None)
            violations.append(None)
    med = np.quantile(col.subspace_dist, 0.5, axis=0)
    keep = [(beta + (int(t) - t0), float(m))
            for t, m in zip(col.ts, med) if int(t) > t0 and m > 0]
    slope = None
    if len(keep) >= 2:
        try:
            slope, _ = analysis.fit_power_slope([x for x, _ in keep],
                                                [y for _, y in keep])
        except OjakError:
            slope = None
    per_t = {
        "t": [int(t) for t in col.ts],
        "eta": [_json_float(e) for e in col.eta],
        "phase": [int(p) for p in col.phase],
        "subspace_dist": _quantile_block(col.subspace_dist),
        "w_norm": _quantile_block(col.w_norm),
        "survival": [float(s) for s in survival],
        "bound": bound,
        "bound_violations": violations,
    }
    model = cfg.dist.model
    return ExperimentSummary(
        d=model.d, k=model.k, T=cfg.T, trials=cfg.trials, seed=cfg.seed,
        generator=GENERATOR_ID, schedule=_schedule_dict(schedule),
        per_t=per_t, survival_final=float(survival[-1]), slope=slope,
        wall_clock_s=wall, config=cfg.echo,
    )


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_trace_csv(path: str, col: _Collected) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for trace in col.traces():
            for row in trace.csv_rows():
                fh.write(row + "\n")


# ---------------------------------------------------------------------------
# run


def cmd_run(cfg: ExperimentConfig) -> int:
    model = cfg.dist.model
    print(f"== ojak run: d = {model.d}, k = {model.k}, T = {cfg.T}, "
          f"trials = {cfg.trials}, seed = {cfg.seed} ==")
    start = time.perf_counter()
    col = _collect(cfg.dist, cfg.schedule, cfg.T, cfg.trials, cfg.seed,
                   cfg.warm_start_w, cfg.gamma, cfg.threads)
    wall = time.perf_counter() - start
    summary = _aggregate(col, cfg.schedule, cfg, wall)

    csv_path = os.path.join(cfg.out_dir, "trace.csv")
    json_path = os.path.join(cfg.out_dir, "summary.json")
    _write_trace_csv(csv_path, col)
    _write_json(json_path, _jsonable(summary.to_dict()))

    final_med = summary.per_t["subspace_dist"]["q50"][-1]
    print(f"survival fraction at T: {summary.survival_final:.4f}")
    print(f"median subspace distance at T: {final_med:.6g}")
    if summary.slope is not None:
        print(f"fitted decay slope (log dist vs log(beta + t - t0)): "
              f"{summary.slope:+.3f}")
    print(f"wrote {csv_path} and {json_path} ({wall:.2f} s)")
    return 0


# ---------------------------------------------------------------------------
# verify


def _check_decomposition(cfg: ExperimentConfig) -> dict:
    model = cfg.dist.model
    rng = make_generator(derive_seed(cfg.seed, 101))
    worst = 0.0
    for _ in range(200):
        S = 0.5 * rng.standard_normal((model.d - model.k, model.k))
        Z = model.V + model.U @ S
        A = cfg.dist.sample(rng)
        resid, _ = analysis.decomposition_residual(Z, A, 0.05, model)
        worst = max(worst, resid)
    return {"max_residual": worst, "limit": 1e-10, "ok": bool(worst <= 1e-10)}


def _check_smoothness(cfg: ExperimentConfig) -> dict:
    def triple(rng):
        return (rng.standard_normal((4, 4)), rng.standard_normal((4, 4)),
                rng.standard_normal((4, 4)))

    def pair(rng):
        return (rng.standard_normal((4, 4)), rng.standard_normal((4, 4)),
                np.zeros((4, 4)))

    reports = []
    for i, p in enumerate(cfg.p_grid):
        three = analysis.smoothness_check(triple, p, 0.7, trials=800,
                                          seed=derive_seed(cfg.seed, 200 + i))
        two = analysis.smoothness_check(pair, p, None, trials=800,
                                        seed=derive_seed(cfg.seed, 300 + i))
        reports.append({"p": p, "three_term_margin": three.margin,
                        "two_term_margin": two.margin,
                        "ok": bool(not three.violation and not two.violation)})
    return {"per_p": reports, "ok": all(r["ok"] for r in reports)}


def _check_assumptions(cfg: ExperimentConfig) -> dict:
    stream = verify_assumptions(cfg.dist, seed=derive_seed(cfg.seed, 7))
    g = DEFAULT_GAMMA if cfg.gamma is None else cfg.gamma
    sched = cfg.schedule
    model = cfg.dist.model
    # a decaying schedule satisfies the step-size conditions only once
    # beta + t - t0 clears its analytic lead-in; place the 64-step audit
    # window right there instead of blindly after the burn-in
    lead = max(4.0 * sched.alpha * (1.0 + g) * model.noise_bound_M / sched.rho_k,
               2.0 * sched.alpha * model.spectral_norm / sched.rho_k)
    t_lo = sched.t0 + max(2, math.ceil(lead - sched.beta) + 1)
    t_hi = t_lo + 62
    sched_viol = analysis.validate_assumptions(
        sched, model, g, max(cfg.p_grid), range(t_lo, t_hi + 1))
    return {
        "stream_violations": list(stream.violations),
        "max_noise_norm": stream.max_noise_norm,
        "noise_bound": stream.noise_bound,
        "schedule_window": [t_lo, t_hi],
        "schedule_violations": [dataclasses.asdict(v) for v in sched_viol],
        "ok": bool(stream.ok and not sched_viol),
    }


def _check_tv(cfg: ExperimentConfig) -> dict:
    m = int(cfg.echo.get("ghost_m", 16))
    T0 = int(cfg.echo.get("ghost_T0", 2))
    dist = cfg.dist
    if (isinstance(dist, FiniteSupportDistribution)
            and float(dist.n_atoms) ** T0 <= 4096):
        weights = list(dist.weights)
    else:
        weights = [0.5, 0.5]
    tv = analysis.tv_exact(analysis.ghost_tuple_law(weights, m, T0),
                           analysis.iid_tuple_law(weights, T0))
    cap = T0 * T0 / (2.0 * m)
    return {"m": m, "T0": T0, "tv": tv, "bound": cap,
            "ok": bool(tv <= cap + 1e-12)}


def _check_stability(cfg: ExperimentConfig) -> dict:
    model = cfg.dist.model
    d, k = model.d, model.k
    rng = make_generator(derive_seed(cfg.seed, 33))
    accepted = 0
    failures = 0
    for _ in range(400):
        if accepted == 50:
            break
        Q = gram_schmidt_qr(rng.standard_normal((d, d)))
        V, U = Q[:, :k].copy(), Q[:, k:].copy()
        Q2 = gram_schmidt_qr(Q + 0.05 * rng.standard_normal((d, d)))
        V_hat, U_hat = Q2[:, :k].copy(), Q2[:, k:].copy()
        W_hat = rng.standard_normal((d - k, k))
        W_hat *= rng.uniform(0.1, 0.9) / max(spectral_norm(W_hat), 1e-12)
        S = V_hat + U_hat @ W_hat
        try:
            _, _, ok = analysis.stability_bound_check(U, V, U_hat, V_hat, S)
        except OjakError:
            continue
        accepted += 1
        if not ok:
            failures += 1
    return {"accepted": accepted, "failures": failures,
            "ok": bool(accepted == 50 and failures == 0)}


def _check_init_probe(cfg: ExperimentConfig) -> dict:
    model = cfg.dist.model
    rep = analysis.init_scaling_probe(model.d, model.k, trials=300,
                                      seed=derive_seed(cfg.seed, 55))
    return {"median_w": rep.median_w, "median_band": list(rep.median_band),
            "tail_checks": rep.tail_checks, "ok": bool(rep.ok)}


CHECKERS = {
    "decomposition_residual": _check_decomposition,
    "smoothness_check": _check_smoothness,
    "validate_assumptions": _check_assumptions,
    "tv_exact": _check_tv,
    "stability_bound_check": _check_stability,
    "init_scaling_probe": _check_init_probe,
}


def cmd_verify(cfg: ExperimentConfig) -> int:
    print(f"== ojak verify: {len(cfg.checkers)} checker(s), seed = {cfg.seed} ==")
    results = []
    for name in cfg.checkers:
        out = CHECKERS[name](cfg)
        out["name"] = name
        results.append(out)
        print(f"  {name:24s} {'pass' if out['ok'] else 'FAIL'}")
    all_ok = all(r["ok"] for r in results)
    report = {"checkers": results, "ok": all_ok, "seed": cfg.seed,
              "generator": GENERATOR_ID, "config": cfg.echo}
    path = os.path.join(cfg.out_dir, "verify.json")
    _write_json(path, _jsonable(report))
    print(f"wrote {path}")
    return 0 if all_ok else 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    # bool first: Python bools are ints and would fall into the int branch
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return _json_float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


# ---------------------------------------------------------------------------
# sweep


def _instantiate(cfg: ExperimentConfig, axis: str, value: float):
    """(dist, schedule, T) for one point of the sweep."""
    dist_cfg = dict(cfg.echo["distribution"])
    dist, schedule, T = cfg.dist, cfg.schedule, cfg.T
    overrides = dict((cfg.echo.get("schedule_overrides") or {}))
    if axis == "T":
        T = int(value)
    elif axis == "delta":
        schedule = _build_schedule(dist.model, float(value), cfg.profile_kind, {})
    elif axis == "beta":
        schedule = dataclasses.replace(cfg.schedule, beta=float(value))
    else:
        if axis == "d":
            dist_cfg["d"] = int(value)
        elif axis == "k":
            dist_cfg["k"] = int(value)
        elif axis == "noise_scale":
            dist_cfg["noise_scale"] = float(value)
        dist = _build_distribution(dist_cfg, relaxed=False)
        schedule = _build_schedule(dist.model, cfg.delta, cfg.profile_kind, overrides)
    return dist, schedule, T


def cmd_sweep(cfg: ExperimentConfig) -> int:
    print(f"== ojak sweep over {cfg.axis}: {len(cfg.values)} value(s), "
          f"trials = {cfg.trials} ==")
    start = time.perf_counter()
    rows = []
    for value in cfg.values:
        dist, schedule, T = _instantiate(cfg, cfg.axis, value)
        col = _collect(dist, schedule, T, cfg.trials, cfg.seed,
                       cfg.warm_start_w, cfg.gamma, cfg.threads)
        final_dist = col.subspace_dist[:, -1]
        row = {
            "axis": cfg.axis,
            "value": float(value),
            "d": dist.model.d,
            "k": dist.model.k,
            "t0": schedule.t0,
            "beta": schedule.beta,
            "eta_T": schedule.eta(T),
            "median_dist": float(np.quantile(final_dist, 0.5)),
            "q25_dist": float(np.quantile(final_dist, 0.25)),
            "q75_dist": float(np.quantile(final_dist, 0.75)),
            "survival": float(col.good_event[:, -1].mean()),
        }
        rows.append(row)
        print(f"  {cfg.axis} = {value:g}: median dist {row['median_dist']:.6g}, "
              f"survival {row['survival']:.3f}")

    slope = None
    if cfg.axis == "T":
        pts = [(float(v) - r["t0"], r["median_dist"])
               for v, r in zip(cfg.values, rows)
               if float(v) > r["t0"] and r["median_dist"] > 0]
        if len(pts) >= 2:
            try:
                slope, _ = analysis.fit_power_slope([x for x, _ in pts],
                                                    [y for _, y in pts])
            except OjakError:
                slope = None
        if slope is not None:
            print(f"fitted slope of log median dist vs log(T - T0): {slope:+.3f}")

    wall = time.perf_counter() - start
    csv_path = os.path.join(cfg.out_dir, "sweep.csv")
    header = ("axis,value,d,k,t0,beta,eta_T,median_dist,q25_dist,"
              "q75_dist,survival")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for r in rows:
            fh.write(
                f"{r['axis']},{r['value']:.17g},{r['d']},{r['k']},{r['t0']},"
                f"{r['beta']:.17g},{r['eta_T']:.17g},{r['median_dist']:.17g},"
                f"{r['q25_dist']:.17g},{r['q75_dist']:.17g},"
                f"{r['survival']:.17g}\n")
    json_path = os.path.join(cfg.out_dir, "sweep_summary.json")
    _write_json(json_path, _jsonable({
        "axis": cfg.axis, "values": list(cfg.values), "rows": rows,
        "slope": slope, "seed": cfg.seed, "generator": GENERATOR_ID,
        "wall_clock_s": wall, "config": cfg.echo,
    }))
    print(f"wrote {csv_path} and {json_path} ({wall:.2f} s)")
    return 0


# ---------------------------------------------------------------------------
# oracle


def _oracle_lines():
    """Recompute the worked example values, cheapest first. Each entry is
    (label, value, note)."""
    out = []

    Z = np.array([[1.0, 1.0], [0.0, 1.0]])
    Q = gram_schmidt_qr(Z)
    out.append(("gram_schmidt (1,0),(1,1)", float(np.abs(np.abs(Q) - np.eye(2)).max()),
                "max deviation from identity up to sign"))

    dec = symmetric_eigendecompose(np.array([[0.0, 1.0], [1.0, 0.0]]))
    out.append(("eigenvalues of ((0,1),(1,0))",
                (float(dec.eigenvalues[0]), float(dec.eigenvalues[1])),
                "expect (1, -1)"))

    rng = make_generator(2024)
    G = rng.standard_normal((8, 8))
    S8 = 0.5 * (G + G.T)
    dec8 = symmetric_eigendecompose(S8)
    rec = dec8.eigenvectors @ np.diag(dec8.eigenvalues) @ dec8.eigenvectors.T
    out.append(("8x8 eigendecomposition reconstruction",
                float(spectral_norm(rec - S8) / spectral_norm(S8)),
                "relative error, expect <= 1e-12"))

    X = rng.standard_normal((5, 3))
    sv = singular_values(X)
    gram_eigs = np.sort(np.linalg.eigvalsh(X.T @ X))[::-1]
    out.append(("5x3 singular values vs Gram eigenvalues",
                float(np.abs(sv ** 2 - gram_eigs).max()), "expect ~ 1e-14"))

    theta = 0.3
    Qf = np.array([[math.cos(theta)], [math.sin(theta)]])
    e1 = np.array([[1.0], [0.0]])
    out.append(("subspace distance at angle 0.3",
                float(abs(subspace_distance(Qf, e1) - math.sin(theta))),
                "deviation from sin(0.3)"))

    A32 = rng.standard_normal((3, 2))
    dil = np.sort(symmetric_eigendecompose(hermitian_dilation(A32)).eigenvalues)
    want = np.sort(np.concatenate([singular_values(A32),
                                   -singular_values(A32), [0.0]]))
    out.append(("hermitian dilation spectrum vs +/- singular values",
                float(np.abs(dil - want).max()), "expect ~ 1e-14"))

    atoms = np.stack([0.5 * (B + B.T) for B in rng.standard_normal((3, 4, 4))])
    weights = np.array([0.2, 0.3, 0.5])
    dist3 = make_finite_support(atoms, weights, k=1)
    direct = sum(w * a for w, a in zip(weights, atoms))
    out.append(("3-atom mean vs direct weighted sum",
                float(np.abs(dist3.model.M - direct).max()), "expect <= 1e-12"))

    base = distribution_from_config(dict(DEFAULT_INSTANCE))
    rep = verify_assumptions(base, n_draws=500, seed=11)
    out.append(("max observed noise norm vs declared bound",
                (float(rep.max_noise_norm), float(rep.noise_bound)),
                "observed must not exceed declared"))

    two = make_finite_support(atoms[:2], np.array([0.5, 0.5]), k=1)
    ghost = ghost_couple(two, m=4, T0=2, seed=5)
    direct2 = np.einsum("j,jab->ab", ghost.weights, ghost.atoms)
    out.append(("ghost pool mean vs atom average",
                float(np.abs(ghost.model.M - direct2).max()), "expect <= 1e-12"))

    eta = 0.1
    D = np.diag([5.0, 1.0, 0.0])
    pdist = make_finite_support(D[None], np.array([1.0]), k=1)
    Zp = gram_schmidt_qr(np.array([[0.6], [0.8], [0.1]]))
    dists = []
    for _ in range(30):
        Zp = gram_schmidt_qr(Zp + eta * (D @ Zp))
        dists.append(subspace_distance(Zp, pdist.model.V))
    ratio = dists[-1] / dists[-2]
    out.append(("deterministic diag(5,1,0) contraction ratio",
                (float(ratio), (1 + eta) / (1 + 5 * eta)),
                "measured vs (1+eta)/(1+5 eta)"))

    prof = ConstantProfile.theoretical()
    t0_a = compute_schedule(base.model, base.model.d, 0.1, prof).t0
    t0_b = compute_schedule(base.model, base.model.d, 0.2, prof).t0
    out.append(("theoretical T0(0.1)/T0(0.2)", float(t0_a / t0_b),
                "expect ~ 4 up to log factors"))

    D2 = np.diag([5.0, 1.0])
    Z2 = gram_schmidt_qr(np.array([[0.6], [0.8]]))
    for _ in range(200):
        Z2 = gram_schmidt_qr(Z2 + eta * (D2 @ Z2))
    out.append(("diag(5,1) distance after 200 steps",
                float(subspace_distance(Z2, np.array([[1.0], [0.0]]))),
                "expect < 1e-8"))

    out.append(("epsilon(eta=0.1, M=1, default gamma)",
                analysis.epsilon_t(0.1, 1.0, DEFAULT_GAMMA),
                "0.2 (1 + sqrt(2) e) ~ 0.9692"))

    worst = 0.0
    dist6 = make_spiked_support(
        np.array([1.0, 0.8, 0.3, 0.25, 0.2, 0.1]), k=2, noise_scale=0.4,
        n_pairs=2, seed=6)
    g6 = make_generator(61)
    for _ in range(100):
        S = 0.5 * g6.standard_normal((4, 2))
        Zr = dist6.model.V + dist6.model.U @ S
        resid, _ = analysis.decomposition_residual(Zr, dist6.sample(g6), 0.07,
                                                   dist6.model)
        worst = max(worst, resid)
    out.append(("decomposition residual, 100 random 6x6 instances", worst,
                "expect <= 1e-10"))

    mats = [np.diag([1.0, 0.0]), np.diag([0.0, 2.0])]
    counter = {"i": 0}

    def two_point(_rng):
        X = mats[counter["i"] % 2]
        counter["i"] += 1
        return X

    est, _ = analysis.lp_norm_estimate(two_point, 2.0, 2, seed=0)
    out.append(("two-point Schatten-2 mean", (est, math.sqrt(2.5)),
                "estimate vs sqrt(2.5)"))

    Xs = np.diag([2.0, 1.0])
    Ys = np.array([[0.0, 1.0], [1.0, 0.0]])

    def pythag(_rng):
        return Xs, Ys, np.zeros((2, 2))

    srep = analysis.smoothness_check(pythag, 2.0, None, trials=10)
    out.append(("Pythagorean margin at p = 2", srep.margin, "expect ~ 0"))

    tv = analysis.tv_exact(analysis.ghost_tuple_law([0.5, 0.5], 4, 2),
                           analysis.iid_tuple_law([0.5, 0.5], 2))
    out.append(("ghost TV, fair support, m = 4, T0 = 2", (tv, 0.5),
                "exact value vs T0^2/(2m) cap"))

    g1 = make_generator(17)
    draws = np.abs(g1.standard_normal(4000))
    emp = float(np.mean(1.0 / draws >= 60.0))
    out.append(("P[1/|g| >= 60] at delta = 0.1", emp, "expect <= 0.1"))

    probe = analysis.init_scaling_probe(64, 4, trials=500, seed=2)
    out.append(("initial ||W_0|| median at d = 64, k = 4",
                (probe.median_w, probe.median_band), "median vs allowed band"))

    out.append(("phase-two envelope at start", analysis.phase2_highprob_bound(5.0, 1),
                "expect 2e"))
    out.append(("offline bound, d = 2, delta = 2/e, T = 4",
                analysis.bernstein_offline_bound(1.0, 1.0, 2, 2.0 / math.e, 4),
                "expect 0.5"))
    return out


def cmd_oracle(cfg: ExperimentConfig) -> int:
    print("== ojak oracle: worked example values, recomputed from scratch ==")
    for label, value, note in _oracle_lines():
        if isinstance(value, tuple):
            rendered = ", ".join(
                f"{v:.10g}" if isinstance(v, float) else repr(v) for v in value)
            rendered = f"({rendered})"
        else:
            rendered = f"{value:.10g}"
        print(f"  {label:52s} {rendered:28s} {note}")
    print("suite-scale quantities (survival fractions, decay slopes, "
          "baseline comparisons) are exercised by the test suite instead")
    return 0


# ---------------------------------------------------------------------------
# entry point


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "sweep": cmd_sweep,
            "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ojak",
        description="Streaming k-PCA benchmark and verification harness")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "Monte Carlo suite on one configured instance",
        "verify": "numerical checkers on the configured instance",
        "sweep": "one-axis parameter sweep",
        "oracle": "recompute worked example values and print them",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name])
        sp.add_argument("--config", default=None, metavar="PATH",
                        help="JSON config file")
        sp.add_argument("--seed", type=int, default=None, metavar="U64",
                        help="base seed (overrides config and OJAK_SEED)")
        sp.add_argument("--threads", type=int, default=None, metavar="N",
                        help="worker processes for finite-support suites")
        sp.add_argument("--out", default=None, metavar="DIR",
                        help="output directory")
        sp.add_argument("--profile", choices=("theoretical", "practical"),
                        default=None, help="schedule constant profile")
        if name == "sweep":
            sp.add_argument("--axis", default=None, choices=SWEEP_AXES)
            sp.add_argument("--values", default=None,
                            help="comma-separated sweep values")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OjakError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
