"""Command-line front end: scenario-driven pipeline runs and experiments.

Subcommands: ``predict`` (prediction-error trials), ``plan`` (path stage),
``speed`` (ST stage), ``intercept`` (full closed loop), ``bench``
(per-stage timings). Exit codes: 0 success, 1 infeasible result, 2 usage
or scenario-file error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bezier import max_acceleration, rms_acceleration
from .errors import InterceptorError, ScenarioError
from .hybrid_astar import path_length
from .plots import (geometry_csv, paths_csv, plot_plan, plot_speed, plot_st,
                    plot_trajectory)
from .prediction import ObservationBuffer, fit_polynomial, predict_position
from .scenario_io import load_scenario
from .simulate import (NoiseModel, Scenario, TargetModel, check_collision,
                       log_csv, observe, observe_window, plan_stages,
                       run_interception, simulate_target, summary_csv,
                       timings_csv)
from .speed_opt import polyline_rms_acceleration, profile_samples_csv
from .st_graph import st_snapshot_csv

_STAGE_ERRORS = InterceptorError

_TABLE1_TARGETS = {
    "uniform": lambda: TargetModel(np.array([0.0, 0.0, 3.0, 0.0]),
                                   None, 1.0),
    "curve": lambda: TargetModel(np.array([0.0, 0.0, 1.5, 0.0]),
                                 np.array([0.0, 0.0, 0.0, 0.4]), 1.0),
}


def prediction_trials(target: TargetModel, trials: int, base_seed: int,
                      sigma1: float = 0.1, sigma2: float = 0.1,
                      n_obs: int = 15, degree: int = 2,
                      horizons: tuple = (5.0, 10.0, 15.0)) -> list:
    """Mean relative prediction error per horizon over noisy trials.

    The error is normalized by the arc length the target covers over the
    horizon, so it reads as a fraction of the motion being extrapolated.
    """
    dt = target.dt
    t_last = (n_obs - 1) * dt
    max_steps = int(math.ceil(max(horizons) / dt))
    truth = simulate_target(target, n_obs - 1 + max_steps)
    arcs = np.concatenate(
        [[0.0], np.cumsum(np.hypot(*np.diff(truth[:, :2], axis=0).T))])
    sums = {h: 0.0 for h in horizons}
    for trial in range(trials):
        noise = NoiseModel(sigma1, sigma2, base_seed + trial)
        buf = ObservationBuffer(n_obs)
        for k in range(n_obs):
            buf.append(k * dt, observe(truth[k], noise, k))
        traj = fit_polynomial(buf, degree)
        for h in horizons:
            steps = int(round(h / dt))
            row = n_obs - 1 + steps
            px, py = predict_position(traj, t_last + h)
            err = math.hypot(px - truth[row, 0], py - truth[row, 1])
            denom = arcs[row] - arcs[n_obs - 1]
            sums[h] += err / denom
    return [(h, sums[h] / trials) for h in horizons]


def build_parser() -> tuple:
    """Main parser plus a name->subparser map (for help rendering)."""
    parser = argparse.ArgumentParser(
        prog="interceptor",
        description="Plan and simulate the interception of a moving "
                    "target with a car-like robot.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    subs = {}

    def add(name, help_text, scenario_required=True):
        sp = sub.add_parser(name, help=help_text, description=help_text)
        if scenario_required:
            sp.add_argument("scenario", help="scenario file (YAML)")
        else:
            sp.add_argument("scenario", nargs="?", default=None,
                            help="scenario file (YAML); omit to use the "
                                 "built-in targets")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the scenario's noise seed")
        sp.add_argument("--out", default=None,
                        help="output directory (default runs/<command>)")
        subs[name] = sp
        return sp

    sp = add("predict", "run repeated prediction trials and report the "
             "mean relative error per horizon", scenario_required=False)
    sp.add_argument("--mode", choices=("uniform", "curve"),
                    default="uniform",
                    help="built-in target motion when no scenario is given")
    sp.add_argument("--trials", type=int, default=200,
                    help="number of noisy trials")

    add("plan", "run the path stage only and emit the coarse and "
        "smoothed paths")

    add("speed", "run the pipeline through speed optimization and emit "
        "ST-plane and profile artifacts")

    sp = add("intercept", "run the full closed loop and emit the "
             "interception log")
    sp.add_argument("--replan", choices=("on", "off"), default="off",
                    help="replan every 2 s during execution")
    sp.add_argument("--track", choices=("playback", "pursuit"),
                    default=None,
                    help="override the scenario's tracking mode")

    sp = add("bench", "time every pipeline stage over repeated runs")
    sp.add_argument("--repeat", type=int, default=5,
                    help="number of timed repetitions")

    return parser, subs


def full_help_text() -> str:
    """Top-level help plus each subcommand's help at a fixed width."""
    old = os.environ.get("COLUMNS")
    os.environ["COLUMNS"] = "80"
    try:
        parser, subs = build_parser()
        parts = [parser.format_help()]
        for name in ("predict", "plan", "speed", "intercept", "bench"):
            parts.append("\n" + subs[name].format_help())
        return "".join(parts)
    finally:
        if old is None:
            del os.environ["COLUMNS"]
        else:
            os.environ["COLUMNS"] = old


def _out_dir(args) -> Path:
    out = Path(args.out) if args.out else Path("runs") / args.command
    (out / "plots").mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> Scenario:
    scn = load_scenario(args.scenario)
    if args.seed is not None:
        scn = replace(scn, noise=NoiseModel(scn.noise.sigma1,
                                            scn.noise.sigma2, args.seed))
    return scn


def _first_plan(scn: Scenario, uniform: bool = False):
    """The deterministic first planning pass of a run."""
    obs_span = (scn.n_observations - 1) * scn.target.dt
    _, buf, _ = observe_window(scn)
    return plan_stages(scn, buf, obs_span + scn.horizon, scn.start, scn.v0,
                       scn.a0, scn.horizon, {}, uniform=uniform)


def _cmd_predict(args) -> int:
    if args.scenario is not None:
        scn = _load(args)
        target = scn.target
        label = Path(args.scenario).stem
        sigma1, sigma2 = scn.noise.sigma1, scn.noise.sigma2
        n_obs, degree = scn.n_observations, scn.degree
        seed = scn.noise.seed if args.seed is None else args.seed
    else:
        target = _TABLE1_TARGETS[args.mode]()
        label = args.mode
        sigma1 = sigma2 = 0.1
        n_obs, degree = 15, 2
        seed = 0 if args.seed is None else args.seed
    rows = prediction_trials(target, args.trials, seed, sigma1, sigma2,
                             n_obs, degree)
    out = _out_dir(args)
    lines = ["mode,horizon_s,mean_relative_error"]
    for h, err in rows:
        lines.append(f"{label},{h:.9g},{err:.9g}")
        print(f"{label}: horizon {h:g} s -> mean relative error "
              f"{100.0 * err:.2f}%")
    (out / "summary.csv").write_text("\n".join(lines) + "\n",
                                     encoding="utf-8")
    return 0


def _cmd_plan(args) -> int:
    scn = _load(args)
    out = _out_dir(args)
    try:
        arts = _first_plan(scn, uniform=True)
    except _STAGE_ERRORS as err:
        print(f"planning failed: {err}", file=sys.stderr)
        return 1
    paths_text = paths_csv(arts.coarse, arts.smoothed.points)
    geo_text = geometry_csv(scn.world)
    (out / "paths.csv").write_text(paths_text, encoding="utf-8")
    (out / "geometry.csv").write_text(geo_text, encoding="utf-8")
    (out / "plots" / "plan.svg").write_bytes(plot_plan(paths_text,
                                                       geo_text))
    print(f"coarse length {path_length(arts.coarse):.3f} m, smoothed "
          f"length {arts.smoothed.length:.3f} m -> {out}")
    return 0


def _cmd_speed(args) -> int:
    scn = _load(args)
    out = _out_dir(args)
    try:
        arts = _first_plan(scn)
    except _STAGE_ERRORS as err:
        print(f"speed planning failed: {err}", file=sys.stderr)
        return 1
    st_text = st_snapshot_csv(arts.st_obstacles, arts.reference,
                              arts.corridor, arts.st_grid)
    profile_text = profile_samples_csv(arts.profile)
    (out / "st_graph.csv").write_text(st_text, encoding="utf-8")
    (out / "profile.csv").write_text(profile_text, encoding="utf-8")
    (out / "plots" / "st.svg").write_bytes(plot_st(st_text))
    (out / "plots" / "speed.svg").write_bytes(plot_speed(profile_text))
    grid = arts.st_grid
    ref_rms = polyline_rms_acceleration(grid.times, arts.reference.stations)
    print(f"profile rms accel {rms_acceleration(arts.profile):.4f}, "
          f"max accel {max_acceleration(arts.profile):.4f}, DP polyline "
          f"rms {ref_rms:.4f} -> {out}")
    return 0


def _cmd_intercept(args) -> int:
    scn = _load(args)
    if args.replan == "on":
        scn = replace(scn, replan_period=2.0)
    if args.track is not None:
        scn = replace(scn, track=args.track)
    out = _out_dir(args)
    log = run_interception(scn)
    log_text = log_csv(log)
    geo_text = geometry_csv(scn.world)
    (out / "log.csv").write_text(log_text, encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(log), encoding="utf-8")
    (out / "timings.csv").write_text(timings_csv(log), encoding="utf-8")
    (out / "geometry.csv").write_text(geo_text, encoding="utf-8")
    if log.outcome == "infeasible":
        print(f"outcome: infeasible (stage {log.failed_stage}) -> {out}")
        return 1
    arts = _first_plan(scn)
    st_text = st_snapshot_csv(arts.st_obstacles, arts.reference,
                              arts.corridor, arts.st_grid)
    profile_text = profile_samples_csv(arts.profile)
    paths_text = paths_csv(arts.coarse, arts.smoothed.points)
    (out / "st_graph.csv").write_text(st_text, encoding="utf-8")
    (out / "profile.csv").write_text(profile_text, encoding="utf-8")
    (out / "paths.csv").write_text(paths_text, encoding="utf-8")
    plots = out / "plots"
    (plots / "trajectory.svg").write_bytes(plot_trajectory(log_text,
                                                           geo_text))
    (plots / "plan.svg").write_bytes(plot_plan(paths_text, geo_text))
    (plots / "st.svg").write_bytes(plot_st(st_text))
    (plots / "speed.svg").write_bytes(plot_speed(profile_text))
    report = check_collision(log, scn)
    print(f"outcome: {log.outcome}, miss {log.miss_distance:.3f} m, "
          f"{report.violations.shape[0]} collision violations -> {out}")
    return 0


_BENCH_STAGES = (("Prediction", ("prediction",)),
                 ("Path-Planner", ("path", "smoothing")),
                 ("Speed-Planner", ("speed",)))


def _cmd_bench(args) -> int:
    scn = _load(args)
    out = _out_dir(args)
    if args.repeat < 1:
        print("--repeat must be >= 1", file=sys.stderr)
        return 2
    best: dict = {}
    for _ in range(args.repeat):
        timings: dict = {}
        tic = time.perf_counter()
        try:
            _first_plan_timed(scn, timings)
        except _STAGE_ERRORS as err:
            print(f"pipeline failed: {err}", file=sys.stderr)
            return 1
        timings["total"] = time.perf_counter() - tic
        for key, val in timings.items():
            best[key] = min(best.get(key, math.inf), val)
    lines = ["stage,best_ms"]
    print(f"{'stage':<14}{'best [ms]':>12}")
    for label, keys in _BENCH_STAGES + (("Total", ("total",)),):
        ms = 1e3 * sum(best.get(k, 0.0) for k in keys)
        lines.append(f"{label},{ms:.3f}")
        print(f"{label:<14}{ms:>12.3f}")
    (out / "bench.csv").write_text("\n".join(lines) + "\n",
                                   encoding="utf-8")
    return 0


def _first_plan_timed(scn: Scenario, timings: dict):
    obs_span = (scn.n_observations - 1) * scn.target.dt
    _, buf, _ = observe_window(scn)
    return plan_stages(scn, buf, obs_span + scn.horizon, scn.start,
                       scn.v0, scn.a0, scn.horizon, timings)


def run_command(argv) -> int:
    parser, _ = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"predict": _cmd_predict, "plan": _cmd_plan,
               "speed": _cmd_speed, "intercept": _cmd_intercept,
               "bench": _cmd_bench}[args.command]
    try:
        return handler(args)
    except ScenarioError as err:
        print(str(err), file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))
