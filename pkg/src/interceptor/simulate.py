"""Closed-loop interception simulation.

Timeline convention: the robot observes the target for ``L`` samples at the
target's control interval, then plans once and executes for ``horizon``
seconds. Execution time starts at zero at the planning instant, so logged
times run 0..T and observation timestamps are negative (looking back).
Obstacle polygons are positioned at the planning instant; the world is
queried at execution time during rollout.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bezier import SpeedProfile, uniform_profile
from .errors import (DomainError, EmptyCorridorError, GoalBlockedError,
                     NoFeasibleProfileError, NoPathError, QPInfeasibleError,
                     QPMaxIterationsError, SingularFitError,
                     StartBlockedError)
from .geometry import (RobotParams, RobotState, WorldMap, propagate_state,
                       signed_clearance)
from .hybrid_astar import GridSpec, plan_path
from .prediction import ObservationBuffer, fit_polynomial, interception_goal
from .smoothing import PathPolyline, SmootherConfig, smooth
from .speed_opt import SpeedOptConfig, optimize_speed
from .st_graph import (DPCostConfig, STGrid, STObstacle, build_corridors,
                       dp_search, project_obstacles)

_OUTCOMES = ("intercepted", "missed", "collided", "infeasible")
_TRACK_MODES = ("playback", "pursuit")
_TIME_EPS = 1e-9


def target_transition(dt: float) -> tuple[np.ndarray, np.ndarray]:
    """State matrices of the linear target: position integrates velocity by
    dt; controls enter the velocity block only (position rows are zero)."""
    if not (math.isfinite(dt) and dt > 0.0):
        raise DomainError("dt must be positive and finite")
    a_mat = np.eye(4)
    a_mat[0, 2] = dt
    a_mat[1, 3] = dt
    b_mat = np.zeros((4, 4))
    b_mat[2, 2] = 1.0
    b_mat[3, 3] = 1.0
    return a_mat, b_mat


@dataclass(frozen=True)
class TargetModel:
    """Initial state (x, y, xdot, ydot), per-step controls, and interval."""

    x0: np.ndarray
    controls: Optional[np.ndarray] = None
    dt: float = 1.0

    def __post_init__(self) -> None:
        x0 = np.ascontiguousarray(self.x0, dtype=float)
        if x0.shape != (4,) or not np.all(np.isfinite(x0)):
            raise DomainError("x0 must be a finite (x, y, xdot, ydot) state")
        if not (math.isfinite(self.dt) and self.dt > 0.0):
            raise DomainError("dt must be positive and finite")
        raw = self.controls
        if raw is None:
            ctrl = np.zeros((0, 4))
        else:
            ctrl = np.ascontiguousarray(raw, dtype=float)
            if ctrl.ndim == 1:
                ctrl = ctrl.reshape(1, 4) if ctrl.size == 4 else ctrl
            if ctrl.ndim != 2 or ctrl.shape[1] != 4:
                raise DomainError("controls must be rows of 4 components")
            if not np.all(np.isfinite(ctrl)):
                raise DomainError("controls must be finite")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "controls", ctrl)
        object.__setattr__(self, "dt", float(self.dt))

    def control_at(self, k: int) -> np.ndarray:
        """Step-k control; the last row extends forever, none means zero."""
        if self.controls.shape[0] == 0:
            return np.zeros(4)
        return self.controls[min(k, self.controls.shape[0] - 1)]


def simulate_target(model: TargetModel, steps: int) -> np.ndarray:
    """States (steps+1, 4) of the exact linear recursion, row 0 = x0."""
    if steps < 1:
        raise DomainError("steps must be >= 1")
    a_mat, b_mat = target_transition(model.dt)
    states = np.empty((steps + 1, 4))
    states[0] = model.x0
    for k in range(steps):
        states[k + 1] = a_mat @ states[k] + b_mat @ model.control_at(k)
    return states


def target_position(states: np.ndarray, dt: float, t: float
                    ) -> tuple[float, float]:
    """Exact position at continuous time ``t``: within a control step the
    target moves linearly at the step's start velocity."""
    if t < -_TIME_EPS:
        raise DomainError("t must be non-negative")
    k = min(int(math.floor(t / dt + _TIME_EPS)), states.shape[0] - 1)
    frac = t - k * dt
    if k >= states.shape[0] - 1 and frac > dt + _TIME_EPS:
        raise DomainError("t beyond the simulated states")
    x = states[k, 0] + states[k, 2] * frac
    y = states[k, 1] + states[k, 3] * frac
    return float(x), float(y)


@dataclass(frozen=True)
class NoiseModel:
    """Independent Gaussian position noise with a deterministic stream."""

    sigma1: float
    sigma2: float
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("sigma1", "sigma2"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0.0):
                raise DomainError(f"{name} must be >= 0")
            object.__setattr__(self, name, v)
        if not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise DomainError("seed must be a non-negative integer")
        object.__setattr__(self, "seed", int(self.seed))


def observe(truth_state: np.ndarray, noise: NoiseModel, k: int
            ) -> np.ndarray:
    """Noisy position observation at stream index ``k`` (only position is
    observed; the draw is a pure function of (seed, k))."""
    if k < 0:
        raise DomainError("observation index must be >= 0")
    rng = np.random.default_rng([noise.seed, k])
    e_x = rng.normal(0.0, noise.sigma1)
    e_y = rng.normal(0.0, noise.sigma2)
    return np.array([truth_state[0] + e_x, truth_state[1] + e_y])


@dataclass(frozen=True)
class Scenario:
    """Everything one closed-loop run needs."""

    world: WorldMap
    start: tuple
    robot: RobotParams
    target: TargetModel
    noise: NoiseModel
    horizon: float
    n_observations: int = 15
    degree: int = 3
    capture_radius: float = 0.3
    v0: float = 0.0
    a0: float = 0.0
    grid: Optional[GridSpec] = None
    smoother: Optional[SmootherConfig] = None
    dp_cost: Optional[DPCostConfig] = None
    speed_cfg: Optional[SpeedOptConfig] = None
    st_nt: int = 100
    st_ns: int = 60
    n_corridor_segments: int = 5
    projection_width: float = 0.0
    sim_dt: float = 0.01
    track: str = "playback"
    replan_period: Optional[float] = None

    def __post_init__(self) -> None:
        start = tuple(float(v) for v in self.start)
        if len(start) != 3 or not all(math.isfinite(v) for v in start):
            raise DomainError("start must be a finite (x, y, theta) pose")
        object.__setattr__(self, "start", start)
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise DomainError("horizon must be positive")
        if self.n_observations < 2:
            raise DomainError("need at least 2 observations")
        if self.degree < 0 or self.degree >= self.n_observations:
            raise DomainError("degree must satisfy 0 <= degree < L")
        if not (self.capture_radius > 0.0):
            raise DomainError("capture_radius must be positive")
        if not (0.0 <= self.v0 <= self.robot.max_speed):
            raise DomainError("v0 must lie in [0, max_speed]")
        if not math.isfinite(self.a0):
            raise DomainError("a0 must be finite")
        if self.st_nt < 1 or self.st_ns < 1:
            raise DomainError("st grid shape must be positive")
        if self.n_corridor_segments < 1:
            raise DomainError("need at least one corridor segment")
        if self.projection_width < 0.0:
            raise DomainError("projection_width must be >= 0")
        if not (math.isfinite(self.sim_dt) and self.sim_dt > 0.0):
            raise DomainError("sim_dt must be positive")
        if self.track not in _TRACK_MODES:
            raise DomainError(f"track must be one of {_TRACK_MODES}")
        if self.replan_period is not None and not (self.replan_period > 0.0):
            raise DomainError("replan_period must be positive when set")
        if self.grid is None:
            object.__setattr__(self, "grid",
                               GridSpec.for_params(self.robot))
        if self.smoother is None:
            object.__setattr__(self, "smoother",
                               SmootherConfig(kappa_max=self.robot.max_curvature))
        if self.dp_cost is None:
            object.__setattr__(self, "dp_cost",
                               DPCostConfig(v_max=self.robot.max_speed))
        if self.speed_cfg is None:
            object.__setattr__(self, "speed_cfg", SpeedOptConfig(
                v_max=self.robot.max_speed,
                a_min=-self.robot.max_accel, a_max=self.robot.max_accel,
                a_lat_max=self.robot.lateral_accel_limit))
        if not self.world.in_bounds((start[0], start[1])):
            raise DomainError("start pose is outside the map")
        d, _ = signed_clearance(self.world, (start[0], start[1]), 0.0)
        if d <= 0.0:
            raise DomainError("start pose is inside an obstacle at t=0")


@dataclass(frozen=True)
class InterceptionLog:
    """Time series and verdict of one closed-loop run.

    ``timings`` holds wall-clock stage durations; it is excluded from the
    serialized log so identical scenarios produce identical bytes.
    """

    times: np.ndarray
    robot: np.ndarray
    target: np.ndarray
    observations: np.ndarray
    coarse_path: np.ndarray
    smoothed_path: np.ndarray
    profile: Optional[SpeedProfile]
    clearances: np.ndarray
    outcome: str
    miss_distance: float
    capture_time: Optional[float]
    failed_stage: Optional[str]
    timings: dict

    def __post_init__(self) -> None:
        if self.outcome not in _OUTCOMES:
            raise DomainError(f"outcome must be one of {_OUTCOMES}")
        times = np.ascontiguousarray(self.times, dtype=float)
        if times.size >= 2:
            steps = np.diff(times)
            if float(np.abs(steps - steps[0]).max()) > 1e-9:
                raise DomainError("log time stamps must be uniform")
        n = times.size
        robot = np.ascontiguousarray(self.robot, dtype=float)
        target = np.ascontiguousarray(self.target, dtype=float)
        clear = np.ascontiguousarray(self.clearances, dtype=float).ravel()
        if robot.shape != (n, 4):
            raise DomainError("robot rows must be (x, y, theta, v)")
        if target.shape != (n, 2):
            raise DomainError("target rows must be (x, y)")
        if clear.size != n:
            raise DomainError("need one clearance per step")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "robot", robot)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "clearances", clear)


def log_csv(log: InterceptionLog) -> str:
    """Per-step CSV (deterministic; excludes wall-clock timings)."""
    lines = ["t,robot_x,robot_y,robot_theta,robot_v,target_x,target_y,"
             "clearance"]
    for i, t in enumerate(log.times):
        rx, ry, rth, rv = log.robot[i]
        tx, ty = log.target[i]
        lines.append(f"{t:.9g},{rx:.9g},{ry:.9g},{rth:.9g},{rv:.9g},"
                     f"{tx:.9g},{ty:.9g},{log.clearances[i]:.9g}")
    return "\n".join(lines) + "\n"


def summary_csv(log: InterceptionLog) -> str:
    """One-row run summary (deterministic; timings live in timings_csv)."""
    cap = "" if log.capture_time is None else f"{log.capture_time:.9g}"
    stage = log.failed_stage or ""
    energy = log_energy_metric(log)
    e_txt = "" if math.isnan(energy) else f"{energy:.9g}"
    miss = "" if math.isnan(log.miss_distance) else f"{log.miss_distance:.9g}"
    return ("outcome,miss_distance,capture_time,energy,failed_stage\n"
            f"{log.outcome},{miss},{cap},{e_txt},{stage}\n")


def timings_csv(log: InterceptionLog) -> str:
    """Per-stage wall-clock seconds (not covered by determinism)."""
    lines = ["stage,seconds"]
    for name, seconds in log.timings.items():
        lines.append(f"{name},{seconds:.6f}")
    return "\n".join(lines) + "\n"


def log_energy_metric(log: InterceptionLog) -> float:
    """Discrete sqrt(1/T * sum sdd^2 dt) from the logged speed series,
    central differences on the interior samples."""
    if log.times.size < 3:
        return math.nan
    dt = float(log.times[1] - log.times[0])
    v = log.robot[:, 3]
    accel = (v[2:] - v[:-2]) / (2.0 * dt)
    horizon = float(log.times[-1] - log.times[0])
    return math.sqrt(float(np.sum(accel * accel)) * dt / horizon)


def _station_pose(pts: np.ndarray, cum: np.ndarray, s: float
                  ) -> tuple[float, float, float]:
    s = min(max(s, 0.0), float(cum[-1]))
    j = min(int(np.searchsorted(cum, s, side="right")) - 1, cum.size - 2)
    j = max(j, 0)
    seg = pts[j + 1] - pts[j]
    length = float(np.hypot(seg[0], seg[1]))
    frac = 0.0 if length <= 0.0 else (s - cum[j]) / length
    x = pts[j, 0] + seg[0] * frac
    y = pts[j, 1] + seg[1] * frac
    return float(x), float(y), math.atan2(seg[1], seg[0])


def _playback_rollout(smoothed: PathPolyline, profile: SpeedProfile,
                      times: np.ndarray) -> np.ndarray:
    pts = smoothed.points
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    rows = np.empty((times.size, 4))
    for i, t in enumerate(times):
        s, v, _ = profile.eval(min(t, profile.T))
        x, y, theta = _station_pose(pts, cum, s)
        rows[i] = (x, y, theta, v)
    return rows


def _pursuit_rollout(smoothed: PathPolyline, profile: SpeedProfile,
                     times: np.ndarray, start: tuple, params: RobotParams
                     ) -> np.ndarray:
    """Kinematic pure pursuit of the space-time reference."""
    pts = smoothed.points
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
    state = RobotState(start[0], start[1], start[2], 0.0,
                       profile.eval(0.0)[1])
    rows = np.empty((times.size, 4))
    rows[0] = (state.x, state.y, state.theta, state.v)
    for i in range(1, times.size):
        dt = float(times[i] - times[i - 1])
        t_prev = float(times[i - 1])
        s_ref, v_ref, _ = profile.eval(min(t_prev, profile.T))
        lead = max(2.0 * params.wheelbase, 0.6 * max(state.v, 0.1))
        gx, gy, _ = _station_pose(pts, cum, s_ref + lead)
        dx, dy = gx - state.x, gy - state.y
        dist = math.hypot(dx, dy)
        alpha = math.atan2(dy, dx) - state.theta
        alpha = math.atan2(math.sin(alpha), math.cos(alpha))
        if dist > 1e-6:
            delta_des = math.atan2(2.0 * params.wheelbase * math.sin(alpha),
                                   dist)
        else:
            delta_des = 0.0
        delta_des = min(max(delta_des, -params.max_steer), params.max_steer)
        omega = (delta_des - state.delta) / dt
        accel = (v_ref - state.v) / dt
        accel = min(max(accel, -params.max_accel), params.max_accel)
        state = propagate_state(state, omega, accel, dt, params)
        rows[i] = (state.x, state.y, state.theta, state.v)
    return rows


def _empty_log(scn: Scenario, stage: str, observations: np.ndarray,
               coarse: np.ndarray, smoothed: np.ndarray,
               timings: dict) -> InterceptionLog:
    return InterceptionLog(
        times=np.zeros(0), robot=np.zeros((0, 4)), target=np.zeros((0, 2)),
        observations=observations, coarse_path=coarse,
        smoothed_path=smoothed, profile=None, clearances=np.zeros(0),
        outcome="infeasible", miss_distance=math.nan, capture_time=None,
        failed_stage=stage, timings=timings)


@dataclass(frozen=True)
class PlanArtifacts:
    """Every intermediate of one planning pass, for inspection and plots.

    The ST-stage fields are None when the pass used the uniform baseline.
    """

    traj: object
    goal: tuple
    coarse: list
    smoothed: PathPolyline
    st_grid: object
    st_obstacles: object
    reference: object
    corridor: object
    profile: SpeedProfile


def _padded_st_obstacles(st_obs, st_grid) -> list:
    """Obstacles grown by one grid cell in time and station for the DP
    pass, so the piecewise-linear reference clears true obstacle corners
    that fall between grid times instead of grazing them."""
    pad_t = st_grid.T / st_grid.nt
    pad_s = st_grid.s_m / st_grid.ns
    out = []
    for ob in st_obs:
        v = ob.vertices.copy()
        span = max(ob.t_max - ob.t_min, 1e-9)
        slope = float(np.abs(np.diff(v[:, 1])).max()) / span
        grow_s = pad_s + slope * pad_t
        t_mid = 0.5 * (ob.t_min + ob.t_max)
        s_mid = float(v[:, 1].mean())
        v[:, 0] += np.where(v[:, 0] > t_mid, pad_t, -pad_t)
        v[:, 1] += np.where(v[:, 1] > s_mid, grow_s, -grow_s)
        out.append(STObstacle(v, source=ob.source))
    return out


def _corridor_knots(st_obs, horizon: float, n_segments: int) -> np.ndarray:
    """Uniform knots plus the obstacle entry/exit times, so each corridor
    segment sees a stationary free band and its bounding lines can fit."""
    knots = list(np.linspace(0.0, horizon, n_segments + 1))
    for ob in st_obs:
        for t in (ob.t_min, ob.t_max):
            if 1e-6 < t < horizon - 1e-6:
                knots.append(float(t))
    knots.sort()
    merged = [knots[0]]
    for t in knots[1:]:
        if t - merged[-1] > 1e-6:
            merged.append(t)
    merged[-1] = horizon
    return np.array(merged)


def plan_stages(scn: Scenario, buf: ObservationBuffer, goal_time_abs: float,
                start_pose: tuple, v0: float, a0: float, exec_span: float,
                timings: dict, uniform: bool = False) -> PlanArtifacts:
    """Fit, search, smooth, and speed-optimize one plan; raises the stage
    error annotated via the ``stage`` attribute on failure. With
    ``uniform`` the DP/QP stack is skipped in favor of a constant-speed
    ramp over the smoothed path."""
    stage = "prediction"
    try:
        tic = time.perf_counter()
        traj = fit_polynomial(buf, scn.degree)
        goal = interception_goal(traj, goal_time_abs)
        timings["prediction"] = timings.get("prediction", 0.0) + (
            time.perf_counter() - tic)
        stage = "path"
        tic = time.perf_counter()
        coarse = plan_path(scn.world, start_pose, goal, scn.grid, scn.robot)
        timings["path"] = timings.get("path", 0.0) + (
            time.perf_counter() - tic)
        stage = "smoothing"
        tic = time.perf_counter()
        smoothed = smooth(PathPolyline.from_waypoints(coarse), scn.world,
                          scn.smoother)
        timings["smoothing"] = timings.get("smoothing", 0.0) + (
            time.perf_counter() - tic)
        if uniform:
            return PlanArtifacts(traj, goal, coarse, smoothed, None, None,
                                 None, None,
                                 uniform_profile(smoothed.length, exec_span))
        stage = "speed"
        tic = time.perf_counter()
        # station resolution: scn.st_ns is a floor; long paths need finer
        # cells so several lattice steps fit in one time step under the
        # speed cap, otherwise the terminal station is unreachable
        ns = max(scn.st_ns, int(math.ceil(
            4.0 * smoothed.length * scn.st_nt
            / (scn.dp_cost.v_max * exec_span))))
        st_grid = STGrid(exec_span, smoothed.length, scn.st_nt, ns)
        st_obs = project_obstacles(smoothed, scn.world.obstacles,
                                   exec_span, scn.projection_width)
        profile_ref = dp_search(st_grid, _padded_st_obstacles(st_obs,
                                                              st_grid),
                                scn.dp_cost, v0)
        corridor = build_corridors(
            profile_ref, st_obs, st_grid,
            t_knots=_corridor_knots(st_obs, exec_span,
                                    scn.n_corridor_segments))
        profile = optimize_speed(corridor, profile_ref, v0, a0,
                                 scn.speed_cfg, path=smoothed)
        timings["speed"] = timings.get("speed", 0.0) + (
            time.perf_counter() - tic)
    except (SingularFitError, StartBlockedError, GoalBlockedError,
            NoPathError, DomainError, NoFeasibleProfileError,
            EmptyCorridorError, QPInfeasibleError,
            QPMaxIterationsError) as err:
        err.stage = stage
        raise
    return PlanArtifacts(traj, goal, coarse, smoothed, st_grid, st_obs,
                         profile_ref, corridor, profile)


def observe_window(scn: Scenario) -> tuple:
    """Truth states, filled observation buffer, and logged observation rows
    for the pre-execution window (timestamps relative to the plan instant).
    """
    dt_target = scn.target.dt
    n_obs = scn.n_observations
    obs_span = (n_obs - 1) * dt_target
    total_steps = max(1, int(math.ceil((obs_span + scn.horizon) / dt_target))
                      + 1)
    truth = simulate_target(scn.target, total_steps)
    buf = ObservationBuffer(n_obs)
    obs_rows = np.empty((n_obs, 3))
    for k in range(n_obs):
        point = observe(truth[k], scn.noise, k)
        buf.append(k * dt_target, point)
        obs_rows[k] = (k * dt_target - obs_span, point[0], point[1])
    return truth, buf, obs_rows


def run_interception(scn: Scenario, speed_mode: str = "optimized"
                     ) -> InterceptionLog:
    """Observe, plan, and execute one interception attempt.

    ``speed_mode="uniform"`` replaces the optimized profile with a
    constant-speed ramp along the same path (the counterfactual baseline);
    planning stages that the baseline skips are not timed.
    """
    if speed_mode not in ("optimized", "uniform"):
        raise DomainError("speed_mode must be 'optimized' or 'uniform'")
    timings: dict = {}
    total_tic = time.perf_counter()
    horizon = scn.horizon
    dt_target = scn.target.dt
    n_obs = scn.n_observations
    obs_span = (n_obs - 1) * dt_target
    truth, buf, obs_rows = observe_window(scn)

    plans = []  # (t_switch, smoothed, profile)
    try:
        arts = plan_stages(
            scn, buf, obs_span + horizon, scn.start, scn.v0, scn.a0,
            horizon, timings, uniform=(speed_mode == "uniform"))
        smoothed, profile = arts.smoothed, arts.profile
        coarse_arr = np.asarray(arts.coarse, dtype=float)
    except (SingularFitError, StartBlockedError, GoalBlockedError,
            NoPathError, DomainError, NoFeasibleProfileError,
            EmptyCorridorError, QPInfeasibleError,
            QPMaxIterationsError) as err:
        timings["total"] = time.perf_counter() - total_tic
        return _empty_log(scn, getattr(err, "stage", "path"), obs_rows,
                          np.zeros((0, 3)), np.zeros((0, 2)), timings)
    plans.append((0.0, smoothed, profile))

    n_steps = max(1, int(round(horizon / scn.sim_dt)))
    times = np.linspace(0.0, horizon, n_steps + 1)

    if scn.replan_period is not None:
        t_next = scn.replan_period
        obs_k = n_obs
        while t_next < horizon - _TIME_EPS:
            while (obs_k * dt_target - obs_span) <= t_next + _TIME_EPS:
                point = observe(truth[obs_k], scn.noise, obs_k)
                buf.append(obs_k * dt_target, point)
                obs_k += 1
                if obs_k >= truth.shape[0]:
                    break
            t_prev, smoothed_prev, profile_prev = plans[-1]
            local_t = min(t_next - t_prev, profile_prev.T)
            s_now, v_now, a_now = profile_prev.eval(local_t)
            pts = smoothed_prev.points
            cum = np.concatenate(
                [[0.0], np.cumsum(np.hypot(*np.diff(pts, axis=0).T))])
            pose_now = _station_pose(pts, cum, s_now)
            try:
                new_arts = plan_stages(
                    scn, buf, obs_span + horizon, pose_now, v_now, a_now,
                    horizon - t_next, timings)
                plans.append((t_next, new_arts.smoothed, new_arts.profile))
            except (SingularFitError, StartBlockedError, GoalBlockedError,
                    NoPathError, DomainError, NoFeasibleProfileError,
                    EmptyCorridorError, QPInfeasibleError,
                    QPMaxIterationsError):
                pass  # keep flying the previous plan
            t_next += scn.replan_period

    switch_times = np.array([p[0] for p in plans])
    robot_rows = np.empty((times.size, 4))
    for idx, (t_switch, pth, prof) in enumerate(plans):
        t_end = (switch_times[idx + 1] if idx + 1 < len(plans)
                 else horizon + _TIME_EPS)
        mask = (times >= t_switch - _TIME_EPS) & (times < t_end)
        window = times[mask] - t_switch
        if scn.track == "pursuit" and len(plans) == 1:
            robot_rows[mask] = _pursuit_rollout(pth, prof, window,
                                                scn.start, scn.robot)
        else:
            robot_rows[mask] = _playback_rollout(pth, prof, window)

    target_rows = np.empty((times.size, 2))
    clearances = np.empty(times.size)
    for i, t in enumerate(times):
        target_rows[i] = target_position(truth, dt_target, obs_span + t)
        d, _ = signed_clearance(scn.world, robot_rows[i, :2], float(t))
        clearances[i] = d

    dists = np.hypot(robot_rows[:, 0] - target_rows[:, 0],
                     robot_rows[:, 1] - target_rows[:, 1])
    capture_idx = np.flatnonzero(dists <= scn.capture_radius)
    capture_time = (float(times[capture_idx[0]]) if capture_idx.size
                    else None)
    collided = bool(np.any(clearances < 0.0))
    if collided:
        outcome = "collided"
    elif capture_time is not None:
        outcome = "intercepted"
    else:
        outcome = "missed"
    timings["total"] = time.perf_counter() - total_tic

    return InterceptionLog(
        times=times, robot=robot_rows, target=target_rows,
        observations=obs_rows, coarse_path=coarse_arr,
        smoothed_path=plans[-1][1].points.copy(), profile=plans[-1][2],
        clearances=clearances, outcome=outcome,
        miss_distance=float(dists[-1]), capture_time=capture_time,
        failed_stage=None, timings=timings)


def _point_polygon_depth(p: np.ndarray, verts: np.ndarray) -> float:
    """Penetration depth of a point inside a convex CCW polygon (zero when
    outside): the smallest distance to any edge line."""
    depth = math.inf
    m = verts.shape[0]
    for i in range(m):
        a = verts[i]
        b = verts[(i + 1) % m]
        ex, ey = b - a
        length = math.hypot(ex, ey)
        if length <= 0.0:
            return 0.0
        cross = ex * (p[1] - a[1]) - ey * (p[0] - a[0])
        if cross < 0.0:
            return 0.0
        depth = min(depth, cross / length)
    return depth


@dataclass(frozen=True)
class CollisionReport:
    """Re-checked obstacle membership per logged step."""

    violations: np.ndarray  # rows (time, obstacle index, depth)

    def __post_init__(self) -> None:
        rows = np.ascontiguousarray(self.violations,
                                    dtype=float).reshape(-1, 3)
        object.__setattr__(self, "violations", rows)

    @property
    def empty(self) -> bool:
        return self.violations.shape[0] == 0


def check_collision(log: InterceptionLog, scn: Scenario) -> CollisionReport:
    """Re-evaluate robot-in-obstacle membership at every logged step."""
    rows = []
    for i, t in enumerate(log.times):
        p = log.robot[i, :2]
        for idx, ob in enumerate(scn.world.obstacles):
            depth = _point_polygon_depth(p, ob.vertices_at(float(t)))
            if depth > 0.0:
                rows.append((float(t), float(idx), depth))
    return CollisionReport(np.array(rows, dtype=float).reshape(-1, 3))
