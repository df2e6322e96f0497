"""Speed optimization along a fixed path.

Turns the corridor decomposition and reference profile from the
station-time search into a quadratic program over piecewise Bezier control
points: minimize the integral of squared acceleration plus a terminal
station penalty, subject to initial conditions, twice-differentiable joins,
per-control-point corridor containment, and speed/acceleration bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bezier import BezierSegment, SpeedProfile, bernstein_gram
from .errors import DomainError, QPInfeasibleError
from .qp import QPProblem, solve_qp
from .smoothing import PathPolyline, discrete_curvatures
from .st_graph import Corridor, ReferenceProfile

_BOUND_EPS = 1e-9


@dataclass(frozen=True)
class SpeedBounds:
    """Per-segment speed and acceleration bounds; infinities disable rows."""

    v_lower: np.ndarray
    v_upper: np.ndarray
    a_lower: np.ndarray
    a_upper: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        size = None
        for name in ("v_lower", "v_upper", "a_lower", "a_upper"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.size == 0:
                raise DomainError(f"{name} must be a non-empty 1-D array")
            if np.any(np.isnan(arr)):
                raise DomainError(f"{name} must not contain NaN")
            if size is None:
                size = arr.size
            elif arr.size != size:
                raise DomainError("bound arrays must share one length")
            arrays[name] = arr
        if np.any(arrays["v_lower"] > arrays["v_upper"]):
            raise DomainError("v_lower must not exceed v_upper")
        if np.any(arrays["a_lower"] > arrays["a_upper"]):
            raise DomainError("a_lower must not exceed a_upper")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, n_segments: int, v_lower: float = 0.0,
                v_upper: float = math.inf, a_lower: float = -math.inf,
                a_upper: float = math.inf) -> "SpeedBounds":
        if n_segments < 1:
            raise DomainError("need at least one segment")
        full = np.full(n_segments, 1.0)
        return cls(full * v_lower, full * v_upper, full * a_lower,
                   full * a_upper)

    @property
    def n_segments(self) -> int:
        return self.v_lower.size


@dataclass(frozen=True)
class SpeedOptConfig:
    """Weights, curve order, limits, and solver knobs."""

    w_accel: float = 10.0
    w_terminal: float = 3.0
    order: int = 5
    v_min: float = 0.0
    v_max: float = math.inf
    a_min: float = -math.inf
    a_max: float = math.inf
    a_lat_max: Optional[float] = None
    hard_terminal: bool = False
    terminal_speed: Optional[float] = None
    terminal_accel: Optional[float] = None
    solver_tol: float = 1e-6
    solver_max_iters: int = 20000

    def __post_init__(self) -> None:
        if not (math.isfinite(self.w_accel) and self.w_accel > 0.0):
            raise DomainError("w_accel must be positive")
        if not (self.w_terminal >= 0.0 and math.isfinite(self.w_terminal)):
            raise DomainError("w_terminal must be non-negative")
        if not isinstance(self.order, (int, np.integer)) or self.order < 4:
            raise DomainError("order must be an integer >= 4")
        if math.isnan(self.v_min) or math.isnan(self.v_max):
            raise DomainError("speed limits must not be NaN")
        if self.v_min > self.v_max:
            raise DomainError("v_min must not exceed v_max")
        if math.isnan(self.a_min) or math.isnan(self.a_max):
            raise DomainError("acceleration limits must not be NaN")
        if self.a_min > self.a_max:
            raise DomainError("a_min must not exceed a_max")
        if self.a_lat_max is not None and not (self.a_lat_max > 0.0):
            raise DomainError("a_lat_max must be positive when set")
        if not (math.isfinite(self.solver_tol) and self.solver_tol > 0.0):
            raise DomainError("solver_tol must be positive")
        if self.solver_max_iters < 1:
            raise DomainError("solver_max_iters must be >= 1")


def segment_speed_caps(corridor: Corridor, path: Optional[PathPolyline],
                       a_lat_max: Optional[float],
                       v_max: float = math.inf) -> np.ndarray:
    """Per-segment speed cap sqrt(a_lat_max / kappa) using the largest path
    curvature over the stations the segment's corridor band can reach."""
    caps = np.full(corridor.n_segments, v_max)
    if path is None or a_lat_max is None:
        return caps
    pts = path.points
    seg_len = np.hypot(*np.diff(pts, axis=0).T)
    stations = np.concatenate([[0.0], np.cumsum(seg_len)])[1:-1]
    curv = discrete_curvatures(pts)
    for j in range(corridor.n_segments):
        width = corridor.t_knots[j + 1] - corridor.t_knots[j]
        lo = min(corridor.lower[j, 0],
                 corridor.lower[j, 0] + corridor.lower[j, 1] * width)
        hi = max(corridor.upper[j, 0],
                 corridor.upper[j, 0] + corridor.upper[j, 1] * width)
        mask = (stations >= lo - _BOUND_EPS) & (stations <= hi + _BOUND_EPS)
        if not np.any(mask):
            continue
        kappa = float(curv[mask].max())
        if kappa > 1e-12:
            caps[j] = min(v_max, math.sqrt(a_lat_max / kappa))
    return caps


def _second_difference(n: int) -> np.ndarray:
    d = np.zeros((n - 1, n + 1))
    for i in range(n - 1):
        d[i, i] = 1.0
        d[i, i + 1] = -2.0
        d[i, i + 2] = 1.0
    return d


def _assemble(corridor: Corridor, profile_ref: ReferenceProfile, v0: float,
              a0: float, bounds: SpeedBounds, w_accel: float,
              w_terminal: float, order: int, hard_terminal: bool,
              terminal_speed: Optional[float],
              terminal_accel: Optional[float]):
    """Build the QP plus a map from inequality row to corridor segment."""
    if not isinstance(order, (int, np.integer)) or order < 4:
        raise DomainError("order must be an integer >= 4")
    n = int(order)
    m = corridor.n_segments
    if bounds.n_segments != m:
        raise DomainError(f"bounds cover {bounds.n_segments} segments, "
                          f"corridor has {m}")
    if not (math.isfinite(v0) and math.isfinite(a0)):
        raise DomainError("initial speed and acceleration must be finite")
    if not (bounds.v_lower[0] - _BOUND_EPS <= v0
            <= bounds.v_upper[0] + _BOUND_EPS):
        raise DomainError(f"v0={v0} violates the first segment's speed "
                          "bounds")
    if not (bounds.a_lower[0] - _BOUND_EPS <= a0
            <= bounds.a_upper[0] + _BOUND_EPS):
        raise DomainError(f"a0={a0} violates the first segment's "
                          "acceleration bounds")
    s_ref_t = float(profile_ref.stations[-1])
    widths = np.diff(corridor.t_knots)
    n_ctrl = n + 1
    n_vars = m * n_ctrl

    def var(j: int, i: int) -> int:
        return j * n_ctrl + i

    q_mat = np.zeros((n_vars, n_vars))
    q_lin = np.zeros(n_vars)
    diff2 = _second_difference(n)
    gram = bernstein_gram(n - 2)
    accel_quad = (n * (n - 1)) ** 2 * (diff2.T @ gram @ diff2)
    for j in range(m):
        block = slice(var(j, 0), var(j, n) + 1)
        q_mat[block, block] += w_accel / widths[j] * accel_quad
    last = var(m - 1, n)
    h_last = widths[-1]
    q_mat[last, last] += w_terminal * h_last * h_last
    q_lin[last] += -2.0 * w_terminal * h_last * s_ref_t

    eq_rows: list[np.ndarray] = []
    eq_vals: list[float] = []

    def add_eq(row: np.ndarray, val: float) -> None:
        eq_rows.append(row)
        eq_vals.append(val)

    row = np.zeros(n_vars)
    row[var(0, 0)] = widths[0]
    add_eq(row, 0.0)
    row = np.zeros(n_vars)
    row[var(0, 0)] = -n
    row[var(0, 1)] = n
    add_eq(row, v0)
    row = np.zeros(n_vars)
    coef = n * (n - 1) / widths[0]
    row[var(0, 0)] = coef
    row[var(0, 1)] = -2.0 * coef
    row[var(0, 2)] = coef
    add_eq(row, a0)
    for j in range(m - 1):
        h_a, h_b = widths[j], widths[j + 1]
        row = np.zeros(n_vars)
        row[var(j, n)] = h_a
        row[var(j + 1, 0)] = -h_b
        add_eq(row, 0.0)
        row = np.zeros(n_vars)
        row[var(j, n - 1)] = -n
        row[var(j, n)] = n
        row[var(j + 1, 0)] = n
        row[var(j + 1, 1)] = -n
        add_eq(row, 0.0)
        row = np.zeros(n_vars)
        ca, cb = n * (n - 1) / h_a, n * (n - 1) / h_b
        row[var(j, n - 2)] = ca
        row[var(j, n - 1)] = -2.0 * ca
        row[var(j, n)] = ca
        row[var(j + 1, 0)] = -cb
        row[var(j + 1, 1)] = 2.0 * cb
        row[var(j + 1, 2)] = -cb
        add_eq(row, 0.0)
    if hard_terminal:
        row = np.zeros(n_vars)
        row[last] = h_last
        add_eq(row, s_ref_t)
    if terminal_speed is not None:
        row = np.zeros(n_vars)
        row[var(m - 1, n - 1)] = -n
        row[last] = n
        add_eq(row, float(terminal_speed))
    if terminal_accel is not None:
        row = np.zeros(n_vars)
        coef = n * (n - 1) / h_last
        row[var(m - 1, n - 2)] = coef
        row[var(m - 1, n - 1)] = -2.0 * coef
        row[last] = coef
        add_eq(row, float(terminal_accel))

    iq_rows: list[np.ndarray] = []
    iq_vals: list[float] = []
    iq_segment: list[int] = []

    def add_iq(row: np.ndarray, val: float, segment: int) -> None:
        if val == math.inf:
            return
        if val == -math.inf:
            raise DomainError("a bound of -inf makes the program infeasible")
        iq_rows.append(row)
        iq_vals.append(val)
        iq_segment.append(segment)

    for j in range(m):
        h_j = widths[j]
        lo0, lo1 = corridor.lower[j]
        up0, up1 = corridor.upper[j]
        for i in range(n_ctrl):
            xi = h_j * i / n
            row = np.zeros(n_vars)
            row[var(j, i)] = h_j
            add_iq(row, up0 + up1 * xi, j)
            row = np.zeros(n_vars)
            row[var(j, i)] = -h_j
            add_iq(row, -(lo0 + lo1 * xi), j)
        for i in range(n):
            row = np.zeros(n_vars)
            row[var(j, i)] = -n
            row[var(j, i + 1)] = n
            add_iq(row, float(bounds.v_upper[j]), j)
            add_iq(-row, -float(bounds.v_lower[j]), j)
        coef = n * (n - 1) / h_j
        for i in range(n - 1):
            row = np.zeros(n_vars)
            row[var(j, i)] = coef
            row[var(j, i + 1)] = -2.0 * coef
            row[var(j, i + 2)] = coef
            add_iq(row, float(bounds.a_upper[j]), j)
            add_iq(-row, -float(bounds.a_lower[j]), j)

    qp = QPProblem(
        Q=q_mat, q_c=q_lin,
        A_eq=np.array(eq_rows).reshape(-1, n_vars),
        b_eq=np.array(eq_vals),
        A_iq=np.array(iq_rows).reshape(-1, n_vars),
        b_iq=np.array(iq_vals))
    return qp, np.array(iq_segment, dtype=int)


def assemble_qp(corridor: Corridor, profile_ref: ReferenceProfile, v0: float,
                a0: float, bounds: SpeedBounds, w_accel: float = 10.0,
                w_terminal: float = 3.0, order: int = 5,
                hard_terminal: bool = False,
                terminal_speed: Optional[float] = None,
                terminal_accel: Optional[float] = None) -> QPProblem:
    """Quadratic program over all Bezier control points (one block per
    corridor segment, scaled station units)."""
    qp, _ = _assemble(corridor, profile_ref, v0, a0, bounds, w_accel,
                      w_terminal, order, hard_terminal, terminal_speed,
                      terminal_accel)
    return qp


def optimize_speed(corridor: Corridor, profile_ref: ReferenceProfile,
                   v0: float, a0: float,
                   cfg: SpeedOptConfig = SpeedOptConfig(),
                   path: Optional[PathPolyline] = None) -> SpeedProfile:
    """Assemble, solve, and pack the optimized piecewise Bezier profile."""
    m = corridor.n_segments
    caps = segment_speed_caps(corridor, path, cfg.a_lat_max, cfg.v_max)
    bounds = SpeedBounds(
        v_lower=np.full(m, cfg.v_min), v_upper=caps,
        a_lower=np.full(m, cfg.a_min), a_upper=np.full(m, cfg.a_max))
    qp, iq_segment = _assemble(
        corridor, profile_ref, v0, a0, bounds, cfg.w_accel, cfg.w_terminal,
        cfg.order, cfg.hard_terminal, cfg.terminal_speed, cfg.terminal_accel)
    try:
        x = solve_qp(qp, tol=cfg.solver_tol, max_iters=cfg.solver_max_iters)
    except QPInfeasibleError as err:
        certificate = getattr(err, "certificate", None)
        segment = None
        if certificate is not None and iq_segment.size:
            iq_part = np.abs(certificate[qp.b_eq.size:])
            if iq_part.size and float(iq_part.max()) > 0.0:
                segment = int(iq_segment[int(np.argmax(iq_part))])
        raise QPInfeasibleError(str(err), segment=segment) from err

    n_ctrl = cfg.order + 1
    widths = np.diff(corridor.t_knots)
    segments = []
    for j in range(m):
        ctrl = x[j * n_ctrl:(j + 1) * n_ctrl]
        segments.append(BezierSegment(cfg.order, ctrl, float(widths[j]),
                                      float(corridor.t_knots[j])))
    profile = SpeedProfile(tuple(segments), float(corridor.t_knots[-1]))

    slack = 50.0 * cfg.solver_tol
    taus = np.linspace(0.0, 1.0, 100)
    basis = np.stack([math.comb(cfg.order, i) * taus ** i
                      * (1.0 - taus) ** (cfg.order - i)
                      for i in range(n_ctrl)], axis=1)
    for j, seg in enumerate(profile.segments):
        s = seg.h * (basis @ seg.control_points)
        dt_rel = taus * seg.h
        lo = corridor.lower[j, 0] + corridor.lower[j, 1] * dt_rel
        hi = corridor.upper[j, 0] + corridor.upper[j, 1] * dt_rel
        if np.any(s < lo - slack) or np.any(s > hi + slack):
            raise QPInfeasibleError(
                f"optimized curve leaves the corridor in segment {j}",
                segment=j)
    return profile


def polyline_rms_acceleration(times, stations) -> float:
    """Average-acceleration metric of a piecewise-linear station profile.

    Each speed jump at an interior node is spread over the half-intervals
    on both sides, giving a finite stand-in for the squared-acceleration
    integral of the polyline."""
    t = np.asarray(times, dtype=float)
    s = np.asarray(stations, dtype=float)
    if t.ndim != 1 or t.size < 3 or s.shape != t.shape:
        raise DomainError("need matching 1-D arrays of 3+ samples")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s))):
        raise DomainError("samples must be finite")
    if np.any(np.diff(t) <= 0.0):
        raise DomainError("times must be strictly increasing")
    v = np.diff(s) / np.diff(t)
    dv = np.diff(v)
    window = (t[2:] - t[:-2]) / 2.0
    total = float(np.sum(dv * dv / window))
    return math.sqrt(total / (t[-1] - t[0]))


def profile_samples_csv(profile: SpeedProfile, dt: float = 0.05) -> str:
    """CSV rows (t, s, sdot, sddot) at fixed spacing for plotting."""
    rows = profile.sample(dt)
    lines = ["t,s,sdot,sddot"]
    for t, s, sd, sdd in rows:
        lines.append(f"{t:.9g},{s:.9g},{sd:.9g},{sdd:.9g}")
    return "\n".join(lines) + "\n"
