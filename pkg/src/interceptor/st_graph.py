"""Station-time planning: obstacle projection, reference-speed search, and
trapezoidal corridor decomposition.

The station axis ``s`` measures distance traveled along a fixed path; the
time axis ``t`` spans a planning horizon ``T``. Dynamic obstacles become
parallelograms in the (t, s) plane, a lattice search produces a reference
station profile threading them, and the free band around the profile is
cut into per-segment linear corridors for the downstream curve optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._kernels import dp_core
from .errors import (DomainError, EmptyCorridorError, NoFeasibleProfileError)
from .geometry import Obstacle
from .smoothing import PathPolyline

_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class STObstacle:
    """A parallelogram of blocked (t, s) states, stored counterclockwise.

    ``source`` identifies the originating obstacle (index into the world's
    obstacle list, or -1 for hand-built instances).
    """

    vertices: np.ndarray
    source: int = -1

    def __post_init__(self) -> None:
        verts = np.asarray(self.vertices, dtype=float)
        if verts.shape != (4, 2):
            raise DomainError(f"need exactly 4 (t, s) vertices, got shape "
                              f"{verts.shape}")
        if not np.all(np.isfinite(verts)):
            raise DomainError("vertices must be finite")
        edges = np.roll(verts, -1, axis=0) - verts
        lens = np.hypot(edges[:, 0], edges[:, 1])
        if float(lens.min()) <= 0.0:
            raise DomainError("degenerate edge in parallelogram")
        area = 0.5 * float(np.sum(verts[:, 0] * np.roll(verts[:, 1], -1)
                                  - verts[:, 1] * np.roll(verts[:, 0], -1)))
        if abs(area) <= 1e-12:
            raise DomainError("parallelogram has zero area")
        if area < 0.0:
            verts = verts[::-1].copy()
            edges = np.roll(verts, -1, axis=0) - verts
            lens = np.hypot(edges[:, 0], edges[:, 1])
        for a, c in ((0, 2), (1, 3)):
            cross = abs(edges[a, 0] * edges[c, 1] - edges[a, 1] * edges[c, 0])
            if cross > 1e-9 * max(1.0, lens[a] * lens[c]):
                raise DomainError("opposite edges are not parallel")
        object.__setattr__(self, "vertices", verts)

    @property
    def t_min(self) -> float:
        return float(self.vertices[:, 0].min())

    @property
    def t_max(self) -> float:
        return float(self.vertices[:, 0].max())

    def contains(self, t: float, s: float, eps: float = _EDGE_EPS) -> bool:
        """Inclusive membership: boundary points count as inside."""
        v = self.vertices
        for i in range(4):
            ex = v[(i + 1) % 4, 0] - v[i, 0]
            ey = v[(i + 1) % 4, 1] - v[i, 1]
            cross = ex * (s - v[i, 1]) - ey * (t - v[i, 0])
            if cross < -eps * math.hypot(ex, ey):
                return False
        return True

    def interval_at(self, t: float) -> Optional[tuple[float, float]]:
        """The occupied s-interval at time ``t``, or None outside the
        parallelogram's time span."""
        if t < self.t_min - _EDGE_EPS or t > self.t_max + _EDGE_EPS:
            return None
        v = self.vertices
        hits: list[float] = []
        for i in range(4):
            ta, sa = v[i]
            tb, sb = v[(i + 1) % 4]
            if min(ta, tb) - _EDGE_EPS <= t <= max(ta, tb) + _EDGE_EPS:
                if abs(tb - ta) <= _EDGE_EPS:
                    hits.extend((sa, sb))
                else:
                    w = min(1.0, max(0.0, (t - ta) / (tb - ta)))
                    hits.append(sa + w * (sb - sa))
        if not hits:
            return None
        return min(hits), max(hits)


@dataclass(frozen=True)
class STGrid:
    """Uniform lattice over [0, T] x [0, s_m] with nt time steps and ns
    station steps (nt+1 and ns+1 node rows)."""

    T: float
    s_m: float
    nt: int
    ns: int
    dt: float = field(init=False)
    ds: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("T", "s_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be positive, got {v}")
        if self.nt < 2 or self.ns < 2:
            raise DomainError("nt and ns must both be at least 2")
        object.__setattr__(self, "dt", self.T / self.nt)
        object.__setattr__(self, "ds", self.s_m / self.ns)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.nt + 1)

    @property
    def stations(self) -> np.ndarray:
        return np.linspace(0.0, self.s_m, self.ns + 1)


@dataclass(frozen=True)
class DPCostConfig:
    """Weights for the lattice search.

    Node cost pulls toward the uniform-speed line and penalizes passing
    within ``clearance`` meters (in s) of an obstacle; edge cost penalizes
    the squared acceleration implied by consecutive lattice speeds.
    """

    v_max: float
    w_ref: float = 1.0
    w_acc: float = 1.0
    w_clear: float = 1.0
    clearance: float = 0.5

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v_max) and self.v_max > 0.0):
            raise DomainError(f"v_max must be positive, got {self.v_max}")
        for name in ("w_ref", "w_acc", "w_clear", "clearance"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise DomainError(f"{name} must be nonnegative, got {v}")


@dataclass(frozen=True)
class ReferenceProfile:
    """Station per lattice time step and the cost of reaching the end."""

    stations: np.ndarray
    total_cost: float

    def __post_init__(self) -> None:
        st = np.asarray(self.stations, dtype=float)
        if st.ndim != 1 or st.size < 3:
            raise DomainError("stations must be a 1-D array of 3+ entries")
        if not np.all(np.isfinite(st)):
            raise DomainError("stations must be finite")
        if st[0] != 0.0:
            raise DomainError(f"profile must start at station 0, got {st[0]}")
        if np.any(np.diff(st) < -1e-9):
            raise DomainError("stations must be monotone non-decreasing")
        object.__setattr__(self, "stations", st)


@dataclass(frozen=True)
class Corridor:
    """Per-segment linear station bounds.

    Segment j covers [t_knots[j], t_knots[j+1]] with lower bound
    ``lower[j, 0] + lower[j, 1] * (t - t_knots[j])`` and upper bound
    ``upper[j, 0] + upper[j, 1] * (t - t_knots[j])``.
    """

    t_knots: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    s_m: float

    def __post_init__(self) -> None:
        kn = np.asarray(self.t_knots, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        if kn.ndim != 1 or kn.size < 2:
            raise DomainError("need at least 2 time knots")
        if np.any(np.diff(kn) <= 0.0):
            raise DomainError("time knots must be strictly increasing")
        nseg = kn.size - 1
        if lo.shape != (nseg, 2) or up.shape != (nseg, 2):
            raise DomainError("lower/upper must be (n_segments, 2)")
        for j in range(nseg):
            h = kn[j + 1] - kn[j]
            for t_off in (0.0, h):
                lo_v = lo[j, 0] + lo[j, 1] * t_off
                up_v = up[j, 0] + up[j, 1] * t_off
                if lo_v >= up_v:
                    raise DomainError(
                        f"segment {j}: lower bound {lo_v} not below upper "
                        f"{up_v}")
                if lo_v < -1e-6 or up_v > self.s_m + 1e-6:
                    raise DomainError(
                        f"segment {j}: bounds leave [0, s_m]")
        object.__setattr__(self, "t_knots", kn)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def n_segments(self) -> int:
        return self.t_knots.size - 1

    def segment_of(self, t: float) -> int:
        kn = self.t_knots
        if t < kn[0] - _EDGE_EPS or t > kn[-1] + _EDGE_EPS:
            raise DomainError(f"time {t} outside corridor span")
        j = int(np.searchsorted(kn, t, side="right")) - 1
        return min(max(j, 0), self.n_segments - 1)

    def lower_at(self, t: float) -> float:
        j = self.segment_of(t)
        return float(self.lower[j, 0] + self.lower[j, 1]
                     * (t - self.t_knots[j]))

    def upper_at(self, t: float) -> float:
        j = self.segment_of(t)
        return float(self.upper[j, 0] + self.upper[j, 1]
                     * (t - self.t_knots[j]))


# --- path station geometry ----------------------------------------------

def _station_frames(pts: np.ndarray, svals: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Positions and unit tangents at the requested stations of a
    polyline."""
    seg = np.diff(pts, axis=0)
    lens = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate(([0.0], np.cumsum(lens)))
    xs = np.interp(svals, cum, pts[:, 0])
    ys = np.interp(svals, cum, pts[:, 1])
    idx = np.clip(np.searchsorted(cum, svals, side="right") - 1,
                  0, len(seg) - 1)
    tangents = seg[idx] / lens[idx, None]
    return np.stack([xs, ys], axis=1), tangents


def project_obstacles(path: PathPolyline, obstacles: Sequence[Obstacle],
                      horizon: float, robot_width: float = 0.0,
                      n_samples: int = 1024) -> list[STObstacle]:
    """Project each moving obstacle onto the (t, s) plane of ``path``.

    For every obstacle that occupies some path station within the horizon,
    emits a parallelogram spanning the occupancy time window, with the
    station extent measured at the window midpoint, padded by half the
    robot width, and sheared by the obstacle's along-path speed. Obstacles
    that never touch the path produce nothing.
    """
    if not (math.isfinite(horizon) and horizon > 0.0):
        raise DomainError(f"horizon must be positive, got {horizon}")
    if robot_width < 0.0:
        raise DomainError("robot_width must be nonnegative")
    if n_samples < 2:
        raise DomainError("n_samples must be at least 2")
    pts = path.points
    s_m = path.length
    svals = np.linspace(0.0, s_m, n_samples)
    xy, tangents = _station_frames(pts, svals)
    # the sampled extent can stop one sample short of the true boundary;
    # widen by one spacing so the parallelogram never under-covers
    pad = 0.5 * robot_width + s_m / (n_samples - 1)

    out: list[STObstacle] = []
    for index, ob in enumerate(obstacles):
        if ob.kind != "dynamic":
            continue
        G, b = ob.half_spaces(0.0)
        w = np.asarray(ob.velocity, dtype=float)
        a = -(G @ w)
        c = b[None, :] - xy @ G.T
        lo = np.full(n_samples, -np.inf)
        hi = np.full(n_samples, np.inf)
        pos = a > 1e-12
        neg = a < -1e-12
        zer = ~pos & ~neg
        if pos.any():
            hi = np.min(c[:, pos] / a[pos], axis=1)
        if neg.any():
            lo = np.max(c[:, neg] / a[neg], axis=1)
        lo = np.maximum(lo, 0.0)
        hi = np.minimum(hi, horizon)
        occ = lo <= hi
        if zer.any():
            occ &= ~np.any(c[:, zer] < 0.0, axis=1)
        if not occ.any():
            continue
        t_in = float(lo[occ].min())
        t_out = float(hi[occ].max())
        if t_out - t_in <= 1e-9:
            continue
        t_mid = 0.5 * (t_in + t_out)
        s_occ = svals[occ]
        s_center = 0.5 * (float(s_occ.min()) + float(s_occ.max()))
        k = int(np.argmin(np.abs(svals - s_center)))
        u = float(tangents[k] @ w)
        at_mid = occ & (lo <= t_mid) & (t_mid <= hi)
        if at_mid.any():
            s_lo = float(svals[at_mid].min())
            s_hi = float(svals[at_mid].max())
        else:
            mid_times = 0.5 * (lo[occ] + hi[occ])
            shifted = s_occ - u * (mid_times - t_mid)
            s_lo = float(shifted.min())
            s_hi = float(shifted.max())
        s_lo -= pad
        s_hi += pad
        verts = np.array([
            [t_in, s_lo + u * (t_in - t_mid)],
            [t_out, s_lo + u * (t_out - t_mid)],
            [t_out, s_hi + u * (t_out - t_mid)],
            [t_in, s_hi + u * (t_in - t_mid)],
        ])
        out.append(STObstacle(verts, source=index))
    return out


# --- dynamic-programming reference search -------------------------------

def _dp_core(node_cost: np.ndarray, ds: float, dt: float, v0: float,
             v_max: float, w_acc: float) -> tuple[np.ndarray, float]:
    """Exact lattice search over monotone station sequences.

    ``node_cost`` is (nt+1, ns+1) with +inf marking blocked nodes. The
    cost of a station sequence j_0=0, j_1, ..., j_nt=ns is the sum of its
    node costs plus ``w_acc * ((v_i - v_{i-1}) / dt)^2`` per step, where
    v_i is the lattice speed of step i and v_0 is the given entry speed.
    The search runs in the kernel backend with a (station, arrival step)
    state, so the acceleration coupling is handled exactly. Returns
    (station indices, total cost) or raises NoFeasibleProfileError.
    """
    nt = node_cost.shape[0] - 1
    ns = node_cost.shape[1] - 1
    if not np.isfinite(node_cost[0, 0]):
        raise NoFeasibleProfileError("start node (0, 0) is blocked")
    if not np.isfinite(node_cost[nt, ns]):
        raise NoFeasibleProfileError("terminal node (T, s_m) is blocked")
    kmax = int(math.floor(v_max * dt / ds + 1e-9))
    if kmax < 1:
        raise NoFeasibleProfileError(
            f"speed limit {v_max} below one station step per time step")
    idx, total = dp_core(np.ascontiguousarray(node_cost, dtype=float),
                         ds, dt, v0, v_max, w_acc)
    if idx.size == 0:
        raise NoFeasibleProfileError(
            "terminal station unreachable within the speed limit")
    return idx, total


def node_costs(grid: STGrid, st_obs: Sequence[STObstacle],
               cost_cfg: DPCostConfig) -> np.ndarray:
    """Per-node cost table: deviation from the uniform-speed line, a
    penalty for passing within ``clearance`` of an obstacle, and +inf
    inside obstacles."""
    ts = grid.times
    ss = grid.stations
    uniform = grid.s_m * ts / grid.T
    table = cost_cfg.w_ref * (ss[None, :] - uniform[:, None]) ** 2

    gap = np.full((grid.nt + 1, grid.ns + 1), np.inf)
    for ob in st_obs:
        for i, t in enumerate(ts):
            iv = ob.interval_at(float(t))
            if iv is None:
                continue
            lo, hi = iv
            d = np.maximum(np.maximum(lo - ss, ss - hi), 0.0)
            inside = (ss >= lo - _EDGE_EPS) & (ss <= hi + _EDGE_EPS)
            d[inside] = 0.0
            table[i, inside] = np.inf
            gap[i] = np.minimum(gap[i], d)
    if cost_cfg.clearance > 0.0:
        near = gap < cost_cfg.clearance
        if near.any():
            frac = (cost_cfg.clearance - gap[near]) / cost_cfg.clearance
            table[near] += cost_cfg.w_clear * frac * frac
    return table


def dp_search(grid: STGrid, st_obs: Sequence[STObstacle],
              cost_cfg: DPCostConfig, v0: float) -> ReferenceProfile:
    """Find the cheapest monotone station profile from (0, 0) to
    (T, s_m) on the lattice, avoiding the projected obstacles.

    Raises NoFeasibleProfileError when an endpoint is blocked or the
    terminal station cannot be reached under the speed limit.
    """
    table = node_costs(grid, st_obs, cost_cfg)
    idx, total = _dp_core(table, grid.ds, grid.dt, v0,
                          cost_cfg.v_max, cost_cfg.w_acc)
    return ReferenceProfile(grid.stations[idx], total)


# --- corridor decomposition ---------------------------------------------

def _solve_2d_lp(obj: np.ndarray, A: np.ndarray, rhs: np.ndarray
                 ) -> Optional[np.ndarray]:
    """Maximize obj @ x subject to A @ x <= rhs by enumerating constraint
    intersections (two variables). Returns None when infeasible."""
    n = A.shape[0]
    ii, jj = np.triu_indices(n, k=1)
    det = A[ii, 0] * A[jj, 1] - A[ii, 1] * A[jj, 0]
    keep = np.abs(det) >= 1e-12
    if not keep.any():
        return None
    ii, jj, det = ii[keep], jj[keep], det[keep]
    xs = np.stack([
        (rhs[ii] * A[jj, 1] - A[ii, 1] * rhs[jj]) / det,
        (A[ii, 0] * rhs[jj] - rhs[ii] * A[jj, 0]) / det,
    ], axis=1)
    feasible = np.all(xs @ A.T <= rhs[None, :] + 1e-7, axis=1)
    if not feasible.any():
        return None
    xs = xs[feasible]
    return xs[int(np.argmax(xs @ obj))]


def build_corridors(profile: ReferenceProfile,
                    st_obs: Sequence[STObstacle], grid: STGrid,
                    t_knots: Optional[Sequence[float]] = None,
                    n_segments: int = 5) -> Corridor:
    """Cut the free band around the reference profile into per-segment
    linear bounds.

    Each segment's upper bound is the area-maximal line below every
    obstacle lying above the profile and above all profile samples in the
    segment (clipped to s_m); the lower bound is symmetric. Raises
    EmptyCorridorError when no such line exists, which callers fix by
    refining the segmentation.
    """
    ts = grid.times
    stations = profile.stations
    if stations.size != ts.size:
        raise DomainError("profile length does not match grid")
    if t_knots is None:
        if n_segments < 1:
            raise DomainError("n_segments must be at least 1")
        knots = np.linspace(0.0, grid.T, n_segments + 1)
    else:
        knots = np.asarray(t_knots, dtype=float)
        if knots.ndim != 1 or knots.size < 2:
            raise DomainError("t_knots must hold at least 2 values")
        if abs(knots[0]) > 1e-9 or abs(knots[-1] - grid.T) > 1e-9:
            raise DomainError("t_knots must span [0, T]")
        if np.any(np.diff(knots) <= 0.0):
            raise DomainError("t_knots must be strictly increasing")
        knots = knots.copy()
        knots[0] = 0.0
        knots[-1] = grid.T

    def ref(t: float) -> float:
        return float(np.interp(t, ts, stations))

    nseg = knots.size - 1
    lower = np.empty((nseg, 2))
    upper = np.empty((nseg, 2))
    for j in range(nseg):
        ta, tb = float(knots[j]), float(knots[j + 1])
        h = tb - ta

        # profile samples that the corridor must contain
        inner = ts[(ts > ta + 1e-12) & (ts < tb - 1e-12)]
        sample_ts = np.concatenate(([ta], inner, [tb]))
        sample_ref = np.array([ref(t) for t in sample_ts])

        # constraint rows a @ (c0, c1) <= rhs for line c0 + c1 (t - ta)
        up_rows = [(1.0, 0.0, grid.s_m), (1.0, h, grid.s_m)]
        lo_rows = [(-1.0, 0.0, 0.0), (-1.0, -h, 0.0)]
        for t, r in zip(sample_ts, sample_ref):
            up_rows.append((-1.0, -(t - ta), -r))
            lo_rows.append((1.0, t - ta, r))

        for ob in st_obs:
            wa = max(ta, ob.t_min)
            wb = min(tb, ob.t_max)
            if wb - wa <= 1e-12:
                continue
            tm = 0.5 * (wa + wb)
            iv_m = ob.interval_at(tm)
            if iv_m is None:
                continue
            above = 0.5 * (iv_m[0] + iv_m[1]) >= ref(tm)
            for t in (wa, wb):
                iv = ob.interval_at(t)
                if iv is None:
                    continue
                if above:
                    up_rows.append((1.0, t - ta, iv[0]))
                else:
                    lo_rows.append((-1.0, -(t - ta), -iv[1]))

        a_up = np.array([(r[0], r[1]) for r in up_rows])
        b_up = np.array([r[2] for r in up_rows])
        sol_up = _solve_2d_lp(np.array([2.0, h]), a_up, b_up)
        if sol_up is None:
            raise EmptyCorridorError(
                j, f"no upper bound line fits segment {j}")
        a_lo = np.array([(r[0], r[1]) for r in lo_rows])
        b_lo = np.array([r[2] for r in lo_rows])
        sol_lo = _solve_2d_lp(np.array([-2.0, -h]), a_lo, b_lo)
        if sol_lo is None:
            raise EmptyCorridorError(
                j, f"no lower bound line fits segment {j}")
        if (sol_lo[0] >= sol_up[0]
                or sol_lo[0] + sol_lo[1] * h >= sol_up[0] + sol_up[1] * h):
            raise EmptyCorridorError(
                j, f"corridor bounds cross on segment {j}")
        upper[j] = sol_up
        lower[j] = sol_lo

    return Corridor(knots, lower, upper, grid.s_m)


def st_snapshot_csv(st_obs: Sequence[STObstacle], profile: ReferenceProfile,
                    corridor: Corridor, grid: STGrid) -> str:
    """Plain-text snapshot of the (t, s) plane for plotting: obstacle
    parallelograms, the reference profile, and corridor bounds."""
    lines = ["# st_obstacles",
             "source,t0,s0,t1,s1,t2,s2,t3,s3"]
    for ob in st_obs:
        flat = ",".join(format(v, ".9g") for v in ob.vertices.ravel())
        lines.append(f"{ob.source},{flat}")
    lines.append("# profile")
    lines.append("t,s")
    for t, s in zip(grid.times, profile.stations):
        lines.append(f"{t:.9g},{s:.9g}")
    lines.append("# corridors")
    lines.append("segment,t_start,t_end,lower0,lower1,upper0,upper1")
    for j in range(corridor.n_segments):
        row = (j, corridor.t_knots[j], corridor.t_knots[j + 1],
               corridor.lower[j, 0], corridor.lower[j, 1],
               corridor.upper[j, 0], corridor.upper[j, 1])
        lines.append(",".join(format(v, ".9g") if isinstance(v, float)
                              else str(v) for v in row))
    return "\n".join(lines) + "\n"
