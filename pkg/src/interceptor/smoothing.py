"""Gradient-descent refinement of coarse waypoint paths.

Minimizes a weighted sum of three discrete costs over the interior points of
a polyline: an obstacle term penalizing clearance below ``d_max``, a
curvature term penalizing discrete curvature above ``kappa_max``, and a
smoothness term on second differences. Endpoints (and any other points
marked fixed) never move.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateSegmentError, DomainError
from .geometry import WorldMap

_MIN_SEGMENT = 1e-9

TraceFn = Callable[[int, float, float, float], None]


@dataclass(frozen=True)
class SmootherConfig:
    """Weights, thresholds, and descent controls for :func:`smooth`.

    ``step_sizes`` are the per-term descent steps (obstacle, curvature,
    smoothness). Each term's gradient carries its weight, so with equal
    steps the update is plain gradient descent on the weighted total.
    """

    kappa_max: float
    d_max: float = 2.0
    w_obs: float = 0.1
    w_cur: float = 0.1
    w_smo: float = 0.2
    step_sizes: tuple[float, float, float] = (0.25, 0.25, 0.25)
    max_iters: int = 500
    converge_tol: float = 1e-9

    def __post_init__(self) -> None:
        for name in ("kappa_max", "d_max", "w_obs", "w_cur", "w_smo"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise DomainError(f"{name} must be positive, got {v}")
        if len(self.step_sizes) != 3:
            raise DomainError("step_sizes must have three entries")
        for a in self.step_sizes:
            if not (math.isfinite(a) and a > 0.0):
                raise DomainError(f"step sizes must be positive, got {a}")
        if self.max_iters < 1:
            raise DomainError("max_iters must be at least 1")
        if not (math.isfinite(self.converge_tol) and self.converge_tol >= 0.0):
            raise DomainError("converge_tol must be nonnegative")


@dataclass(frozen=True)
class PathPolyline:
    """An ordered chain of 2D points with a mask of immovable entries.

    The first and last points are always fixed regardless of the supplied
    mask. Consecutive points must be distinct (separation above 1e-9 m).
    """

    points: np.ndarray
    fixed_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise DomainError(f"points must be (m, 2), got {pts.shape}")
        if pts.shape[0] < 3:
            raise DomainError("a smoothable path needs at least 3 points")
        if not np.all(np.isfinite(pts)):
            raise DomainError("points must be finite")
        _check_segments(pts)
        if self.fixed_mask is None:
            mask = np.zeros(pts.shape[0], dtype=bool)
        else:
            mask = np.asarray(self.fixed_mask, dtype=bool).copy()
            if mask.shape != (pts.shape[0],):
                raise DomainError("fixed_mask must have one entry per point")
        mask[0] = mask[-1] = True
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "fixed_mask", mask)

    @classmethod
    def from_waypoints(cls, waypoints: Sequence[Sequence[float]],
                       fixed_mask: Optional[np.ndarray] = None
                       ) -> "PathPolyline":
        """Build from ``(x, y)`` or ``(x, y, theta)`` tuples, dropping any
        heading component."""
        arr = np.asarray(waypoints, dtype=float)
        if arr.ndim != 2 or arr.shape[1] not in (2, 3):
            raise DomainError(f"waypoints must be (m, 2) or (m, 3) shaped, "
                              f"got {arr.shape}")
        return cls(arr[:, :2], fixed_mask)

    @property
    def length(self) -> float:
        """Total chord length."""
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))


def _check_segments(pts: np.ndarray) -> np.ndarray:
    d = pts[1:] - pts[:-1]
    norms = np.hypot(d[:, 0], d[:, 1])
    if norms.size and float(norms.min()) <= _MIN_SEGMENT:
        i = int(norms.argmin())
        raise DegenerateSegmentError(
            f"segment {i} collapsed: |dx| = {norms[i]:.3e}")
    return norms


def discrete_curvatures(pts: np.ndarray) -> np.ndarray:
    """Discrete curvature at each interior point: the unsigned turn angle
    between adjacent displacement vectors divided by the incoming segment
    length."""
    pts = np.asarray(pts, dtype=float)
    norms = _check_segments(pts)
    d = pts[1:] - pts[:-1]
    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    dot = d[:-1, 0] * d[1:, 0] + d[:-1, 1] * d[1:, 1]
    return np.abs(np.arctan2(cross, dot)) / norms[:-1]


def _flatten_static(world: WorldMap) -> tuple[np.ndarray, np.ndarray]:
    polys = [ob.vertices_at(0.0) for ob in world.static_obstacles]
    if polys:
        data = np.ascontiguousarray(np.vstack(polys))
        off = np.concatenate(([0], np.cumsum([len(p) for p in polys])))
        return data, off.astype(np.int64)
    return np.zeros((0, 2)), np.zeros(1, dtype=np.int64)


def _interior_clearance(pts: np.ndarray, poly_data: np.ndarray,
                        poly_off: np.ndarray) -> np.ndarray:
    """Rows (d, nearest_x, nearest_y) for each interior point."""
    return _kernels.batch_clearance(
        np.ascontiguousarray(pts[1:-1]), poly_data, poly_off)


def _terms(pts: np.ndarray, clear: np.ndarray,
           cfg: SmootherConfig) -> tuple[float, float, float]:
    """Raw (unweighted) objective terms; raises on degenerate segments."""
    norms = _check_segments(pts)
    d = pts[1:] - pts[:-1]

    z = clear[:, 0] - cfg.d_max
    viol = z[np.isfinite(z) & (z < 0.0)]
    j_obs = float(np.sum(viol * viol))

    cross = d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0]
    dot = d[:-1, 0] * d[1:, 0] + d[:-1, 1] * d[1:, 1]
    kappa = np.abs(np.arctan2(cross, dot)) / norms[:-1]
    over = np.maximum(0.0, kappa - cfg.kappa_max)
    j_cur = float(np.sum(over * over))

    s = pts[2:] - 2.0 * pts[1:-1] + pts[:-2]
    j_smo = float(np.sum(s * s))
    return j_obs, j_cur, j_smo


def _gradient_terms(pts: np.ndarray, clear: np.ndarray, cfg: SmootherConfig
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted per-term gradients as (m, 2) arrays over all points."""
    norms = _check_segments(pts)
    d = pts[1:] - pts[:-1]
    m = pts.shape[0]

    # obstacle term: 2 w_obs (d_i - d_max) * grad(d_i) at interior points,
    # where grad of the signed distance is the unit vector away from the
    # nearest boundary point
    g_obs = np.zeros((m, 2))
    dist = clear[:, 0]
    active = np.isfinite(dist) & (dist < cfg.d_max)
    if np.any(active):
        idx = np.flatnonzero(active) + 1
        diff = pts[idx] - clear[active, 1:3]
        sep = np.hypot(diff[:, 0], diff[:, 1])
        ok = sep > 1e-12
        unit = np.zeros_like(diff)
        unit[ok] = diff[ok] / sep[ok, None]
        unit *= np.sign(dist[active])[:, None]
        coef = 2.0 * cfg.w_obs * (dist[active] - cfg.d_max)
        g_obs[idx] = coef[:, None] * unit

    # curvature term via the chain rule through both displacement vectors
    g_cur = np.zeros((m, 2))
    a = d[:-1]
    b = d[1:]
    la = norms[:-1]
    lb = norms[1:]
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    dot = a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1]
    psi = np.arctan2(cross, dot)
    kappa = np.abs(psi) / la
    over = kappa - cfg.kappa_max
    act = over > 0.0
    if np.any(act):
        coef = np.zeros_like(over)
        coef[act] = 2.0 * cfg.w_cur * over[act]
        sgn = np.sign(psi)
        perp_a = np.stack([a[:, 1], -a[:, 0]], axis=1)
        perp_b = np.stack([-b[:, 1], b[:, 0]], axis=1)
        dk_da = (sgn[:, None] * perp_a - np.abs(psi)[:, None] * a) \
            / (la ** 3)[:, None]
        dk_db = sgn[:, None] * perp_b / (lb * lb * la)[:, None]
        ga = coef[:, None] * dk_da
        gb = coef[:, None] * dk_db
        g_cur[:-2] += -ga
        g_cur[1:-1] += ga - gb
        g_cur[2:] += gb

    # smoothness term on second differences
    s = pts[2:] - 2.0 * pts[1:-1] + pts[:-2]
    g_smo = np.zeros((m, 2))
    g_smo[2:] += 2.0 * s
    g_smo[1:-1] += -4.0 * s
    g_smo[:-2] += 2.0 * s
    g_smo *= cfg.w_smo

    return g_obs, g_cur, g_smo


def objective_terms(path: PathPolyline, world: WorldMap,
                    cfg: SmootherConfig) -> tuple[float, float, float]:
    """Raw (unweighted) obstacle, curvature, and smoothness costs.

    All three sum over the interior points; the obstacle cost uses the
    signed clearance to the inflated static obstacles, so penetration
    deepens the penalty. Raises DegenerateSegmentError on a collapsed
    segment.
    """
    poly_data, poly_off = _flatten_static(world)
    clear = _interior_clearance(path.points, poly_data, poly_off)
    return _terms(path.points, clear, cfg)


def total_objective(path: PathPolyline, world: WorldMap,
                    cfg: SmootherConfig) -> float:
    """Weighted sum of the three objective terms."""
    j_obs, j_cur, j_smo = objective_terms(path, world, cfg)
    return cfg.w_obs * j_obs + cfg.w_cur * j_cur + cfg.w_smo * j_smo


def gradient(path: PathPolyline, world: WorldMap,
             cfg: SmootherConfig) -> np.ndarray:
    """Analytic gradient of the weighted total objective, one 2-vector per
    point. Fixed points receive zero."""
    poly_data, poly_off = _flatten_static(world)
    clear = _interior_clearance(path.points, poly_data, poly_off)
    g_obs, g_cur, g_smo = _gradient_terms(path.points, clear, cfg)
    g = g_obs + g_cur + g_smo
    g[path.fixed_mask] = 0.0
    return g


def smooth(path: PathPolyline, world: WorldMap, cfg: SmootherConfig,
           trace: Optional[TraceFn] = None) -> PathPolyline:
    """Run per-term-step gradient descent until convergence or ``max_iters``.

    Each iteration proposes ``x - (a1 g_obs + a2 g_cur + a3 g_smo)`` on the
    free points; if the weighted total increases, a proposed point lands
    inside an obstacle the input avoided, or a segment collapses, all steps
    are halved and the proposal retried, restoring the steps after success.
    The weighted total never increases across accepted iterations, and
    fixed points are preserved bit for bit. ``trace`` receives
    ``(iteration, j_obs, j_cur, j_smo)`` for the initial state and after
    every accepted step.
    """
    pts = np.array(path.points, dtype=float)
    free = ~path.fixed_mask

    poly_data, poly_off = _flatten_static(world)
    clear = _interior_clearance(pts, poly_data, poly_off)
    terms = _terms(pts, clear, cfg)
    total = cfg.w_obs * terms[0] + cfg.w_cur * terms[1] + cfg.w_smo * terms[2]
    floor = min(0.0, float(np.min(clear[:, 0])))
    if trace is not None:
        trace(0, *terms)

    base = np.asarray(cfg.step_sizes, dtype=float)
    alphas = base.copy()
    for it in range(1, cfg.max_iters + 1):
        g_obs, g_cur, g_smo = _gradient_terms(pts, clear, cfg)
        accepted = False
        for _ in range(60):
            step = alphas[0] * g_obs + alphas[1] * g_cur + alphas[2] * g_smo
            cand = pts - np.where(free[:, None], step, 0.0)
            try:
                cand_clear = _interior_clearance(cand, poly_data, poly_off)
                cand_terms = _terms(cand, cand_clear, cfg)
            except DegenerateSegmentError:
                alphas *= 0.5
                continue
            cand_total = (cfg.w_obs * cand_terms[0]
                          + cfg.w_cur * cand_terms[1]
                          + cfg.w_smo * cand_terms[2])
            if cand_total > total or float(np.min(cand_clear[:, 0])) < floor:
                alphas *= 0.5
                continue
            accepted = True
            break
        if not accepted:
            break
        delta = total - cand_total
        pts = cand
        clear = cand_clear
        terms = cand_terms
        total = cand_total
        alphas = base.copy()
        if trace is not None:
            trace(it, *terms)
        if delta < cfg.converge_tol:
            break

    return PathPolyline(pts, path.fixed_mask)
