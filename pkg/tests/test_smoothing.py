"""Tests for gradient-descent path smoothing."""

import math

import numpy as np
import pytest

from interceptor.errors import DegenerateSegmentError, DomainError
from interceptor.geometry import Obstacle, WorldMap
from interceptor.smoothing import (PathPolyline, SmootherConfig,
                                   discrete_curvatures, gradient,
                                   objective_terms, smooth, total_objective)


def _square(cx, cy, half, inflation=0.0):
    return Obstacle("static", ((cx - half, cy - half), (cx + half, cy - half),
                               (cx + half, cy + half), (cx - half, cy + half)),
                    inflation=inflation)


EMPTY = WorldMap(20.0, 20.0, ())
SQUARE_WORLD = WorldMap(20.0, 20.0, (_square(10.0, 10.0, 2.0),))


# --- independent recomputation of the objective -------------------------

def _oracle_signed_distance(p, polys):
    """Nearest boundary point over all polygons, via per-edge projections
    computed with numpy on the full edge list at once."""
    best = math.inf
    for verts in polys:
        a = verts
        b = np.roll(verts, -1, axis=0)
        e = b - a
        r = p[None, :] - a
        inside = bool(np.all(e[:, 0] * r[:, 1] - e[:, 1] * r[:, 0] >= 0.0))
        t = np.clip(np.sum(r * e, axis=1) / np.sum(e * e, axis=1), 0.0, 1.0)
        c = a + t[:, None] * e
        d = float(np.min(np.hypot(p[0] - c[:, 0], p[1] - c[:, 1])))
        if inside:
            d = -d
        best = min(best, d)
    return best


def _oracle_terms(pts, polys, cfg):
    j_obs = 0.0
    for i in range(1, len(pts) - 1):
        if polys:
            z = _oracle_signed_distance(pts[i], polys) - cfg.d_max
            if z < 0.0:
                j_obs += z * z
    j_cur = 0.0
    j_smo = 0.0
    for i in range(1, len(pts) - 1):
        a = pts[i] - pts[i - 1]
        b = pts[i + 1] - pts[i]
        phi = abs(math.atan2(a[0] * b[1] - a[1] * b[0],
                             a[0] * b[0] + a[1] * b[1]))
        kappa = phi / math.hypot(a[0], a[1])
        if kappa > cfg.kappa_max:
            j_cur += (kappa - cfg.kappa_max) ** 2
        j_smo += (b[0] - a[0]) ** 2 + (b[1] - a[1]) ** 2
    return j_obs, j_cur, j_smo


def _fd_total(pts, mask, world, cfg, h=1e-6):
    g = np.zeros_like(pts)
    for i in range(pts.shape[0]):
        if mask[i]:
            continue
        for k in range(2):
            hi = pts.copy()
            hi[i, k] += h
            lo = pts.copy()
            lo[i, k] -= h
            g[i, k] = (total_objective(PathPolyline(hi, mask), world, cfg)
                       - total_objective(PathPolyline(lo, mask), world, cfg)
                       ) / (2.0 * h)
    return g


def _away_from_kinks(pts, world, cfg):
    """True when no point sits near the clamp boundaries where the
    objective is not differentiable."""
    for p in pts:
        d, _ = world.signed_clearance(p, static_only=True)
        if abs(d - cfg.d_max) < 1e-3:
            return False
    kap = discrete_curvatures(pts)
    if np.any(np.abs(kap - cfg.kappa_max) < 1e-3):
        return False
    d = np.diff(pts, axis=0)
    psi = np.arctan2(d[:-1, 0] * d[1:, 1] - d[:-1, 1] * d[1:, 0],
                     d[:-1, 0] * d[1:, 0] + d[:-1, 1] * d[1:, 1])
    return bool(np.all(np.abs(psi) < math.pi - 1e-2))


# --- config and polyline validation -------------------------------------

def test_config_defaults():
    cfg = SmootherConfig(kappa_max=0.5)
    assert (cfg.w_obs, cfg.w_cur, cfg.w_smo) == (0.1, 0.1, 0.2)
    assert cfg.step_sizes == (0.25, 0.25, 0.25)
    assert cfg.max_iters >= 1


def test_config_rejects_bad_values():
    with pytest.raises(DomainError):
        SmootherConfig(kappa_max=0.0)
    with pytest.raises(DomainError):
        SmootherConfig(kappa_max=0.5, d_max=-1.0)
    with pytest.raises(DomainError):
        SmootherConfig(kappa_max=0.5, w_smo=0.0)
    with pytest.raises(DomainError):
        SmootherConfig(kappa_max=0.5, step_sizes=(0.25, 0.25))
    with pytest.raises(DomainError):
        SmootherConfig(kappa_max=0.5, step_sizes=(0.25, -0.25, 0.25))
    with pytest.raises(DomainError):
        SmootherConfig(kappa_max=0.5, max_iters=0)
    with pytest.raises(DomainError):
        SmootherConfig(kappa_max=0.5, converge_tol=-1e-9)


def test_polyline_validation():
    with pytest.raises(DomainError):
        PathPolyline(np.zeros((2, 2)))
    with pytest.raises(DomainError):
        PathPolyline(np.zeros((4, 3)))
    with pytest.raises(DomainError):
        PathPolyline(np.array([[0.0, 0.0], [1.0, np.nan], [2.0, 0.0]]))
    with pytest.raises(DomainError):
        PathPolyline(np.zeros((0, 2)))


def test_polyline_degenerate_segment():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(DegenerateSegmentError):
        PathPolyline(pts)
    nearly = np.array([[0.0, 0.0], [1.0, 0.0], [1.0 + 1e-12, 0.0]])
    with pytest.raises(DegenerateSegmentError):
        PathPolyline(nearly)


def test_polyline_endpoints_always_fixed():
    pts = np.array([[0.0, 0.0], [1.0, 0.5], [2.0, 0.0]])
    path = PathPolyline(pts, np.zeros(3, dtype=bool))
    assert path.fixed_mask[0] and path.fixed_mask[-1]
    assert not path.fixed_mask[1]
    with pytest.raises(DomainError):
        PathPolyline(pts, np.zeros(4, dtype=bool))


def test_polyline_from_waypoints_strips_heading():
    way = [(0.0, 0.0, 0.3), (1.0, 0.5, 0.2), (2.0, 0.0, -0.1)]
    path = PathPolyline.from_waypoints(way)
    assert path.points.shape == (3, 2)
    assert np.allclose(path.points[:, 1], [0.0, 0.5, 0.0])
    assert abs(path.length - 2.0 * math.hypot(1.0, 0.5)) < 1e-12


# --- objective ----------------------------------------------------------

def test_objective_zero_on_straight_far_path():
    pts = np.stack([np.linspace(1.0, 5.0, 5), np.full(5, 1.0)], axis=1)
    cfg = SmootherConfig(kappa_max=0.5, d_max=2.0)
    terms = objective_terms(PathPolyline(pts), SQUARE_WORLD, cfg)
    assert terms == (0.0, 0.0, 0.0)


def test_objective_three_point_smoothness():
    path = PathPolyline(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]]))
    cfg = SmootherConfig(kappa_max=1e6, d_max=2.0)
    j_obs, j_cur, j_smo = objective_terms(path, EMPTY, cfg)
    assert j_obs == 0.0
    assert j_cur == 0.0
    assert abs(j_smo - 1.0) < 1e-15


def test_objective_matches_independent_recomputation():
    rng = np.random.default_rng(41)
    world = WorldMap(20.0, 20.0, (_square(10.0, 10.0, 2.0, inflation=0.3),
                                  _square(4.0, 14.0, 1.0)))
    polys = [ob.vertices_at(0.0) for ob in world.static_obstacles]
    cfg = SmootherConfig(kappa_max=0.4, d_max=1.5)
    for _ in range(30):
        n = int(rng.integers(6, 12))
        xs = np.linspace(2.0, 18.0, n) + rng.normal(0.0, 0.3, n)
        ys = 9.0 + np.cumsum(rng.normal(0.0, 1.0, n)) * 0.8
        pts = np.stack([xs, np.clip(ys, 0.5, 19.5)], axis=1)
        got = objective_terms(PathPolyline(pts), world, cfg)
        want = _oracle_terms(pts, polys, cfg)
        assert np.allclose(got, want, rtol=0.0, atol=1e-9), (got, want)


def test_objective_penetration_deepens_penalty():
    cfg = SmootherConfig(kappa_max=1e6, d_max=1.0)
    prev = -1.0
    for y in (12.5, 11.5, 10.5, 10.0):
        pts = np.array([[4.0, y], [10.0, y], [16.0, y]])
        j_obs, _, _ = objective_terms(PathPolyline(pts), SQUARE_WORLD, cfg)
        assert j_obs > prev
        prev = j_obs


# --- gradient -----------------------------------------------------------

def test_gradient_zero_at_zero_objective():
    pts = np.stack([np.arange(6, dtype=float), np.full(6, 1.0)], axis=1)
    cfg = SmootherConfig(kappa_max=0.5, d_max=2.0)
    g = gradient(PathPolyline(pts), SQUARE_WORLD, cfg)
    assert np.all(g == 0.0)


def test_gradient_smoothness_stencil():
    rng = np.random.default_rng(5)
    cfg = SmootherConfig(kappa_max=1e6, d_max=2.0)
    for _ in range(20):
        pts = rng.normal(0.0, 1.0, (7, 2)) * 3.0 + 10.0
        path = PathPolyline(pts)
        g = gradient(path, EMPTY, cfg)
        for i in range(2, 5):
            want = cfg.w_smo * 2.0 * (pts[i - 2] - 4.0 * pts[i - 1]
                                      + 6.0 * pts[i] - 4.0 * pts[i + 1]
                                      + pts[i + 2])
            assert np.allclose(g[i], want, atol=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    cfg = SmootherConfig(kappa_max=0.5, d_max=2.0)
    checked = 0
    while checked < 120:
        n = int(rng.integers(5, 10))
        xs = np.linspace(2.0, 18.0, n)
        ys = 5.0 + np.cumsum(rng.normal(0.0, 1.2, n)) * 0.4 + rng.uniform(0, 2)
        pts = np.stack([xs, ys], axis=1)
        if not _away_from_kinks(pts, SQUARE_WORLD, cfg):
            continue
        checked += 1
        path = PathPolyline(pts)
        ga = gradient(path, SQUARE_WORLD, cfg)
        gf = _fd_total(pts, path.fixed_mask, SQUARE_WORLD, cfg)
        scale = max(1.0, float(np.abs(gf).max()))
        assert float(np.abs(ga - gf).max()) / scale <= 1e-5


def test_gradient_matches_fd_sharp_turns():
    rng = np.random.default_rng(12)
    cfg = SmootherConfig(kappa_max=0.3, d_max=0.5)
    checked = 0
    while checked < 60:
        n = int(rng.integers(5, 8))
        pts = np.stack([np.linspace(1.0, 6.0, n),
                        rng.uniform(1.0, 5.0, n)], axis=1)
        if not _away_from_kinks(pts, EMPTY, cfg):
            continue
        kap = discrete_curvatures(pts)
        if not np.any(kap > cfg.kappa_max):
            continue
        checked += 1
        path = PathPolyline(pts)
        ga = gradient(path, EMPTY, cfg)
        gf = _fd_total(pts, path.fixed_mask, EMPTY, cfg)
        scale = max(1.0, float(np.abs(gf).max()))
        assert float(np.abs(ga - gf).max()) / scale <= 1e-5


def test_gradient_matches_fd_near_obstacle():
    rng = np.random.default_rng(13)
    cfg = SmootherConfig(kappa_max=2.0, d_max=2.5)
    checked = 0
    while checked < 60:
        n = 6
        xs = np.linspace(4.0, 16.0, n)
        ys = rng.uniform(12.3, 14.0, n)
        pts = np.stack([xs, ys], axis=1)
        if not _away_from_kinks(pts, SQUARE_WORLD, cfg):
            continue
        checked += 1
        path = PathPolyline(pts)
        ga = gradient(path, SQUARE_WORLD, cfg)
        gf = _fd_total(pts, path.fixed_mask, SQUARE_WORLD, cfg)
        scale = max(1.0, float(np.abs(gf).max()))
        assert float(np.abs(ga - gf).max()) / scale <= 1e-5


def test_gradient_fixed_points_zero():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 1.0],
                    [4.0, 0.0]])
    mask = np.array([True, False, True, False, True])
    cfg = SmootherConfig(kappa_max=0.5, d_max=2.0)
    g = gradient(PathPolyline(pts, mask), EMPTY, cfg)
    assert np.all(g[mask] == 0.0)
    assert np.any(g[~mask] != 0.0)


def test_gradient_pushes_away_from_obstacle():
    # straight path parallel to the top face, half of d_max away: only the
    # obstacle term is active, and descent must move points away from it
    cfg = SmootherConfig(kappa_max=0.5, d_max=2.0)
    pts = np.array([[6.0, 13.0], [10.0, 13.0], [14.0, 13.0]])
    g = gradient(PathPolyline(pts), SQUARE_WORLD, cfg)
    away = np.array([0.0, 1.0])  # interior point is above the face
    assert float(-g[1] @ away) > 0.0
    assert abs(g[1, 0]) < 1e-12


# --- smoothing ----------------------------------------------------------

def test_smooth_straight_path_unchanged():
    pts = np.stack([np.linspace(0.0, 10.0, 6), np.full(6, 2.0)], axis=1)
    path = PathPolyline(pts)
    cfg = SmootherConfig(kappa_max=0.5, d_max=2.0)
    out = smooth(path, EMPTY, cfg)
    assert np.array_equal(out.points, path.points)


def test_smooth_zigzag_monotone_and_converges():
    path = PathPolyline(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0],
                                  [3.0, 1.0], [4.0, 0.0]]))
    cfg = SmootherConfig(kappa_max=1e6, d_max=0.5, w_obs=1e-12, w_cur=1e-12,
                         w_smo=0.2, max_iters=4000, converge_tol=1e-14)
    hist = []
    out = smooth(path, EMPTY, cfg, trace=lambda *row: hist.append(row))
    assert hist[0][0] == 0 and [row[0] for row in hist] == list(range(len(hist)))
    j_smo = [row[3] for row in hist]
    assert all(b <= a + 1e-15 for a, b in zip(j_smo, j_smo[1:]))
    chord = np.linspace(path.points[0], path.points[-1], 5)
    assert float(np.abs(out.points - chord).max()) < 1e-4


def test_smooth_endpoints_bit_identical():
    rng = np.random.default_rng(3)
    xs = np.linspace(2.0, 18.0, 9)
    ys = 14.0 + rng.normal(0.0, 0.8, 9)
    path = PathPolyline(np.stack([xs, ys], axis=1))
    cfg = SmootherConfig(kappa_max=0.5, d_max=1.5, max_iters=300)
    out = smooth(path, SQUARE_WORLD, cfg)
    assert out.points[0].tobytes() == path.points[0].tobytes()
    assert out.points[-1].tobytes() == path.points[-1].tobytes()
    assert not np.array_equal(out.points[1:-1], path.points[1:-1])


def test_smooth_fixed_interior_point_stays():
    pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 1.0],
                    [4.0, 0.0]])
    mask = np.array([False, False, True, False, False])
    path = PathPolyline(pts, mask)
    cfg = SmootherConfig(kappa_max=1e6, d_max=0.5, max_iters=500)
    out = smooth(path, EMPTY, cfg)
    assert out.points[2].tobytes() == pts[2].tobytes()
    assert not np.array_equal(out.points[1], pts[1])


def test_smooth_total_objective_never_increases():
    rng = np.random.default_rng(19)
    xs = np.linspace(2.0, 18.0, 10)
    ys = 13.0 + np.cumsum(rng.normal(0.0, 0.8, 10)) * 0.5
    path = PathPolyline(np.stack([xs, ys], axis=1))
    cfg = SmootherConfig(kappa_max=0.5, d_max=1.5, max_iters=400)
    totals = []
    out = smooth(path, SQUARE_WORLD, cfg,
                 trace=lambda _i, jo, jc, js: totals.append(
                     cfg.w_obs * jo + cfg.w_cur * jc + cfg.w_smo * js))
    assert len(totals) >= 2
    assert all(b <= a + 1e-12 for a, b in zip(totals, totals[1:]))
    assert total_objective(out, SQUARE_WORLD, cfg) <= totals[0]


def test_smooth_curvature_within_tolerance():
    path = PathPolyline(np.array([[0.0, 2.0], [1.0, 3.0], [2.0, 2.0],
                                  [3.0, 3.0], [4.0, 2.0], [5.0, 3.0],
                                  [6.0, 2.0]]))
    cfg = SmootherConfig(kappa_max=0.5, d_max=2.0, max_iters=2000,
                         converge_tol=1e-12)
    assert float(discrete_curvatures(path.points).max()) > cfg.kappa_max
    out = smooth(path, EMPTY, cfg)
    assert float(discrete_curvatures(out.points).max()) <= cfg.kappa_max * 1.05


def test_smooth_never_pushed_into_obstacle():
    # smoothness weight overwhelming the obstacle weight would straighten
    # the detour through the square; the clearance floor must prevent it
    xs = np.array([3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0])
    ys = np.array([10.0, 11.5, 13.2, 13.8, 13.8, 13.2, 11.5, 10.0])
    path = PathPolyline(np.stack([xs, ys], axis=1))
    cfg = SmootherConfig(kappa_max=5.0, d_max=0.5, w_obs=1e-6, w_cur=1e-6,
                         w_smo=1.0, max_iters=3000, converge_tol=1e-13)
    out = smooth(path, SQUARE_WORLD, cfg)
    for p in out.points[1:-1]:
        d, _ = SQUARE_WORLD.signed_clearance(p, static_only=True)
        assert d >= 0.0


def test_smooth_detour_gets_shorter_and_stays_clear():
    xs = np.array([3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0, 17.0])
    ys = np.array([10.0, 11.5, 13.2, 13.8, 13.8, 13.2, 11.5, 10.0])
    path = PathPolyline(np.stack([xs, ys], axis=1))
    cfg = SmootherConfig(kappa_max=0.5, d_max=1.0, max_iters=3000,
                         converge_tol=1e-12)
    out = smooth(path, SQUARE_WORLD, cfg)
    assert out.length < path.length
    for p in out.points[1:-1]:
        d, _ = SQUARE_WORLD.signed_clearance(p, static_only=True)
        assert d >= 0.0


def test_smooth_respects_max_iters():
    path = PathPolyline(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0],
                                  [3.0, 1.0], [4.0, 0.0]]))
    cfg = SmootherConfig(kappa_max=1e6, d_max=0.5, max_iters=1,
                         converge_tol=0.0)
    hist = []
    smooth(path, EMPTY, cfg, trace=lambda *row: hist.append(row))
    assert len(hist) <= 2  # initial state plus at most one accepted step


def test_discrete_curvature_semicircle():
    # points on a radius-2 arc: discrete curvature approximates 1/r
    r = 2.0
    ang = np.linspace(0.0, math.pi, 40)
    pts = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    kap = discrete_curvatures(pts)
    assert np.allclose(kap, 1.0 / r, rtol=1e-3)
