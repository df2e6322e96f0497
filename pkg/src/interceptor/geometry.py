"""Geometric and kinematic primitives: angles, the car model, Dubins paths,
convex obstacles and clearance queries.

All types are immutable value objects and all operations are pure functions,
so everything here is safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DomainError

Pose = tuple[float, float, float]

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi] (open at -pi)."""
    if not math.isfinite(theta):
        raise DomainError(f"non-finite angle: {theta!r}")
    r = math.fmod(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    elif r > math.pi:
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class RobotParams:
    """Kinematic limits of the car-like interceptor.

    ``max_curvature`` must equal ``tan(max_steer) / wheelbase``; use
    :meth:`consistent` to build a parameter set without spelling it out.
    """

    wheelbase: float
    max_speed: float
    max_accel: float
    max_steer: float
    max_curvature: float
    lateral_accel_limit: float

    def __post_init__(self):
        for name in ("wheelbase", "max_speed", "max_accel", "max_steer",
                     "max_curvature", "lateral_accel_limit"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise DomainError(f"RobotParams.{name} must be finite and > 0, got {val!r}")
        expected = math.tan(self.max_steer) / self.wheelbase
        if abs(self.max_curvature - expected) > 1e-9 * max(1.0, abs(expected)):
            raise DomainError(
                f"max_curvature {self.max_curvature} inconsistent with "
                f"tan(max_steer)/wheelbase = {expected}")

    @classmethod
    def consistent(cls, wheelbase: float, max_speed: float, max_accel: float,
                   max_steer: float, lateral_accel_limit: float) -> "RobotParams":
        if not (math.isfinite(wheelbase) and wheelbase > 0.0):
            raise DomainError(f"wheelbase must be finite and > 0, got {wheelbase!r}")
        return cls(wheelbase, max_speed, max_accel, max_steer,
                   math.tan(max_steer) / wheelbase, lateral_accel_limit)

    @property
    def min_turn_radius(self) -> float:
        return 1.0 / self.max_curvature


@dataclass(frozen=True)
class RobotState:
    """Pose, steering angle and speed. ``theta`` is stored normalized."""

    x: float
    y: float
    theta: float
    delta: float = 0.0
    v: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    @property
    def pose(self) -> Pose:
        return (self.x, self.y, self.theta)


def propagate_state(s: RobotState, omega: float, accel: float, dt: float,
                    params: RobotParams, max_step: float = 0.01) -> RobotState:
    """Integrate the car kinematics over ``dt`` with constant steer rate
    ``omega`` and acceleration ``accel``.

    Uses composite 4th-order Runge-Kutta substeps of at most ``max_step``;
    steering and speed are clamped to the robot limits.
    """
    for name, val in (("omega", omega), ("accel", accel), ("dt", dt)):
        if not math.isfinite(val):
            raise DomainError(f"non-finite {name}: {val!r}")
    if dt <= 0.0:
        raise DomainError(f"dt must be > 0, got {dt}")
    x, y, theta, delta, v = _kernels.rk4_propagate(
        s.x, s.y, s.theta, s.delta, s.v, omega, accel, dt,
        params.wheelbase, params.max_steer, params.max_speed, max_step)
    return RobotState(x, y, theta, delta, v)


# ---------------------------------------------------------------------------
# Dubins shortest paths

DUBINS_WORDS = _kernels.WORDS


@dataclass(frozen=True)
class DubinsPath:
    """A shortest forward-only path between two poses under a minimum
    turning radius: three segments of arcs (L/R) and straights (S)."""

    word: str
    segment_lengths: tuple[float, float, float]
    radius: float
    total_length: float
    start: Pose

    def sample(self, s: float) -> Pose:
        """Pose at arc length ``s`` from the start (clamped to the ends)."""
        w = DUBINS_WORDS.index(self.word)
        l0, l1, l2 = self.segment_lengths
        s = min(max(s, 0.0), self.total_length)
        return _kernels.dubins_sample(self.start[0], self.start[1], self.start[2],
                                      w, l0, l1, l2, self.radius, s)

    def sample_spacing(self, spacing: float) -> list[Pose]:
        """Poses every ``spacing`` along the path, always including both ends."""
        if self.total_length <= 0.0:
            return [self.start]
        n = max(1, int(math.ceil(self.total_length / spacing)))
        return [self.sample(self.total_length * i / n) for i in range(n + 1)]

    @property
    def end(self) -> Pose:
        return self.sample(self.total_length)


def dubins_shortest(start: Pose, goal: Pose, radius: float) -> DubinsPath:
    """Minimum-length Dubins path over all six word classes.

    Equal-length words tie-break in the fixed order
    LSL < RSR < LSR < RSL < RLR < LRL. Coincident poses give a zero-length
    path rather than an error.
    """
    if not (math.isfinite(radius) and radius > 0.0):
        raise DomainError(f"radius must be finite and > 0, got {radius!r}")
    dx = goal[0] - start[0]
    dy = goal[1] - start[1]
    dth = normalize_angle(goal[2] - start[2])
    if math.hypot(dx, dy) < 1e-12 and abs(dth) < 1e-12:
        return DubinsPath("LSL", (0.0, 0.0, 0.0), radius, 0.0, tuple(start))
    w, l0, l1, l2 = _kernels.dubins_best(start[0], start[1], start[2],
                                         goal[0], goal[1], goal[2], radius)
    if w < 0:  # cannot happen: LSL/RSR always admit a solution
        raise DomainError("no Dubins word admits a solution")
    return DubinsPath(DUBINS_WORDS[w], (l0, l1, l2), radius,
                      l0 + l1 + l2, tuple(start))


# ---------------------------------------------------------------------------
# Obstacles and the world map


def _inflate_polygon(verts: np.ndarray, margin: float) -> np.ndarray:
    """Offset a convex CCW polygon outward by ``margin``.

    Each edge shifts along its outward normal; new vertices are the
    intersections of adjacent shifted edge lines (the half-space form of
    the inflated set).
    """
    if margin == 0.0:
        return verts.copy()
    n = len(verts)
    edges = np.roll(verts, -1, axis=0) - verts
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    # outward normal of a CCW edge points to its right
    normals = np.column_stack((edges[:, 1], -edges[:, 0])) / lengths[:, None]
    shifted_pts = verts + margin * normals          # a point on each shifted line
    out = np.empty_like(verts, dtype=float)
    for i in range(n):
        j = (i - 1) % n
        # intersect shifted line j (through p_j, direction e_j) with line i
        pj, ej = shifted_pts[j], edges[j]
        pi, ei = shifted_pts[i], edges[i]
        denom = ej[0] * ei[1] - ej[1] * ei[0]
        t = ((pi[0] - pj[0]) * ei[1] - (pi[1] - pj[1]) * ei[0]) / denom
        out[i] = pj + t * ej
    return out


@dataclass(frozen=True)
class Obstacle:
    """Convex polygonal obstacle, optionally translating at constant velocity
    and inflated by a safety margin.

    ``vertices_at_t0`` must be counterclockwise with at least 3 non-collinear
    vertices. The inflated polygon (used by every query) is the intersection
    of the edge half-planes shifted outward by ``inflation``.
    """

    kind: str
    vertices_at_t0: np.ndarray
    velocity: tuple[float, float] = (0.0, 0.0)
    inflation: float = 0.0
    _inflated: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("static", "dynamic"):
            raise DomainError(f"obstacle kind must be static|dynamic, got {self.kind!r}")
        verts = np.asarray(self.vertices_at_t0, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise DomainError("obstacle needs an (n, 2) vertex array with n >= 3")
        edges = np.roll(verts, -1, axis=0) - verts
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] \
            - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        scale = float(np.max(np.abs(verts))) + 1.0
        if np.any(cross < 1e-12 * scale * scale):
            raise DomainError("obstacle polygon must be strictly convex and CCW")
        if self.inflation < 0.0:
            raise DomainError("inflation must be >= 0")
        if self.kind == "static" and any(self.velocity):
            raise DomainError("static obstacle must have zero velocity")
        object.__setattr__(self, "vertices_at_t0", verts)
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))
        object.__setattr__(self, "_inflated", _inflate_polygon(verts, float(self.inflation)))

    def vertices_at(self, t: float, inflated: bool = True) -> np.ndarray:
        base = self._inflated if inflated else self.vertices_at_t0
        if self.kind == "static" or t == 0.0:
            return base
        return base + t * np.asarray(self.velocity)

    def half_spaces(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """The translated, inflated polygon as ``G z <= b`` rows."""
        verts = self.vertices_at(t)
        edges = np.roll(verts, -1, axis=0) - verts
        g = np.column_stack((edges[:, 1], -edges[:, 0]))
        b = np.sum(g * verts, axis=1)
        return g, b

    def contains(self, p, t: float = 0.0) -> bool:
        return _kernels.poly_contains(float(p[0]), float(p[1]), self.vertices_at(t))

    def signed_distance(self, p, t: float = 0.0) -> tuple[float, tuple[float, float]]:
        d, nx, ny = _kernels.poly_signed_distance(float(p[0]), float(p[1]),
                                                  self.vertices_at(t))
        return d, (nx, ny)


def obstacle_contains(ob: Obstacle, p, t: float = 0.0) -> bool:
    """True iff ``p`` is inside the obstacle (translated to time ``t``,
    inflated), boundary included."""
    if t < 0.0:
        raise DomainError(f"t must be >= 0, got {t}")
    return ob.contains(p, t)


@dataclass(frozen=True)
class WorldMap:
    """Rectangular map [0, width] x [0, height] with a set of obstacles."""

    width: float
    height: float
    obstacles: tuple[Obstacle, ...] = ()

    def __post_init__(self):
        if not (self.width > 0.0 and self.height > 0.0):
            raise DomainError("map dimensions must be positive")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @property
    def static_obstacles(self) -> tuple[Obstacle, ...]:
        return tuple(ob for ob in self.obstacles if ob.kind == "static")

    @property
    def dynamic_obstacles(self) -> tuple[Obstacle, ...]:
        return tuple(ob for ob in self.obstacles if ob.kind == "dynamic")

    def in_bounds(self, p) -> bool:
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height

    def point_free(self, p, t: float = 0.0, static_only: bool = False) -> bool:
        """Fast containment-only check (no distances)."""
        px, py = float(p[0]), float(p[1])
        for ob in self.obstacles:
            if static_only and ob.kind != "static":
                continue
            if _kernels.poly_contains(px, py, ob.vertices_at(t)):
                return False
        return True

    def signed_clearance(self, p, t: float = 0.0, static_only: bool = False
                         ) -> tuple[float, tuple[float, float] | None]:
        """Minimum signed distance over obstacles, with the realizing
        boundary point. Empty obstacle set gives ``(inf, None)``."""
        best = math.inf
        nearest = None
        px, py = float(p[0]), float(p[1])
        for ob in self.obstacles:
            if static_only and ob.kind != "static":
                continue
            d, nx, ny = _kernels.poly_signed_distance(px, py, ob.vertices_at(t))
            if d < best:
                best = d
                nearest = (nx, ny)
        return best, nearest


def signed_clearance(world: WorldMap, p, t: float = 0.0,
                     static_only: bool = False):
    """Module-level alias for :meth:`WorldMap.signed_clearance`."""
    if t < 0.0:
        raise DomainError(f"t must be >= 0, got {t}")
    return world.signed_clearance(p, t, static_only)
