"""Kinematically feasible coarse path search over the static obstacle map.

A best-first search on (x, y, theta) with constant-steer arc primitives,
a Dubins/Euclidean heuristic, and a Dubins shot toward the goal once the
search gets close. Dynamic obstacles are deliberately ignored here; the
speed stage handles them on top of the fixed path.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (DomainError, GoalBlockedError, NoPathError,
                     StartBlockedError)
from .geometry import (Pose, RobotParams, WorldMap, dubins_shortest,
                       normalize_angle)

TWO_PI = 2.0 * math.pi

ARC_SUBSTEPS = 4  # collision samples per expansion arc
STEER_CHANGE_PENALTY = 0.1  # of arc length, per change of steering action
SHOT_RADIUS_ARCS = 10.0  # Dubins shot range, in units of arc_length


@dataclass(frozen=True)
class GridSpec:
    """Search discretization: cell size, heading bins, expansion arc length
    and the discrete steering actions."""

    cell_size: float = 1.0
    theta_bins: int = 72
    arc_length: float = 2.0
    steer_set: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.cell_size > 0.0):
            raise DomainError("cell_size must be > 0")
        if self.theta_bins < 8:
            raise DomainError("theta_bins must be >= 8")
        if not (self.arc_length > 0.0):
            raise DomainError("arc_length must be > 0")

    @classmethod
    def for_params(cls, params: RobotParams, cell_size: float = 1.0,
                   theta_bins: int = 72,
                   arc_length: float | None = None) -> "GridSpec":
        """Default five-action grid: hard left, half left, straight, half
        right, hard right at the steering limit."""
        d = params.max_steer
        return cls(cell_size, theta_bins,
                   2.0 * cell_size if arc_length is None else arc_length,
                   (-d, -d / 2.0, 0.0, d / 2.0, d))


@dataclass
class SearchNode:
    __slots__ = ("x", "y", "theta", "g", "parent", "steer_index")

    x: float
    y: float
    theta: float
    g: float
    parent: "SearchNode | None"
    steer_index: int


def heuristic(node: Pose, goal: Pose, r_min: float) -> float:
    """max(Dubins length, Euclidean distance) from node to goal."""
    return _kernels.heuristic_best(node[0], node[1], node[2],
                                   goal[0], goal[1], goal[2], r_min)


def _dubins_in_box(path, width: float, height: float) -> bool:
    """Exact check that a Dubins path stays inside [0,w] x [0,h]: per
    segment, only endpoints and the axis-extreme points of arcs matter."""
    half_pi = math.pi / 2.0
    x, y, th = path.start
    if not (0.0 <= x <= width and 0.0 <= y <= height):
        return False
    word = _kernels.WORDS.index(path.word)
    r = path.radius
    for seg_type, seg_len in zip(_kernels.WORD_SEGMENTS[word],
                                 path.segment_lengths):
        if seg_len <= 0.0:
            continue
        if seg_type == 1:
            x += seg_len * math.cos(th)
            y += seg_len * math.sin(th)
        else:
            left = seg_type == 0
            cx = x - r * math.sin(th) if left else x + r * math.sin(th)
            cy = y + r * math.cos(th) if left else y - r * math.cos(th)
            phi = seg_len / r
            psi0 = th - half_pi if left else th + half_pi
            psi1 = psi0 + phi if left else psi0 - phi
            lo, hi = min(psi0, psi1), max(psi0, psi1)
            k = math.ceil(lo / half_pi)
            while k * half_pi <= hi:
                a = k * half_pi
                px = cx + r * math.cos(a)
                py = cy + r * math.sin(a)
                if not (0.0 <= px <= width and 0.0 <= py <= height):
                    return False
                k += 1
            x = cx + r * math.cos(psi1)
            y = cy + r * math.sin(psi1)
            th = th + phi if left else th - phi
        if not (0.0 <= x <= width and 0.0 <= y <= height):
            return False
    return True


def dubins_shot(node: Pose, goal: Pose, world: WorldMap, r_min: float,
                spacing: float) -> list[Pose]:
    """Try to finish the path with a direct Dubins connection.

    Map bounds are checked exactly via arc extremes. The obstacle check
    walks the curve with clearance-sized steps (floored at 1 mm): from a
    point with static clearance c the next c meters of arc cannot collide,
    so acceptance is immune to corner clipping between fixed samples.
    Returns waypoints sampled every ``spacing``, or an empty list on a miss.
    """
    path = dubins_shortest(node, goal, r_min)
    if not _dubins_in_box(path, world.width, world.height):
        return []
    min_step = 1e-3
    s = 0.0
    while True:
        x, y, _ = path.sample(s)
        c, _n = world.signed_clearance((x, y), static_only=True)
        if c <= 0.0:
            return []
        if s >= path.total_length:
            break
        s = min(s + max(c, min_step), path.total_length)
    return path.sample_spacing(spacing)


def _cell(x: float, y: float, theta: float, grid: GridSpec) -> tuple[int, int, int]:
    r = math.fmod(theta, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return (int(math.floor(x / grid.cell_size)),
            int(math.floor(y / grid.cell_size)),
            int(r * grid.theta_bins / TWO_PI) % grid.theta_bins)


def _reconstruct(node: SearchNode) -> list[Pose]:
    out = []
    cur = node
    while cur is not None:
        out.append((cur.x, cur.y, cur.theta))
        cur = cur.parent
    out.reverse()
    return out


def plan_path(world: WorldMap, start: Pose, goal: Pose, grid: GridSpec,
              params: RobotParams) -> list[Pose]:
    """Search a collision-free, curvature-feasible waypoint chain from
    ``start`` to ``goal``.

    Waypoints are one expansion arc apart except for the final Dubins-shot
    stretch, which is sampled at half the arc length. Raises
    StartBlockedError / GoalBlockedError / NoPathError.
    """
    if not grid.steer_set:
        raise DomainError("grid.steer_set is empty; use GridSpec.for_params")
    for s in grid.steer_set:
        if abs(s) > params.max_steer + 1e-12:
            raise DomainError(f"steer action {s} exceeds limit {params.max_steer}")
    if not world.in_bounds(start) or not world.point_free(start, static_only=True):
        raise StartBlockedError(f"start pose {start} blocked or out of bounds")
    if not world.in_bounds(goal) or not world.point_free(goal, static_only=True):
        raise GoalBlockedError(f"goal pose {goal} blocked or out of bounds")

    r_min = params.min_turn_radius
    shot_radius = SHOT_RADIUS_ARCS * grid.arc_length
    shot_spacing = grid.arc_length / 2.0

    # flatten static obstacle polygons once for the expansion kernel
    polys = [ob.vertices_at(0.0) for ob in world.static_obstacles]
    if polys:
        poly_data = np.ascontiguousarray(np.vstack(polys))
        poly_off = np.concatenate(
            ([0], np.cumsum([len(p) for p in polys]))).astype(np.int64)
    else:
        poly_data = np.zeros((0, 2))
        poly_off = np.zeros(1, dtype=np.int64)
    steers = np.asarray(grid.steer_set, dtype=float)

    start_node = SearchNode(start[0], start[1], normalize_angle(start[2]),
                            0.0, None, len(grid.steer_set) // 2)
    open_heap: list[tuple[float, float, int, SearchNode]] = []
    counter = 0
    heapq.heappush(open_heap,
                   (heuristic(start, goal, r_min), 0.0, counter, start_node))
    closed: set[tuple[int, int, int]] = set()
    best_g: dict[tuple[int, int, int], float] = {
        _cell(start[0], start[1], start[2], grid): 0.0}

    goal_cell = _cell(goal[0], goal[1], goal[2], grid)
    gx, gy, gth = goal[0], goal[1], goal[2]

    # hot path: local bindings and inline binning
    inv_cell = 1.0 / grid.cell_size
    bins = grid.theta_bins
    bin_scale = bins / TWO_PI
    arc_cost = grid.arc_length
    change_cost = STEER_CHANGE_PENALTY * grid.arc_length
    n_steers = len(steers)
    expand = _kernels.expand_arcs
    h_best = _kernels.heuristic_best
    push = heapq.heappush
    pop = heapq.heappop
    fmod = math.fmod
    pi = math.pi

    while open_heap:
        _f, g, _c, node = pop(open_heap)
        th = node.theta if node.theta >= 0.0 else node.theta + TWO_PI
        key = (int(node.x * inv_cell), int(node.y * inv_cell),
               int(th * bin_scale) % bins)
        if key in closed:
            continue
        closed.add(key)

        if math.hypot(gx - node.x, gy - node.y) <= shot_radius:
            shot = dubins_shot((node.x, node.y, node.theta), goal, world,
                               r_min, shot_spacing)
            if shot:
                return _reconstruct(node) + shot[1:]
        if key == goal_cell:
            # landed in the goal cell without a clean shot: accept the pose
            return _reconstruct(node) + [goal]

        arcs = expand(node.x, node.y, node.theta, params.wheelbase,
                      grid.arc_length, ARC_SUBSTEPS, steers, poly_data,
                      poly_off, world.width, world.height).tolist()
        for idx in range(n_steers):
            row = arcs[idx]
            if row[0] == 0.0:
                continue
            nx = row[1]
            ny = row[2]
            nth = fmod(row[3], TWO_PI)
            if nth <= -pi:
                nth += TWO_PI
            elif nth > pi:
                nth -= TWO_PI
            child_key = (int(nx * inv_cell), int(ny * inv_cell),
                         int((nth if nth >= 0.0 else nth + TWO_PI)
                             * bin_scale) % bins)
            if child_key in closed:
                continue
            child_g = g + arc_cost if idx == node.steer_index \
                else g + arc_cost + change_cost
            if best_g.get(child_key, math.inf) <= child_g:
                continue
            best_g[child_key] = child_g
            counter += 1
            push(open_heap,
                 (child_g + h_best(nx, ny, nth, gx, gy, gth, r_min),
                  child_g, counter, SearchNode(nx, ny, nth, child_g, node,
                                               idx)))

    raise NoPathError(f"open set exhausted without reaching {goal}")


def path_length(waypoints: list[Pose]) -> float:
    """Total chord length of a waypoint chain."""
    return sum(math.hypot(b[0] - a[0], b[1] - a[1])
               for a, b in zip(waypoints, waypoints[1:]))
