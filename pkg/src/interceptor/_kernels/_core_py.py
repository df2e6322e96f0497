"""Pure-Python kernels: Dubins word solves, arc rollout, RK4 propagation,
convex-polygon containment and signed distance.

This module mirrors the compiled extension ``_core`` function for function;
the two must stay behaviorally identical (see tests/test_kernels.py).
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi

# Word encoding shared with the compiled kernel: segment types per word,
# 0 = left arc, 1 = straight, 2 = right arc.
WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
WORD_SEGMENTS = (
    (0, 1, 0),
    (2, 1, 2),
    (0, 1, 2),
    (2, 1, 0),
    (2, 0, 2),
    (0, 2, 0),
)


def _mod2pi(x):
    r = math.fmod(x, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r


def _lsl(alpha, beta, d):
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    p_sq = 2.0 + d * d - 2.0 * math.cos(alpha - beta) + 2.0 * d * (sa - sb)
    if p_sq < 0.0:
        return None
    tmp = math.atan2(cb - ca, d + sa - sb)
    return _mod2pi(-alpha + tmp), math.sqrt(p_sq), _mod2pi(beta - tmp)


def _rsr(alpha, beta, d):
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    p_sq = 2.0 + d * d - 2.0 * math.cos(alpha - beta) + 2.0 * d * (sb - sa)
    if p_sq < 0.0:
        return None
    tmp = math.atan2(ca - cb, d - sa + sb)
    return _mod2pi(alpha - tmp), math.sqrt(p_sq), _mod2pi(-beta + tmp)


def _lsr(alpha, beta, d):
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    p_sq = -2.0 + d * d + 2.0 * math.cos(alpha - beta) + 2.0 * d * (sa + sb)
    if p_sq < 0.0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
    return _mod2pi(-alpha + tmp), p, _mod2pi(-beta + tmp)


def _rsl(alpha, beta, d):
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    p_sq = -2.0 + d * d + 2.0 * math.cos(alpha - beta) - 2.0 * d * (sa + sb)
    if p_sq < 0.0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
    return _mod2pi(alpha - tmp), p, _mod2pi(beta - tmp)


def _rlr(alpha, beta, d):
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    tmp = (6.0 - d * d + 2.0 * math.cos(alpha - beta) + 2.0 * d * (sa - sb)) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(alpha - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
    return t, p, _mod2pi(alpha - beta - t + p)


def _lrl(alpha, beta, d):
    sa, sb = math.sin(alpha), math.sin(beta)
    ca, cb = math.cos(alpha), math.cos(beta)
    tmp = (6.0 - d * d + 2.0 * math.cos(alpha - beta) + 2.0 * d * (sb - sa)) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(-alpha + math.atan2(-ca + cb, d + sa - sb) + p / 2.0)
    return t, p, _mod2pi(beta - alpha - t + p)


_WORD_FUNCS = (_lsl, _rsr, _lsr, _rsl, _rlr, _lrl)


def dubins_all(x0, y0, th0, x1, y1, th1, radius):
    """Solve every word class.

    Returns a list of 6 entries, each ``(l0, l1, l2)`` in real units or
    ``None`` when the class has no solution for this pose pair.
    """
    dx = x1 - x0
    dy = y1 - y0
    d = math.hypot(dx, dy) / radius
    theta = math.atan2(dy, dx)
    alpha = _mod2pi(th0 - theta)
    beta = _mod2pi(th1 - theta)
    out = []
    for fn in _WORD_FUNCS:
        res = fn(alpha, beta, d)
        if res is None:
            out.append(None)
        else:
            out.append((res[0] * radius, res[1] * radius, res[2] * radius))
    return out


def dubins_best(x0, y0, th0, x1, y1, th1, radius):
    """Shortest word over all six classes.

    Returns ``(word_index, l0, l1, l2)``. Ties break toward the lower word
    index (strict improvement required), which fixes the word order
    LSL < RSR < LSR < RSL < RLR < LRL.
    """
    dx = x1 - x0
    dy = y1 - y0
    d = math.hypot(dx, dy) / radius
    theta = math.atan2(dy, dx)
    alpha = _mod2pi(th0 - theta)
    beta = _mod2pi(th1 - theta)
    best = -1
    best_len = math.inf
    bl0 = bl1 = bl2 = 0.0
    for i, fn in enumerate(_WORD_FUNCS):
        res = fn(alpha, beta, d)
        if res is None:
            continue
        total = res[0] + res[1] + res[2]
        if total < best_len:
            best = i
            best_len = total
            bl0, bl1, bl2 = res
    if best < 0:
        return -1, 0.0, 0.0, 0.0
    return best, bl0 * radius, bl1 * radius, bl2 * radius


def dubins_sample(x0, y0, th0, word, l0, l1, l2, radius, s):
    """Pose at arc length ``s`` along a Dubins path from its start pose."""
    segs = WORD_SEGMENTS[word]
    lengths = (l0, l1, l2)
    x, y, th = x0, y0, th0
    remaining = s
    for seg_type, seg_len in zip(segs, lengths):
        step = seg_len if remaining > seg_len else remaining
        if step > 0.0:
            if seg_type == 1:
                x += step * math.cos(th)
                y += step * math.sin(th)
            elif seg_type == 0:
                phi = step / radius
                x += radius * (math.sin(th + phi) - math.sin(th))
                y += radius * (math.cos(th) - math.cos(th + phi))
                th += phi
            else:
                phi = step / radius
                x += radius * (math.sin(th) - math.sin(th - phi))
                y += radius * (math.cos(th - phi) - math.cos(th))
                th -= phi
        remaining -= step
        if remaining <= 0.0:
            break
    th = math.fmod(th, TWO_PI)
    if th <= -math.pi:
        th += TWO_PI
    elif th > math.pi:
        th -= TWO_PI
    return x, y, th


def roll_arc(x, y, theta, steer, wheelbase, arc_len, n_sub):
    """Poses along a constant-steer, unit-speed arc (exact circle stepping).

    Returns an ``(n_sub + 1, 3)`` array including the start pose.
    """
    out = np.empty((n_sub + 1, 3))
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = theta
    kappa = math.tan(steer) / wheelbase
    ds = arc_len / n_sub
    for i in range(1, n_sub + 1):
        if abs(kappa) < 1e-12:
            x += ds * math.cos(theta)
            y += ds * math.sin(theta)
        else:
            phi = kappa * ds
            x += (math.sin(theta + phi) - math.sin(theta)) / kappa
            y -= (math.cos(theta + phi) - math.cos(theta)) / kappa
            theta += phi
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = theta
    return out


def rk4_propagate(x, y, theta, delta, v, omega, accel, dt,
                  wheelbase, delta_max, v_max, h_max):
    """Composite 4th-order step of the car kinematics over ``dt``.

    Steering and speed are clamped to their limits after every substep.
    """
    n = int(math.ceil(dt / h_max))
    if n < 1:
        n = 1
    h = dt / n
    for _ in range(n):
        # stage derivatives: (x', y', theta', delta', v')
        k1x = v * math.cos(theta)
        k1y = v * math.sin(theta)
        k1t = v * math.tan(delta) / wheelbase

        d2 = delta + 0.5 * h * omega
        v2 = v + 0.5 * h * accel
        t2 = theta + 0.5 * h * k1t
        k2x = v2 * math.cos(t2)
        k2y = v2 * math.sin(t2)
        k2t = v2 * math.tan(d2) / wheelbase

        t3 = theta + 0.5 * h * k2t
        k3x = v2 * math.cos(t3)
        k3y = v2 * math.sin(t3)
        k3t = v2 * math.tan(d2) / wheelbase

        d4 = delta + h * omega
        v4 = v + h * accel
        t4 = theta + h * k3t
        k4x = v4 * math.cos(t4)
        k4y = v4 * math.sin(t4)
        k4t = v4 * math.tan(d4) / wheelbase

        x += h * (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
        y += h * (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
        theta += h * (k1t + 2.0 * k2t + 2.0 * k3t + k4t) / 6.0
        delta += h * omega
        v += h * accel
        if delta > delta_max:
            delta = delta_max
        elif delta < -delta_max:
            delta = -delta_max
        if v > v_max:
            v = v_max
        elif v < -v_max:
            v = -v_max
    theta = math.fmod(theta, TWO_PI)
    if theta <= -math.pi:
        theta += TWO_PI
    elif theta > math.pi:
        theta -= TWO_PI
    return x, y, theta, delta, v


def poly_contains(px, py, verts):
    """Closed-set membership test for a convex CCW polygon."""
    n = verts.shape[0]
    for i in range(n):
        ax = verts[i, 0]
        ay = verts[i, 1]
        j = i + 1
        if j == n:
            j = 0
        ex = verts[j, 0] - ax
        ey = verts[j, 1] - ay
        if ex * (py - ay) - ey * (px - ax) < 0.0:
            return False
    return True


def _contains_slice(px, py, data, lo, hi):
    for i in range(lo, hi):
        ax = data[i, 0]
        ay = data[i, 1]
        j = i + 1
        if j == hi:
            j = lo
        ex = data[j, 0] - ax
        ey = data[j, 1] - ay
        if ex * (py - ay) - ey * (px - ax) < 0.0:
            return False
    return True


def heuristic_best(x0, y0, th0, x1, y1, th1, radius):
    """max(shortest Dubins length, Euclidean distance) between two poses."""
    _w, l0, l1, l2 = dubins_best(x0, y0, th0, x1, y1, th1, radius)
    total = l0 + l1 + l2
    e = math.hypot(x1 - x0, y1 - y0)
    return total if total > e else e


def expand_arcs(x, y, theta, wheelbase, arc_len, n_sub, steers,
                poly_data, poly_off, width, height):
    """Roll one constant-steer arc per steering action with collision and
    bounds checks at every substep.

    ``poly_data``/``poly_off`` is a flattened list of convex CCW polygons:
    polygon k owns rows poly_off[k]:poly_off[k+1]. Returns an
    ``(n_steers, 4)`` array of rows ``(ok, end_x, end_y, end_theta)``;
    blocked rows keep the pose where the arc was cut off.
    """
    n_polys = len(poly_off) - 1
    out = np.zeros((len(steers), 4))
    ds = arc_len / n_sub
    for si in range(len(steers)):
        kappa = math.tan(steers[si]) / wheelbase
        cx, cy, cth = x, y, theta
        ok = 1.0
        for _ in range(n_sub):
            if abs(kappa) < 1e-12:
                cx += ds * math.cos(cth)
                cy += ds * math.sin(cth)
            else:
                phi = kappa * ds
                cx += (math.sin(cth + phi) - math.sin(cth)) / kappa
                cy -= (math.cos(cth + phi) - math.cos(cth)) / kappa
                cth += phi
            if cx < 0.0 or cx > width or cy < 0.0 or cy > height:
                ok = 0.0
                break
            hit = False
            for k in range(n_polys):
                if _contains_slice(cx, cy, poly_data,
                                   poly_off[k], poly_off[k + 1]):
                    hit = True
                    break
            if hit:
                ok = 0.0
                break
        out[si, 0] = ok
        out[si, 1] = cx
        out[si, 2] = cy
        out[si, 3] = cth
    return out


def _signed_distance_slice(px, py, data, lo, hi):
    best_sq = math.inf
    bx = by = 0.0
    inside = True
    for i in range(lo, hi):
        ax = data[i, 0]
        ay = data[i, 1]
        j = i + 1
        if j == hi:
            j = lo
        ex = data[j, 0] - ax
        ey = data[j, 1] - ay
        rx = px - ax
        ry = py - ay
        if ex * ry - ey * rx < 0.0:
            inside = False
        seg_sq = ex * ex + ey * ey
        t = (rx * ex + ry * ey) / seg_sq if seg_sq > 0.0 else 0.0
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        cx = ax + t * ex
        cy = ay + t * ey
        dx = px - cx
        dy = py - cy
        d_sq = dx * dx + dy * dy
        if d_sq < best_sq:
            best_sq = d_sq
            bx = cx
            by = cy
    d = math.sqrt(best_sq)
    if inside:
        d = -d
    return d, bx, by


def poly_signed_distance(px, py, verts):
    """Signed distance from a point to a convex CCW polygon boundary.

    Negative inside. Returns ``(d, nearest_x, nearest_y)`` where the nearest
    point realizes the distance on the polygon boundary.
    """
    return _signed_distance_slice(px, py, verts, 0, verts.shape[0])


def batch_clearance(points, poly_data, poly_off):
    """Minimum signed distance and realizing boundary point per query point
    over a flattened polygon list.

    Returns an ``(m, 3)`` array of rows ``(d, nearest_x, nearest_y)``;
    with no polygons the rows are ``(inf, nan, nan)``.
    """
    m = points.shape[0]
    n_polys = len(poly_off) - 1
    out = np.empty((m, 3))
    for i in range(m):
        px = points[i, 0]
        py = points[i, 1]
        best = math.inf
        bx = by = math.nan
        for k in range(n_polys):
            d, cx, cy = _signed_distance_slice(px, py, poly_data,
                                               poly_off[k], poly_off[k + 1])
            if d < best:
                best = d
                bx = cx
                by = cy
        out[i, 0] = best
        out[i, 1] = bx
        out[i, 2] = by
    return out


def dp_core(node_cost, ds, dt, v0, v_max, w_acc):
    """Cheapest monotone station sequence through a blocked-node lattice.

    ``node_cost`` is (nt+1, ns+1); non-finite entries are blocked. The cost
    of a sequence j_0 = 0, ..., j_nt = ns is the sum of its node costs plus
    ``w_acc * ((v_i - v_{i-1}) / dt)^2`` per step, where v_i is the lattice
    speed of step i and v_0 is the given entry speed. The search state is
    (station, arrival step) so the acceleration coupling is exact.

    Assumes the start and terminal nodes are open and at least one station
    step fits in a time step. Returns ``(stations, total)``; an empty index
    array means the terminal is unreachable.
    """
    nt = node_cost.shape[0] - 1
    ns = node_cost.shape[1] - 1
    kmax = int(math.floor(v_max * dt / ds + 1e-9))
    kb = min(kmax, ns)
    vstep = ds / dt

    # acceleration penalty by (arriving step a, departing step d)
    steps = np.arange(kb + 1) * vstep
    acc = (steps[:, None] - steps[None, :]) / dt
    pen = w_acc * (acc * acc)

    inf = math.inf
    # cost[j, d]: best cost reaching station j with arrival step d
    cost = np.full((ns + 1, kb + 1), inf)
    back = np.zeros((nt + 1, ns + 1, kb + 1), dtype=np.int32)
    first = np.where(np.isfinite(node_cost[1, :kb + 1]),
                     node_cost[1, :kb + 1], inf)
    dv0 = (steps - v0) / dt
    d_idx = np.arange(kb + 1)
    cost[d_idx, d_idx] = node_cost[0, 0] + w_acc * (dv0 * dv0) + first

    for i in range(2, nt + 1):
        m = cost[:, None, :] + pen[None, :, :]
        pick = np.argmin(m, axis=2).astype(np.int32)
        best = np.take_along_axis(m, pick[:, :, None], axis=2)[:, :, 0]
        row = np.where(np.isfinite(node_cost[i]), node_cost[i], inf)
        nxt = np.full_like(cost, inf)
        nxt[:, 0] = best[:, 0] + row
        back[i, :, 0] = pick[:, 0]
        for a in range(1, kb + 1):
            nxt[a:, a] = best[:-a, a] + row[a:]
            back[i, a:, a] = pick[:-a, a]
        cost = nxt

    final = cost[ns]
    a = int(np.argmin(final))
    total = float(final[a])
    if not np.isfinite(total):
        return np.empty(0, dtype=np.int64), inf
    idx = np.empty(nt + 1, dtype=np.int64)
    idx[nt] = ns
    idx[nt - 1] = ns - a
    for i in range(nt, 1, -1):
        d = back[i, idx[i], idx[i] - idx[i - 1]]
        idx[i - 2] = idx[i - 1] - d
    return idx, total
