# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Dubins word solves, arc rollout, RK4 propagation,
convex-polygon containment and signed distance.

Mirrors ``_core_py`` function for function; the two must stay behaviorally
identical (see tests/test_kernels.py).
"""

import numpy as np

from libc.math cimport (M_PI, acos, atan2, ceil, cos, fabs, floor, fmod,
                        hypot, isfinite, sin, sqrt, tan)

cdef double TWO_PI = 2.0 * M_PI
cdef double INF = float("inf")

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")
WORD_SEGMENTS = (
    (0, 1, 0),
    (2, 1, 2),
    (0, 1, 2),
    (2, 1, 0),
    (2, 0, 2),
    (0, 2, 0),
)

# flat (word, segment) -> type table for the C side, same encoding:
# 0 = left arc, 1 = straight, 2 = right arc
cdef int[18] _SEGS
_SEGS[0] = 0; _SEGS[1] = 1; _SEGS[2] = 0
_SEGS[3] = 2; _SEGS[4] = 1; _SEGS[5] = 2
_SEGS[6] = 0; _SEGS[7] = 1; _SEGS[8] = 2
_SEGS[9] = 2; _SEGS[10] = 1; _SEGS[11] = 0
_SEGS[12] = 2; _SEGS[13] = 0; _SEGS[14] = 2
_SEGS[15] = 0; _SEGS[16] = 2; _SEGS[17] = 0


cdef inline double _mod2pi(double x) nogil:
    cdef double r = fmod(x, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r


cdef int _solve_word(int w, double alpha, double beta, double d,
                     double* t, double* p, double* q) nogil:
    """Solve one word class in normalized units. Returns 0 on no solution."""
    cdef double sa = sin(alpha)
    cdef double sb = sin(beta)
    cdef double ca = cos(alpha)
    cdef double cb = cos(beta)
    cdef double p_sq, tmp, pp, tt
    if w == 0:  # LSL
        p_sq = 2.0 + d * d - 2.0 * cos(alpha - beta) + 2.0 * d * (sa - sb)
        if p_sq < 0.0:
            return 0
        tmp = atan2(cb - ca, d + sa - sb)
        t[0] = _mod2pi(-alpha + tmp)
        p[0] = sqrt(p_sq)
        q[0] = _mod2pi(beta - tmp)
        return 1
    if w == 1:  # RSR
        p_sq = 2.0 + d * d - 2.0 * cos(alpha - beta) + 2.0 * d * (sb - sa)
        if p_sq < 0.0:
            return 0
        tmp = atan2(ca - cb, d - sa + sb)
        t[0] = _mod2pi(alpha - tmp)
        p[0] = sqrt(p_sq)
        q[0] = _mod2pi(-beta + tmp)
        return 1
    if w == 2:  # LSR
        p_sq = -2.0 + d * d + 2.0 * cos(alpha - beta) + 2.0 * d * (sa + sb)
        if p_sq < 0.0:
            return 0
        pp = sqrt(p_sq)
        tmp = atan2(-ca - cb, d + sa + sb) - atan2(-2.0, pp)
        t[0] = _mod2pi(-alpha + tmp)
        p[0] = pp
        q[0] = _mod2pi(-beta + tmp)
        return 1
    if w == 3:  # RSL
        p_sq = -2.0 + d * d + 2.0 * cos(alpha - beta) - 2.0 * d * (sa + sb)
        if p_sq < 0.0:
            return 0
        pp = sqrt(p_sq)
        tmp = atan2(ca + cb, d - sa - sb) - atan2(2.0, pp)
        t[0] = _mod2pi(alpha - tmp)
        p[0] = pp
        q[0] = _mod2pi(beta - tmp)
        return 1
    if w == 4:  # RLR
        tmp = (6.0 - d * d + 2.0 * cos(alpha - beta) + 2.0 * d * (sa - sb)) / 8.0
        if fabs(tmp) > 1.0:
            return 0
        pp = _mod2pi(TWO_PI - acos(tmp))
        tt = _mod2pi(alpha - atan2(ca - cb, d - sa + sb) + pp / 2.0)
        t[0] = tt
        p[0] = pp
        q[0] = _mod2pi(alpha - beta - tt + pp)
        return 1
    # LRL
    tmp = (6.0 - d * d + 2.0 * cos(alpha - beta) + 2.0 * d * (sb - sa)) / 8.0
    if fabs(tmp) > 1.0:
        return 0
    pp = _mod2pi(TWO_PI - acos(tmp))
    tt = _mod2pi(-alpha + atan2(-ca + cb, d + sa - sb) + pp / 2.0)
    t[0] = tt
    p[0] = pp
    q[0] = _mod2pi(beta - alpha - tt + pp)
    return 1


def dubins_all(double x0, double y0, double th0,
               double x1, double y1, double th1, double radius):
    """Solve every word class.

    Returns a list of 6 entries, each ``(l0, l1, l2)`` in real units or
    ``None`` when the class has no solution for this pose pair.
    """
    cdef double dx = x1 - x0
    cdef double dy = y1 - y0
    cdef double d = hypot(dx, dy) / radius
    cdef double theta = atan2(dy, dx)
    cdef double alpha = _mod2pi(th0 - theta)
    cdef double beta = _mod2pi(th1 - theta)
    cdef double t = 0.0, p = 0.0, q = 0.0
    cdef int w
    out = []
    for w in range(6):
        if _solve_word(w, alpha, beta, d, &t, &p, &q):
            out.append((t * radius, p * radius, q * radius))
        else:
            out.append(None)
    return out


def dubins_best(double x0, double y0, double th0,
                double x1, double y1, double th1, double radius):
    """Shortest word over all six classes.

    Returns ``(word_index, l0, l1, l2)``. Ties break toward the lower word
    index (strict improvement required), which fixes the word order
    LSL < RSR < LSR < RSL < RLR < LRL.
    """
    cdef double dx = x1 - x0
    cdef double dy = y1 - y0
    cdef double d = hypot(dx, dy) / radius
    cdef double theta = atan2(dy, dx)
    cdef double alpha = _mod2pi(th0 - theta)
    cdef double beta = _mod2pi(th1 - theta)
    cdef double t = 0.0, p = 0.0, q = 0.0
    cdef double best_len = INF
    cdef double bl0 = 0.0, bl1 = 0.0, bl2 = 0.0
    cdef int best = -1
    cdef int w
    for w in range(6):
        if not _solve_word(w, alpha, beta, d, &t, &p, &q):
            continue
        if t + p + q < best_len:
            best = w
            best_len = t + p + q
            bl0 = t
            bl1 = p
            bl2 = q
    if best < 0:
        return -1, 0.0, 0.0, 0.0
    return best, bl0 * radius, bl1 * radius, bl2 * radius


def dubins_sample(double x0, double y0, double th0, int word,
                  double l0, double l1, double l2, double radius, double s):
    """Pose at arc length ``s`` along a Dubins path from its start pose."""
    cdef double x = x0, y = y0, th = th0
    cdef double remaining = s
    cdef double lengths[3]
    cdef double step, phi
    cdef int k, seg_type
    lengths[0] = l0
    lengths[1] = l1
    lengths[2] = l2
    for k in range(3):
        seg_type = _SEGS[3 * word + k]
        step = lengths[k] if remaining > lengths[k] else remaining
        if step > 0.0:
            if seg_type == 1:
                x += step * cos(th)
                y += step * sin(th)
            elif seg_type == 0:
                phi = step / radius
                x += radius * (sin(th + phi) - sin(th))
                y += radius * (cos(th) - cos(th + phi))
                th += phi
            else:
                phi = step / radius
                x += radius * (sin(th) - sin(th - phi))
                y += radius * (cos(th - phi) - cos(th))
                th -= phi
        remaining -= step
        if remaining <= 0.0:
            break
    th = fmod(th, TWO_PI)
    if th <= -M_PI:
        th += TWO_PI
    elif th > M_PI:
        th -= TWO_PI
    return x, y, th


def roll_arc(double x, double y, double theta, double steer,
             double wheelbase, double arc_len, int n_sub):
    """Poses along a constant-steer, unit-speed arc (exact circle stepping).

    Returns an ``(n_sub + 1, 3)`` array including the start pose.
    """
    out_arr = np.empty((n_sub + 1, 3))
    cdef double[:, ::1] out = out_arr
    cdef double kappa = tan(steer) / wheelbase
    cdef double ds = arc_len / n_sub
    cdef double phi
    cdef int i
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = theta
    for i in range(1, n_sub + 1):
        if fabs(kappa) < 1e-12:
            x += ds * cos(theta)
            y += ds * sin(theta)
        else:
            phi = kappa * ds
            x += (sin(theta + phi) - sin(theta)) / kappa
            y -= (cos(theta + phi) - cos(theta)) / kappa
            theta += phi
        out[i, 0] = x
        out[i, 1] = y
        out[i, 2] = theta
    return out_arr


def rk4_propagate(double x, double y, double theta, double delta, double v,
                  double omega, double accel, double dt,
                  double wheelbase, double delta_max, double v_max,
                  double h_max):
    """Composite 4th-order step of the car kinematics over ``dt``.

    Steering and speed are clamped to their limits after every substep.
    """
    cdef int n = <int>ceil(dt / h_max)
    if n < 1:
        n = 1
    cdef double h = dt / n
    cdef double k1x, k1y, k1t, k2x, k2y, k2t, k3x, k3y, k3t, k4x, k4y, k4t
    cdef double d2, v2, t2, t3, d4, v4, t4
    cdef int i
    for i in range(n):
        k1x = v * cos(theta)
        k1y = v * sin(theta)
        k1t = v * tan(delta) / wheelbase

        d2 = delta + 0.5 * h * omega
        v2 = v + 0.5 * h * accel
        t2 = theta + 0.5 * h * k1t
        k2x = v2 * cos(t2)
        k2y = v2 * sin(t2)
        k2t = v2 * tan(d2) / wheelbase

        t3 = theta + 0.5 * h * k2t
        k3x = v2 * cos(t3)
        k3y = v2 * sin(t3)
        k3t = v2 * tan(d2) / wheelbase

        d4 = delta + h * omega
        v4 = v + h * accel
        t4 = theta + h * k3t
        k4x = v4 * cos(t4)
        k4y = v4 * sin(t4)
        k4t = v4 * tan(d4) / wheelbase

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
    theta = fmod(theta, TWO_PI)
    if theta <= -M_PI:
        theta += TWO_PI
    elif theta > M_PI:
        theta -= TWO_PI
    return x, y, theta, delta, v


def poly_contains(double px, double py, double[:, :] verts):
    """Closed-set membership test for a convex CCW polygon."""
    cdef int n = verts.shape[0]
    cdef int i, j
    cdef double ax, ay, ex, ey
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


cdef bint _contains_slice(double px, double py, double[:, :] data,
                          Py_ssize_t lo, Py_ssize_t hi) nogil:
    cdef Py_ssize_t i, j
    cdef double ax, ay, ex, ey
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


def heuristic_best(double x0, double y0, double th0,
                   double x1, double y1, double th1, double radius):
    """max(shortest Dubins length, Euclidean distance) between two poses."""
    cdef double dx = x1 - x0
    cdef double dy = y1 - y0
    cdef double d = hypot(dx, dy) / radius
    cdef double theta = atan2(dy, dx)
    cdef double alpha = _mod2pi(th0 - theta)
    cdef double beta = _mod2pi(th1 - theta)
    cdef double t = 0.0, p = 0.0, q = 0.0
    cdef double best_len = INF
    cdef int w
    for w in range(6):
        if _solve_word(w, alpha, beta, d, &t, &p, &q):
            if t + p + q < best_len:
                best_len = t + p + q
    cdef double total = best_len * radius
    cdef double e = hypot(dx, dy)
    return total if total > e else e


def expand_arcs(double x, double y, double theta, double wheelbase,
                double arc_len, int n_sub, double[:] steers,
                double[:, :] poly_data, long[:] poly_off,
                double width, double height):
    """Roll one constant-steer arc per steering action with collision and
    bounds checks at every substep.

    ``poly_data``/``poly_off`` is a flattened list of convex CCW polygons:
    polygon k owns rows poly_off[k]:poly_off[k+1]. Returns an
    ``(n_steers, 4)`` array of rows ``(ok, end_x, end_y, end_theta)``;
    blocked rows keep the pose where the arc was cut off.
    """
    cdef Py_ssize_t n_steers = steers.shape[0]
    cdef Py_ssize_t n_polys = poly_off.shape[0] - 1
    out_arr = np.zeros((n_steers, 4))
    cdef double[:, ::1] out = out_arr
    cdef double ds = arc_len / n_sub
    cdef Py_ssize_t si, k
    cdef int i
    cdef double kappa, cx, cy, cth, ok, phi
    cdef bint hit
    for si in range(n_steers):
        kappa = tan(steers[si]) / wheelbase
        cx = x
        cy = y
        cth = theta
        ok = 1.0
        for i in range(n_sub):
            if fabs(kappa) < 1e-12:
                cx += ds * cos(cth)
                cy += ds * sin(cth)
            else:
                phi = kappa * ds
                cx += (sin(cth + phi) - sin(cth)) / kappa
                cy -= (cos(cth + phi) - cos(cth)) / kappa
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
    return out_arr


cdef double _signed_distance_slice(double px, double py, double[:, :] data,
                                   Py_ssize_t lo, Py_ssize_t hi,
                                   double *out_x, double *out_y) nogil:
    cdef double best_sq = INF
    cdef double bx = 0.0, by = 0.0
    cdef bint inside = True
    cdef Py_ssize_t i, j
    cdef double ax, ay, ex, ey, rx, ry, seg_sq, t, cx, cy, dx, dy, d_sq, d
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
    d = sqrt(best_sq)
    if inside:
        d = -d
    out_x[0] = bx
    out_y[0] = by
    return d


def poly_signed_distance(double px, double py, double[:, :] verts):
    """Signed distance from a point to a convex CCW polygon boundary.

    Negative inside. Returns ``(d, nearest_x, nearest_y)`` where the nearest
    point realizes the distance on the polygon boundary.
    """
    cdef double bx = 0.0, by = 0.0
    cdef double d = _signed_distance_slice(px, py, verts, 0, verts.shape[0],
                                           &bx, &by)
    return d, bx, by


def batch_clearance(double[:, :] points, double[:, :] poly_data,
                    long[:] poly_off):
    """Minimum signed distance and realizing boundary point per query point
    over a flattened polygon list.

    Returns an ``(m, 3)`` array of rows ``(d, nearest_x, nearest_y)``;
    with no polygons the rows are ``(inf, nan, nan)``.
    """
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t n_polys = poly_off.shape[0] - 1
    out_arr = np.empty((m, 3))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k
    cdef double px, py, best, bx, by, d, cx, cy
    cdef double nan = float("nan")
    for i in range(m):
        px = points[i, 0]
        py = points[i, 1]
        best = INF
        bx = nan
        by = nan
        for k in range(n_polys):
            d = _signed_distance_slice(px, py, poly_data,
                                       poly_off[k], poly_off[k + 1], &cx, &cy)
            if d < best:
                best = d
                bx = cx
                by = cy
        out[i, 0] = best
        out[i, 1] = bx
        out[i, 2] = by
    return out_arr


def dp_core(double[:, :] node_cost, double ds, double dt, double v0,
            double v_max, double w_acc):
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
    cdef Py_ssize_t nt = node_cost.shape[0] - 1
    cdef Py_ssize_t ns = node_cost.shape[1] - 1
    cdef Py_ssize_t kmax = <Py_ssize_t>floor(v_max * dt / ds + 1e-9)
    cdef Py_ssize_t kb = kmax if kmax < ns else ns
    cdef double vstep = ds / dt
    cdef Py_ssize_t i, j, d, a, jp, pick
    cdef double dv, best, m, total, nc

    pen_arr = np.empty((kb + 1, kb + 1))
    cdef double[:, ::1] pen = pen_arr
    for a in range(kb + 1):
        for d in range(kb + 1):
            dv = (a * vstep - d * vstep) / dt
            pen[a, d] = w_acc * (dv * dv)

    cost_arr = np.full((ns + 1, kb + 1), INF)
    nxt_arr = np.empty((ns + 1, kb + 1))
    back_arr = np.zeros((nt + 1, ns + 1, kb + 1), dtype=np.int32)
    cdef double[:, ::1] cost = cost_arr
    cdef double[:, ::1] nxt = nxt_arr
    cdef int[:, :, ::1] back = back_arr

    for d in range(kb + 1):
        nc = node_cost[1, d]
        if not isfinite(nc):
            nc = INF
        dv = (d * vstep - v0) / dt
        cost[d, d] = node_cost[0, 0] + w_acc * (dv * dv) + nc

    for i in range(2, nt + 1):
        for jp in range(ns + 1):
            for a in range(kb + 1):
                nxt[jp, a] = INF
        for j in range(ns + 1):
            for a in range(kb + 1):
                jp = j + a
                if jp > ns:
                    break
                nc = node_cost[i, jp]
                if not isfinite(nc):
                    nc = INF
                best = INF
                pick = 0
                for d in range(kb + 1):
                    m = cost[j, d] + pen[a, d]
                    if m < best:
                        best = m
                        pick = d
                nxt[jp, a] = best + nc
                back[i, jp, a] = <int>pick
        cost, nxt = nxt, cost

    a = 0
    best = cost[ns, 0]
    for d in range(1, kb + 1):
        if cost[ns, d] < best:
            best = cost[ns, d]
            a = d
    total = best
    if not isfinite(total):
        return np.empty(0, dtype=np.int64), INF
    idx_arr = np.empty(nt + 1, dtype=np.int64)
    cdef long long[:] idx = idx_arr
    idx[nt] = ns
    idx[nt - 1] = ns - a
    for i in range(nt, 1, -1):
        d = back[i, idx[i], idx[i] - idx[i - 1]]
        idx[i - 2] = idx[i - 1] - d
    return idx_arr, total
