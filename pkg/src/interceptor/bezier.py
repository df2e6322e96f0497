"""Piecewise Bezier speed curves.

A segment stores scaled Bernstein control points: the station curve is
``s(t) = h * B((t - t_start) / h)`` so that one unit of the curve parameter
spans ``h`` seconds. With that scaling the speed curve is the Bezier built
from first differences ``n * (c[i+1] - c[i])`` with no extra factor, and the
acceleration curve carries a single ``1/h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

_TIME_EPS = 1e-9
_JOIN_TOL = 1e-6
_SPEED_FLOOR = -1e-9


def _de_casteljau(ctrl: np.ndarray, tau: float) -> float:
    b = np.array(ctrl, dtype=float)
    while b.size > 1:
        b = (1.0 - tau) * b[:-1] + tau * b[1:]
    return float(b[0])


def bernstein_gram(degree: int) -> np.ndarray:
    """Exact products integral G[i, k] = integral_0^1 b_i(u) b_k(u) du of the
    degree-p Bernstein basis: C(p,i) C(p,k) / ((2p+1) C(2p, i+k))."""
    p = int(degree)
    if p < 0:
        raise DomainError("degree must be non-negative")
    g = np.empty((p + 1, p + 1))
    for i in range(p + 1):
        for k in range(p + 1):
            g[i, k] = (math.comb(p, i) * math.comb(p, k)
                       / ((2 * p + 1) * math.comb(2 * p, i + k)))
    return g


@dataclass(frozen=True)
class BezierSegment:
    """One scaled Bernstein polynomial covering [t_start, t_start + h]."""

    order: int
    control_points: np.ndarray
    h: float
    t_start: float

    def __post_init__(self) -> None:
        n = self.order
        if not isinstance(n, (int, np.integer)) or n < 4:
            raise DomainError("order must be an integer >= 4")
        object.__setattr__(self, "order", int(n))
        ctrl = np.ascontiguousarray(self.control_points, dtype=float)
        if ctrl.ndim != 1 or ctrl.size != self.order + 1:
            raise DomainError(f"need {self.order + 1} control points, got "
                              f"shape {ctrl.shape}")
        if not np.all(np.isfinite(ctrl)):
            raise DomainError("control points must be finite")
        h = float(self.h)
        if not (math.isfinite(h) and h > 0.0):
            raise DomainError("time scale h must be positive and finite")
        t0 = float(self.t_start)
        if not math.isfinite(t0):
            raise DomainError("t_start must be finite")
        object.__setattr__(self, "control_points", ctrl)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "t_start", t0)

    @property
    def t_end(self) -> float:
        return self.t_start + self.h

    def speed_control_points(self) -> np.ndarray:
        """Control points of the speed curve: n * (c[i+1] - c[i])."""
        return self.order * np.diff(self.control_points)

    def accel_control_points(self) -> np.ndarray:
        """Control points of the acceleration curve, 1/h chain factor included."""
        n = self.order
        return n * (n - 1) * np.diff(self.control_points, 2) / self.h


def bezier_eval(seg: BezierSegment, t: float) -> tuple[float, float, float]:
    """Station, speed, and acceleration of one segment at time ``t``."""
    t = float(t)
    if not math.isfinite(t):
        raise DomainError("t must be finite")
    if t < seg.t_start - _TIME_EPS or t > seg.t_end + _TIME_EPS:
        raise DomainError(f"t={t} outside segment "
                          f"[{seg.t_start}, {seg.t_end}]")
    tau = min(max((t - seg.t_start) / seg.h, 0.0), 1.0)
    s = seg.h * _de_casteljau(seg.control_points, tau)
    s_dot = _de_casteljau(seg.speed_control_points(), tau)
    s_ddot = _de_casteljau(seg.accel_control_points(), tau)
    return s, s_dot, s_ddot


@dataclass(frozen=True)
class SpeedProfile:
    """Piecewise Bezier station curve tiling [0, T]."""

    segments: tuple
    T: float

    def __post_init__(self) -> None:
        segs = tuple(self.segments)
        if not segs:
            raise DomainError("need at least one segment")
        for seg in segs:
            if not isinstance(seg, BezierSegment):
                raise DomainError("segments must be BezierSegment instances")
        horizon = float(self.T)
        if not (math.isfinite(horizon) and horizon > 0.0):
            raise DomainError("T must be positive and finite")
        if abs(segs[0].t_start) > _TIME_EPS:
            raise DomainError("first segment must start at t=0")
        for left, right in zip(segs[:-1], segs[1:]):
            if abs(left.t_end - right.t_start) > _TIME_EPS:
                raise DomainError("segments must tile the horizon without "
                                  "gaps or overlaps")
        if abs(segs[-1].t_end - horizon) > _TIME_EPS:
            raise DomainError("last segment must end at t=T")
        for left, right in zip(segs[:-1], segs[1:]):
            t_join = right.t_start
            sl = bezier_eval(left, t_join)
            sr = bezier_eval(right, t_join)
            for name, a, b in zip(("station", "speed", "acceleration"),
                                  sl, sr):
                if abs(a - b) > _JOIN_TOL:
                    raise DomainError(f"{name} jumps by {abs(a - b):.3e} at "
                                      f"the t={t_join} join")
        if abs(segs[0].h * segs[0].control_points[0]) > _TIME_EPS:
            raise DomainError("profile must start at station 0")
        for seg in segs:
            speed_ctrl = seg.speed_control_points()
            if float(speed_ctrl.min()) >= _SPEED_FLOOR:
                continue
            # The hull bound is conservative; only reject if the sampled
            # curve itself goes backward.
            taus = np.linspace(0.0, 1.0, 257)
            sampled = min(_de_casteljau(speed_ctrl, u) for u in taus)
            if sampled < _SPEED_FLOOR:
                raise DomainError(f"speed dips to {sampled:.3e}; profile "
                                  "must not move backward")
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "T", horizon)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def segment_index(self, t: float) -> int:
        if t < -_TIME_EPS or t > self.T + _TIME_EPS:
            raise DomainError(f"t={t} outside [0, {self.T}]")
        starts = np.array([seg.t_start for seg in self.segments])
        j = int(np.searchsorted(starts, t, side="right")) - 1
        return min(max(j, 0), len(self.segments) - 1)

    def eval(self, t: float) -> tuple[float, float, float]:
        return bezier_eval(self.segments[self.segment_index(t)], t)

    def sample(self, dt: float) -> np.ndarray:
        """Rows (t, s, s_dot, s_ddot) at spacing dt, always including t=T."""
        if not (math.isfinite(dt) and dt > 0.0):
            raise DomainError("dt must be positive and finite")
        n = int(math.floor(self.T / dt + _TIME_EPS))
        ts = [k * dt for k in range(n + 1)]
        if ts[-1] < self.T - _TIME_EPS:
            ts.append(self.T)
        else:
            ts[-1] = self.T
        rows = np.empty((len(ts), 4))
        for k, t in enumerate(ts):
            rows[k, 0] = t
            rows[k, 1:] = self.eval(t)
        return rows


def uniform_profile(s_total: float, horizon: float, order: int = 5
                    ) -> SpeedProfile:
    """Constant-speed profile covering ``s_total`` in ``horizon`` seconds
    (a single segment whose control points are evenly spaced)."""
    if not (math.isfinite(s_total) and s_total >= 0.0):
        raise DomainError("s_total must be >= 0")
    if not (math.isfinite(horizon) and horizon > 0.0):
        raise DomainError("horizon must be positive")
    ctrl = (s_total / horizon) * np.arange(order + 1) / order
    seg = BezierSegment(order, ctrl, horizon, 0.0)
    return SpeedProfile((seg,), horizon)


def integral_square_accel(profile: SpeedProfile) -> float:
    """Exact integral of s_ddot^2 over [0, T] via the Bernstein Gram matrix."""
    total = 0.0
    for seg in profile.segments:
        n = seg.order
        d2 = np.diff(seg.control_points, 2)
        gram = bernstein_gram(n - 2)
        total += (n * (n - 1)) ** 2 / seg.h * float(d2 @ gram @ d2)
    return total


def rms_acceleration(profile: SpeedProfile) -> float:
    """sqrt(1/T * integral of s_ddot^2): the average-acceleration metric."""
    return math.sqrt(integral_square_accel(profile) / profile.T)


def max_acceleration(profile: SpeedProfile, samples_per_segment: int = 512) -> float:
    """Largest sampled |s_ddot| over the profile."""
    if samples_per_segment < 2:
        raise DomainError("need at least 2 samples per segment")
    worst = 0.0
    for seg in profile.segments:
        accel_ctrl = seg.accel_control_points()
        for tau in np.linspace(0.0, 1.0, samples_per_segment):
            worst = max(worst, abs(_de_casteljau(accel_ctrl, tau)))
    return worst
