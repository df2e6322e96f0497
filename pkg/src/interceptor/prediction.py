"""Polynomial prediction of the target trajectory from noisy position
observations, and the derived interception pose at a future horizon."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SingularFitError

DEFAULT_DEGREE = 3


@dataclass
class ObservationBuffer:
    """Bounded, time-ordered buffer of target position samples.

    Appends must carry strictly increasing timestamps; once ``capacity``
    samples are held, the oldest is dropped. The simulator is the single
    writer; fitting works on a snapshot copy.
    """

    capacity: int
    samples: list[tuple[float, tuple[float, float]]] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise DomainError(f"capacity must be >= 1, got {self.capacity}")
        for (t0, _), (t1, _) in zip(self.samples, self.samples[1:]):
            if t1 <= t0:
                raise DomainError("sample timestamps must be strictly increasing")
        if len(self.samples) > self.capacity:
            raise DomainError("more samples than capacity")

    def append(self, t: float, p) -> None:
        if not math.isfinite(t):
            raise DomainError(f"non-finite timestamp: {t!r}")
        if self.samples and t <= self.samples[-1][0]:
            raise DomainError(
                f"timestamp {t} not after previous {self.samples[-1][0]}")
        self.samples.append((float(t), (float(p[0]), float(p[1]))))
        if len(self.samples) > self.capacity:
            del self.samples[0]

    def __len__(self) -> int:
        return len(self.samples)

    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    def points(self) -> np.ndarray:
        return np.array([p for _, p in self.samples])

    def snapshot(self) -> "ObservationBuffer":
        return ObservationBuffer(self.capacity, list(self.samples))


@dataclass(frozen=True)
class PolyTrajectory:
    """Least-squares polynomial fit of the target path, one polynomial per
    coordinate.

    ``eta`` holds the coefficients highest power first, x in column 0 and y
    in column 1, expressed in shifted time ``t - fit_window[0]`` (the shift
    conditions the normal equations; evaluation un-shifts internally).
    ``residual_rms`` is sqrt(mean squared Euclidean residual) at the sample
    times.
    """

    degree: int
    eta: np.ndarray
    fit_window: tuple[float, float]
    residual_rms: float

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.shape != (self.degree + 1, 2):
            raise DomainError(
                f"eta must be ({self.degree + 1}, 2), got {eta.shape}")
        object.__setattr__(self, "eta", eta)

    def _eval(self, tau: float) -> np.ndarray:
        out = np.zeros(2)
        for row in self.eta:
            out = out * tau + row
        return out

    def _deriv(self, tau: float) -> np.ndarray:
        n = self.degree
        out = np.zeros(2)
        for k, row in enumerate(self.eta[:-1]):
            out = out * tau + (n - k) * row
        return out


def fit_polynomial(buf: ObservationBuffer, degree: int) -> PolyTrajectory:
    """Fit an (x(t), y(t)) polynomial pair of the given degree by least
    squares over the buffer samples.

    Solves the normal equations of the squared-residual objective with a
    pivoted factorization (never an explicit inverse). Times are shifted so
    the first sample sits at zero before building the basis.
    """
    if degree < 0:
        raise DomainError(f"degree must be >= 0, got {degree}")
    if len(buf) < degree + 1:
        raise DomainError(
            f"need at least {degree + 1} samples for degree {degree}, "
            f"have {len(buf)}")
    ts = buf.times()
    ps = buf.points()
    t0 = float(ts[0])
    tau = ts - t0
    h = np.vander(tau, degree + 1)  # columns tau^n ... tau^0
    if np.linalg.matrix_rank(h) < degree + 1:
        raise SingularFitError(
            "rank-deficient basis (repeated or near-repeated sample times)")
    hth = h.T @ h
    htd = h.T @ ps
    try:
        eta = np.linalg.solve(hth, htd)
    except np.linalg.LinAlgError as exc:
        raise SingularFitError(str(exc)) from exc
    res = h @ eta - ps
    rms = float(np.sqrt(np.mean(np.sum(res * res, axis=1))))
    return PolyTrajectory(degree, eta, (t0, float(ts[-1])), rms)


def predict_position(traj: PolyTrajectory, t: float) -> tuple[float, float]:
    """Predicted target position at absolute time ``t`` (Horner evaluation)."""
    if not math.isfinite(t):
        raise DomainError(f"non-finite time: {t!r}")
    x, y = traj._eval(t - traj.fit_window[0])
    return float(x), float(y)


def predict_velocity(traj: PolyTrajectory, t: float) -> tuple[float, float]:
    """Time derivative of the fitted trajectory at absolute time ``t``."""
    if not math.isfinite(t):
        raise DomainError(f"non-finite time: {t!r}")
    vx, vy = traj._deriv(t - traj.fit_window[0])
    return float(vx), float(vy)


def interception_goal(traj: PolyTrajectory, horizon_t: float
                      ) -> tuple[float, float, float]:
    """Goal pose for the planner: the predicted target position at
    ``horizon_t`` with the trajectory tangent as heading.

    When the tangent degenerates (derivative norm under 1e-9, e.g. a
    constant fit), the heading falls back to the direction from the fitted
    position at the end of the observation window toward the predicted
    point; if that is degenerate too the heading is 0.
    """
    x, y = predict_position(traj, horizon_t)
    vx, vy = predict_velocity(traj, horizon_t)
    if math.hypot(vx, vy) >= 1e-9:
        return x, y, math.atan2(vy, vx)
    lx, ly = predict_position(traj, traj.fit_window[1])
    if math.hypot(x - lx, y - ly) >= 1e-12:
        return x, y, math.atan2(y - ly, x - lx)
    return x, y, 0.0
