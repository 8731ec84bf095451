"""Online estimation primitives.

Least-squares seeding, recursive least squares with unit forgetting factor,
polynomial speed/distance kinematics, and exact-window moving averages.
Estimator values are single-writer; snapshots are plain immutable copies.
"""

from __future__ import annotations

import collections
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_PRIOR_SCALE = 100.0


class DegenerateDesign(Exception):
    """Regression inputs cannot identify the requested coefficients."""


class NoRoot(Exception):
    """The speed model never attains the requested speed at or after t_now."""


@dataclass(frozen=True)
class LinearModel:
    """acceleration(t) = alpha * t + beta"""
    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("coefficients must be finite")


@dataclass(frozen=True)
class QuadraticModel:
    """speed(t) = (alpha/2) * t^2 + beta * t + gamma

    gamma is the speed at t = 0 of the model's own clock (t measured from
    spoolup completion for takeoff, from braking onset for deceleration).
    """
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.alpha, self.beta, self.gamma)):
            raise ValueError("coefficients must be finite")

    def speed_at(self, t: float) -> float:
        return 0.5 * self.alpha * t * t + self.beta * t + self.gamma


@dataclass(frozen=True)
class RlsEstimator:
    """State of a recursive least-squares fit (forgetting factor fixed at 1)."""
    theta: np.ndarray   # coefficient vector, shape (n,)
    P: np.ndarray       # covariance, shape (n, n), symmetric positive definite
    lam: float = 1.0
    sample_count: int = 0

    @property
    def dim(self) -> int:
        return self.theta.shape[0]


def make_rls(dim: int, prior_scale: float = DEFAULT_PRIOR_SCALE,
             theta0=None) -> RlsEstimator:
    theta = np.zeros(dim) if theta0 is None else np.asarray(theta0, dtype=float)
    if theta.shape != (dim,):
        raise ValueError("theta0 dimension mismatch")
    return RlsEstimator(theta=theta, P=prior_scale * np.eye(dim))


def rls_update(est: RlsEstimator, regressor, observation: float) -> RlsEstimator:
    """One recursion step: gain, innovation correction, covariance update.

    With lam = 1 the result after n updates and a diffuse prior matches the
    batch least-squares solution over the same n samples.
    """
    x = np.asarray(regressor, dtype=float)
    if x.shape != (est.dim,):
        raise ValueError(f"regressor dimension {x.shape} != {est.dim}")
    Px = est.P @ x
    k = Px / (est.lam + x @ Px)
    theta = est.theta + k * (observation - x @ est.theta)
    P = (est.P - np.outer(k, Px)) / est.lam
    P = 0.5 * (P + P.T)  # contain floating-point asymmetry drift
    return RlsEstimator(theta=theta, P=P, lam=est.lam,
                        sample_count=est.sample_count + 1)


def fit_linear_seed(samples) -> LinearModel:
    """Ordinary least squares line through (t, a) samples."""
    if len(samples) < 2:
        raise DegenerateDesign("need at least two samples")
    ts = [t for t, _ in samples]
    ys = [y for _, y in samples]
    n = len(ts)
    t_mean = sum(ts) / n
    y_mean = sum(ys) / n
    stt = sum((t - t_mean) ** 2 for t in ts)
    if stt == 0:
        raise DegenerateDesign("all sample times identical")
    sty = sum((t - t_mean) * (y - y_mean) for t, y in zip(ts, ys))
    alpha = sty / stt
    return LinearModel(alpha=alpha, beta=y_mean - alpha * t_mean)


def seed_rls_from_linear(model: LinearModel,
                         prior_scale: float = DEFAULT_PRIOR_SCALE) -> RlsEstimator:
    """RLS over regressor (t, 1) seeded at the line-fit coefficients."""
    return make_rls(2, prior_scale, theta0=(model.alpha, model.beta))


def time_to_speed(v_model: QuadraticModel, target: float, t_now: float) -> float:
    """Smallest model time >= t_now at which speed_at(t) == target.

    Raises NoRoot when the model never attains the target (negative
    discriminant, or every real root lies before t_now).
    """
    a = 0.5 * v_model.alpha
    b = v_model.beta
    c = v_model.gamma - target
    if a == 0.0:
        if b == 0.0:
            if c == 0.0:
                return t_now
            raise NoRoot("constant speed model never attains target")
        t = -c / b
        if t >= t_now:
            return t
        raise NoRoot("linear model attains target only in the past")
    disc = b * b - 4.0 * a * c
    if disc < 0:
        raise NoRoot("speed model never attains target")
    sq = math.sqrt(disc)
    roots = sorted(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)))
    for t in roots:
        if t >= t_now - 1e-12:
            return max(t, t_now)
    raise NoRoot("both roots precede t_now")


def distance_until(v_model: QuadraticModel, t0: float, t1: float) -> float:
    """Exact integral of the speed polynomial over [t0, t1]."""
    if t1 < t0:
        raise ValueError("t1 must be >= t0")

    def antiderivative(t):
        return (v_model.alpha / 6.0) * t ** 3 + 0.5 * v_model.beta * t ** 2 \
            + v_model.gamma * t

    return antiderivative(t1) - antiderivative(t0)


class MovingAverage:
    """Fixed-window arithmetic mean over the most recent samples.

    The mean is recomputed from the buffer on every update, so it is exactly
    the arithmetic mean of the retained samples at all times.
    """

    def __init__(self, window_length: int):
        if window_length < 1:
            raise ValueError("window_length must be >= 1")
        self.window_length = window_length
        self.buffer = collections.deque(maxlen=window_length)
        self.current_mean = math.nan

    def __len__(self):
        return len(self.buffer)

    def update(self, sample: float) -> float:
        self.buffer.append(float(sample))
        self.current_mean = sum(self.buffer) / len(self.buffer)
        return self.current_mean


def ma_update(ma: MovingAverage, sample: float) -> MovingAverage:
    """Push one sample and return the (mutated) moving average."""
    ma.update(sample)
    return ma
