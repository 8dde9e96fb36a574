"""Forced logistic decay ``x' = -a x + b x^2 + f`` and its Carleman truncations.

This is the scalar testbed: exact attractors, the order-2 Carleman fixed
point, Euler integration of the nonlinear and lifted systems, and the
sliding time-average used to read Carleman variables as filtered powers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, DomainError

#: |x| beyond this aborts an integration.
DIVERGENCE_THRESHOLD = 1e12


@dataclass(frozen=True)
class LogisticParams:
    a: float
    b: float
    f: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.f >= 0):
            raise DomainError(f"need a > 0, b > 0, f >= 0; got {self}")

    @classmethod
    def from_g2(cls, g2: float, b: float = 1.0, f: float = 1.0) -> "LogisticParams":
        """Pick ``a`` so that ``b f / a^2 == g2``."""
        if not g2 > 0:
            raise DomainError("g2 must be positive to fix a from b and f")
        return cls(a=math.sqrt(b * f / g2), b=b, f=f)

    @property
    def g2(self) -> float:
        return self.b * self.f / self.a**2

    @property
    def capacity(self) -> float:
        return self.a / self.b

    def rhs(self, x):
        return -self.a * x + self.b * x * x + self.f


@dataclass
class Trajectory:
    dt: float
    values: np.ndarray  # shape (steps + 1, dim)
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        self.values = v

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def component(self, k: int = 0) -> np.ndarray:
        return self.values[:, k]

    def __len__(self):
        return len(self.values)


def attractors(p: LogisticParams) -> tuple[float, float]:
    """Return ``(stable, unstable)`` fixed points of the forced logistic."""
    g2 = p.g2
    if g2 >= 0.25:
        raise DomainError(f"g^2 = {g2} >= 1/4: no real fixed points, solution runs away")
    r = math.sqrt(1 - 4 * g2)
    c = p.a / (2 * p.b)
    # stable root via the cancellation-free form (f/a) * 2 / (1 + r)
    return (p.f / p.a) * 2 / (1 + r), c * (1 + r)


def c2_fixed_point(p: LogisticParams) -> float:
    """Steady ``x1`` of the order-2 Carleman system, ``(f/a) / (1 - g^2)``."""
    g2 = p.g2
    if g2 >= 1:
        raise DomainError(f"g^2 = {g2} >= 1: the truncated system has no stable fixed point")
    return (p.f / p.a) / (1 - g2)


def _integrate(x0: np.ndarray, step, dt: float, steps: int) -> Trajectory:
    if not dt > 0:
        raise DomainError("dt must be positive")
    out = np.empty((steps + 1, x0.size))
    out[0] = x0
    x = x0
    for i in range(steps):
        x = step(x)
        if not np.all(np.abs(x) <= DIVERGENCE_THRESHOLD):
            out = out[: i + 2]
            out[-1] = x
            raise DivergenceError(f"trajectory diverged at step {i + 1}", step=i + 1)
        out[i + 1] = x
    return Trajectory(dt, out)


def euler_logistic(x0: float, p: LogisticParams, dt: float, steps: int) -> Trajectory:
    a, b, f = p.a, p.b, p.f
    return _integrate(np.array([float(x0)]),
                      lambda x: x + dt * (-a * x + b * x * x + f), dt, steps)


def c2_logistic(x0: float, p: LogisticParams, dt: float, steps: int,
                x2_0: float | None = None) -> Trajectory:
    """Euler-integrate ``x1' = -a x1 + b x2 + f``, ``x2' = -2a x2 + 2f x1``.

    Starts from ``(x0, x0**2)`` unless ``x2_0`` overrides the second entry.
    """
    return carleman_k_logistic(x0, p.a, p.b, 2, dt, steps, f=p.f, x_init=(
        None if x2_0 is None else (x0, x2_0)))


def carleman_k_matrix(a: float, b: float, K: int, f: float = 0.0):
    """Generator and constant term of the order-K truncation.

    Row ``k`` (1-based) reads ``x_k' = k(-a x_k + b x_{k+1} + f x_{k-1})``
    with ``x_0 = 1`` and ``x_{K+1} = 0``.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    m = np.zeros((K, K))
    c = np.zeros(K)
    for i in range(K):
        k = i + 1
        m[i, i] = -k * a
        if i + 1 < K:
            m[i, i + 1] = k * b
        if i > 0:
            m[i, i - 1] = k * f
    c[0] = f
    return m, c


def carleman_k_logistic(x0: float, a: float, b: float, K: int, dt: float, steps: int,
                        f: float = 0.0, x_init=None) -> Trajectory:
    """Euler-integrate the order-K truncation from ``(x0, x0^2, ..., x0^K)``.

    With ``f = 0`` this is the unforced hierarchy ``x_k' = k(-a x_k + b x_{k+1})``.
    """
    m, c = carleman_k_matrix(a, b, K, f)
    step_matrix = np.eye(K) + dt * m
    if x_init is None:
        x_init = float(x0) ** np.arange(1, K + 1)
    x_init = np.asarray(x_init, dtype=float)
    if x_init.shape != (K,):
        raise DomainError(f"initial state must have {K} entries")
    return _integrate(x_init, lambda x: step_matrix @ x + dt * c, dt, steps)


def exact_unforced(x0: float, a: float, b: float, t) -> np.ndarray:
    """Closed-form solution of ``x' = -a x + b x^2``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-a * t)
    return a * x0 * e / (a - b * x0 * (1 - e))


def _half_window(tau: float, dt: float) -> int:
    m = tau / dt
    mi = int(round(m))
    if abs(m - mi) > 1e-9 * max(1.0, m):
        raise DomainError(f"tau = {tau} is not a multiple of dt = {dt}")
    return mi


def time_average(traj: Trajectory, tau: float) -> Trajectory:
    """Sliding mean over ``[t - tau, t + tau]`` by the trapezoidal rule.

    ``tau`` must be an integer multiple of ``traj.dt``. The output covers
    only the times whose full window lies inside the input, so it is
    ``2 * tau / dt`` samples shorter and starts at ``t0 + tau``.
    """
    if tau < 0:
        raise DomainError("tau must be non-negative")
    if tau == 0:
        return Trajectory(traj.dt, traj.values.copy(), traj.t0)
    m = _half_window(tau, traj.dt)
    v = traj.values
    if 2 * m >= len(v):
        raise DomainError(f"window 2*tau = {2 * tau} exceeds the trajectory length")
    # cumulative trapezoid: cum[i] = integral from t0 to t_i
    cum = np.zeros_like(v)
    cum[1:] = np.cumsum(0.5 * traj.dt * (v[1:] + v[:-1]), axis=0)
    avg = (cum[2 * m:] - cum[: len(v) - 2 * m]) / (2 * tau)
    return Trajectory(traj.dt, avg, traj.t0 + m * traj.dt)


def filter_residual(x_traj: Trajectory, k: int, tau: float, a: float, b: float) -> float:
    """Max defect of ``dX_k/dt = k(-a X_k + b X_{k+1})`` on time-averaged powers.

    ``X_j`` is the sliding mean of ``x**j``; the derivative is a centered
    difference, so the first and last averaged samples are dropped.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    x = x_traj.component(0)
    xk = time_average(Trajectory(x_traj.dt, x**k, x_traj.t0), tau).component(0)
    xk1 = time_average(Trajectory(x_traj.dt, x ** (k + 1), x_traj.t0), tau).component(0)
    if len(xk) < 3:
        raise DomainError("trajectory too short for a centered derivative")
    deriv = (xk[2:] - xk[:-2]) / (2 * x_traj.dt)
    rhs = k * (-a * xk[1:-1] + b * xk1[1:-1])
    return float(np.max(np.abs(deriv - rhs)))


def compare_expansions(g2: float) -> tuple[float, float]:
    """Steady states normalised by the linear one ``f/a``: ``(exact, C2)``."""
    if not 0 <= g2 < 0.25:
        raise DomainError(f"g^2 = {g2} outside [0, 1/4)")
    exact = 2.0 / (1.0 + math.sqrt(1.0 - 4.0 * g2))
    return exact, 1.0 / (1.0 - g2)
