"""Measurements: Reynolds number, field errors, probes, steadiness, compressibility."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .grid import Field2D, GridSpec, nearest_node
from .nshj import FluidState, velocity, vorticity

QUANTITIES = ("vx", "vy", "rho", "chi", "omega")

#: Default probe locations (x, y) for time series.
DEFAULT_PROBES = ((0.0, 0.0), (1.5, 1.5), (0.7, 2.5))


def reynolds(u_s: float, n: int, nu: float) -> float:
    """``Re = (U_s / pi) * N / nu`` in code units."""
    return (u_s / math.pi) * n / nu


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Field2D) else np.asarray(f, dtype=float).reshape(-1)


def steady_velocity_scale(vx) -> float:
    """Peak amplitude ``max |vx|`` of the steady profile."""
    return float(np.max(np.abs(_values(vx))))


def _rms(a: np.ndarray) -> float:
    return float(np.sqrt(np.mean(a * a)))


def rel_l2_error(test, reference) -> float:
    """``rms(test - reference) / rms(reference)``, a global norm ratio."""
    t, r = _values(test), _values(reference)
    if t.shape != r.shape:
        raise ValueError("fields have different sizes")
    denom = _rms(r)
    if denom == 0:
        raise DomainError("reference field has zero norm")
    return _rms(t - r) / denom


def max_abs_error(test, reference) -> float:
    return float(np.max(np.abs(_values(test) - _values(reference))))


def field_values(state, quantity: str) -> np.ndarray:
    """Flat node values of ``quantity`` for a fluid or vorticity state."""
    if quantity not in QUANTITIES:
        raise ValueError(f"unknown quantity {quantity!r}")
    if isinstance(state, FluidState):
        if quantity == "vx":
            return velocity(state)[0].values
        if quantity == "vy":
            return velocity(state)[1].values
        if quantity == "omega":
            return vorticity(state).values
        return getattr(state, quantity).values
    # vorticity-streamfunction state: incompressible, no potential
    from .reference_ns import velocity_from_omega

    if quantity == "omega":
        return state.omega.values
    if quantity == "rho":
        return np.ones(state.grid.size)
    if quantity == "chi":
        raise ValueError("chi is not defined for a vorticity-streamfunction state")
    vx, vy = velocity_from_omega(state)
    return (vx if quantity == "vx" else vy).values


def _vx(snapshot) -> np.ndarray:
    if isinstance(snapshot, (Field2D, np.ndarray)):
        return _values(snapshot)
    return field_values(snapshot, "vx")


def steady_detector(history, window: int, tol: float, every: int = 1):
    """Compare each snapshot's ``vx`` with the one ``window`` entries earlier.

    ``history`` holds FluidState (or vx fields) sampled every ``every``
    steps. Returns ``(steady, steps_to_steady)``: ``steady`` refers to the
    last comparable pair; ``steps_to_steady`` is the first snapshot index
    (times ``every``) at which the relative change fell below ``tol``, or
    -1 if it never did.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    vxs = [_vx(s) for s in history]
    first = -1
    steady = False
    for i in range(window, len(vxs)):
        ref = vxs[i - window]
        if _rms(ref) == 0:
            ok = _rms(vxs[i]) == 0
        else:
            ok = rel_l2_error(vxs[i], ref) < tol
        if ok and first < 0:
            first = i
        steady = ok
    return steady, (first * every if first >= 0 else -1)


def incompressibility_report(s: FluidState, cs2: float, u_s: float) -> tuple[float, float]:
    """``(Ma^2, max |rho - 1|)`` with ``Ma^2 = u_s^2 / cs2``."""
    return u_s * u_s / cs2, float(np.max(np.abs(s.rho.values - 1.0)))


@dataclass
class ProbeSeries:
    location: tuple
    node: tuple
    quantity: str
    solver: str = ""
    samples: list = field(default_factory=list)

    def append(self, t: float, value: float):
        if self.samples and t <= self.samples[-1][0]:
            raise ValueError("probe times must be strictly increasing")
        self.samples.append((float(t), float(value)))

    @property
    def times(self) -> np.ndarray:
        return np.array([t for t, _ in self.samples])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples])

    @property
    def label(self) -> str:
        head = f"{self.solver} " if self.solver else ""
        if not self.location:
            return f"{head}{self.quantity}"
        return f"{head}{self.quantity} ({self.location[0]:g}, {self.location[1]:g})"


def make_probes(locations, grid: GridSpec, quantities=("vx", "vy"), solver: str = ""):
    return [ProbeSeries(tuple(map(float, p)), nearest_node(p, grid), q, solver)
            for p in locations for q in quantities]


def sample_probes(s, series, t: float):
    """Append the value at each probe's node to its series; returns ``series``."""
    if not series:
        return series
    n = s.grid.n
    cache = {}
    for ps in series:
        if ps.quantity not in cache:
            cache[ps.quantity] = field_values(s, ps.quantity)
        ix, iy = ps.node
        ps.append(t, cache[ps.quantity][iy * n + ix])
    return series


@dataclass
class ComparisonReport:
    scenario: str
    test: str
    reference: str
    reynolds: float
    rel_l2_error: float
    max_abs_error: float
    mach2: float
    max_density_fluct: float
    steady: bool
    steps_to_steady: int

    def to_dict(self) -> dict:
        return asdict(self)


def compare_states(scenario: str, test_name: str, test_state, ref_name: str, ref_state,
                   nu: float, cs2: float, steady: bool = False,
                   steps_to_steady: int = -1) -> ComparisonReport:
    """Measure ``test_state`` against ``ref_state`` on the forced component vx."""
    vx_t = field_values(test_state, "vx")
    vx_r = field_values(ref_state, "vx")
    u_s = steady_velocity_scale(vx_r)
    rho = field_values(test_state, "rho")
    return ComparisonReport(
        scenario=scenario, test=test_name, reference=ref_name,
        reynolds=reynolds(u_s, ref_state.grid.n, nu),
        rel_l2_error=rel_l2_error(vx_t, vx_r),
        max_abs_error=max_abs_error(vx_t, vx_r),
        mach2=u_s * u_s / cs2,
        max_density_fluct=float(np.max(np.abs(rho - 1.0))),
        steady=bool(steady), steps_to_steady=int(steps_to_steady),
    )
