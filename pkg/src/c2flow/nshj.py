"""Explicit Euler stepper for the discretized Navier-Stokes-Hamilton-Jacobi system.

The velocity is split as ``v = grad(chi) + A``; ``rho`` obeys continuity,
``chi`` a Hamilton-Jacobi equation with viscous and pressure terms, and
``A`` carries the vorticity ``omega = dx(Ay) - dy(Ax)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .grid import Field2D, GridSpec, _same_grid, ddx, ddy

log = logging.getLogger(__name__)

FIELD_NAMES = ("rho", "chi", "ax", "ay")

#: Above this value of ``dt * nu / h**2`` the explicit diffusion is flagged.
DIFFUSION_WARN = 0.25


@dataclass(frozen=True, eq=False)
class FluidState:
    rho: Field2D
    chi: Field2D
    ax: Field2D
    ay: Field2D

    def __post_init__(self):
        _same_grid(self.rho, self.chi, self.ax, self.ay)

    @property
    def grid(self) -> GridSpec:
        return self.rho.grid

    def flatten(self) -> np.ndarray:
        """Concatenate ``(rho, chi, ax, ay)`` into one vector of length 4G."""
        return np.concatenate([self.rho.values, self.chi.values,
                               self.ax.values, self.ay.values])

    @classmethod
    def from_vector(cls, grid: GridSpec, j: np.ndarray) -> "FluidState":
        g = grid.size
        j = np.asarray(j, dtype=float)
        if j.shape != (4 * g,):
            raise ValueError(f"expected vector of length {4 * g}, got {j.shape}")
        return cls(*(Field2D(grid, j[i * g:(i + 1) * g].copy()) for i in range(4)))

    @classmethod
    def rest(cls, grid: GridSpec) -> "FluidState":
        zero = np.zeros(grid.size)
        return cls(Field2D(grid, np.ones(grid.size)), Field2D(grid, zero),
                   Field2D(grid, zero), Field2D(grid, zero))

    def fields(self) -> dict:
        return dict(zip(FIELD_NAMES, (self.rho, self.chi, self.ax, self.ay)))

    def is_valid(self) -> bool:
        return all(f.is_finite() for f in self.fields().values()) and bool(
            (self.rho.values > 0).all())


@dataclass(eq=False)
class PhysicsParams:
    nu: float
    cs2: float
    dt: float
    forcing_fx: Field2D
    forcing_fy: Field2D

    def __post_init__(self):
        if self.nu < 0 or self.cs2 < 0 or not self.dt > 0:
            raise ValueError("need nu >= 0, cs2 >= 0 and dt > 0")
        _same_grid(self.forcing_fx, self.forcing_fy)

    @classmethod
    def unforced(cls, grid: GridSpec, nu: float, cs2: float, dt: float) -> "PhysicsParams":
        return cls(nu, cs2, dt, Field2D.zeros(grid), Field2D.zeros(grid))

    @property
    def grid(self) -> GridSpec:
        return self.forcing_fx.grid

    def diffusion_number(self) -> float:
        return self.dt * self.nu / self.grid.spacing**2

    def check_stability(self) -> bool:
        """Log a warning when the explicit diffusion number is large."""
        d = self.diffusion_number()
        if d > DIFFUSION_WARN:
            log.warning("dt*nu/h^2 = %.3g exceeds %.2g; explicit Euler may be unstable",
                        d, DIFFUSION_WARN)
            return False
        return True


def velocity(s: FluidState) -> tuple[Field2D, Field2D]:
    g = s.grid
    vx = ddx(s.chi.values, g.n, g.spacing) + s.ax.values
    vy = ddy(s.chi.values, g.n, g.spacing) + s.ay.values
    return Field2D(g, vx), Field2D(g, vy)


def vorticity(s: FluidState) -> Field2D:
    g = s.grid
    return Field2D(g, ddx(s.ay.values, g.n, g.spacing) - ddy(s.ax.values, g.n, g.spacing))


def _rhs_step(rho, chi, ax, ay, n, h, nu, cs2, dt, fx, fy):
    vx = ddx(chi, n, h) + ax
    vy = ddy(chi, n, h) + ay
    div_v = ddx(vx, n, h) + ddy(vy, n, h)
    om = ddx(ay, n, h) - ddy(ax, n, h)
    rho_new = rho - dt * (ddx(rho, n, h) * vx + ddy(rho, n, h) * vy + rho * div_v)
    chi_new = chi + dt * (nu * div_v - cs2 * (rho - 1.0) - 0.5 * (vx * vx + vy * vy))
    ax_new = ax + dt * (om * vy - nu * ddy(om, n, h)) + dt * fx
    ay_new = ay + dt * (nu * ddx(om, n, h) - om * vx) + dt * fy
    return rho_new, chi_new, ax_new, ay_new


def step_nshj(s: FluidState, p: PhysicsParams, step_index: int | None = None) -> FluidState:
    """Advance one explicit Euler step; every right-hand side uses time-t values."""
    g = s.grid
    with np.errstate(over="ignore", invalid="ignore"):
        out = _rhs_step(s.rho.values, s.chi.values, s.ax.values, s.ay.values, g.n, g.spacing,
                        p.nu, p.cs2, p.dt, p.forcing_fx.values, p.forcing_fy.values)
    for name, arr in zip(FIELD_NAMES, out):
        if not np.isfinite(arr).all():
            where = "" if step_index is None else f" at step {step_index}"
            raise DivergenceError(f"non-finite {name}{where}", step=step_index, field=name)
    return FluidState(*(Field2D(g, a) for a in out))


@dataclass
class EvolveRecord:
    """What the observers saw during an evolution."""

    steps: int = 0
    samples: list = field(default_factory=list)


def evolve(s: FluidState, p: PhysicsParams, steps: int, observers=(), start_step: int = 0):
    """Apply ``step_nshj`` ``steps`` times.

    Each observer is called as ``observer(step, state)`` after every step
    (``step`` counts from ``start_step + 1``) and decides its own cadence.
    Returns the final state and the list of non-None observer results.
    """
    p.check_stability()
    rec = EvolveRecord()
    state = s
    for i in range(start_step + 1, start_step + steps + 1):
        state = step_nshj(state, p, step_index=i)
        for obs in observers:
            r = obs(i, state)
            if r is not None:
                rec.samples.append(r)
        rec.steps += 1
    return state, rec
