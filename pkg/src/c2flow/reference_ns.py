"""Incompressible Navier-Stokes in vorticity-streamfunction form.

Serves as an independent oracle for the NSHJ and Carleman paths. It uses
the same centered stencils and explicit Euler stepping; the streamfunction
comes from the 5-point Laplacian inverted exactly in Fourier space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, NumericalError
from .grid import Field2D, GridSpec, ddx, ddy
from .nshj import FluidState, PhysicsParams, vorticity

POISSON_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class VorticityState:
    omega: Field2D

    @property
    def grid(self) -> GridSpec:
        return self.omega.grid

    @classmethod
    def from_fluid(cls, s: FluidState) -> "VorticityState":
        return cls(vorticity(s))


def laplacian5(a: np.ndarray, n: int, h: float) -> np.ndarray:
    q = a.reshape(n, n)
    lap = (np.roll(q, 1, 0) + np.roll(q, -1, 0) + np.roll(q, 1, 1) + np.roll(q, -1, 1)
           - 4 * q) / h**2
    return lap.reshape(-1)


def _symbol5(grid: GridSpec) -> np.ndarray:
    """Eigenvalues of ``-laplacian5`` on the rfft2 wavenumber layout ``[ky, kx]``."""
    n, h = grid.n, grid.spacing
    ky = 2 * np.pi * np.fft.fftfreq(n)
    kx = 2 * np.pi * np.fft.rfftfreq(n)
    lam = (2 - 2 * np.cos(ky))[:, None] / h**2 + (2 - 2 * np.cos(kx))[None, :] / h**2
    lam[0, 0] = 1.0
    return lam


def poisson_solve(omega: Field2D) -> Field2D:
    """Zero-mean ``psi`` with ``laplacian5(psi) = -(omega - mean(omega))``."""
    g = omega.grid
    n = g.n
    w = omega.values - omega.values.mean()
    what = np.fft.rfft2(w.reshape(n, n))
    psi_hat = what / _symbol5(g)
    psi_hat[0, 0] = 0.0
    psi = np.fft.irfft2(psi_hat, s=(n, n)).reshape(-1)
    resid = np.linalg.norm(laplacian5(psi, n, g.spacing) + w)
    scale = np.linalg.norm(omega.values)
    if resid > POISSON_RTOL * max(scale, np.finfo(float).tiny):
        raise NumericalError(f"Poisson residual {resid:.3e} exceeds {POISSON_RTOL:g} * |omega|")
    return Field2D(g, psi)


def velocity_from_omega(state: VorticityState) -> tuple[Field2D, Field2D]:
    g = state.grid
    psi = poisson_solve(state.omega).values
    return Field2D(g, ddy(psi, g.n, g.spacing)), Field2D(g, -ddx(psi, g.n, g.spacing))


def forcing_curl(p: PhysicsParams) -> np.ndarray:
    g = p.grid
    return ddx(p.forcing_fy.values, g.n, g.spacing) - ddy(p.forcing_fx.values, g.n, g.spacing)


def step_ns(state: VorticityState, p: PhysicsParams, step_index: int | None = None,
            curl_f: np.ndarray | None = None) -> VorticityState:
    """Explicit Euler on ``w_t = -(v . grad) w + nu lap(w) + curl(f)``.

    The viscous Laplacian is the composition of the centered first
    derivatives, which is the operator the NSHJ path applies to ``A``.
    """
    g = state.grid
    n, h = g.n, g.spacing
    w = state.omega.values
    vx, vy = velocity_from_omega(state)
    wx = ddx(w, n, h)
    wy = ddy(w, n, h)
    lap = ddx(wx, n, h) + ddy(wy, n, h)
    if curl_f is None:
        curl_f = forcing_curl(p)
    with np.errstate(over="ignore", invalid="ignore"):
        new = w + p.dt * (-(vx.values * wx + vy.values * wy) + p.nu * lap + curl_f)
    if not np.isfinite(new).all():
        raise DivergenceError(f"non-finite vorticity at step {step_index}",
                              step=step_index, field="omega")
    return VorticityState(Field2D(g, new))


def evolve_ns(state: VorticityState, p: PhysicsParams, steps: int, observers=(),
              start_step: int = 0):
    """Repeat :func:`step_ns`; observers are called as ``observer(step, state)``."""
    curl_f = forcing_curl(p)
    for i in range(start_step + 1, start_step + steps + 1):
        state = step_ns(state, p, step_index=i, curl_f=curl_f)
        for obs in observers:
            obs(i, state)
    return state


def enstrophy(state: VorticityState) -> float:
    return float(np.sum(state.omega.values**2))
