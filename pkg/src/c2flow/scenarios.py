"""Initial conditions and forcing for the fluid scenarios."""
from __future__ import annotations

import numpy as np

from .config import RunConfig
from .errors import ConfigError
from .grid import Field2D, GridSpec
from .nshj import FluidState, PhysicsParams


def build_initial_state(cfg: RunConfig) -> FluidState:
    """Kolmogorov-like shear or the two-mode cellular flow, with ``rho = 1``, ``chi = 0``.

    For ``two_mode`` the whole velocity is carried by ``A`` so that
    ``grad(chi) + A`` reproduces it exactly.
    """
    grid = GridSpec(cfg.grid_n)
    x, y = grid.meshgrid()
    if cfg.scenario == "kolmogorov":
        ax = cfg.u0 * np.cos(y)
        ay = cfg.u0 * np.cos(x)
    elif cfg.scenario == "two_mode":
        ax = cfg.u1 * np.sin(x) * np.sin(y) + cfg.u2 * np.sin(2 * x) * np.sin(2 * y)
        ay = cfg.u1 * np.cos(x) * np.cos(y) + cfg.u2 * np.cos(2 * x) * np.cos(2 * y)
    else:
        raise ConfigError(f"scenario {cfg.scenario!r} has no fluid initial state")
    return FluidState(Field2D(grid, np.ones(grid.size)), Field2D.zeros(grid),
                      Field2D(grid, ax), Field2D(grid, ay))


def build_forcing(cfg: RunConfig) -> tuple[Field2D, Field2D]:
    grid = GridSpec(cfg.grid_n)
    _, y = grid.meshgrid()
    if cfg.scenario == "kolmogorov":
        fx = cfg.f0 * np.cos(y)
    elif cfg.scenario == "two_mode":
        fx = cfg.f1 * np.cos(y) + cfg.f2 * np.cos(2 * y)
    else:
        raise ConfigError(f"scenario {cfg.scenario!r} has no fluid forcing")
    return Field2D(grid, fx), Field2D.zeros(grid)


def build_physics(cfg: RunConfig) -> PhysicsParams:
    fx, fy = build_forcing(cfg)
    return PhysicsParams(nu=cfg.nu, cs2=cfg.cs2, dt=cfg.dt, forcing_fx=fx, forcing_fy=fy)
