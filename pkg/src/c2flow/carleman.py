"""Second-order Carleman lifting of the discretized NSHJ step.

One Euler step of the fluid is written as ``J' = A J + B:(J (x) J) + F``
with ``J = (rho, chi, ax, ay)`` flattened (field-major, index
``field * G + node``). The lifted state carries ``j1 ~ J`` and a dense
symmetric ``j2 ~ J J^T``; both are advanced by the linear map obtained by
taking the tensor square of the step, with the third-order terms dropped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import DivergenceError
from .grid import GridSpec, derivative_matrices
from .nshj import FluidState, PhysicsParams

N_FIELDS = 4
RHO, CHI, AX, AY = range(N_FIELDS)


def composite_index(field: int, node: int, g: int) -> int:
    if not (0 <= field < N_FIELDS and 0 <= node < g):
        raise IndexError((field, node))
    return field * g + node


def split_index(alpha: int, g: int) -> tuple[int, int]:
    if not 0 <= alpha < N_FIELDS * g:
        raise IndexError(alpha)
    return divmod(alpha, g)


def _row_pair_products(p: sp.csr_matrix, q: sp.csr_matrix):
    """Triplets ``(i, beta, gamma, p[i,beta] * q[i,gamma])`` for every row ``i``."""
    p = p.tocsr()
    q = q.tocsr()
    p.sort_indices()
    q.sort_indices()
    nrows = p.shape[0]
    rows_p = np.repeat(np.arange(nrows), np.diff(p.indptr))
    q_count = np.diff(q.indptr)[rows_p]
    k_p = np.repeat(np.arange(p.nnz), q_count)
    starts = np.cumsum(q_count) - q_count
    within = np.arange(k_p.size) - np.repeat(starts, q_count)
    k_q = np.repeat(q.indptr[rows_p], q_count) + within
    return rows_p[k_p], p.indices[k_p], q.indices[k_q], p.data[k_p] * q.data[k_q]


@dataclass(eq=False)
class CarlemanOperators:
    """Linear tensor ``a_op``, bilinear tensor ``b_op`` and constant ``f_vec``.

    ``b_op`` is stored as a CSR matrix of shape ``(D, D*D)`` (``D = 4G``)
    whose column ``beta * D + gamma`` holds ``B[alpha, beta, gamma]``, so
    that ``B:M`` is ``b_op @ M.ravel()`` for a C-ordered ``M``.
    """

    a_op: sp.csr_matrix
    b_op: sp.csr_matrix
    f_vec: np.ndarray
    grid: GridSpec
    physics: PhysicsParams

    @property
    def dim(self) -> int:
        return self.f_vec.size

    def b_entries(self):
        """Return ``(alpha, beta, gamma, coeff)`` arrays for the stored entries."""
        coo = self.b_op.tocoo()
        beta, gamma = np.divmod(coo.col.astype(np.int64), self.dim)
        return coo.row.astype(np.int64), beta, gamma, coo.data.copy()

    def bilinear_matrix(self, m: np.ndarray) -> np.ndarray:
        """``(B:M)_alpha = sum B[alpha, beta, gamma] M[beta, gamma]``."""
        return self.b_op @ np.ascontiguousarray(m).reshape(-1)

    def bilinear_vector(self, j: np.ndarray) -> np.ndarray:
        """``B:(j (x) j)`` without forming the outer product."""
        alpha, beta, gamma, c = self._entries_cache()
        return np.bincount(alpha, weights=c * j[beta] * j[gamma], minlength=self.dim)

    def _entries_cache(self):
        cached = getattr(self, "_entries", None)
        if cached is None:
            cached = self.b_entries()
            self._entries = cached
        return cached

    def apply(self, j: np.ndarray) -> np.ndarray:
        """``A j + B:(j (x) j) + F``; equals one NSHJ Euler step of ``j``."""
        return self.a_op @ j + self.bilinear_vector(j) + self.f_vec


def assemble_operators(grid: GridSpec, physics: PhysicsParams) -> CarlemanOperators:
    """Collect the terms of one NSHJ Euler step into ``(A, B, F)``."""
    if physics.grid != grid:
        raise ValueError("physics forcing lives on a different grid")
    g = grid.size
    dt, nu, cs2 = physics.dt, physics.nu, physics.cs2
    dxm, dym = derivative_matrices(grid)
    eye = sp.identity(g, format="csr")
    zero = sp.csr_matrix((g, g))

    def block(*mats):
        return sp.hstack(mats, format="csr")

    sel = [block(*(eye if i == k else zero for i in range(N_FIELDS))) for k in range(N_FIELDS)]
    vx = block(zero, dxm, eye, zero)
    vy = block(zero, dym, zero, eye)
    div_v = (dxm @ vx + dym @ vy).tocsr()
    omega = block(zero, zero, -dym, dxm)
    drho_x = block(dxm, zero, zero, zero)
    drho_y = block(dym, zero, zero, zero)

    a_rows = [
        sel[RHO],
        sel[CHI] + dt * nu * div_v - dt * cs2 * sel[RHO],
        sel[AX] - dt * nu * (dym @ omega),
        sel[AY] + dt * nu * (dxm @ omega),
    ]
    a_op = sp.vstack(a_rows, format="csr")
    a_op.eliminate_zeros()
    a_op.sort_indices()

    # (output field, coefficient, left factor, right factor)
    products = [
        (RHO, -dt, drho_x, vx),
        (RHO, -dt, drho_y, vy),
        (RHO, -dt, sel[RHO], div_v),
        (CHI, -0.5 * dt, vx, vx),
        (CHI, -0.5 * dt, vy, vy),
        (AX, dt, omega, vy),
        (AY, -dt, omega, vx),
    ]
    b_op = _assemble_bilinear(products, g)

    f_vec = np.zeros(N_FIELDS * g)
    f_vec[CHI * g:(CHI + 1) * g] = dt * cs2
    f_vec[AX * g:(AX + 1) * g] = dt * physics.forcing_fx.values
    f_vec[AY * g:(AY + 1) * g] = dt * physics.forcing_fy.values
    return CarlemanOperators(a_op, b_op, f_vec, grid, physics)


def _assemble_bilinear(products, g: int) -> sp.csr_matrix:
    d = N_FIELDS * g
    alphas, betas, gammas, coeffs = [], [], [], []
    for fld, c, left, right in products:
        i, b, gm, v = _row_pair_products(left, right)
        alphas.append(i + fld * g)
        betas.append(b)
        gammas.append(gm)
        coeffs.append(c * v)
    alpha = np.concatenate(alphas).astype(np.int64)
    beta = np.concatenate(betas).astype(np.int64)
    gamma = np.concatenate(gammas).astype(np.int64)
    coeff = np.concatenate(coeffs)

    # Merge onto the canonical half beta <= gamma first, then split the
    # off-diagonal coefficients evenly so mirrored entries are bit-equal.
    lo = np.minimum(beta, gamma)
    hi = np.maximum(beta, gamma)
    canon = sp.coo_matrix((coeff, (alpha, lo * d + hi)), shape=(d, d * d)).tocsr()
    canon.sum_duplicates()
    canon.eliminate_zeros()
    coo = canon.tocoo()
    a_c = coo.row.astype(np.int64)
    lo, hi = np.divmod(coo.col.astype(np.int64), d)
    c_c = coo.data
    off = lo != hi
    rows = np.concatenate([a_c[~off], a_c[off], a_c[off]])
    cols = np.concatenate([lo[~off] * d + hi[~off], lo[off] * d + hi[off], hi[off] * d + lo[off]])
    vals = np.concatenate([c_c[~off], 0.5 * c_c[off], 0.5 * c_c[off]])
    b_op = sp.csr_matrix((vals, (rows, cols)), shape=(d, d * d))
    b_op.sort_indices()
    return b_op


@dataclass(eq=False)
class C2State:
    j1: np.ndarray
    j2: np.ndarray

    def __post_init__(self):
        d = self.j1.shape[0]
        if self.j1.shape != (d,) or self.j2.shape != (d, d):
            raise ValueError("j2 must be square with the length of j1")

    def copy(self) -> "C2State":
        return C2State(self.j1.copy(), self.j2.copy())

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.j1).all() and np.isfinite(self.j2).all())

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.j2 - self.j2.T)))


def lift(s: FluidState) -> C2State:
    j1 = s.flatten()
    return C2State(j1, np.outer(j1, j1))


def readout(state: C2State, grid: GridSpec) -> FluidState:
    return FluidState.from_vector(grid, state.j1)


def closure_defect(state: C2State) -> float:
    """Frobenius distance of ``j2`` from ``j1 j1^T``, relative to ``|j1|^2``."""
    j1 = state.j1
    n2 = float(j1 @ j1)
    d = np.linalg.norm(state.j2 - np.outer(j1, j1))
    return float(d / max(n2, np.finfo(float).eps))


def _csr_arrays(m: sp.csr_matrix):
    return (m.indptr.astype(np.int64), m.indices.astype(np.int64),
            np.ascontiguousarray(m.data, dtype=np.float64))


def _step_into(ops: CarlemanOperators, j1, j2, j1_out, j2_out, scratch, symmetric: bool):
    # j2 is dead once scratch = A j2 is formed, so j2_out may alias j2.
    a = _csr_arrays(ops.a_op)
    au = ops.a_op @ j1
    bm = ops.bilinear_matrix(j2)
    x = au + bm
    np.add(x, ops.f_vec, out=j1_out)
    _kernels.csr_times_dense(*a, j2, scratch)
    kernel = (_kernels.dense_times_csr_t_rank2 if symmetric
              else _kernels.dense_times_csr_t_rank2_full)
    kernel(*a, scratch, ops.f_vec, x, j2_out)


def step_c2(state: C2State, ops: CarlemanOperators) -> C2State:
    """One step of the lifted linear system; returns a new state.

    ``j1' = A j1 + B:j2 + F`` and
    ``j2' = F F^T + X F^T + F X^T + A j2 A^T`` with ``X = A j1 + B:j2``.
    ``A j2 A^T`` is evaluated as two sparse-times-dense passes.
    """
    d = ops.dim
    if state.j1.shape != (d,):
        raise ValueError(f"state dimension {state.j1.shape[0]} does not match operators {d}")
    j1 = np.empty(d)
    j2 = np.empty((d, d))
    scratch = np.empty((d, d))
    _step_into(ops, state.j1, np.ascontiguousarray(state.j2), j1, j2, scratch, symmetric=False)
    out = C2State(j1, j2)
    if not out.is_finite():
        raise DivergenceError("non-finite lifted state")
    return out


class C2Evolver:
    """Advance a lifted state in place with two preallocated ``D x D`` buffers.

    The current ``j2`` and one scratch matrix for ``A j2`` are the only
    dense allocations; the new ``j2`` overwrites the old one. With
    ``exploit_symmetry`` only the upper triangle of ``A j2 A^T`` is
    evaluated and mirrored.
    """

    def __init__(self, ops: CarlemanOperators, state: C2State, exploit_symmetry: bool = True):
        d = ops.dim
        if state.j1.shape != (d,):
            raise ValueError("state and operators have different dimensions")
        self.ops = ops
        self.exploit_symmetry = exploit_symmetry
        self.j1 = state.j1.copy()
        self.j2 = np.array(state.j2, dtype=float, order="C", copy=True)
        self._j1_next = np.empty(d)
        self._scratch = np.empty((d, d))
        self.step_count = 0

    @property
    def state(self) -> C2State:
        return C2State(self.j1.copy(), self.j2.copy())

    def step(self):
        _step_into(self.ops, self.j1, self.j2, self._j1_next, self.j2, self._scratch,
                   self.exploit_symmetry)
        self.j1, self._j1_next = self._j1_next, self.j1
        self.step_count += 1
        if not np.isfinite(self.j1).all():
            raise DivergenceError(f"non-finite j1 at step {self.step_count}",
                                  step=self.step_count)

    def readout(self) -> FluidState:
        return FluidState.from_vector(self.ops.grid, self.j1)

    def run(self, steps: int, observers=()):
        """Step ``steps`` times, calling ``observer(step, fluid_state)`` after each."""
        for _ in range(steps):
            self.step()
            if observers:
                s = self.readout()
                for obs in observers:
                    obs(self.step_count, s)
        if not np.isfinite(self.j2).all():
            raise DivergenceError(f"non-finite j2 at step {self.step_count}",
                                  step=self.step_count)
        return self.readout()


def c2_memory_bytes(grid: GridSpec) -> int:
    """Bytes held by the evolver's two dense ``4G x 4G`` matrices."""
    d = N_FIELDS * grid.size
    return 2 * d * d * 8
