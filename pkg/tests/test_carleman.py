import tracemalloc

import numpy as np
import pytest

from c2flow.carleman import (C2Evolver, C2State, assemble_operators, closure_defect,
                             composite_index, lift, readout, split_index, step_c2)
from c2flow.config import RunConfig
from c2flow.errors import DivergenceError
from c2flow.grid import Field2D, GridSpec
from c2flow.nshj import FluidState, PhysicsParams, step_nshj
from c2flow.scenarios import build_initial_state, build_physics


def scenario(n, f0=0.009):
    cfg = RunConfig(scenario="kolmogorov", grid_n=n, f0=f0, solvers=("c2", "nshj")).resolved()
    return cfg, build_initial_state(cfg), build_physics(cfg)


def random_state(grid, rng, scale=1.0):
    return FluidState.from_vector(grid, scale * rng.uniform(-1, 1, 4 * grid.size))


def test_composite_index_bijective():
    g = 16
    seen = {composite_index(f, node, g) for f in range(4) for node in range(g)}
    assert seen == set(range(4 * g))
    assert split_index(composite_index(2, 5, g), g) == (2, 5)
    with pytest.raises(IndexError):
        composite_index(4, 0, g)


@pytest.mark.parametrize("n", [4, 8])
def test_oracle_equivalence(n, rng):
    _, _, p = scenario(n)
    ops = assemble_operators(p.grid, p)
    for _ in range(100):
        s = random_state(p.grid, rng, scale=rng.uniform(0.1, 3))
        j = s.flatten()
        dev = np.abs(ops.apply(j) - step_nshj(s, p).flatten()).max()
        assert dev < 1e-12 * max(1.0, np.abs(j).max())


def test_operator_structure():
    _, _, p = scenario(8)
    ops = assemble_operators(p.grid, p)
    assert ops.a_op.getnnz(axis=1).max() <= 13
    alpha, beta, gamma, c = ops.b_entries()
    table = {(a, b, g): v for a, b, g, v in zip(alpha, beta, gamma, c)}
    for (a, b, g), v in table.items():
        if b != g:
            assert table[(a, g, b)] == v


def test_f_vector_layout():
    _, _, p = scenario(8)
    ops = assemble_operators(p.grid, p)
    G = p.grid.size
    _, y = p.grid.meshgrid()
    assert np.all(ops.f_vec[:G] == 0)
    np.testing.assert_allclose(ops.f_vec[G:2 * G], p.dt / 3, rtol=1e-15)
    np.testing.assert_allclose(ops.f_vec[2 * G:3 * G], p.dt * 0.009 * np.cos(y), rtol=1e-15)
    assert np.all(ops.f_vec[3 * G:] == 0)


def test_no_coupling_without_viscosity_and_pressure():
    g = GridSpec(8)
    p = PhysicsParams.unforced(g, nu=0.0, cs2=0.0, dt=0.01)
    ops = assemble_operators(g, p)
    eye = np.eye(4 * g.size)
    np.testing.assert_array_equal(ops.a_op.toarray(), eye)
    assert np.all(ops.f_vec == 0)
    assert ops.b_op.nnz > 0


def test_lift_structure(rng):
    g = GridSpec(4)
    s = random_state(g, rng)
    st = lift(s)
    np.testing.assert_array_equal(np.diag(st.j2), st.j1**2)
    assert np.linalg.matrix_rank(st.j2) == 1
    assert np.trace(st.j2) == pytest.approx(st.j1 @ st.j1, rel=1e-14)
    zero = lift(FluidState.from_vector(g, np.zeros(4 * g.size)))
    assert not zero.j1.any() and not zero.j2.any()


def test_readout_roundtrip(rng):
    g = GridSpec(8)
    s = random_state(g, rng)
    back = readout(lift(s), g)
    np.testing.assert_array_equal(back.flatten(), s.flatten())
    np.testing.assert_array_equal(back.rho.values, lift(s).j1[:g.size])


def test_step_zero_state_zero_forcing():
    g = GridSpec(8)
    p = PhysicsParams.unforced(g, nu=1 / 6, cs2=0.0, dt=0.012)
    ops = assemble_operators(g, p)
    st = lift(FluidState.from_vector(g, np.zeros(4 * g.size)))
    out = step_c2(st, ops)
    assert not out.j1.any() and not out.j2.any()
    ev = C2Evolver(ops, st)
    ev.run(50)
    assert not ev.j1.any() and not ev.j2.any()


def test_first_step_from_rest_matches_nshj():
    _, _, p = scenario(16)
    ops = assemble_operators(p.grid, p)
    rest = FluidState.rest(p.grid)
    out = step_c2(lift(rest), ops)
    np.testing.assert_allclose(out.j1, step_nshj(rest, p).flatten(), rtol=0, atol=1e-15)


def test_second_order_update_matches_tensor_square(rng):
    """j2' from the kernels equals the Kronecker form built densely."""
    _, _, p = scenario(4)
    ops = assemble_operators(p.grid, p)
    d = ops.dim
    m = rng.standard_normal((d, d))
    m = m + m.T
    u = rng.standard_normal(d)
    a = ops.a_op.toarray()
    bm = np.einsum("abc,bc->a", ops.b_op.toarray().reshape(d, d, d), m)
    f = ops.f_vec
    expected = (np.outer(f, f) + np.outer(a @ u, f) + np.outer(f, a @ u)
                + a @ m @ a.T + np.outer(bm, f) + np.outer(f, bm))
    out = step_c2(C2State(u, m), ops)
    np.testing.assert_allclose(out.j2, expected, atol=1e-12)
    np.testing.assert_allclose(out.j1, a @ u + bm + f, atol=1e-13)
    ev = C2Evolver(ops, C2State(u, m))
    ev.step()
    np.testing.assert_allclose(ev.j2, expected, atol=1e-12)


def test_evolver_matches_pure_step():
    _, s0, p = scenario(8)
    ops = assemble_operators(p.grid, p)
    st = lift(s0)
    for _ in range(20):
        st = step_c2(st, ops)
    ev = C2Evolver(ops, lift(s0))
    ev.run(20)
    np.testing.assert_allclose(ev.j1, st.j1, rtol=0, atol=1e-14)
    np.testing.assert_allclose(ev.j2, st.j2, rtol=0, atol=1e-14)


def test_symmetry_preserved_full_evaluation():
    _, s0, p = scenario(8)
    ops = assemble_operators(p.grid, p)
    st = lift(s0)
    for _ in range(100):
        st = step_c2(st, ops)
    assert st.asymmetry() < 1e-12 * np.linalg.norm(st.j2)


def test_determinism():
    _, s0, p = scenario(8)
    ops = assemble_operators(p.grid, p)
    a = C2Evolver(ops, lift(s0))
    a.run(30)
    b = C2Evolver(assemble_operators(p.grid, p), lift(s0))
    b.run(30)
    assert np.array_equal(a.j1, b.j1) and np.array_equal(a.j2, b.j2)


def test_closure_defect():
    _, s0, p = scenario(8)
    ops = assemble_operators(p.grid, p)
    st = lift(s0)
    assert closure_defect(st) == 0
    one = step_c2(st, ops)
    d1 = closure_defect(one)
    assert np.isfinite(d1) and 0 < d1 < (p.dt**2)
    ev = C2Evolver(ops, st)
    defects = []
    for _ in range(4):
        ev.run(250)
        defects.append(closure_defect(ev.state))
    assert d1 < defects[0]
    assert np.all(np.diff(defects) > 0)
    # regression curve at N=8 every 250 steps
    np.testing.assert_allclose(
        defects, [0.010824557058845, 0.027852211008947, 0.053801338312861, 0.088878678109062],
        rtol=1e-8)


def test_divergence_raised():
    g = GridSpec(4)
    p = PhysicsParams.unforced(g, nu=1 / 6, cs2=1 / 3, dt=0.01)
    ops = assemble_operators(g, p)
    j1 = np.full(ops.dim, np.nan)
    with pytest.raises(DivergenceError):
        step_c2(C2State(j1, np.zeros((ops.dim, ops.dim))), ops)


def test_evolver_memory_is_two_dense_matrices():
    _, s0, p = scenario(16)
    ops = assemble_operators(p.grid, p)
    ev = C2Evolver(ops, lift(s0))
    ev.step()
    d = ops.dim
    tracemalloc.start()
    tracemalloc.reset_peak()
    for _ in range(3):
        ev.step()
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    # per-step temporaries are O(D); no D x D (let alone D^2 x D^2) allocation
    assert peak < 0.5 * d * d * 8
    assert ev.j2.nbytes + ev._scratch.nbytes == 2 * d * d * 8


def test_shape_mismatch():
    _, _, p = scenario(4)
    ops = assemble_operators(p.grid, p)
    with pytest.raises(ValueError):
        step_c2(C2State(np.zeros(3), np.zeros((3, 3))), ops)
    with pytest.raises(ValueError):
        assemble_operators(GridSpec(8), p)
