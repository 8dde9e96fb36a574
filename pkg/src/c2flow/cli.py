"""Batch runner: ``c2flow run <config>`` and ``c2flow verify <config>``.

Exit codes: 0 success, 1 verification mismatch, 2 configuration error,
3 numerical divergence (partial outputs kept), 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import logistic as lg
from .carleman import C2Evolver, assemble_operators, lift
from .config import RunConfig, load_config, steps_per_characteristic_time
from .diagnostics import (ProbeSeries, compare_states, field_values, make_probes,
                          sample_probes, steady_detector)
from .errors import ConfigError, DivergenceError
from .nshj import FIELD_NAMES, FluidState, evolve
from .plot import emit_plot
from .reference_ns import VorticityState, evolve_ns, velocity_from_omega
from .scenarios import build_initial_state, build_physics

log = logging.getLogger("c2flow")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4

PROBE_HEADER = ("time", "quantity", "probe_x", "probe_y", "solver", "value")
# Solver pairs compared at the end of a run, as (test, reference).
COMPARISONS = (("c2", "nshj"), ("c2", "ns"), ("nshj", "ns"))


def _g(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class RunResult:
    status: int = EXIT_OK
    reports: list = field(default_factory=list)
    files: list = field(default_factory=list)
    finals: dict = field(default_factory=dict)
    series: list = field(default_factory=list)
    message: str = ""


def write_probe_csv(series, path: Path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROBE_HEADER)
        for ps in series:
            px, py = (_g(ps.location[0]), _g(ps.location[1])) if ps.location else ("", "")
            for t, v in ps.samples:
                w.writerow((_g(t), ps.quantity, px, py, ps.solver, _g(v)))


def write_snapshot(state, path: Path, meta: dict):
    """CSV ``ix,iy,rho,chi,ax,ay`` preceded by ``# key = value`` lines."""
    grid = state.grid
    if isinstance(state, FluidState):
        cols = [state.rho.values, state.chi.values, state.ax.values, state.ay.values]
    else:
        # incompressible state: v carried entirely by A, chi = 0, rho = 1
        vx, vy = velocity_from_omega(state)
        cols = [np.ones(grid.size), np.zeros(grid.size), vx.values, vy.values]
    n = grid.n
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for k, v in meta.items():
            fh.write(f"# {k} = {v}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("ix", "iy") + FIELD_NAMES)
        for idx in range(grid.size):
            iy, ix = divmod(idx, n)
            w.writerow((ix, iy) + tuple(_g(c[idx]) for c in cols))


def read_snapshot(path) -> tuple[dict, FluidState]:
    from .grid import Field2D, GridSpec

    meta = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                k, v = line[1:].split("=", 1)
                meta[k.strip()] = v.strip()
            else:
                rows.append(line)
    data = list(csv.reader(rows))[1:]
    n = int(meta["n"])
    grid = GridSpec(n)
    arr = np.zeros((4, grid.size))
    for r in data:
        ix, iy = int(r[0]), int(r[1])
        arr[:, iy * n + ix] = [float(v) for v in r[2:6]]
    return meta, FluidState(*(Field2D(grid, a) for a in arr))


# --------------------------------------------------------------------------- fluid


def _run_fluid(cfg: RunConfig, out: Path, result: RunResult, quiet: bool):
    s0 = build_initial_state(cfg)
    physics = build_physics(cfg)
    grid = s0.grid
    window = steps_per_characteristic_time(cfg)
    snap_dir = out / "snapshots"
    if cfg.snapshot_every:
        snap_dir.mkdir(parents=True, exist_ok=True)
    histories = {}

    def meta(solver, step):
        return {"scenario": cfg.scenario, "solver": solver, "n": grid.n,
                "dt": _g(cfg.dt), "step": step}

    diverged = None
    for solver in cfg.solvers:
        quantities = [q for q in cfg.quantities if not (solver == "ns" and q == "chi")]
        series = make_probes(cfg.probes, grid, quantities, solver)
        result.series.extend(series)
        init = VorticityState.from_fluid(s0) if solver == "ns" else s0
        sample_probes(init, series, 0.0)
        history = [field_values(init, "vx")]
        histories[solver] = history

        def observer(step, state, series=series, history=history, solver=solver):
            sample_probes(state, series, step * cfg.dt)
            if cfg.snapshot_every and step % cfg.snapshot_every == 0:
                path = snap_dir / f"{solver}_step{step:06d}.csv"
                write_snapshot(state, path, meta(solver, step))
                result.files.append(path)
            if step % window == 0:
                history.append(field_values(state, "vx"))

        if not quiet:
            log.info("running %s: %s, N=%d, %d steps", solver, cfg.scenario, grid.n, cfg.steps)
        try:
            if solver == "nshj":
                final, _ = evolve(s0, physics, cfg.steps, observers=[observer])
            elif solver == "ns":
                final = evolve_ns(init, physics, cfg.steps, observers=[observer])
            else:
                ops = assemble_operators(grid, physics)
                final = C2Evolver(ops, lift(s0)).run(cfg.steps, observers=[observer])
        except DivergenceError as exc:
            diverged = f"{solver}: {exc}"
            break
        result.finals[solver] = final
        path = out / f"{solver}_final.csv"
        write_snapshot(final, path, meta(solver, cfg.steps))
        result.files.append(path)

    for test, ref in COMPARISONS:
        if test in result.finals and ref in result.finals:
            steady, when = steady_detector(histories[test], 1, cfg.steady_tol, every=window)
            result.reports.append(compare_states(
                cfg.scenario, test, result.finals[test], ref, result.finals[ref],
                cfg.nu, cfg.cs2, steady=steady, steps_to_steady=when))
    _write_common(cfg, out, result, xlabel="t")
    if diverged:
        result.status = EXIT_DIVERGED
        result.message = diverged


# ------------------------------------------------------------------------ logistic


def _run_logistic(cfg: RunConfig, out: Path, result: RunResult, quiet: bool):
    params = ([lg.LogisticParams(cfg.a, cfg.b, cfg.f)] if cfg.a is not None
              else [lg.LogisticParams.from_g2(g2, cfg.b, cfg.f) for g2 in cfg.g2])
    summary = []
    for p in params:
        tag = f"g2={p.g2:.6g}"
        row = {"a": p.a, "b": p.b, "f": p.f, "g2": p.g2}
        for solver in cfg.solvers:
            fn = lg.euler_logistic if solver == "euler" else lg.c2_logistic
            ps = ProbeSeries((), (), "x", f"{solver}[{tag}]")
            try:
                traj = fn(cfg.x0, p, cfg.dt, cfg.steps)
            except DivergenceError as exc:
                result.status = EXIT_DIVERGED
                result.message = f"{solver} {tag}: {exc}"
                result.series.append(ps)
                continue
            for t, v in zip(traj.times, traj.component(0)):
                ps.append(t, v)
            result.series.append(ps)
            row[f"{solver}_final"] = float(traj.final[0])
        if p.g2 < 0.25:
            row["x_stable"] = lg.attractors(p)[0]
        if p.g2 < 1:
            row["c2_fixed_point"] = lg.c2_fixed_point(p)
        if "euler_final" in row and "c2_final" in row:
            row["gap"] = abs(row["euler_final"] - row["c2_final"])
        summary.append(row)
        if not quiet:
            log.info("logistic %s: %s", tag, row)
    result.reports = summary
    _write_common(cfg, out, result, xlabel="t")


def _write_common(cfg, out: Path, result: RunResult, xlabel: str):
    probes = out / "probes.csv"
    write_probe_csv(result.series, probes)
    result.files.append(probes)
    report = out / "report.json"
    payload = {"scenario": cfg.scenario,
               "comparisons": [r if isinstance(r, dict) else r.to_dict()
                               for r in result.reports]}
    report.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    result.files.append(report)
    for q in sorted({s.quantity for s in result.series}):
        chosen = [s for s in result.series if s.quantity == q]
        path = emit_plot(chosen, out / f"probes_{q}.svg", title=f"{cfg.scenario}: {q}",
                         xlabel=xlabel, ylabel=q)
        result.files.append(path)


def run(cfg: RunConfig, quiet: bool = False) -> RunResult:
    """Execute every selected solver and write outputs into ``cfg.output_dir``.

    Raises :class:`ConfigError` for invalid configurations and ``OSError``
    for I/O failures; divergence is reported through ``status``.
    """
    cfg = cfg.resolved()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = RunResult()
    if cfg.scenario == "logistic":
        _run_logistic(cfg, out, result, quiet)
    else:
        _run_fluid(cfg, out, result, quiet)
    return result


# -------------------------------------------------------------------------- verify


def _compare_csv(new: Path, golden: Path, rtol: float, atol: float) -> str | None:
    def rows(p):
        with open(p, encoding="utf-8") as fh:
            return [r for r in csv.reader(line for line in fh if not line.startswith("#"))]

    a, b = rows(new), rows(golden)
    if len(a) != len(b):
        return f"{len(a)} rows vs {len(b)} golden"
    for i, (ra, rb) in enumerate(zip(a, b)):
        if len(ra) != len(rb):
            return f"row {i}: column count differs"
        for ca, cb in zip(ra, rb):
            if ca == cb:
                continue
            try:
                fa, fb = float(ca), float(cb)
            except ValueError:
                return f"row {i}: {ca!r} != {cb!r}"
            if not np.isclose(fa, fb, rtol=rtol, atol=atol):
                return f"row {i}: {fa!r} vs golden {fb!r}"
    return None


def verify(cfg: RunConfig, quiet: bool = False) -> int:
    """Re-run ``cfg`` in a scratch directory and compare CSVs with the golden set."""
    cfg = cfg.resolved()
    golden = Path(cfg.golden_dir or cfg.output_dir)
    if not (golden / "probes.csv").exists():
        raise FileNotFoundError(f"no golden probes.csv in {golden}")
    with tempfile.TemporaryDirectory() as tmp:
        res = run(replace(cfg, output_dir=tmp), quiet=True)
        if res.status != EXIT_OK:
            print(f"replay failed: {res.message}")
            return res.status
        failures = 0
        names = sorted(p.relative_to(golden) for p in golden.rglob("*.csv"))
        for rel in names:
            new = Path(tmp) / rel
            problem = ("missing from replay" if not new.exists()
                       else _compare_csv(new, golden / rel, cfg.verify_rtol, cfg.verify_atol))
            failures += problem is not None
            if not quiet or problem:
                print(f"{'FAIL' if problem else 'ok  '} {rel}" + (f": {problem}" if problem else ""))
    return EXIT_MISMATCH if failures else EXIT_OK


# ---------------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="c2flow", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a configured experiment")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides output_dir)")
    r.add_argument("--solvers", help="comma-separated subset of c2,nshj,ns (or euler,c2)")
    r.add_argument("--allow-large-memory", action="store_true",
                   help="permit c2 on grids with N >= 64")
    r.add_argument("--quiet", action="store_true")
    v = sub.add_parser("verify", help="replay a run and compare with golden CSVs")
    v.add_argument("config")
    v.add_argument("--golden", help="directory holding golden outputs")
    v.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            updates = {}
            if args.out:
                updates["output_dir"] = args.out
            if args.solvers:
                updates["solvers"] = tuple(s.strip() for s in args.solvers.split(",") if s.strip())
            if args.allow_large_memory:
                updates["allow_large_memory"] = True
            res = run(replace(cfg, **updates), quiet=args.quiet)
            if res.status == EXIT_DIVERGED:
                print(f"diverged: {res.message}", file=sys.stderr)
            elif not args.quiet:
                for rep in res.reports:
                    print(json.dumps(rep if isinstance(rep, dict) else rep.to_dict()))
            return res.status
        if args.golden:
            cfg = replace(cfg, golden_dir=args.golden)
        return verify(cfg, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
