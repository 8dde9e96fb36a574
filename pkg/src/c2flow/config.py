"""Run configuration: flat ``key = value`` files and scenario defaults."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .diagnostics import DEFAULT_PROBES, QUANTITIES
from .errors import ConfigError

SCENARIOS = ("logistic", "kolmogorov", "two_mode")
FLUID_SOLVERS = ("c2", "nshj", "ns")
LOGISTIC_SOLVERS = ("euler", "c2")

_SCENARIO_DEFAULTS = {
    "kolmogorov": dict(grid_n=64, cs2=1 / 3, nu=1 / 6, u0=0.05, f0=0.009, steps=2500,
                       solvers=FLUID_SOLVERS),
    "two_mode": dict(grid_n=64, cs2=1 / 3, nu=1 / 16, u1=0.05, f1=0.01, dt=0.03, steps=3000,
                     solvers=FLUID_SOLVERS),
    "logistic": dict(dt=0.01, steps=700, solvers=LOGISTIC_SOLVERS),
}

_TIME_STEPS_PER_T = 500


@dataclass
class RunConfig:
    scenario: str = "kolmogorov"
    solvers: tuple | None = None
    grid_n: int | None = None
    dt: float | None = None
    steps: int | None = None
    nu: float | None = None
    cs2: float | None = None
    # kolmogorov
    u0: float | None = None
    f0: float | None = None
    # two_mode
    u1: float | None = None
    u2: float | None = None
    f1: float | None = None
    f2: float | None = None
    # logistic
    a: float | None = None
    b: float = 1.0
    f: float = 1.0
    g2: tuple = (0.05, 0.1, 0.2)
    x0: float = 0.0
    # measurement and output
    probes: tuple = DEFAULT_PROBES
    quantities: tuple = ("vx", "vy")
    snapshot_every: int = 0
    steady_tol: float = 1e-3
    output_dir: str = "out"
    allow_large_memory: bool = False
    golden_dir: str | None = None
    verify_rtol: float = 1e-9
    verify_atol: float = 1e-12

    @property
    def characteristic_time(self) -> float:
        """``T = 1 / (nu k^2)`` with ``k = 1``; unit time for the logistic."""
        if self.scenario == "logistic":
            return 1.0
        return 1.0 / self.nu

    def resolved(self) -> "RunConfig":
        """Fill scenario defaults and validate; returns a new config."""
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        updates = {k: v for k, v in _SCENARIO_DEFAULTS[self.scenario].items()
                   if getattr(self, k) is None}
        cfg = replace(self, **updates)
        if cfg.scenario == "kolmogorov" and cfg.dt is None:
            cfg.dt = (1.0 / cfg.nu) / _TIME_STEPS_PER_T
        if cfg.scenario == "two_mode":
            if cfg.u2 is None:
                cfg.u2 = cfg.u1 / 8
            if cfg.f2 is None:
                cfg.f2 = cfg.f1 / 8
        cfg._validate()
        return cfg

    def _validate(self):
        allowed = LOGISTIC_SOLVERS if self.scenario == "logistic" else FLUID_SOLVERS
        bad = [s for s in self.solvers if s not in allowed]
        if bad or not self.solvers:
            raise ConfigError(f"solvers {list(self.solvers)} invalid for {self.scenario}; "
                              f"allowed {allowed}")
        if not (self.dt and self.dt > 0):
            raise ConfigError("dt must be positive")
        if self.steps is None or self.steps < 0:
            raise ConfigError("steps must be a non-negative integer")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        if self.scenario == "logistic":
            if self.a is None and any(g <= 0 for g in self.g2):
                raise ConfigError("g2 values must be positive")
            return
        if self.grid_n < 4 or self.grid_n % 2:
            raise ConfigError("grid_n must be an even integer >= 4")
        if self.nu <= 0 or self.cs2 <= 0:
            raise ConfigError("nu and cs2 must be positive")
        for q in self.quantities:
            if q not in QUANTITIES:
                raise ConfigError(f"unknown probe quantity {q!r}")
        if "c2" in self.solvers and self.grid_n >= 64 and not self.allow_large_memory:
            raise ConfigError(
                f"c2 at grid_n={self.grid_n} needs two dense "
                f"{4 * self.grid_n ** 2}^2 matrices; pass --allow-large-memory")


def _parse_floats(text: str) -> tuple:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _parse_probes(text: str) -> tuple:
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        xy = _parse_floats(chunk)
        if len(xy) != 2:
            raise ConfigError(f"probe {chunk!r} must be 'x,y'")
        out.append(xy)
    return tuple(out)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_number(text: str) -> float:
    t = text.strip()
    if "/" in t:
        num, den = t.split("/", 1)
        return float(num) / float(den)
    return float(t)


_PARSERS = {
    "scenario": str.strip,
    "solvers": lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
    "grid_n": int, "steps": int, "snapshot_every": int,
    "g2": _parse_floats,
    "probes": _parse_probes,
    "quantities": lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
    "output_dir": str.strip, "golden_dir": str.strip,
    "allow_large_memory": _parse_bool,
}
_NUMERIC = {"dt", "nu", "cs2", "u0", "f0", "u1", "u2", "f1", "f2", "a", "b", "f", "x0",
            "steady_tol", "verify_rtol", "verify_atol"}


def parse_config_text(text: str) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _parse_number(val) if key in _NUMERIC else _PARSERS[key](val)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def steps_per_characteristic_time(cfg: RunConfig) -> int:
    return max(1, int(round(cfg.characteristic_time / cfg.dt)))
