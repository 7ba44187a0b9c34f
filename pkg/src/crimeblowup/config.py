"""Scenario configuration: TOML in, validated dataclasses out, and back.

Grammar (every section and key optional unless marked)::

    scenario = "single_run"          # required, see SCENARIOS

    [physical]   chi = 2.0   n = 3   R = 1.0
    [grid]       N = 1024
    [control]    T_end  rel_tol  dt_init  dt_min  W_max  W_max_factor
                 max_steps  safety  cfl_safety
    [sweep]      M = [8.0, 16.0, 32.0, 64.0]   m = [2000.0]
                 q  eta  m0_estimate  bound_slack = 0.1  tol_scaled = 1e-6
    [ladder]     eps = [0.1, 0.05, 0.025, 0.0125]   m = 10.0   M = 4.0
                 p_monitor  sample_time = 0.2  u0 = "uniform" | "quasi_steady"
    [scan]       M = 8.0  m_low  m_high  iterations = 10
    [convergence] N = [32, 64, 128, 256]  dt = [...]  N_time = 128
                 T = 0.05  coeff = 0.0  rel_tol = [...]
    [single]     kind = "nonlocal" | "local_power" | "v_form" | "coupled"
                 coeff = 1.0  initial = "w0" | "constant"  M = 16.0  value = 1.0
                 eps = 0.1  p_norms = [2.0]
    [output]     directory  history_every = 1  snapshot_every = 0

Unknown sections or keys are errors. Optional entries without a default are
simply omitted from the TOML text.
"""

from __future__ import annotations

import dataclasses
import re
import sys
from dataclasses import dataclass, field
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

SCENARIOS = (
    "limit_blowup_sweep",
    "comparison_check",
    "singular_limit_ladder",
    "mass_threshold_scan",
    "convergence_study",
    "single_run",
)


class ConfigParseError(ValueError):
    """Malformed TOML; carries line and column when the parser reports them."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"config parse error{where}: {message}")
        self.line = line
        self.column = column


class ConfigValidationError(ValueError):
    def __init__(self, key: str, constraint: str) -> None:
        super().__init__(f"invalid config value for {key!r}: {constraint}")
        self.key = key
        self.constraint = constraint


@dataclass(frozen=True)
class Physical:
    chi: float = 2.0
    n: int = 3
    R: float = 1.0


@dataclass(frozen=True)
class Grid:
    N: int = 1024


@dataclass(frozen=True)
class Control:
    T_end: float = 1.0
    rel_tol: float = 1e-6
    dt_init: Optional[float] = None
    dt_min: Optional[float] = None
    W_max: Optional[float] = None
    W_max_factor: float = 1e8
    max_steps: int = 2_000_000
    safety: float = 0.5
    cfl_safety: float = 0.5


@dataclass(frozen=True)
class Sweep:
    M: tuple[float, ...] = (8.0, 16.0, 32.0, 64.0)
    m: tuple[float, ...] = (2000.0,)
    q: Optional[float] = None
    eta: Optional[float] = None
    m0_estimate: Optional[float] = None
    bound_slack: float = 0.1
    tol_scaled: float = 1e-6


@dataclass(frozen=True)
class Ladder:
    eps: tuple[float, ...] = (0.1, 0.05, 0.025, 0.0125)
    m: float = 10.0
    M: float = 4.0
    p_monitor: Optional[float] = None
    sample_time: float = 0.2
    u0: str = "uniform"


@dataclass(frozen=True)
class Scan:
    M: float = 8.0
    m_low: Optional[float] = None
    m_high: Optional[float] = None
    iterations: int = 10


@dataclass(frozen=True)
class Convergence:
    N: tuple[int, ...] = (32, 64, 128, 256)
    dt: tuple[float, ...] = (5e-3, 2.5e-3, 1.25e-3, 6.25e-4)
    N_time: int = 128
    T: float = 0.05
    coeff: float = 0.0
    rel_tol: tuple[float, ...] = (1e-4, 1e-5, 1e-6)


@dataclass(frozen=True)
class Single:
    kind: str = "nonlocal"
    coeff: float = 1.0
    initial: str = "w0"
    M: float = 16.0
    value: float = 1.0
    eps: float = 0.1
    p_norms: tuple[float, ...] = (2.0,)


@dataclass(frozen=True)
class Output:
    directory: Optional[str] = None
    history_every: int = 1
    snapshot_every: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    physical: Physical = field(default_factory=Physical)
    grid: Grid = field(default_factory=Grid)
    control: Control = field(default_factory=Control)
    sweep: Sweep = field(default_factory=Sweep)
    ladder: Ladder = field(default_factory=Ladder)
    scan: Scan = field(default_factory=Scan)
    convergence: Convergence = field(default_factory=Convergence)
    single: Single = field(default_factory=Single)
    output: Output = field(default_factory=Output)


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(ScenarioConfig) if f.name != "scenario"}


# --- parsing ------------------------------------------------------------------


def _coerce(section: str, f: dataclasses.Field, value: Any) -> Any:
    key = f"{section}.{f.name}"
    hint = str(f.type)
    if hint.startswith("tuple"):
        if not isinstance(value, list):
            raise ConfigValidationError(key, "must be a list")
        if not value:
            raise ConfigValidationError(key, "list must be non-empty")
        elem_int = "int" in hint
        return tuple(_scalar(key, v, "int" if elem_int else "float") for v in value)
    base = hint.replace("Optional[", "").rstrip("]")
    return _scalar(key, value, base)


def _scalar(key: str, value: Any, kind: str) -> Any:
    if isinstance(value, bool):
        raise ConfigValidationError(key, f"expected {kind}, got a boolean")
    if kind == "int":
        if not isinstance(value, int):
            raise ConfigValidationError(key, f"expected an integer, got {value!r}")
        return value
    if kind == "float":
        if not isinstance(value, (int, float)):
            raise ConfigValidationError(key, f"expected a number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigValidationError(key, f"expected a string, got {value!r}")
        return value
    raise AssertionError(kind)


def _build_section(name: str, raw: Any):
    cls = type(SECTIONS[name]())
    if not isinstance(raw, dict):
        raise ConfigValidationError(name, "must be a table")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ConfigValidationError(f"{name}.{key}", f"unknown key; allowed: {sorted(fields)}")
        kwargs[key] = _coerce(name, fields[key], value)
    return cls(**kwargs)


def parse_config(text: str) -> ScenarioConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = str(exc)
        found = re.search(r"\(at line (\d+), column (\d+)\)", msg)
        if found:
            if line is None:
                line, col = int(found.group(1)), int(found.group(2))
            msg = msg[: found.start()].rstrip()
        raise ConfigParseError(msg, line, col) from None
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ScenarioConfig:
    if "scenario" not in raw:
        raise ConfigValidationError("scenario", f"required; one of {SCENARIOS}")
    kwargs: dict[str, Any] = {"scenario": _scalar("scenario", raw["scenario"], "str")}
    for key, value in raw.items():
        if key == "scenario":
            continue
        if key not in SECTIONS:
            raise ConfigValidationError(key, f"unknown section; allowed: {sorted(SECTIONS)}")
        kwargs[key] = _build_section(key, value)
    cfg = ScenarioConfig(**kwargs)
    validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# --- validation ---------------------------------------------------------------


def _positive(key: str, value) -> None:
    if value is not None and not value > 0:
        raise ConfigValidationError(key, f"must be positive, got {value}")


def validate(cfg: ScenarioConfig) -> None:
    if cfg.scenario not in SCENARIOS:
        raise ConfigValidationError("scenario", f"must be one of {SCENARIOS}, got {cfg.scenario!r}")
    ph = cfg.physical
    _positive("physical.chi", ph.chi)
    _positive("physical.R", ph.R)
    if ph.n < 3:
        raise ConfigValidationError("physical.n", f"dimension must satisfy n >= 3, got {ph.n}")
    if cfg.grid.N < 16:
        raise ConfigValidationError("grid.N", f"need at least 16 cells, got {cfg.grid.N}")
    c = cfg.control
    for name in ("T_end", "dt_init", "dt_min", "W_max", "W_max_factor", "safety", "cfl_safety"):
        _positive(f"control.{name}", getattr(c, name))
    if not 1e-12 < c.rel_tol < 1e-2:
        raise ConfigValidationError("control.rel_tol", f"must lie in (1e-12, 1e-2), got {c.rel_tol}")
    if c.max_steps < 1:
        raise ConfigValidationError("control.max_steps", "must be positive")
    dt_init = c.dt_init if c.dt_init is not None else 1e-3 * c.T_end
    dt_min = c.dt_min if c.dt_min is not None else 1e-13 * c.T_end
    if dt_min >= dt_init:
        raise ConfigValidationError("control.dt_min", "must be smaller than dt_init")
    if c.cfl_safety > 1:
        raise ConfigValidationError("control.cfl_safety", "must not exceed 1")

    s = cfg.sweep
    for i, M in enumerate(s.M):
        if not M > 1:
            raise ConfigValidationError(f"sweep.M[{i}]", f"peak parameter must exceed 1, got {M}")
    for i, m in enumerate(s.m):
        _positive(f"sweep.m[{i}]", m)
    _positive("sweep.eta", s.eta)
    _positive("sweep.m0_estimate", s.m0_estimate)
    if s.q is not None and not 1 < s.q < ph.chi + 1:
        raise ConfigValidationError("sweep.q", f"must lie in (1, chi + 1), got {s.q}")
    if s.bound_slack < 0:
        raise ConfigValidationError("sweep.bound_slack", "must be nonnegative")
    _positive("sweep.tol_scaled", s.tol_scaled)

    lad = cfg.ladder
    for i, eps in enumerate(lad.eps):
        if not 0 < eps <= 1:
            raise ConfigValidationError(f"ladder.eps[{i}]", f"must lie in (0, 1], got {eps}")
    _positive("ladder.m", lad.m)
    if not lad.M > 1:
        raise ConfigValidationError("ladder.M", f"peak parameter must exceed 1, got {lad.M}")
    if lad.p_monitor is not None and not lad.p_monitor > ph.n / 2:
        raise ConfigValidationError("ladder.p_monitor", f"must exceed n/2 = {ph.n / 2}")
    if not lad.sample_time > 0:
        raise ConfigValidationError("ladder.sample_time", "must be positive")
    if cfg.scenario == "singular_limit_ladder" and lad.sample_time > c.T_end:
        raise ConfigValidationError("ladder.sample_time", "must not exceed control.T_end")
    if lad.u0 not in ("uniform", "quasi_steady"):
        raise ConfigValidationError("ladder.u0", "must be 'uniform' or 'quasi_steady'")

    sc = cfg.scan
    if not sc.M > 1:
        raise ConfigValidationError("scan.M", "peak parameter must exceed 1")
    _positive("scan.m_low", sc.m_low)
    _positive("scan.m_high", sc.m_high)
    if sc.m_low is not None and sc.m_high is not None and sc.m_low >= sc.m_high:
        raise ConfigValidationError("scan.m_low", "must be smaller than scan.m_high")
    if sc.iterations < 1:
        raise ConfigValidationError("scan.iterations", "must be positive")

    cv = cfg.convergence
    if len(cv.N) < 2 or len(cv.dt) < 2:
        raise ConfigValidationError("convergence.N", "N and dt ladders need at least two entries")
    for i, N in enumerate(cv.N):
        if N < 16:
            raise ConfigValidationError(f"convergence.N[{i}]", "need at least 16 cells")
    for i, dt in enumerate(cv.dt):
        _positive(f"convergence.dt[{i}]", dt)
    for i, tol in enumerate(cv.rel_tol):
        if not 1e-12 < tol < 1e-2:
            raise ConfigValidationError(f"convergence.rel_tol[{i}]", "must lie in (1e-12, 1e-2)")
    if cv.N_time < 16:
        raise ConfigValidationError("convergence.N_time", "need at least 16 cells")
    _positive("convergence.T", cv.T)
    if cv.coeff < 0:
        raise ConfigValidationError("convergence.coeff", "must be nonnegative")

    sg = cfg.single
    if sg.kind not in ("nonlocal", "local_power", "v_form", "coupled"):
        raise ConfigValidationError("single.kind", "must be nonlocal, local_power, v_form or coupled")
    if sg.initial not in ("w0", "constant"):
        raise ConfigValidationError("single.initial", "must be 'w0' or 'constant'")
    if sg.coeff < 0:
        raise ConfigValidationError("single.coeff", "must be nonnegative")
    if not sg.M > 1:
        raise ConfigValidationError("single.M", "peak parameter must exceed 1")
    _positive("single.value", sg.value)
    if not 0 < sg.eps <= 1:
        raise ConfigValidationError("single.eps", "must lie in (0, 1]")
    for i, p in enumerate(sg.p_norms):
        if p < 1:
            raise ConfigValidationError(f"single.p_norms[{i}]", "norm exponents must be >= 1")

    o = cfg.output
    if o.history_every < 1:
        raise ConfigValidationError("output.history_every", "must be positive")
    if o.snapshot_every < 0:
        raise ConfigValidationError("output.snapshot_every", "must be nonnegative")


# --- serialisation --------------------------------------------------------------


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out: dict[str, Any] = {"scenario": cfg.scenario}
    for name in SECTIONS:
        section = getattr(cfg, name)
        table = {}
        for f in dataclasses.fields(section):
            value = getattr(section, f.name)
            if value is None:
                continue
            table[f.name] = list(value) if isinstance(value, tuple) else value
        out[name] = table
    return out


def config_to_toml(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))
