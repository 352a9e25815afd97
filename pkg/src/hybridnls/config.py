"""Flat key = value run configurations.

A config file is INI without section headers: one ``key = value`` per line,
``#`` or ``;`` comments.  Keys missing from the file take the dataclass
defaults; the resolved config, including which keys were defaulted, is
echoed into the run manifest so that a manifest alone determines a rerun.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfig
from .nonlinearity import as_power
from .spectral import LineGrid, TorusGrid

SCENARIOS = ("plane_wave", "constant", "dropped_bit", "gaussian_on_carrier", "custom_checkpoint")
SOLVER_MODES = ("strang", "picard", "both")
LEMMAS = ("fractional_chain", "difference", "taylor", "interpolation")
OUTPUT_ENV = "HNLS_OUTPUT_DIR"
_SECTION = "config"

DEFAULT_TOLERANCES = {
    "boundary_mass": 1e-6,
    "boundary_fraction": 0.05,
    "blowup_ceiling": 1e6,
    "blowup_growth": 10.0,
    "envelope_slack": 1e-9,
    "envelope_ceiling": 1e3,
    "picard_agreement": 1e-6,
}


def theory_regime(p: float, s: float) -> str:
    """'global' if (p, s) meets the hypotheses of the global bound, else 'local-theory-only'."""
    pw = as_power(p)
    if pw.p < 3:
        return "local-theory-only"
    if pw.p == 3:
        ok = s > 1.5
    elif pw.is_odd_integer:
        ok = s > 2.5
    else:
        ok = 2.5 < s <= pw.floor_p
    return "global" if ok else "local-theory-only"


@dataclass(frozen=True)
class RunConfig:
    p: float = 3.0
    s_torus: float = 2.0
    torus_n: int = 64
    line_n: int = 8192
    line_K: int = 32
    dt: float = 1e-3
    t_end: float = 1.0
    scenario: str = "gaussian_on_carrier"
    seed: int = 0
    output_dir: str = "out"
    solver_mode: str = "strang"
    # scenario parameters
    amplitude: float = 1.0
    carrier_k: int = 1
    harmonic_amplitude: float = 0.0
    harmonic_k: int = 2
    w_noise: float = 0.0
    bump_center: float = 0.0
    bump_plateau: float = 2 * math.pi
    bump_ramp: float = 2 * math.pi
    gaussian_amplitude: float = 0.5
    gaussian_sigma: float = 1.0
    gaussian_center: float = 0.0
    v0_path: str = ""
    w0_path: str = ""
    # numerics
    dealias: str = "auto"
    picard_max_iter: int = 30
    picard_tol: float = 1e-10
    picard_quad_nodes: int = 65
    c_cal: float = 0.01
    checkpoint_every: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            as_power(self.p)
            TorusGrid(self.torus_n)
            line = LineGrid(self.line_n, self.line_K)
        except Exception as exc:
            raise InvalidConfig(str(exc)) from exc
        if not line.resolves(TorusGrid(self.torus_n)):
            raise InvalidConfig(f"line grid n={self.line_n}, K={self.line_K} cannot resolve torus n={self.torus_n}")
        if self.scenario not in SCENARIOS:
            raise InvalidConfig(f"unknown scenario {self.scenario!r}; choose from {', '.join(SCENARIOS)}")
        if self.solver_mode not in SOLVER_MODES:
            raise InvalidConfig(f"unknown solver_mode {self.solver_mode!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidConfig("dt must be positive")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise InvalidConfig("t_end must be nonnegative")
        steps = round(self.t_end / self.dt)
        if abs(steps * self.dt - self.t_end) > 1e-9 * max(1.0, self.t_end):
            raise InvalidConfig(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")
        if self.s_torus < 1:
            raise InvalidConfig("s_torus must be >= 1")
        if self.dealias not in ("auto", "on", "off"):
            raise InvalidConfig("dealias must be auto, on or off")
        if self.seed < 0:
            raise InvalidConfig("seed must be nonnegative")
        if self.checkpoint_every < 0:
            raise InvalidConfig("checkpoint_every must be >= 0")
        if not self.c_cal > 0:
            raise InvalidConfig("c_cal must be positive")
        if self.scenario == "custom_checkpoint" and not (self.v0_path and self.w0_path):
            raise InvalidConfig("custom_checkpoint needs v0_path and w0_path")
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise InvalidConfig(f"unknown tolerances {sorted(unknown)}")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def regime(self) -> str:
        return theory_regime(self.p, self.s_torus)

    @property
    def dealias_flag(self) -> bool | None:
        return {"auto": None, "on": True, "off": False}[self.dealias]

    def tol(self, name: str) -> float:
        return float({**DEFAULT_TOLERANCES, **self.tolerances}[name])

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Stable hash of everything that affects the numbers (not output_dir)."""
        d = self.to_dict()
        d.pop("output_dir")
        d["tolerances"] = {**DEFAULT_TOLERANCES, **d["tolerances"]}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class LabConfig:
    lemmas: tuple = LEMMAS
    p: float = 3.0
    s: float = 2.0
    q: float = 3.0
    samples: int = 1000
    seed: int = 0
    n: int = 128
    gamma: float = 2.0
    amplitude: float = 1.0
    output_dir: str = "out"

    def __post_init__(self):
        bad = [x for x in self.lemmas if x not in LEMMAS]
        if bad or not self.lemmas:
            raise InvalidConfig(f"unknown lemmas {bad}; choose from {', '.join(LEMMAS)}")
        if self.samples < 1:
            raise InvalidConfig("samples must be >= 1")
        if self.seed < 0:
            raise InvalidConfig("seed must be nonnegative")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["lemmas"] = list(self.lemmas)
        return d


def _coerce(cls, name: str, raw: str):
    f = {x.name: x for x in dataclasses.fields(cls)}[name]
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(x.strip() for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise InvalidConfig(f"{name}: cannot parse {raw!r}") from exc
    return raw


def _read_pairs(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise InvalidConfig(f"malformed config: {exc}") from exc
    if parser.sections() != [_SECTION]:
        raise InvalidConfig("config files are flat key = value lists without section headers")
    return dict(parser[_SECTION])


def _build(cls, pairs: dict[str, str]):
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs, tolerances = {}, {}
    for key, raw in pairs.items():
        if key.startswith("tol_") and "tolerances" in names:
            try:
                tolerances[key[4:]] = float(raw)
            except ValueError as exc:
                raise InvalidConfig(f"{key}: cannot parse {raw!r}") from exc
        elif key in names and key != "tolerances":
            kwargs[key] = _coerce(cls, key, raw)
        else:
            raise InvalidConfig(f"unknown key {key!r}")
    if tolerances:
        kwargs["tolerances"] = {**DEFAULT_TOLERANCES, **tolerances}
    env = os.environ.get(OUTPUT_ENV)
    if env:
        kwargs["output_dir"] = env
    defaulted = sorted(names - set(kwargs) - {"tolerances"})
    try:
        return cls(**kwargs), defaulted
    except InvalidConfig:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from exc


def parse_run_config(text: str) -> tuple[RunConfig, list[str]]:
    """Parse config text; returns the config and the keys left at their defaults."""
    cfg, defaulted = _build(RunConfig, _read_pairs(text))
    if cfg.regime != "global":
        warnings.warn(f"p={cfg.p}, s_torus={cfg.s_torus} is outside the global theory; "
                      "the run is marked local-theory-only", RuntimeWarning)
    return cfg, defaulted


def load_run_config(path) -> tuple[RunConfig, list[str]]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    return parse_run_config(text)


def parse_lab_config(text: str) -> LabConfig:
    return _build(LabConfig, _read_pairs(text))[0]


def load_lab_config(path) -> LabConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
    return parse_lab_config(text)


def dump_config(cfg) -> str:
    """Inverse of the parser: every key written explicitly."""
    lines = []
    for key, val in cfg.to_dict().items():
        if key == "tolerances":
            lines += [f"tol_{k} = {v!r}" for k, v in sorted(val.items())]
        elif isinstance(val, (list, tuple)):
            lines.append(f"{key} = {', '.join(val)}")
        else:
            lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
    return "\n".join(lines) + "\n"
