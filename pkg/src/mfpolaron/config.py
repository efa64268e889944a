"""Experiment configuration: strict YAML schema with line-precise errors."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

__all__ = ["ConfigError", "ExperimentConfig", "GridSpec", "InitialSpec", "PreparationSpec", "load_config", "parse_config"]


class ConfigError(ValueError):
    pass


@dataclass
class GridSpec:
    n: int = 32
    L: float = 16.0


@dataclass
class InitialSpec:
    kind: str = "gaussian"
    sigma: float = 1.0
    amplitude: float | None = None
    k0: list = field(default_factory=lambda: [0.0, 0.0, 0.0])
    mass: float = 1.0


@dataclass
class PreparationSpec:
    mode: str = "well"
    delta_u: str = "none"
    delta_v: str = "none"
    delta_u_scale: float = 1.0
    delta_v_scale: float = 1.0
    w0: str = "rate"


@dataclass
class ExperimentConfig:
    grid: GridSpec = field(default_factory=GridSpec)
    s: float = 2.0
    T0: float = 1.0
    dt_base: float = 0.02
    dt_ratio: float = 10.0
    choquard_dt: float | None = None
    eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    initial: InitialSpec = field(default_factory=InitialSpec)
    preparation: PreparationSpec = field(default_factory=PreparationSpec)
    output_dir: str = "out"
    sample_interval: float = 0.02
    ceiling: float = 1e6
    dealias: bool = False
    kick: str = "plain"
    seed: int = 0
    slope_window: list = field(default_factory=lambda: [0.85, 1.15])
    max_fit_residual: float = 0.1
    gs_tol: float = 1e-8
    gs_max_iters: int = 5000

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self, lines: dict | None = None) -> "ExperimentConfig":
        lines = lines or {}

        def fail(path, msg):
            where = f"line {lines[path]}: " if path in lines else ""
            raise ConfigError(f"{where}{'.'.join(path)}: {msg}")

        g = self.grid
        if g.n < 8 or g.n % 2:
            fail(("grid", "n"), f"n must be even >= 8, got {g.n}")
        for path, value in [
            (("grid", "L"), g.L),
            (("T0",), self.T0),
            (("dt_base",), self.dt_base),
            (("dt_ratio",), self.dt_ratio),
            (("sample_interval",), self.sample_interval),
            (("ceiling",), self.ceiling),
            (("initial", "sigma"), self.initial.sigma),
            (("initial", "mass"), self.initial.mass),
            (("max_fit_residual",), self.max_fit_residual),
            (("gs_tol",), self.gs_tol),
        ]:
            if not value > 0:
                fail(path, f"must be positive, got {value}")
        if self.choquard_dt is not None and not self.choquard_dt > 0:
            fail(("choquard_dt",), f"must be positive, got {self.choquard_dt}")
        if not 2 <= self.s <= 4:
            fail(("s",), f"must lie in [2, 4], got {self.s}")
        if not self.eps:
            fail(("eps",), "needs at least one value")
        if any(not e > 0 for e in self.eps):
            fail(("eps",), f"all values must be positive, got {self.eps}")
        if any(a <= b for a, b in zip(self.eps, self.eps[1:])):
            fail(("eps",), f"values must be strictly decreasing without duplicates, got {self.eps}")
        if self.initial.kind not in ("gaussian", "ground_state"):
            fail(("initial", "kind"), f"expected 'gaussian' or 'ground_state', got {self.initial.kind!r}")
        if len(self.initial.k0) != 3:
            fail(("initial", "k0"), "needs three components")
        p = self.preparation
        if p.mode not in ("well", "ill"):
            fail(("preparation", "mode"), f"expected 'well' or 'ill', got {p.mode!r}")
        for name in ("delta_u", "delta_v"):
            if getattr(p, name) not in ("none", "trig", "random"):
                fail(("preparation", name), f"expected none|trig|random, got {getattr(p, name)!r}")
        if p.w0 not in ("rate", "zero"):
            fail(("preparation", "w0"), f"expected 'rate' or 'zero', got {p.w0!r}")
        if self.kick not in ("plain", "filtered"):
            fail(("kick",), f"expected 'plain' or 'filtered', got {self.kick!r}")
        if len(self.slope_window) != 2 or self.slope_window[0] >= self.slope_window[1]:
            fail(("slope_window",), f"needs [low, high] with low < high, got {self.slope_window}")
        return self


_SECTIONS = {"grid": GridSpec, "initial": InitialSpec, "preparation": PreparationSpec}


def _coerce(value, default, path, lines):
    """Check a scalar against the type of its default."""
    where = f"line {lines[path]}: " if path in lines else ""
    name = ".".join(path)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}{name}: expected a boolean, got {value!r}")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}{name}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or (default is None and path[-1] in ("choquard_dt", "amplitude")):
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}{name}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}{name}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in value):
            raise ConfigError(f"{where}{name}: expected a list of numbers, got {value!r}")
        return [float(x) for x in value]
    return value


def _line_map(node, prefix=()) -> dict:
    out = {}
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = prefix + (str(key_node.value),)
            out[path] = key_node.start_mark.line + 1
            out.update(_line_map(value_node, path))
    return out


def parse_config(text: str) -> ExperimentConfig:
    """Parse YAML text into a validated config; unknown keys are errors."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}: " if mark else ""
        raise ConfigError(f"{where}malformed YAML: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("line 1: top level must be a mapping")
    lines = _line_map(root)
    top_defaults = ExperimentConfig()
    top_fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for key, value in data.items():
        path = (str(key),)
        if key not in top_fields:
            raise ConfigError(f"line {lines.get(path, '?')}: unknown key {key!r}")
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            if not isinstance(value, dict):
                raise ConfigError(f"line {lines.get(path, '?')}: section {key!r} must be a mapping")
            section_defaults = cls()
            names = {f.name for f in dataclasses.fields(cls)}
            sub = {}
            for k2, v2 in value.items():
                p2 = path + (str(k2),)
                if k2 not in names:
                    raise ConfigError(f"line {lines.get(p2, '?')}: unknown key {k2!r} in section {key!r}")
                sub[k2] = _coerce(v2, getattr(section_defaults, k2), p2, lines)
            kwargs[key] = cls(**sub)
        else:
            kwargs[key] = _coerce(value, getattr(top_defaults, key), path, lines)
    return ExperimentConfig(**kwargs).validate(lines)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
