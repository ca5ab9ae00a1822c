"""
Run configuration: a flat ``key = value`` text format.

Example::

    # bull/bear market
    q = [-20, 20, 30, -30]      # row-major generator
    r = [0.05, 0.05]
    mu = [0.5, 0.1]
    sigma = [0.3, 0.5]
    gamma = [0.1, 0.3, 0.5, 0.9]
    T = 0.5

Values are numbers, bracketed lists of numbers, or (for ``out``) a string.
``#`` starts a comment. Regime labels (``i0``) are 1-based in this format.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .model import GeneratorMatrix, MarketModel

DEFAULT_Q1_LIST = (20.0, 10.0, 1.0, 0.1, 0.001)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunConfig:
    q: tuple[float, ...]
    r: tuple[float, ...]
    mu: tuple[float, ...]
    sigma: tuple[float, ...]
    gamma: tuple[float, ...]
    T: float = 0.5
    t: float = 0.0
    x0: float = 1.0
    i0: int = 1
    seed: int = 42
    n_paths: int = 100_000
    steps: int = 20_000
    q1_list: tuple[float, ...] = DEFAULT_Q1_LIST
    out: str | None = None
    m: int | None = field(default=None)

    def __post_init__(self) -> None:
        if self.m is None:
            object.__setattr__(self, "m", len(self.r))

    @property
    def tau(self) -> float:
        return self.T - self.t

    def validate(self) -> RunConfig:
        problems = []
        m = self.m
        if len(self.q) != m * m:
            problems.append(f"q has {len(self.q)} entries, expected m*m = {m * m}")
        for name in ("r", "mu", "sigma"):
            if len(getattr(self, name)) != m:
                problems.append(f"{name} has {len(getattr(self, name))} entries, expected {m}")
        if not self.gamma:
            problems.append("gamma list is empty")
        for g in self.gamma:
            if not (g < 1 and g != 0):
                problems.append(f"gamma = {g!r}; need gamma < 1 and gamma != 0")
        if not (self.T >= self.t >= 0):
            problems.append(f"need T >= t >= 0, got T = {self.T!r}, t = {self.t!r}")
        if not 1 <= self.i0 <= m:
            problems.append(f"i0 = {self.i0} outside 1..{m}")
        if self.n_paths < 1:
            problems.append("n_paths must be >= 1")
        if self.steps < 1:
            problems.append("steps must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def model(self, gamma: float | None = None) -> MarketModel:
        q = np.array(self.q, dtype=np.float64).reshape(self.m, self.m)
        return MarketModel(GeneratorMatrix(q), self.r, self.mu, self.sigma,
                           self.gamma[0] if gamma is None else gamma)

    def with_overrides(self, **kw) -> RunConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_INT_KEYS = {"m", "i0", "seed", "n_paths", "steps"}
_FLOAT_KEYS = {"T", "t", "x0"}
_LIST_KEYS = {"q", "r", "mu", "sigma", "gamma", "q1_list"}
_STR_KEYS = {"out"}
_REQUIRED = ("q", "r", "mu", "sigma", "gamma")


def _number(text: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}", line) from None


def parse_config(text: str) -> RunConfig:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got {body!r}", lineno)
        key, val = (s.strip() for s in body.split("=", 1))
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        if key in _LIST_KEYS:
            if not (val.startswith("[") and val.endswith("]")):
                # A bare scalar is a one-element list.
                values[key] = (_number(val, lineno),)
                continue
            inner = val[1:-1].strip()
            values[key] = tuple(_number(v.strip(), lineno) for v in inner.split(",")) if inner else ()
        elif key in _FLOAT_KEYS:
            values[key] = _number(val, lineno)
        elif key in _INT_KEYS:
            num = _number(val, lineno)
            if num != int(num):
                raise ConfigError(f"{key} must be an integer, got {val!r}", lineno)
            values[key] = int(num)
        elif key in _STR_KEYS:
            values[key] = val.strip("\"'")
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
    missing = [k for k in _REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    return RunConfig(**values)


def format_config(cfg: RunConfig) -> str:
    """Serialise losslessly (floats via ``repr``)."""
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name in _LIST_KEYS:
            lines.append(f"{f.name} = [{', '.join(repr(float(x)) for x in v)}]")
        elif f.name in _FLOAT_KEYS:
            lines.append(f"{f.name} = {float(v)!r}")
        else:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("rsmerton") / "data" / name))


def load_config(path: str | Path) -> RunConfig:
    """Read a config file; bare names fall back to the configs bundled with the package."""
    p = Path(path)
    if not p.exists():
        for candidate in (bundled_config_path(p.name), bundled_config_path(p.name + ".cfg")):
            if candidate.exists():
                p = candidate
                break
    return parse_config(p.read_text())
