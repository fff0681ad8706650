"""Experiment configuration files.

The format is line oriented::

    # comment
    [instance]
    n_agents = 10
    M = auto          # or a positive number

    [algorithm]
    iters = 2000

Every key belongs to exactly one section. A key written before the first
section header is resolved to its owning section. Unknown keys, duplicate
keys, malformed values and out-of-range values raise :class:`ConfigError`
carrying the offending line number.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .problem import GenerationConfig
from .runtime import RunConfig


def _int(text):
    try:
        return int(text, 10)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _float(text):
    try:
        v = float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {text!r}")
    return v


def _bool(text):
    t = text.lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true or false, got {text!r}")


def _penalty(text):
    if text.lower() == "auto":
        return "auto"
    v = _float(text)
    if not v > 0:
        raise ValueError("M must be 'auto' or a positive number")
    return v


def _str(text):
    if not text:
        raise ValueError("expected a non-empty value")
    return text


def _seed(text):
    v = _int(text)
    if not 0 <= v < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return v


def _check(pred, msg):
    def conv(parse):
        def wrapped(text):
            v = parse(text)
            if not pred(v):
                raise ValueError(msg)
            return v
        return wrapped
    return conv


_pos = _check(lambda v: v > 0, "must be positive")
_ge1 = _check(lambda v: v >= 1, "must be >= 1")
_ge0 = _check(lambda v: v >= 0, "must be >= 0")

# key -> (owning section, value parser)
SCHEMA = {
    "n_agents": ("instance", _ge1(_int)),
    "dim": ("instance", _ge1(_int)),
    "box_lo": ("instance", _float),
    "box_hi": ("instance", _float),
    "q_min": ("instance", _pos(_float)),
    "q_max": ("instance", _pos(_float)),
    "c_range": ("instance", _ge0(_float)),
    "a_min": ("instance", _pos(_float)),
    "a_max": ("instance", _pos(_float)),
    "slater_margin": ("instance", _check(lambda v: v <= 1, "must be <= 1")(_float)),
    "M": ("instance", _penalty),
    "edge_prob": ("graph", _check(lambda v: 0 <= v <= 1, "must lie in [0, 1]")(_float)),
    "max_retries": ("graph", _ge1(_int)),
    "free_rounds": ("oracle", _ge0(_int)),
    "r0": ("oracle", _pos(_float)),
    "r_min": ("oracle", _pos(_float)),
    "decay": ("oracle", _check(lambda v: 0 < v <= 1, "must lie in (0, 1]")(_float)),
    "K_max": ("oracle", _ge1(_int)),
    "refit_every": ("oracle", _ge1(_int)),
    "slack_weight": ("oracle", _pos(_float)),
    "iters": ("algorithm", _ge0(_int)),
    "alpha0": ("algorithm", _pos(_float)),
    "alpha_exp": ("algorithm", _check(lambda v: 0.5 < v <= 1, "must lie in (0.5, 1]")(_float)),
    "eps_diag": ("algorithm", _bool),
    "eps_grid": ("algorithm", _check(lambda v: v >= 2, "must be >= 2")(_int)),
    "seed": ("algorithm", _seed),
    "workers": ("algorithm", _ge1(_int)),
    "csv": ("output", _str),
    "figure": ("output", _str),
}
SECTIONS = ("instance", "graph", "oracle", "algorithm", "output")


@dataclass
class Config:
    instance: GenerationConfig = field(default_factory=GenerationConfig)
    edge_prob: float = 0.2
    max_retries: int = 1000
    run: RunConfig = field(default_factory=RunConfig)
    csv: Optional[str] = None
    figure: Optional[str] = None
    lines: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.run.seed


def _assign(cfg, key, value):
    section = SCHEMA[key][0]
    if section == "instance":
        setattr(cfg.instance, "penalty" if key == "M" else key, value)
    elif section == "oracle" or section == "algorithm":
        setattr(cfg.run, key, value)
    else:
        setattr(cfg, key, value)


def parse_config(text: str) -> Config:
    cfg = Config()
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        owner, parse = SCHEMA[key]
        if section is not None and owner != section:
            raise ConfigError(f"key {key!r} belongs to section [{owner}], not [{section}]", lineno)
        if key in cfg.lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {cfg.lines[key]})", lineno)
        try:
            _assign(cfg, key, parse(value))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", lineno) from None
        cfg.lines[key] = lineno
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg):
    inst = cfg.instance
    pairs = [("box_lo", "box_hi", inst.box_lo < inst.box_hi),
             ("q_min", "q_max", inst.q_min <= inst.q_max),
             ("a_min", "a_max", inst.a_min <= inst.a_max)]
    for lo_key, hi_key, ok in pairs:
        if not ok:
            lines = [cfg.lines[k] for k in (lo_key, hi_key) if k in cfg.lines]
            raise ConfigError(f"need {lo_key} below {hi_key}", max(lines) if lines else None)
    inst.validate()
    cfg.run.validate()


def load_config(path) -> Config:
    if path is None:
        return parse_config("")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
