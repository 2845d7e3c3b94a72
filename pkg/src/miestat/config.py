"""Experiment configuration: flat key=value text or a JSON object.

Both formats share one flat namespace (no nesting), so a config echoed
into a JSON report reloads through the same parser.  Unknown keys are
rejected — silent typos in sweep configs are worse than a hard error.
"""

import json
from dataclasses import dataclass, fields

_ENGINES = ("analytic", "lattice", "both")
_FORMATS = ("csv", "json")


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep's worth of settings; immutable after validation."""

    L: int = 600
    x1: int | None = None
    x2: int | None = None
    x3: int | None = None
    x4: int | None = None
    zetas: tuple = ()
    block: int | None = None
    luttinger_g: float = 1.0
    renyi: tuple = (1.0,)
    trajectories: int = 1000
    seed: int = 0
    engines: str = "both"
    exhaustive: bool = False
    filling: float = 0.5
    format: str = "csv"
    out: str | None = None

    def __post_init__(self):
        if self.L <= 0 or self.L % 2:
            raise ValueError(f"L must be a positive even integer, got {self.L!r}")
        explicit = [self.x1, self.x2, self.x3, self.x4]
        if any(x is not None for x in explicit) and None in explicit:
            raise ValueError("explicit geometry needs all of x1..x4")
        for z in self.zetas:
            if not 0.0 < z < 1.0:
                raise ValueError(f"zeta targets must lie in (0, 1), got {z!r}")
        if not self.renyi:
            raise ValueError("need at least one Renyi index")
        for n in self.renyi:
            if not n > 0:
                raise ValueError(f"Renyi indices must be positive, got {n!r}")
        if self.trajectories < 1:
            raise ValueError("lattice runs need trajectories >= 1")
        if self.engines not in _ENGINES:
            raise ValueError(f"engines must be one of {_ENGINES}, got {self.engines!r}")
        if self.format not in _FORMATS:
            raise ValueError(f"format must be one of {_FORMATS}, got {self.format!r}")
        if not 0.0 < self.filling < 1.0:
            raise ValueError(f"filling must lie in (0, 1), got {self.filling!r}")
        if not self.luttinger_g > 0:
            raise ValueError(f"luttinger_g must be positive, got {self.luttinger_g!r}")
        if self.block is not None and self.block < 1:
            raise ValueError(f"block must be >= 1, got {self.block!r}")

    @property
    def has_explicit_geometry(self):
        return self.x1 is not None

    def replace(self, **kw):
        data = self.to_mapping()
        data.update({k: v for k, v in kw.items() if v is not None})
        return from_mapping(data)

    def to_mapping(self):
        """JSON-ready flat dict; drops keys still at their 'unset' default."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "on": True,
               "false": False, "no": False, "0": False, "off": False}


def _coerce(name, kind, raw):
    if raw is None:
        return None
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        if isinstance(raw, bool):
            return raw
        word = str(raw).strip().lower()
        if word not in _BOOL_WORDS:
            raise ValueError(f"cannot read {name}={raw!r} as a boolean")
        return _BOOL_WORDS[word]
    if kind == "floats":
        if isinstance(raw, (list, tuple)):
            return tuple(float(v) for v in raw)
        return tuple(float(tok) for tok in str(raw).replace(",", " ").split())
    return str(raw)


_SCHEMA = {
    "L": "int", "x1": "int", "x2": "int", "x3": "int", "x4": "int",
    "zetas": "floats", "block": "int", "luttinger_g": "float",
    "renyi": "floats", "trajectories": "int", "seed": "int",
    "engines": "str", "exhaustive": "bool", "filling": "float",
    "format": "str", "out": "str",
}


def from_mapping(mapping):
    """Build a validated config from a flat dict (JSON- or text-sourced)."""
    kw = {}
    for key, raw in mapping.items():
        if key not in _SCHEMA:
            raise ValueError(f"unknown config key {key!r}")
        kw[key] = _coerce(key, _SCHEMA[key], raw)
    return ExperimentConfig(**kw)


def parse_config(path):
    """Read a config file: JSON if it opens with '{', else flat key=value."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("JSON config must be a single object")
        return from_mapping(data)
    data = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        data[key.strip()] = value.strip()
    return from_mapping(data)
