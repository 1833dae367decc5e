"""Experiment configuration: loading, validation, digests and CSV output."""
from dataclasses import dataclass, field
import copy
import csv
import hashlib
import io
import json
import os

import numpy as np
import yaml

from . import exponent as ex
from . import spectral as sp
from .errors import ConfigError

SCHEMA = "levyholder.experiment/1"
STAGES = ("diagnose", "indices", "simulate", "variogram", "classify", "nonlinear")
REQUIRES = {"classify": ("indices",)}
OUT_ENV = "LEVYHOLDER_OUT"


def format_number(x):
    """17 significant digits, '.' decimal; integers and strings pass through."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return "" if x is None else str(x)


def write_csv(rows, path=None, fields=None):
    """Rows of dicts to comma-separated text with a header row."""
    rows = list(rows)
    if fields is None:
        fields = []
        for r in rows:
            for k in r:
                if k not in fields:
                    fields.append(k)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for r in rows:
        w.writerow([format_number(r.get(k)) for k in fields])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x).__name__}")


def digest(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()[:16]


def _grid(spec, name):
    if spec is None:
        raise ConfigError(f"grids.{name} is required")
    if isinstance(spec, dict):
        try:
            start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        except KeyError as exc:
            raise ConfigError(f"grids.{name} needs start, stop and num (missing {exc})") from None
        return np.linspace(start, stop, num)
    try:
        arr = np.asarray(spec, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"grids.{name} must be numeric") from None
    if arr.ndim not in (1, 2) or arr.size < 1 or (arr.ndim == 2 and name == "time"):
        raise ConfigError(f"grids.{name} must be a list of numbers (or points) or {{start, stop, num}}")
    return arr


@dataclass
class ExperimentConfig:
    raw: dict
    model: object
    measure: object
    kernel: str
    horizon: float
    stages: list
    seed: int = 0
    replicas: int = 100
    lattice: dict = field(default_factory=dict)
    grids: dict = field(default_factory=dict)
    variogram: dict = field(default_factory=dict)
    nonlinear: dict = field(default_factory=dict)

    @property
    def digest(self):
        return digest(self.raw)

    def time_grid(self):
        return _grid(self.grids.get("time"), "time")

    def space_grid(self):
        return _grid(self.grids.get("space"), "space")


def load(path):
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith((".yaml", ".yml")):
        data = yaml.safe_load(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError:
            data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError("the config document must be a mapping")
    return data


def parse(data):
    """Validate a config mapping and build the model objects."""
    if not isinstance(data, dict):
        raise ConfigError("the config document must be a mapping")
    data = copy.deepcopy(data)
    schema = data.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}")
    for key in ("model", "measure"):
        if key not in data:
            raise ConfigError(f"missing section {key!r}", stage="validate")
    model = ex.from_config(data["model"])
    measure = sp.SpectralMeasure.from_config(data["measure"])
    if model.dim != measure.dim:
        raise ConfigError("model and measure dimensions differ", stage="validate")
    kernel = data.get("kernel", "heat")
    if kernel not in ("heat", "wave"):
        raise ConfigError(f"kernel must be 'heat' or 'wave', got {kernel!r}", stage="validate")
    stages = list(data.get("stages", ["indices"]))
    unknown = [s for s in stages if s not in STAGES]
    if unknown:
        raise ConfigError(f"unknown stages {unknown}", stage="validate")
    for s in stages:
        for dep in REQUIRES.get(s, ()):
            if dep not in stages:
                raise ConfigError(f"stage {s!r} requires {dep!r}", stage="validate")
    vg = dict(data.get("variogram", {}))
    if "variogram" in stages and vg.get("mode", "exact") == "empirical" and "simulate" not in stages:
        raise ConfigError("empirical variograms require the 'simulate' stage", stage="validate")
    horizon = float(data.get("horizon", 1.0))
    if horizon <= 0:
        raise ConfigError("horizon must be positive", stage="validate")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer", stage="validate")
    replicas = int(data.get("replicas", 100))
    if replicas < 1:
        raise ConfigError("replicas must be >= 1", stage="validate")
    cfg = ExperimentConfig(data, model, measure, kernel, horizon, stages, seed, replicas,
                           dict(data.get("lattice", {})), dict(data.get("grids", {})), vg,
                           dict(data.get("nonlinear", {})))
    if any(s in stages for s in ("simulate", "nonlinear")):
        cfg.time_grid()
        cfg.space_grid()
    return cfg


def resolve_path(cfg, path):
    """Follow a dotted path ('model.params.alpha') to its parent mapping and key."""
    parts = path.split(".")
    node = cfg
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError(f"parameter path {path!r} does not resolve")
        node = node[p]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(f"parameter path {path!r} does not resolve")
    return node, parts[-1]


def with_value(cfg, path, value):
    out = copy.deepcopy(cfg)
    node, key = resolve_path(out, path)
    node[key] = value
    return out


def output_root(override=None):
    return override or os.environ.get(OUT_ENV, "out")
