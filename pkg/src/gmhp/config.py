"""JSON run configuration.

Example::

    {
      "version": 1,
      "model": {"preset": "bivariate_exp", "params": {...}},
      "horizon": 5.0,
      "max_generation": 25,
      "n_paths": 10,
      "seed": 42,
      "engine": "cluster",
      "truncation": "warn",
      "grid": 1000,
      "outputs": [{"kind": "events", "path": "events.csv", "format": "csv"}]
    }

Unknown fields anywhere are rejected.  ``params`` may be omitted for the
preset defaults.  Optional ``check_model`` (same shape as ``model``) makes
``validate`` test the simulated paths against a different kernel, and
``gates`` overrides the validation thresholds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace

from . import presets

VERSION = 1
ENGINES = ("cluster", "markov")
OUTPUT_KINDS = {"events": ("csv", "csv-per-path"), "intensity_trace": ("csv",),
                "report": ("json",)}
MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ModelConfig:
    preset: str
    params: dict = None

    def build(self):
        try:
            return presets.build(self.preset, self.params)
        except (TypeError, ValueError) as exc:
            raise ConfigError("model.params", str(exc)) from exc

    def to_dict(self):
        out = {"preset": self.preset}
        if self.params is not None:
            out["params"] = self.params
        return out


@dataclass(frozen=True)
class OutputSpec:
    kind: str
    path: str
    format: str = None

    def to_dict(self):
        return {"kind": self.kind, "path": self.path, "format": self.format}


@dataclass(frozen=True)
class Gates:
    ks_level: float = 0.01
    se_units: float = 3.0
    cross_engine: bool = True

    def to_dict(self):
        return {"ks_level": self.ks_level, "se_units": self.se_units,
                "cross_engine": self.cross_engine}


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig
    horizon: float
    version: int = VERSION
    max_generation: int = 25
    n_paths: int = 1
    seed: int = 0
    engine: str = "cluster"
    truncation: str = "warn"
    grid: int = 1000
    outputs: tuple = ()
    check_model: ModelConfig = None
    gates: Gates = field(default_factory=Gates)

    def to_dict(self):
        out = {
            "version": self.version,
            "model": self.model.to_dict(),
            "horizon": self.horizon,
            "max_generation": self.max_generation,
            "n_paths": self.n_paths,
            "seed": self.seed,
            "engine": self.engine,
            "truncation": self.truncation,
            "grid": self.grid,
            "outputs": [o.to_dict() for o in self.outputs],
            "gates": self.gates.to_dict(),
        }
        if self.check_model is not None:
            out["check_model"] = self.check_model.to_dict()
        return out

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_seed(self, seed):
        return replace(self, seed=_seed(seed, "seed"))


def _only(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(where or "config", "expected a JSON object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        name = f"{where}.{extra[0]}" if where else extra[0]
        raise ConfigError(name, "unknown field")


def _number(v, name, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, "expected a number")
    if positive and not v > 0:
        raise ConfigError(name, "must be positive")
    return float(v)


def _int(v, name, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(name, "expected an integer")
    if lo is not None and v < lo:
        raise ConfigError(name, f"must be >= {lo}")
    return v


def _seed(v, name):
    v = _int(v, name, 0)
    if v > MASK64:
        raise ConfigError(name, "must fit in 64 bits")
    return v


def _model(d, where):
    _only(d, {"preset", "params"}, where)
    if "preset" not in d:
        raise ConfigError(f"{where}.preset", "missing")
    if d["preset"] not in presets.PRESETS:
        raise ConfigError(f"{where}.preset", f"unknown preset {d['preset']!r}")
    params = d.get("params")
    if params is not None and not isinstance(params, dict):
        raise ConfigError(f"{where}.params", "expected a JSON object")
    return ModelConfig(d["preset"], params)


def parse_config(d: dict) -> RunConfig:
    allowed = {f.name for f in fields(RunConfig)}
    _only(d, allowed, "")
    for req in ("version", "model", "horizon"):
        if req not in d:
            raise ConfigError(req, "missing")
    if d["version"] != VERSION:
        raise ConfigError("version", f"unsupported version {d['version']!r}")
    model = _model(d["model"], "model")
    check = _model(d["check_model"], "check_model") if d.get("check_model") is not None else None
    engine = d.get("engine", "cluster")
    if engine not in ENGINES:
        raise ConfigError("engine", f"must be one of {ENGINES}")
    if engine == "markov" and model.preset != "bivariate_exp":
        raise ConfigError("engine", "markov engine needs the bivariate_exp preset")
    truncation = d.get("truncation", "warn")
    if truncation not in ("warn", "error"):
        raise ConfigError("truncation", "must be 'warn' or 'error'")

    outs = []
    raw = d.get("outputs", [])
    if not isinstance(raw, list):
        raise ConfigError("outputs", "expected a list")
    for k, o in enumerate(raw):
        where = f"outputs[{k}]"
        _only(o, {"kind", "path", "format"}, where)
        kind = o.get("kind")
        if kind not in OUTPUT_KINDS:
            raise ConfigError(f"{where}.kind", f"must be one of {sorted(OUTPUT_KINDS)}")
        if not isinstance(o.get("path"), str) or not o["path"]:
            raise ConfigError(f"{where}.path", "expected a nonempty string")
        fmt = o.get("format") or OUTPUT_KINDS[kind][0]
        if fmt not in OUTPUT_KINDS[kind]:
            raise ConfigError(f"{where}.format", f"must be one of {OUTPUT_KINDS[kind]}")
        outs.append(OutputSpec(kind, o["path"], fmt))
    if len({o.path for o in outs}) != len(outs):
        raise ConfigError("outputs", "output paths must be distinct")

    g = d.get("gates", {})
    _only(g, {"ks_level", "se_units", "cross_engine"}, "gates")
    gates = Gates(
        ks_level=_number(g.get("ks_level", 0.01), "gates.ks_level", positive=True),
        se_units=_number(g.get("se_units", 3.0), "gates.se_units", positive=True),
        cross_engine=bool(g.get("cross_engine", True)),
    )
    cfg = RunConfig(
        model=model,
        horizon=_number(d["horizon"], "horizon", positive=True),
        version=VERSION,
        max_generation=_int(d.get("max_generation", 25), "max_generation", 0),
        n_paths=_int(d.get("n_paths", 1), "n_paths", 1),
        seed=_seed(d.get("seed", 0), "seed"),
        engine=engine,
        truncation=truncation,
        grid=_int(d.get("grid", 1000), "grid", 2),
        outputs=tuple(outs),
        check_model=check,
        gates=gates,
    )
    # fail early on bad model parameters
    cfg.model.build()
    if check is not None:
        check.build()
    return cfg


def loads(text: str) -> RunConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    return parse_config(d)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
