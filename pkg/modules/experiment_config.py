"""Experiment documents: figure presets, versioned JSON configs and flag overrides."""
import json
from dataclasses import MISSING, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from config import CONFIG_VERSION, DEFAULT_SEED, DESK_N_TRAJ, ES_THREADS, OUTPUT_DIR, FULL_SCALE_N_TRAJ
from modules.dither import DitherSpec
from modules.dynamics import AlgoParams, SystemKind
from modules.ensemble import EnsembleConfig, UniformRange
from modules.objectives import MULTIDIM_X_STAR, OBJECTIVE_IDS, make_objective
from utils.exceptions import ConfigError
from utils.logger import logger

EPS = 1e-7

_FIG1 = {
    "objective": "quad1d", "objective_params": {"x_star": 25.0}, "system": "adaptive1d",
    "rho": 0.12, "chi": 121 / 4, "psi": 0.01, "beta": 0.75, "eps": EPS, "x0": -40.0, "n_steps": 60,
}

PRESETS = {
    "fig1": _FIG1,
    "fig2": _FIG1,
    "fig3": _FIG1,
    "fig4": _FIG1,
    "fig5": {
        "objective": "x2cos", "objective_params": {"x_star": 48.15}, "system": "adaptive1d",
        "rho": 0.05, "chi": 0.09, "psi": 0.01, "beta": 0.75, "eps": EPS, "x0": 40.0, "n_steps": 200,
    },
    "x2cos_origin": {**_FIG1, "objective": "x2cos", "objective_params": {"x_star": 0.0}, "x0": -2.0},
    "fig6": {**_FIG1, "objective_params": {"x_star": 2.5e5}, "x0": -4e5},
    "fig7": {
        "objective": "quad1d", "objective_params": {"x_star": 25.0}, "system": "nonadaptive1d",
        "rho": 0.05, "chi": 0.81, "psi": 0.01, "beta": 0.4, "eps": EPS, "x0": 20.0, "n_steps": 400,
    },
    # h_k = 1e-3·w_k and g_k = 9·w_k
    "fig8": {**_FIG1, "system": "firstorder", "chi": 1e-6, "psi": 81.0, "n_steps": 400},
    "logistic": {
        "objective": "logistic", "objective_params": {"x_star": 350.0}, "system": "adaptive1d",
        "rho": 0.55, "chi": 100.0, "psi": 0.36, "beta": 0.5, "eps": EPS, "x0": -240.0, "n_steps": 200,
    },
    "fig9": {
        "objective": "quadNd", "objective_params": {"x_star": MULTIDIM_X_STAR}, "system": "multidim",
        "rho": 0.25, "chi": 0.2025, "psi": 0.01, "beta": 0.93, "eps": EPS, "x0": [0.0, 0.0, 0.0], "n_steps": 2000,
    },
}

# Informational keys written to sidecars and ignored when a sidecar is read back.
RESULT_KEYS = ("version", "n_diverged")


def _range_or_value(value, name):
    if value is None or isinstance(value, UniformRange):
        return value
    if isinstance(value, dict):
        if set(value) != {"uniform"} or not isinstance(value["uniform"], (list, tuple)) or len(value["uniform"]) != 2:
            raise ConfigError(f"{name} must be a number, a list or {{\"uniform\": [low, high]}}")
        return UniformRange(*(_as_float(v, name) for v in value["uniform"]))
    if isinstance(value, (list, tuple)):
        return [_as_float(v, name) for v in value]
    return _as_float(value, name)


def _jsonable(value):
    if isinstance(value, UniformRange):
        return value.to_dict()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


FLOAT_FIELDS = ("rho", "beta", "chi", "psi", "eps")
INT_FIELDS = ("n_steps", "n_traj", "seed", "n_threads")


def _as_float(value, name):
    if isinstance(value, bool):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}")


def _as_int(value, name):
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    number = _as_float(value, name)
    if not number.is_integer():
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(number)


def parse_vector(text):
    """'1.5' -> 1.5, '1,2,3' -> [1.0, 2.0, 3.0]."""
    try:
        values = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse {text!r} as a number or comma-separated vector")
    return values[0] if len(values) == 1 else values


@dataclass(frozen=True)
class ExperimentConfig:
    objective: str
    system: SystemKind
    rho: float
    beta: float
    chi: float
    psi: float
    x0: object
    n_steps: int
    eps: float = EPS
    objective_params: dict = field(default_factory=dict)
    y0: object = None
    g_decay: bool = False
    n_traj: int = DESK_N_TRAJ
    seed: int = DEFAULT_SEED
    n_threads: int = ES_THREADS
    out: Optional[str] = None
    preset: str = "custom"

    def __post_init__(self):
        if self.objective not in OBJECTIVE_IDS:
            raise ConfigError(f"unknown objective {self.objective!r}; expected one of {', '.join(OBJECTIVE_IDS)}")
        try:
            object.__setattr__(self, "system", SystemKind(self.system))
        except (TypeError, ValueError):
            raise ConfigError(f"unknown system {self.system!r}")
        for name in FLOAT_FIELDS:
            object.__setattr__(self, name, _as_float(getattr(self, name), name))
        for name in INT_FIELDS:
            object.__setattr__(self, name, _as_int(getattr(self, name), name))
        if not isinstance(self.g_decay, bool):
            raise ConfigError(f"g_decay must be true or false, got {self.g_decay!r}")
        if not isinstance(self.objective_params, dict):
            raise ConfigError("objective_params must be an object")
        if self.x0 is None:
            raise ConfigError("x0 must be a number, a list or {\"uniform\": [low, high]}")
        object.__setattr__(self, "x0", _range_or_value(self.x0, "x0"))
        object.__setattr__(self, "y0", _range_or_value(self.y0, "y0"))
        object.__setattr__(self, "objective_params", dict(self.objective_params))
        if self.out is None:
            object.__setattr__(self, "out", f"{OUTPUT_DIR}/{self.preset}.csv")

    @classmethod
    def from_preset(cls, name, **overrides):
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
        return cls.from_dict({**PRESETS[name], "preset": name, **overrides})

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        for key in RESULT_KEYS:
            doc.pop(key, None)
        base = {}
        if "preset" in doc and doc["preset"] != "custom":
            if doc["preset"] not in PRESETS:
                raise ConfigError(f"unknown preset {doc['preset']!r}; expected one of {', '.join(PRESETS)}")
            base = dict(PRESETS[doc["preset"]])
        merged = {**base, **doc}
        if isinstance(doc.get("objective_params"), dict) and base:
            merged["objective_params"] = {**base.get("objective_params", {}), **doc["objective_params"]}

        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(merged) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(
            name for name, f in cls.__dataclass_fields__.items()
            if name not in merged and f.default is MISSING and f.default_factory is MISSING
        )
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        try:
            return cls(**merged)
        except TypeError as e:
            raise ConfigError(str(e))

    def with_overrides(self, **overrides):
        overrides = {k: v for k, v in overrides.items() if v is not None}
        if "x_star" in overrides:
            params = {**self.objective_params, "x_star": overrides.pop("x_star")}
            overrides["objective_params"] = params
        return replace(self, **overrides) if overrides else self

    def full_scale(self):
        return replace(self, n_traj=FULL_SCALE_N_TRAJ)

    def dither_spec(self):
        return DitherSpec(chi=float(self.chi), psi=float(self.psi))

    def algo_params(self):
        return AlgoParams(
            rho=float(self.rho), beta=float(self.beta), eps=float(self.eps),
            dither=self.dither_spec(), g_decay=bool(self.g_decay),
        )

    def build_objective(self):
        return make_objective(self.objective, self.objective_params)

    def ensemble_config(self):
        kwargs = dict(
            n_traj=int(self.n_traj), n_steps=int(self.n_steps), seed=int(self.seed),
            x0=self.x0, system=self.system, n_threads=int(self.n_threads),
        )
        if self.y0 is not None:
            kwargs["y0"] = self.y0
        return EnsembleConfig(**kwargs)

    def to_dict(self, **extra):
        doc = {"version": CONFIG_VERSION}
        for f in fields(self):
            doc[f.name] = _jsonable(getattr(self, f.name))
        doc["system"] = self.system.value
        doc.update({k: _jsonable(v) for k, v in extra.items()})
        return doc


def parse_config_text(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed JSON: {e.msg} (column {e.colno})", line=e.lineno)
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object", line=1)
    version = doc.get("version")
    if version is None:
        raise ConfigError("config document has no 'version' field")
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}; expected {CONFIG_VERSION}")
    return ExperimentConfig.from_dict(doc)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")
    config = parse_config_text(text)
    logger.info(f"Loaded config {path} (preset {config.preset}, objective {config.objective})")
    return config
