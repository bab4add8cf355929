"""Experiment configuration: a flat ``key = value`` text format.

Grammar, one entry per line::

    # comment (also allowed after a value)
    key = value
    list_key = v1, v2, v3

Keys are case-sensitive and must be known; blank lines are ignored.
Precedence: built-in experiment defaults < config file < ``--set`` overrides
< dedicated command-line flags.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .schemes import IntegralMode, SchemeKind
from .truncation import EmTruncationPolicy, TruncationPolicy

EXPERIMENTS = ("trajectories", "stability", "convergence", "decomposition", "integral-bound",
               "positivity", "moments")

PLOT_CHOICES = ("trajectory", "difference", "convergence")


class ConfigError(Exception):
    """The config text cannot be parsed."""


class ValidationError(Exception):
    """A config value violates its constraint."""

    def __init__(self, key: str, constraint: str):
        super().__init__(f"{key}: {constraint}")
        self.key = key
        self.constraint = constraint


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "trajectories"
    schemes: tuple = ()
    x0: float | None = None
    deltas: tuple = ()
    T: float | None = None
    n_paths: int | None = None
    seed: int = 0
    threshold: float = 1e-3
    mode: IntegralMode = IntegralMode.LOWER_ENDPOINT
    c_bar: float = 10.0
    gamma: float = 1.0
    epsilon: float = 1.0 / 3.0
    h_hat: float = 11.0
    tem_c_bar: float = 10.0
    tem_q: float = 0.25
    ref_delta: float = 2.0**-13
    p: tuple = (2,)
    c_values: tuple = (0.0, 0.5, 1.0)
    r_values: tuple = (0.1, 0.25, 0.4)
    n_samples: int = 10_000
    n_substeps: int = 256
    n_mc: int = 1000
    plots: tuple = ()
    allow_divergence: bool = True
    threads: int = 1
    out: str | None = None

    @property
    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(self.c_bar, self.gamma, self.epsilon, self.h_hat)

    @property
    def em_policy(self) -> EmTruncationPolicy:
        return EmTruncationPolicy(self.tem_c_bar, self.tem_q)


# per-experiment defaults for the fields left unset above
DEFAULTS = {
    "trajectories": dict(schemes=("TSD", "EXP_TSD", "LSD"), x0=10.0, deltas=(0.25,), T=8.0,
                         n_paths=1, plots=("trajectory",)),
    "stability": dict(schemes=("TSD", "EXP_TSD", "LSD"), x0=10.0, deltas=(0.25, 0.5), T=50.0,
                      n_paths=1000),
    "convergence": dict(schemes=("TSD", "EXP_TSD", "LSD"), x0=1.0,
                        deltas=tuple(2.0**-k for k in range(4, 10)), T=1.0, n_paths=4000,
                        plots=("convergence",)),
    "decomposition": dict(schemes=("TSD", "EXP_TSD"), x0=0.0, deltas=(0.01, 0.25, 0.5, 1.0),
                          T=0.0, n_paths=0),
    "integral-bound": dict(schemes=(), x0=0.0, deltas=(0.01, 0.1), T=0.0, n_paths=0),
    "positivity": dict(schemes=("LSD", "EXP_TSD", "TEM"), x0=10.0, deltas=(0.25,), T=250.0,
                       n_paths=1000),
    "moments": dict(schemes=("LSD",), x0=1.0, deltas=(0.1, 0.01), T=1.0, n_paths=1000),
}


def _as_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as a number") from None


def _as_int(key, text):
    try:
        return int(text, 0) if isinstance(text, str) else int(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as an integer") from None


def _as_bool(key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: cannot parse {text!r} as a boolean")


def _split(text):
    return [part.strip() for part in text.split(",") if part.strip()]


def _parse_scheme(key, text):
    try:
        return SchemeKind.parse(text).name
    except ValueError as exc:
        raise ValidationError(key, str(exc)) from None


def _parse_mode(key, text):
    try:
        return IntegralMode.parse(text)
    except ValueError as exc:
        raise ValidationError(key, str(exc)) from None


_PARSERS = {
    "experiment": lambda k, v: v.strip(),
    "schemes": lambda k, v: tuple(_parse_scheme(k, s) for s in _split(v)),
    "x0": _as_float,
    "deltas": lambda k, v: tuple(_as_float(k, s) for s in _split(v)),
    "T": _as_float,
    "n_paths": _as_int,
    "seed": _as_int,
    "threshold": _as_float,
    "mode": _parse_mode,
    "c_bar": _as_float,
    "gamma": _as_float,
    "epsilon": _as_float,
    "h_hat": _as_float,
    "tem_c_bar": _as_float,
    "tem_q": _as_float,
    "ref_delta": _as_float,
    "p": lambda k, v: tuple(_as_int(k, s) for s in _split(v)),
    "c_values": lambda k, v: tuple(_as_float(k, s) for s in _split(v)),
    "r_values": lambda k, v: tuple(_as_float(k, s) for s in _split(v)),
    "n_samples": _as_int,
    "n_substeps": _as_int,
    "n_mc": _as_int,
    "plots": lambda k, v: tuple(_split(v)),
    "allow_divergence": _as_bool,
    "threads": _as_int,
    "out": lambda k, v: v.strip(),
}
_ALIASES = {"delta": "deltas", "scheme": "schemes"}

assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_assignments(lines, origin: str = "<config>") -> dict:
    """Parse ``key = value`` lines into typed values (no validation yet)."""
    values = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in _PARSERS:
            raise ValidationError(key, f"unknown key (line {lineno} of {origin})")
        if not value:
            raise ConfigError(f"{origin}:{lineno}: empty value for {key}")
        values[key] = _PARSERS[key](key, value)
    return values


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_assignments(text.splitlines(), origin=str(path))


def build_config(experiment: str, *layers: dict) -> ExperimentConfig:
    """Merge defaults and override layers, then validate."""
    if experiment not in EXPERIMENTS:
        raise ValidationError("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    merged = dict(DEFAULTS[experiment])
    for layer in layers:
        if "experiment" in layer and layer["experiment"] != experiment:
            raise ValidationError("experiment", f"config says {layer['experiment']!r} but the "
                                                f"command runs {experiment!r}")
        merged.update({k: v for k, v in layer.items() if v is not None})
    merged["experiment"] = experiment
    cfg = ExperimentConfig(**merged)
    validate(cfg)
    return cfg


def _finite(key, v):
    if not math.isfinite(v):
        raise ValidationError(key, "must be finite")


def validate(cfg: ExperimentConfig) -> None:
    e = cfg.experiment
    _finite("x0", cfg.x0)
    if not cfg.deltas:
        raise ValidationError("deltas", "at least one step size is required")
    for d in cfg.deltas:
        if not 0 < d <= 1:
            raise ValidationError("deltas", f"each step must lie in (0, 1], got {d!r}")
    _finite("T", cfg.T)
    if cfg.T < 0:
        raise ValidationError("T", "must be nonnegative")
    if cfg.n_paths < 0:
        raise ValidationError("n_paths", "must be nonnegative")
    if not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed", "must be an unsigned 64-bit integer")
    if not cfg.threshold > 0:
        raise ValidationError("threshold", "must be positive")
    if cfg.threads < 1:
        raise ValidationError("threads", "must be at least 1")
    try:
        cfg.policy
    except ValueError as exc:
        key = next((k for k in ("epsilon", "h_hat", "gamma", "c_bar") if k in str(exc)), "c_bar")
        raise ValidationError(key, str(exc)) from None
    try:
        cfg.em_policy
    except ValueError as exc:
        raise ValidationError("tem_q" if "q" in str(exc).split()[0] else "tem_c_bar", str(exc)) from None
    for plot in cfg.plots:
        if plot not in PLOT_CHOICES:
            raise ValidationError("plots", f"unknown plot {plot!r}; choose from {', '.join(PLOT_CHOICES)}")
    if e in ("trajectories", "stability", "convergence", "positivity", "moments") and not cfg.schemes:
        raise ValidationError("schemes", "at least one scheme is required")
    if "LSD" in cfg.schemes and e not in ("decomposition", "integral-bound") and not cfg.x0 > 0:
        raise ValidationError("x0", "LSD needs x0 > 0")
    if e == "trajectories":
        if "difference" in cfg.plots and not {"TEM", "LSD"} <= set(cfg.schemes):
            raise ValidationError("plots", "the difference plot needs both TEM and LSD in schemes")
    elif e == "stability":
        if cfg.T <= 0:
            raise ValidationError("T", "must be positive")
    elif e == "convergence":
        if cfg.n_paths < 1:
            raise ValidationError("n_paths", "must be positive")
        if not cfg.ref_delta < min(cfg.deltas):
            raise ValidationError("ref_delta", "must be finer than every step in deltas")
        base = max(cfg.deltas)
        for d in list(cfg.deltas) + [cfg.ref_delta]:
            k = math.log2(base / d)
            if abs(k - round(k)) > 1e-9:
                raise ValidationError("deltas", f"{d} is not a dyadic refinement of {base}")
        if abs(cfg.T / base - round(cfg.T / base)) > 1e-9 or cfg.T <= 0:
            raise ValidationError("T", f"must be a positive multiple of the coarsest step {base}")
    elif e == "decomposition":
        bad = [s for s in cfg.schemes if s not in ("TSD", "EXP_TSD")]
        if bad or not cfg.schemes:
            raise ValidationError("schemes", "decomposition supports TSD and EXP_TSD")
        if cfg.n_mc < 0:
            raise ValidationError("n_mc", "must be nonnegative")
    elif e == "integral-bound":
        for c in cfg.c_values:
            if not (math.isfinite(c) and c >= 0):
                raise ValidationError("c_values", f"must be nonnegative, got {c!r}")
        for r in cfg.r_values:
            if not 0 < r < 0.5:
                raise ValidationError("r_values", f"must lie in (0, 1/2), got {r!r}")
        if cfg.n_substeps < 64:
            raise ValidationError("n_substeps", "must be at least 64")
        if cfg.n_samples < 1:
            raise ValidationError("n_samples", "must be positive")
    elif e == "positivity":
        if not cfg.x0 > 0:
            raise ValidationError("x0", "positivity checks need x0 > 0")
    elif e == "moments":
        for p in cfg.p:
            if not 2 <= p <= 9:
                raise ValidationError("p", f"must be an integer in [2, 9], got {p!r}")
        if cfg.n_paths < 2:
            raise ValidationError("n_paths", "must be at least 2")


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    out = replace(cfg, **changes)
    validate(out)
    return out


def config_field_names() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]


__all__ = ["ConfigError", "ExperimentConfig", "ValidationError", "build_config",
           "load_config_file", "parse_assignments", "validate"]
