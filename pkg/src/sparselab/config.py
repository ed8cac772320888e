"""Experiment configuration: YAML in, validated frozen dataclasses out.

Every module precondition is checked here before any compute starts, and
errors name the module and parameter at fault.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ValidationError
from .model import SparsityProfile
from .theory import ModelParams, admissibility
from .transfer import EnergyPoint

DEFAULT_ENERGIES = ("inv_sqrt2",)


@dataclass(frozen=True)
class ThetaPolicy:
    """Uniform grid on [theta_min, 1] plus seeded uniform draws on the same range."""

    grid: int = 8
    draws: int = 2
    theta_min: float = 0.1

    def __post_init__(self):
        if self.grid < 0 or self.draws < 0 or self.grid + self.draws < 1:
            raise ValidationError("theta policy needs at least one value", "cli", "theta")
        if not (0.0 < self.theta_min <= 1.0):
            raise ValidationError("theta_min must lie in (0, 1]", "cli", "theta_min")


@dataclass(frozen=True)
class KroneckerConfig:
    """Two factors drawn from disorder streams ``streams`` of the run seed."""

    enabled: bool = True
    J: int = 6
    a: float = 1.0
    streams: tuple = (1, 2)
    bins: object = "auto"

    def __post_init__(self):
        if self.J < 1:
            raise ValidationError("Kronecker depth must be >= 1", "cli", "kronecker.J")
        if len(self.streams) != 2 or self.streams[0] == self.streams[1]:
            raise ValidationError("the two factors need distinct disorder streams", "model", "seed2")
        if self.bins != "auto" and (not isinstance(self.bins, int) or self.bins < 16):
            raise ValidationError("bins must be 'auto' or an integer >= 16", "measure", "bins")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelParams
    profile: SparsityProfile
    energies: tuple = DEFAULT_ENERGIES
    growth_depth: int = 16
    angle_depth: int = 64
    spectrum_depth: int = 13
    truncation: object = "auto"
    samples: int = 50
    growth_samples: int = 200
    angle_samples: int = 100
    seed: int = 12345
    scale_exponents: tuple = (-10, -4)
    decay_half_width: float = 0.125
    decay_samples: int = 10
    decay_t_min: float = 10.0
    theta: ThetaPolicy = field(default_factory=ThetaPolicy)
    kronecker: KroneckerConfig = field(default_factory=KroneckerConfig)
    phase_lambdas: int = 201
    phase_ratios: int = 41

    def __post_init__(self):
        for name in ("growth_depth", "angle_depth", "spectrum_depth", "samples", "decay_samples",
                     "angle_samples"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1", "cli", name)
        if self.growth_samples < 2:
            raise ValidationError("growth_samples must be >= 2", "transfer", "samples")
        if not (0 <= self.seed < 2**64):
            raise ValidationError("seed must be an unsigned 64-bit integer", "model", "seed")
        if self.truncation != "auto" and (not isinstance(self.truncation, int) or self.truncation < 2):
            raise ValidationError("truncation must be 'auto' or an integer >= 2", "model", "N")
        lo, hi = self.scale_exponents
        if lo >= hi:
            raise ValidationError("scale exponents must be (lo, hi) with lo < hi", "spectra", "scales")
        if self.decay_t_min <= 0:
            raise ValidationError("decay_t_min must be positive", "measure", "T_grid")
        if not (0.0 < self.decay_half_width <= 1.0):
            raise ValidationError("decay_half_width must lie in (0, 1]", "measure", "window")
        if self.phase_lambdas < 2 or self.phase_ratios < 2:
            raise ValidationError("phase grids need at least two points", "cli", "phase")
        for spec in self.energies:
            EnergyPoint.parse(spec)
        if self.kronecker.enabled:
            bad = [c for c in admissibility(self.model.p, self.model.beta, self.kronecker.a) if not c.ok]
            if bad:
                raise ValidationError(
                    f"Kronecker stage needs admissible parameters; violated: {bad[0].name}",
                    "theory",
                    bad[0].name,
                )

    @property
    def energy_points(self):
        return [EnergyPoint.parse(s) for s in self.energies]

    def with_seed(self, seed):
        return self if seed is None else replace(self, seed=int(seed))

    def to_dict(self):
        d = asdict(self)
        d["energies"] = list(self.energies)
        d["scale_exponents"] = list(self.scale_exponents)
        d["kronecker"]["streams"] = list(self.kronecker.streams)
        return d


def _section(raw, key, cls, convert=None):
    sub = raw.pop(key, None) or {}
    if not isinstance(sub, dict):
        raise ValidationError(f"section {key!r} must be a mapping", "cli", key)
    if convert:
        sub = convert(sub)
    try:
        return cls(**sub)
    except TypeError as exc:
        raise ValidationError(f"bad keys in section {key!r}: {exc}", "cli", key) from None


def from_dict(raw: dict) -> ExperimentConfig:
    raw = dict(raw or {})
    if "model" not in raw:
        raise ValidationError("config needs a 'model' section", "cli", "model")
    model = _section(raw, "model", ModelParams)
    prof_raw = raw.pop("profile", None) or {}
    prof_raw.setdefault("beta", model.beta)
    profile = _section({"profile": prof_raw}, "profile", SparsityProfile)
    theta = _section(raw, "theta", ThetaPolicy)
    kron = _section(raw, "kronecker", KroneckerConfig,
                    lambda d: {**d, "streams": tuple(d["streams"])} if "streams" in d else d)
    for key in ("energies", "scale_exponents"):
        if key in raw:
            raw[key] = tuple(raw[key] or ())
    try:
        return ExperimentConfig(model=model, profile=profile, theta=theta, kronecker=kron, **raw)
    except TypeError as exc:
        raise ValidationError(f"unknown config key: {exc}", "cli", "config") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}", "cli", "config") from None
    except yaml.YAMLError as exc:
        raise ValidationError(f"config {path} is not valid YAML: {exc}", "cli", "config") from None
    if not isinstance(raw, dict):
        raise ValidationError(f"config {path} must be a mapping", "cli", "config")
    return from_dict(raw)
