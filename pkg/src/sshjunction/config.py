"""TOML experiment configuration with a canonical form and a content hash.

Sections: ``[wire]``, ``[pulse]``, ``[ensemble]``, ``[sweep]``, ``[output]``
and ``[validation]``.  Unknown sections or keys are rejected.  The canonical
form lists every field explicitly, so parsing it again gives the same
configuration and the same text.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import tomli_w

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .ensemble import EnsembleConfig
from .fields import LaserPulse, preset
from .lattice import WireParams


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


SWEEP_VARIABLES = ("omega", "relative_phase")


@dataclass(frozen=True)
class EnsembleSection:
    n_traj: int = 1
    base_seed: int = 0
    t_final: float = 100.0
    dt: float = 0.025
    record_interval: float = 0.5
    rigid: bool = False
    n_levels: int = 0
    switch_ramp: float = 10.0
    workers: int = 1


@dataclass(frozen=True)
class SweepSection:
    variable: str = "omega"
    start: float = 0.8
    stop: float = 1.4
    step: float = 0.05

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if not self.step > 0 or self.stop < self.start:
            raise ValueError("sweep needs step > 0 and stop >= start")

    def grid(self) -> np.ndarray:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return self.start + self.step * np.arange(n)


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    time_series: bool = True


@dataclass(frozen=True)
class ValidationSection:
    n_sites: int = 8
    n_lead_sites: int = 400
    tolerance: float = 0.05
    t_final: float | None = None  # default: 95% of the lead reflection time


@dataclass(frozen=True)
class ExperimentConfig:
    wire: WireParams = field(default_factory=WireParams)
    pulse: LaserPulse = field(default_factory=LaserPulse)
    preset: str | None = None
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    sweep: SweepSection | None = None
    output: OutputSection = field(default_factory=OutputSection)
    validation: ValidationSection = field(default_factory=ValidationSection)

    def ensemble_config(self, pulse: LaserPulse | None = None) -> EnsembleConfig:
        e = self.ensemble
        return EnsembleConfig(self.wire, self.pulse if pulse is None else pulse, e.n_traj, e.base_seed,
                              e.t_final, e.dt, e.record_interval, e.rigid, e.n_levels, e.switch_ramp)

    def with_overrides(self, seed=None, n_traj=None, rigid=False, directory=None,
                       workers=None) -> "ExperimentConfig":
        e = self.ensemble
        if workers is not None:
            e = replace(e, workers=int(workers))
        if seed is not None:
            e = replace(e, base_seed=int(seed))
        if n_traj is not None:
            e = replace(e, n_traj=int(n_traj))
        if rigid:
            e = replace(e, rigid=True)
        if e.rigid:
            e = replace(e, n_traj=1)
        out = self.output if directory is None else replace(self.output, directory=str(directory))
        return replace(self, ensemble=e, output=out)

    def to_dict(self) -> dict:
        pulse = asdict(self.pulse)
        if self.preset is not None:
            pulse = {"preset": self.preset, **pulse}
        doc = {"wire": asdict(self.wire), "pulse": pulse, "ensemble": asdict(self.ensemble)}
        if self.sweep is not None:
            doc["sweep"] = asdict(self.sweep)
        doc["output"] = asdict(self.output)
        doc["validation"] = {k: v for k, v in asdict(self.validation).items() if v is not None}
        return doc

    def canonical(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @property
    def hash(self) -> str:
        """Short sha256 of the canonical text without the execution settings.

        The output directory and the worker count do not change any result,
        so they are left out.
        """
        doc = self.to_dict()
        doc["output"] = {k: v for k, v in doc["output"].items() if k != "directory"}
        doc["ensemble"] = {k: v for k, v in doc["ensemble"].items() if k != "workers"}
        return hashlib.sha256(tomli_w.dumps(doc).encode()).hexdigest()[:16]


def _checked(cls, table, section) -> dict:
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    specs = {f.name: f for f in fields(cls)}
    unknown = sorted(set(table) - set(specs))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    return {key: _coerce(value, specs[key], section) for key, value in table.items()}


def _build(cls, table, section):
    kwargs = _checked(cls, table, section)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def _coerce(value, spec, section):
    """Check ``value`` against the field's annotation; ints are accepted as floats."""
    kind = str(spec.type).split(" |")[0]
    key = spec.name
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"[{section}] {key} must be true or false")
    elif kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"[{section}] {key} must be an integer")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"[{section}] {key} must be a number")
        value = float(value)
    elif kind == "str" and not isinstance(value, str):
        raise ConfigError(f"[{section}] {key} must be a string")
    return value


SECTIONS = ("wire", "pulse", "ensemble", "sweep", "output", "validation")


def from_dict(doc: dict) -> ExperimentConfig:
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    wire = _build(WireParams, doc.get("wire", {}), "wire")
    pulse_table = dict(doc.get("pulse", {}))
    label = pulse_table.pop("preset", None)
    if label is not None:
        if not isinstance(label, str):
            raise ConfigError("[pulse] preset must be a string")
        try:
            pulse = preset(label, **_checked(LaserPulse, pulse_table, "pulse"))
        except ValueError as exc:
            raise ConfigError(f"[pulse]: {exc}") from None
    else:
        pulse = _build(LaserPulse, pulse_table, "pulse")
    ensemble = _build(EnsembleSection, doc.get("ensemble", {}), "ensemble")
    if ensemble.n_traj < 1:
        raise ConfigError("[ensemble] n_traj must be >= 1")
    if not ensemble.dt > 0 or not ensemble.t_final > 0:
        raise ConfigError("[ensemble] dt and t_final must be positive")
    sweep = _build(SweepSection, doc["sweep"], "sweep") if "sweep" in doc else None
    output = _build(OutputSection, doc.get("output", {}), "output")
    validation = _build(ValidationSection, doc.get("validation", {}), "validation")
    return ExperimentConfig(wire, pulse, label, ensemble, sweep, output, validation)


def loads(text: str) -> ExperimentConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    return from_dict(doc)


def load(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            text = fh.read().decode()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text)
