"""Experiment configuration: one JSON document plus dotted-path overrides.

Every section is a dataclass; unknown keys and ill-typed values raise
:class:`ConfigError` naming their dotted location.  ``to_dict``/``from_dict``
round-trip losslessly and :meth:`ExperimentConfig.digest` hashes the
canonical JSON form.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .spectrum import WINDOW_KINDS, BandWindow, PowerSpectrum

OUTPUT_FORMATS = ("csv", "json")


class ConfigError(ValueError):
    pass


@dataclass
class SpectrumSection:
    alpha: float = 2.5
    g_num: list[float] = field(default_factory=lambda: [1.0])
    g_den: list[float] = field(default_factory=lambda: [1.0])
    ell_min_valid: int = 1


@dataclass
class WindowSection:
    kind: str = "smooth-bump"
    params: dict[str, float] = field(default_factory=dict)


@dataclass
class ScalesSection:
    j: list[int] = field(default_factory=lambda: [4, 5, 6, 7])


@dataclass
class MonteCarloSection:
    replicates: int = 200
    master_seed: int = 20240601
    workers: int = 1


@dataclass
class GridsSection:
    density_factor: float = 4.0


@dataclass
class NetsSection:
    j: int = 6
    decay_j: list[int] = field(default_factory=lambda: [4, 5, 6, 7, 8])
    delta_exponent: float = 0.3
    net_cap: int = 200000
    eigen_capacity: int = 4096
    max_j: int = 9
    whitening_replicates: int = 500
    decay_M: int = 2


@dataclass
class ThresholdsSection:
    j: int = 4
    u: list[float] = field(default_factory=lambda: [3.5, 4.0, 4.5])
    excursion_replicates: int = 2000
    borell_epsilon: float = 0.5


@dataclass
class EntropySection:
    delta_upper: float = math.pi
    covering_constant: float = 1.0
    k_star: float = 1.0


@dataclass
class BermanSection:
    n: int = 1000000
    replicates: int = 100


@dataclass
class SynthSection:
    n_points: int = 1000
    full_field: bool = False


@dataclass
class OutputSection:
    directory: str = "reports"
    formats: list[str] = field(default_factory=lambda: ["csv", "json"])


@dataclass
class ExperimentConfig:
    spectrum: SpectrumSection = field(default_factory=SpectrumSection)
    window: WindowSection = field(default_factory=WindowSection)
    scales: ScalesSection = field(default_factory=ScalesSection)
    monte_carlo: MonteCarloSection = field(default_factory=MonteCarloSection)
    grids: GridsSection = field(default_factory=GridsSection)
    nets: NetsSection = field(default_factory=NetsSection)
    thresholds: ThresholdsSection = field(default_factory=ThresholdsSection)
    entropy: EntropySection = field(default_factory=EntropySection)
    berman: BermanSection = field(default_factory=BermanSection)
    synth: SynthSection = field(default_factory=SynthSection)
    output: OutputSection = field(default_factory=OutputSection)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict, source: str = "") -> "ExperimentConfig":
        try:
            cfg = _build(cls, data, "")
            cfg.validate()
        except ConfigError as exc:
            if source:
                raise ConfigError(f"{source}: {exc}") from None
            raise
        return cfg

    @classmethod
    def from_json(cls, text: str, source: str = "<config>") -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data, source)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_json(text, str(path))

    @classmethod
    def default(cls) -> "ExperimentConfig":
        """The shipped default configuration."""
        text = resources.files("bandsup").joinpath("data/default_config.json").read_text()
        return cls.from_json(text, "default_config.json")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def with_overrides(self, overrides) -> "ExperimentConfig":
        """Apply ``section.key=value`` strings; values parse as JSON, else as plain strings."""
        data = self.to_dict()
        for item in overrides or ():
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            key, raw = item.split("=", 1)
            parts = key.strip().split(".")
            node = data
            for depth, part in enumerate(parts[:-1]):
                if not isinstance(node, dict) or part not in node:
                    raise ConfigError(f"override {key}: unknown key {'.'.join(parts[:depth + 1])}")
                node = node[part]
            leaf = parts[-1]
            free_form = isinstance(node, dict) and len(parts) >= 2 and parts[-2] == "params"
            if not isinstance(node, dict) or (leaf not in node and not free_form):
                raise ConfigError(f"override {key}: unknown key {key}")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node[leaf] = value
        return ExperimentConfig.from_dict(data, "override")

    # -- domain objects -----------------------------------------------------

    def power_spectrum(self) -> PowerSpectrum:
        s = self.spectrum
        try:
            if not any(s.g_num):
                return PowerSpectrum.null(s.alpha)
            return PowerSpectrum(alpha=s.alpha, g_numerator=tuple(s.g_num),
                                 g_denominator=tuple(s.g_den), ell_min_valid=s.ell_min_valid)
        except ValueError as exc:
            raise ConfigError(f"spectrum: {exc}") from None

    def band_window(self) -> BandWindow:
        try:
            return BandWindow(self.window.kind, dict(self.window.params))
        except ValueError as exc:
            raise ConfigError(f"window: {exc}") from None

    def validate(self) -> None:
        if self.window.kind not in WINDOW_KINDS:
            raise ConfigError(f"window.kind: {self.window.kind!r} is not one of {WINDOW_KINDS}")
        bad = [f for f in self.output.formats if f not in OUTPUT_FORMATS]
        if bad:
            raise ConfigError(f"output.formats: unsupported {bad}; expected a subset of {OUTPUT_FORMATS}")
        if any(j < 1 for j in [*self.scales.j, self.nets.j, self.thresholds.j, *self.nets.decay_j]):
            raise ConfigError("scales.j, nets.j, nets.decay_j, thresholds.j: scales must be at least 1")
        if self.monte_carlo.replicates < 1:
            raise ConfigError("monte_carlo.replicates: must be positive")
        if self.monte_carlo.workers < 1:
            raise ConfigError("monte_carlo.workers: must be positive")
        if not 0.0 < self.nets.delta_exponent < 1.0:
            raise ConfigError("nets.delta_exponent: must lie in (0, 1)")
        self.power_spectrum()
        self.band_window()


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError("unknown key(s): " + ", ".join(_join(path, k) for k in unknown))
    kwargs = {name: _coerce(hints[name], data[name], _join(path, name))
              for name in names if name in data}
    return cls(**kwargs)


def _coerce(hint, value, loc: str):
    if dataclasses.is_dataclass(hint):
        return _build(hint, value, loc)
    origin = typing.get_origin(hint)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{loc}: expected a list")
        (item,) = typing.get_args(hint)
        return [_coerce(item, v, f"{loc}[{i}]") for i, v in enumerate(value)]
    if origin is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{loc}: expected an object")
        _, item = typing.get_args(hint)
        return {str(k): _coerce(item, v, _join(loc, k)) for k, v in value.items()}
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{loc}: expected true or false")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(f"{loc}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{loc}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{loc}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{loc}: unsupported field type {hint}")  # pragma: no cover
