"""Experiment configuration: one JSON document with named blocks.

Every field has a default, so ``{}`` is a valid configuration that runs the
standard operating point (10 mrad signal aperture, 1 mrad scanning slit,
a = 1.35 rad, k = 0.57 / mrad, 50 ns coincidence window). Outputs embed the
fully resolved configuration, and :func:`load_config` accepts such an
output file in place of a configuration.
"""
from __future__ import annotations

import dataclasses
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidModelError, PhasecompError
from .measurement import DetectionConfig
from .optics import MASK_MODES, PhaseMask, mode_masks
from .qkd import QkdConfig
from .source import SourceModel


class ConfigError(PhasecompError):
    """Invalid or unreadable configuration; message carries file:line."""


@dataclass(frozen=True)
class MaskBlock:
    amplitude: float = 1.35
    frequency: float = 0.57
    signal_csv: str | None = None
    idler_csv: str | None = None
    pixel_pitch: float | None = None


@dataclass(frozen=True)
class ScanBlock:
    aperture: float = 1.0
    acquisition_time: float = 6.0


@dataclass(frozen=True)
class GhostBlock:
    signal_aperture: float = 10.0
    idler_aperture: float = 1.0
    acquisition_time: float = 120.0
    direct_time: float = 10.0
    grid_step: float = 0.5
    grid_halfwidth: float = 4.5


@dataclass(frozen=True)
class VisibilityBlock:
    acquisition_time: float = 10.0


@dataclass(frozen=True)
class TomographyBlock:
    flux: float = 10_000.0
    settings: str = "standard16"

    def __post_init__(self):
        if not self.flux > 0:
            raise InvalidModelError("tomography flux must be > 0")
        if self.settings != "standard16":
            raise InvalidModelError("tomography settings must be 'standard16'")


@dataclass(frozen=True)
class ChshBlock:
    angles: list | None = None  # four analyzer angles in rad; None = optimal

    def __post_init__(self):
        if self.angles is not None and (len(self.angles) != 4 or not all(
                isinstance(a, (int, float)) and not isinstance(a, bool) for a in self.angles)):
            raise InvalidModelError("chsh.angles must be four numbers")


@dataclass(frozen=True)
class QkdBlock:
    rounds: int = 10_000
    acquisition_time: float = 1.0
    low_threshold: float | None = None
    high_threshold: float | None = None
    eavesdropper: float = 1.0
    decoder: str = "pair"
    anomaly_limit: float = 0.1
    log_rounds: bool = False


@dataclass(frozen=True)
class CalibrationBlock:
    targets: dict = field(default_factory=lambda: {"none": 0.912, "compensated": 0.888})


def _detection_defaults():
    return DetectionConfig()


BLOCKS = {
    "source": SourceModel,
    "detection": DetectionConfig,
    "masks": MaskBlock,
    "scan": ScanBlock,
    "ghost": GhostBlock,
    "visibility": VisibilityBlock,
    "tomography": TomographyBlock,
    "chsh": ChshBlock,
    "qkd": QkdBlock,
    "calibration": CalibrationBlock,
}
TOP_LEVEL = {"seed": 0, "output": None, "workers": 1}


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceModel = field(default_factory=SourceModel)
    detection: DetectionConfig = field(default_factory=_detection_defaults)
    masks: MaskBlock = field(default_factory=MaskBlock)
    scan: ScanBlock = field(default_factory=ScanBlock)
    ghost: GhostBlock = field(default_factory=GhostBlock)
    visibility: VisibilityBlock = field(default_factory=VisibilityBlock)
    tomography: TomographyBlock = field(default_factory=TomographyBlock)
    chsh: ChshBlock = field(default_factory=ChshBlock)
    qkd: QkdBlock = field(default_factory=QkdBlock)
    calibration: CalibrationBlock = field(default_factory=CalibrationBlock)
    seed: int = 0
    output: str | None = None
    workers: int = 1
    base_dir: str = field(default=".", compare=False)

    def to_dict(self) -> dict:
        doc = {name: _public_fields(getattr(self, name)) for name in BLOCKS}
        doc["detection"].pop("seed", None)
        for key in ("signal_csv", "idler_csv"):
            if doc["masks"][key]:
                doc["masks"][key] = str(self._path(doc["masks"][key]).resolve())
        doc.update(seed=self.seed, output=self.output, workers=self.workers)
        return doc

    def detection_config(self, **changes) -> DetectionConfig:
        return dataclasses.replace(self.detection, seed=self.seed, **changes)

    def qkd_config(self) -> QkdConfig:
        q = self.qkd
        det = self.detection_config(acquisition_time=q.acquisition_time)
        from .measurement import ALPHA, BETA
        det = dataclasses.replace(det, signal_polarizer=ALPHA, idler_polarizer=BETA)
        return QkdConfig(amplitude=self.masks.amplitude, frequency=self.masks.frequency,
                         rounds=q.rounds, detection=det, low_threshold=q.low_threshold,
                         high_threshold=q.high_threshold, eavesdropper=q.eavesdropper,
                         decoder=q.decoder, anomaly_limit=q.anomaly_limit,
                         log_rounds=q.log_rounds, seed=self.seed)

    def signal_object(self) -> PhaseMask:
        m = self.masks
        if m.signal_csv:
            return PhaseMask.from_csv(self._path(m.signal_csv), pixel_pitch=m.pixel_pitch)
        return PhaseMask.sinusoid(m.amplitude, m.frequency, pixel_pitch=m.pixel_pitch)

    def masks_for(self, mode: str):
        """Signal and idler phase objects for a mask mode."""
        m = self.masks
        if not m.signal_csv and not m.idler_csv and m.pixel_pitch is None:
            return mode_masks(mode, m.amplitude, m.frequency)
        from .imaging import compensating_mask
        signal = self.signal_object()
        if m.idler_csv:
            comp = PhaseMask.from_csv(self._path(m.idler_csv), pixel_pitch=m.pixel_pitch)
        else:
            comp = compensating_mask(signal)
        if mode not in MASK_MODES:
            raise InvalidModelError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")
        return {"none": (None, None), "single": (signal, None),
                "compensated": (signal, comp), "anti": (signal, comp.negated())}[mode]

    def _path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path


def _public_fields(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)
            if not f.name.startswith("_")}


def _line_of(text: str, *keys: str) -> int | None:
    """Line (1-based) where the nested key path first appears in ``text``."""
    pos = 0
    for key in keys:
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def _coerce(value, default, where):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or default is None:
        if value is None:
            if default is None:
                return None
            raise TypeError(f"{where}: value may not be null")
        if isinstance(value, bool):
            raise TypeError(f"{where}: expected a number, got {value!r}")
        if isinstance(value, (int, float)):
            return float(value) if isinstance(default, float) else value
        if default is None and isinstance(value, (str, list)):
            return value
        raise TypeError(f"{where}: expected a number, got {value!r}")
    if isinstance(default, str):
        if not isinstance(value, str):
            raise TypeError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, (dict, list)):
        if not isinstance(value, type(default)):
            raise TypeError(f"{where}: expected {type(default).__name__}, got {value!r}")
        return value
    return value


def _build_block(cls, raw, name, text, source):
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}:{_line_of(text, name) or 1}: block '{name}' must be an object")
    defaults = cls()
    known = {f.name for f in dataclasses.fields(cls) if not f.name.startswith("_")}
    if name == "detection":
        known.discard("seed")
    kwargs = {}
    for key, value in raw.items():
        line = _line_of(text, name, key) or _line_of(text, name) or 1
        if key not in known:
            raise ConfigError(f"{source}:{line}: unknown field '{name}.{key}'")
        try:
            kwargs[key] = _coerce(value, getattr(defaults, key), f"{name}.{key}")
        except TypeError as exc:
            raise ConfigError(f"{source}:{line}: {exc}") from None
    try:
        return cls(**kwargs)
    except (InvalidModelError, ValueError, TypeError) as exc:
        # point at the first field the message names, else at the block
        hits = [k for k in raw if re.search(r"\b%s\b" % re.escape(k), str(exc))]
        line = (_line_of(text, name, hits[0]) if hits else None) or _line_of(text, name) or 1
        raise ConfigError(f"{source}:{line}: block '{name}': {exc}") from None


def _extract_embedded(text: str):
    """Configuration embedded in a CSV/JSON output, or None."""
    stripped = text.lstrip()
    if stripped.startswith("#"):
        for line in stripped.splitlines():
            if line.startswith("# config: "):
                return line[len("# config: "):]
        return None
    return None


def parse_config(text: str, source: str = "<config>", base_dir: str = ".") -> ExperimentConfig:
    embedded = _extract_embedded(text)
    if embedded is not None:
        text = embedded
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(doc, dict) and "config" in doc and isinstance(doc.get("config"), dict) \
            and "command" in doc:
        doc = doc["config"]
        text = json.dumps(doc)
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: configuration must be a JSON object")
    kwargs = {"base_dir": base_dir}
    for key, value in doc.items():
        if key in BLOCKS:
            kwargs[key] = _build_block(BLOCKS[key], value, key, text, source)
        elif key in TOP_LEVEL:
            line = _line_of(text, key) or 1
            try:
                kwargs[key] = _coerce(value, TOP_LEVEL[key], key)
            except TypeError as exc:
                raise ConfigError(f"{source}:{line}: {exc}") from None
        else:
            raise ConfigError(f"{source}:{_line_of(text, key) or 1}: unknown block '{key}'")
    cfg = ExperimentConfig(**kwargs)
    _check_files(cfg, text, source)
    try:
        cfg.qkd_config()
    except InvalidModelError as exc:
        raise ConfigError(f"{source}:{_line_of(text, 'qkd') or 1}: block 'qkd': {exc}") from None
    return cfg


def _check_files(cfg: ExperimentConfig, text: str, source: str):
    for key in ("signal_csv", "idler_csv"):
        p = getattr(cfg.masks, key)
        if p and not cfg._path(p).is_file():
            line = _line_of(text, "masks", key) or 1
            raise ConfigError(f"{source}:{line}: masks.{key}: file not found: {p}")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration: {exc.strerror}") from None
    return parse_config(text, str(path), str(path.parent))
