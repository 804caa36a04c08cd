"""Coincidence probabilities, Poisson count simulation and visibility."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import DomainError, InvalidModelError
from .quadrature import window_integral
from .source import SourceModel

ALPHA = math.pi / 4
BETA = 3 * math.pi / 4


@dataclass(frozen=True)
class DetectionConfig:
    """Slits, polarizers and count-rate calibration for one measurement.

    Polarizer angles are in rad from H; None removes the polarizer (the
    polarization factor is then 1, as for the HH projection). ``pair_rate``
    is the detected pair rate when the whole envelope is collected.
    """

    signal_center: float = 0.0  # mrad
    idler_center: float = 0.0  # mrad
    signal_aperture: float = 10.0  # mrad
    idler_aperture: float = 10.0  # mrad
    signal_polarizer: float | None = ALPHA
    idler_polarizer: float | None = ALPHA
    acquisition_time: float = 1.0  # s
    coincidence_window: float = 50e-9  # s
    pair_rate: float = 1000.0  # pairs/s
    singles_signal: float = 5000.0  # counts/s
    singles_idler: float = 5000.0  # counts/s
    seed: int = 0

    def __post_init__(self):
        if not (self.signal_aperture > 0 and self.idler_aperture > 0):
            raise InvalidModelError("slit apertures must be positive")
        if not (self.acquisition_time > 0 and self.coincidence_window > 0):
            raise InvalidModelError("acquisition time and coincidence window must be positive")
        if min(self.pair_rate, self.singles_signal, self.singles_idler) < 0:
            raise InvalidModelError("rates must be non-negative")

    @property
    def signal_window(self):
        return (self.signal_center - self.signal_aperture / 2,
                self.signal_center + self.signal_aperture / 2)

    @property
    def idler_window(self):
        return (self.idler_center - self.idler_aperture / 2,
                self.idler_center + self.idler_aperture / 2)

    def with_(self, **changes) -> "DetectionConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CoincidenceRecord:
    raw: int
    accidentals: float
    duration: float

    @property
    def net(self) -> float:
        return self.raw - self.accidentals

    @property
    def variance(self) -> float:
        # raw is Poisson; the accidental estimate is a fixed formula
        return float(self.raw)


def polarization_weights(p: float | None, pp: float | None) -> tuple[float, float]:
    """(population weight, interference weight) of |cPcP' + e^{iPhi} sPsP'|^2."""
    if p is None or pp is None:
        return 1.0, 0.0
    c = math.cos(p) * math.cos(pp)
    s = math.sin(p) * math.sin(pp)
    return c * c + s * s, 2.0 * c * s


def probability_from_coherence(p, pp, mass: float, coherence: float) -> float:
    """Pair-detection probability from window mass and Re coherence.

    The factor 1/2 is the weight of each polarization component in the
    normalized two-photon state.
    """
    pop, inter = polarization_weights(p, pp)
    return 0.5 * (pop * mass + inter * coherence)


def coincidence_probability(model: SourceModel, phase, cfg: DetectionConfig,
                            dephasing: float = 1.0) -> float:
    """Probability that a pair lands in both slit windows and passes both polarizers.

    ``phase(theta, theta')`` is the total relative phase (for example a
    :class:`~phasecomp.optics.PhaseLayout`). The interference term is
    scaled by ``model.v0 * dephasing``.
    """
    sw, iw = cfg.signal_window, cfg.idler_window
    mass, _ = window_integral(model, None, sw, iw)
    pop, inter = polarization_weights(cfg.signal_polarizer, cfg.idler_polarizer)
    coherence = 0.0
    if inter != 0.0:
        coherence, _ = window_integral(model, lambda t, tp: np.cos(phase(t, tp)), sw, iw)
        coherence *= model.v0 * dephasing
    return 0.5 * (pop * mass + inter * coherence)


def expected_accidentals(cfg: DetectionConfig) -> float:
    return cfg.singles_signal * cfg.singles_idler * cfg.coincidence_window * cfg.acquisition_time


def counts_from_probability(probability: float, cfg: DetectionConfig,
                            rng: np.random.Generator) -> CoincidenceRecord:
    true_mean = cfg.pair_rate * probability * cfg.acquisition_time
    acc_mean = expected_accidentals(cfg)
    raw = int(rng.poisson(max(true_mean, 0.0))) + int(rng.poisson(acc_mean))
    return CoincidenceRecord(raw=raw, accidentals=acc_mean, duration=cfg.acquisition_time)


def simulate_counts(model: SourceModel, phase, cfg: DetectionConfig, rng=None,
                    dephasing: float = 1.0) -> CoincidenceRecord:
    """One acquisition: Poisson true coincidences plus Poisson accidentals.

    Without an explicit generator the stream is seeded from ``cfg.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p = coincidence_probability(model, phase, cfg, dephasing)
    return counts_from_probability(p, cfg, rng)


@dataclass(frozen=True)
class Visibility:
    value: float
    stderr: float


def visibility(c_max: CoincidenceRecord, c_min: CoincidenceRecord) -> Visibility:
    """(C_max - C_min) / (C_max + C_min) on net counts with Poisson error."""
    a, b = c_max.net, c_min.net
    total = a + b
    if total == 0:
        raise DomainError("visibility undefined: net counts sum to zero")
    v = (a - b) / total
    err = 2.0 / total**2 * math.sqrt(b * b * c_max.variance + a * a * c_min.variance)
    return Visibility(float(v), float(err))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for grid point / round ``key`` of a run."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _pmap(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def scan(model: SourceModel, phase, base_cfg: DetectionConfig, axis: str, grid,
         workers: int = 1):
    """Move one slit across ``grid`` (mrad); one simulated record per point.

    Point ``i`` draws from ``substream(seed, i)`` so results do not depend
    on evaluation order or worker count.
    """
    grid = list(grid)
    if not grid:
        raise DomainError("scan grid is empty")
    if axis not in ("signal", "idler"):
        raise DomainError(f"axis must be 'signal' or 'idler', got {axis!r}")
    field_name = f"{axis}_center"

    def point(item):
        i, x = item
        cfg = replace(base_cfg, **{field_name: float(x)})
        return float(x), simulate_counts(model, phase, cfg, substream(base_cfg.seed, i))

    return _pmap(point, list(enumerate(grid)), workers)


def scan_2d(model: SourceModel, phase, base_cfg: DetectionConfig, signal_grid, idler_grid,
            workers: int = 1):
    """Raster both slits; returns ``(theta0, theta0', record)`` in row-major order."""
    signal_grid, idler_grid = list(signal_grid), list(idler_grid)
    if not signal_grid or not idler_grid:
        raise DomainError("scan grid is empty")
    items = [(i, j, x, y) for i, x in enumerate(signal_grid) for j, y in enumerate(idler_grid)]

    def point(item):
        i, j, x, y = item
        cfg = replace(base_cfg, signal_center=float(x), idler_center=float(y))
        rec = simulate_counts(model, phase, cfg, substream(base_cfg.seed, i, j))
        return float(x), float(y), rec

    return _pmap(point, items, workers)


def slit_grid(aperture: float = 1.0) -> list[float]:
    """Slit positions -2D, -1.5D, ..., +2D for slit aperture D."""
    return [aperture * (-2.0 + 0.5 * i) for i in range(9)]
