"""Key distribution by nonlocal phase compensation.

Alice (signal arm) and Bob (idler arm) each pick a random sign for the
mask +-a*sin(k*theta); Alice adds a constant phase 0 or pi to encode her
bit. Matched signs compensate and leave a highly entangled state, so the
coincidence rate at crossed diagonal polarizers is high for bit 1 and low
for bit 0; mismatched signs give an intermediate rate and are sifted out.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidModelError
from .measurement import (ALPHA, BETA, DetectionConfig, counts_from_probability,
                          probability_from_coherence, substream)
from .optics import PhaseMask
from .source import SourceModel
from .quadrature import density_mass
from .state import epsilon

HIGH, LOW, INTERMEDIATE = "High", "Low", "Intermediate"
DECODERS = ("pair", "rate")


def _default_detection():
    return DetectionConfig(signal_polarizer=ALPHA, idler_polarizer=BETA,
                           acquisition_time=1.0)


@dataclass(frozen=True)
class QkdConfig:
    """Protocol parameters.

    ``eavesdropper`` multiplies the coherence (1 = no eavesdropper, 0 =
    complete dephasing). Thresholds are net coincidence rates in counts/s;
    None selects midpoints between the expected rates. ``decoder`` picks how
    sifted bits are read: ``pair`` uses one analyzed pair per round
    (both analyzer outputs), ``rate`` uses the thresholded coincidence rate.
    """

    amplitude: float = 1.35
    frequency: float = 0.57
    rounds: int = 10_000
    detection: DetectionConfig = field(default_factory=_default_detection)
    low_threshold: float | None = None
    high_threshold: float | None = None
    eavesdropper: float = 1.0
    decoder: str = "pair"
    anomaly_limit: float = 0.1
    log_rounds: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise InvalidModelError("rounds must be >= 1")
        if not 0.0 <= self.eavesdropper <= 1.0:
            raise InvalidModelError("eavesdropper factor must lie in [0, 1]")
        if (self.low_threshold is not None and self.high_threshold is not None
                and not self.low_threshold < self.high_threshold):
            raise InvalidModelError("low_threshold must be below high_threshold")
        if self.decoder not in DECODERS:
            raise InvalidModelError(f"decoder must be one of {DECODERS}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class QkdRound:
    alice_sign: int
    bob_sign: int
    key_bit: int
    raw: int
    accidentals: float
    duration: float
    classification: str
    anticorrelated: bool  # outcome of the single analyzed pair
    sifted: bool
    decoded: int | None

    @property
    def rate(self) -> float:
        return (self.raw - self.accidentals) / self.duration


class QkdChannel:
    """Caches the coherence of each (Alice sign, Bob sign, bit) configuration."""

    def __init__(self, model: SourceModel, cfg: QkdConfig):
        self.model = model
        self.cfg = cfg
        self._eps = {}
        det = cfg.detection
        self._windows = (det.signal_window, det.idler_window)
        self.mass = density_mass(model, *self._windows)
        low, high = self.default_thresholds()
        self.low = low if cfg.low_threshold is None else cfg.low_threshold
        self.high = high if cfg.high_threshold is None else cfg.high_threshold
        if not self.low < self.high:
            raise InvalidModelError(f"thresholds not ordered: {self.low} >= {self.high}")

    def masks(self, alice_sign, bob_sign, key_bit):
        base = PhaseMask.sinusoid(self.cfg.amplitude, self.cfg.frequency)
        alice = PhaseMask.sinusoid(self.cfg.amplitude, self.cfg.frequency, sign=alice_sign,
                                   offset=math.pi if key_bit else 0.0)
        bob = base if bob_sign > 0 else base.negated()
        return alice, bob

    def coherence(self, alice_sign, bob_sign, key_bit, eavesdropper=None) -> float:
        """Re epsilon of the round, including the eavesdropper factor."""
        key = (alice_sign, bob_sign)
        if key not in self._eps:
            a, b = self.masks(alice_sign, bob_sign, 0)
            self._eps[key] = epsilon(self.model, a, b, *self._windows).value
        eps = self._eps[key] * (-1.0 if key_bit else 1.0)
        factor = self.cfg.eavesdropper if eavesdropper is None else eavesdropper
        return float(np.real(eps)) * factor

    def expected_rate(self, alice_sign, bob_sign, key_bit, eavesdropper=None) -> float:
        det = self.cfg.detection
        p = probability_from_coherence(det.signal_polarizer, det.idler_polarizer, self.mass,
                                       self.coherence(alice_sign, bob_sign, key_bit, eavesdropper))
        return det.pair_rate * p

    def default_thresholds(self) -> tuple[float, float]:
        """Midpoints between the expected Low, Intermediate and High rates."""
        high = self.expected_rate(1, 1, 1, eavesdropper=1.0)
        low = self.expected_rate(1, 1, 0, eavesdropper=1.0)
        mid = [self.expected_rate(1, -1, b, eavesdropper=1.0) for b in (0, 1)]
        return 0.5 * (low + min(mid)), 0.5 * (max(mid) + high)

    def classify(self, rate: float) -> str:
        if rate >= self.high:
            return HIGH
        if rate <= self.low:
            return LOW
        return INTERMEDIATE


def run_round(channel: QkdChannel, alice_sign: int, bob_sign: int, key_bit: int,
              rng: np.random.Generator) -> QkdRound:
    det = channel.cfg.detection
    coh = channel.coherence(alice_sign, bob_sign, key_bit)
    p = probability_from_coherence(det.signal_polarizer, det.idler_polarizer, channel.mass, coh)
    rec = counts_from_probability(p, det, rng)
    anti = bool(rng.random() < 0.5 * (1.0 - coh))
    cls = channel.classify(rec.net / rec.duration)
    sifted = alice_sign == bob_sign
    decoded = None
    if sifted:
        if channel.cfg.decoder == "pair":
            decoded = int(anti)
        elif cls != INTERMEDIATE:
            decoded = 1 if cls == HIGH else 0
    return QkdRound(alice_sign, bob_sign, key_bit, rec.raw, rec.accidentals, rec.duration,
                    cls, anti, sifted, decoded)


@dataclass
class SessionReport:
    rounds: list
    low_threshold: float
    high_threshold: float
    anomaly_limit: float

    @property
    def sifted(self) -> list:
        return [r for r in self.rounds if r.sifted]

    @property
    def sifted_fraction(self) -> float:
        return len(self.sifted) / len(self.rounds)

    @property
    def decoded_key(self) -> list:
        return [r.decoded for r in self.sifted if r.decoded is not None]

    @property
    def qber(self) -> float:
        pairs = [(r.key_bit, r.decoded) for r in self.sifted if r.decoded is not None]
        return sum(a != b for a, b in pairs) / len(pairs) if pairs else math.nan

    @property
    def qber_pair(self) -> float:
        s = self.sifted
        return sum(int(r.anticorrelated) != r.key_bit for r in s) / len(s) if s else math.nan

    @property
    def qber_rate(self) -> float:
        s = [r for r in self.sifted if r.classification != INTERMEDIATE]
        return (sum((r.classification == HIGH) != bool(r.key_bit) for r in s) / len(s)
                if s else math.nan)

    @property
    def anomaly_fraction(self) -> float:
        s = self.sifted
        return sum(r.classification == INTERMEDIATE for r in s) / len(s) if s else math.nan

    @property
    def flagged(self) -> bool:
        return bool(self.anomaly_fraction > self.anomaly_limit)

    def mean_rates(self) -> dict:
        """Mean net rate per configuration label such as [+-/1]."""
        groups = {}
        for r in self.rounds:
            label = f"[{'+' if r.alice_sign > 0 else '-'}{'+' if r.bob_sign > 0 else '-'}/{r.key_bit}]"
            groups.setdefault(label, []).append(r.rate)
        return {k: float(np.mean(v)) for k, v in sorted(groups.items())}

    def to_dict(self, include_rounds=False) -> dict:
        doc = {
            "rounds": len(self.rounds),
            "sifted_length": len(self.sifted),
            "sifted_fraction": self.sifted_fraction,
            "decoded_key": "".join(str(b) for b in self.decoded_key),
            "qber": self.qber,
            "qber_pair": self.qber_pair,
            "qber_rate": self.qber_rate,
            "anomaly_fraction": self.anomaly_fraction,
            "flagged": self.flagged,
            "thresholds": {"low": self.low_threshold, "high": self.high_threshold},
            "mean_rates": self.mean_rates(),
        }
        if include_rounds:
            doc["round_log"] = [round_row(i, r) for i, r in enumerate(self.rounds)]
        return doc


def round_row(i: int, r: QkdRound) -> dict:
    return {"round": i, "alice_sign": "+" if r.alice_sign > 0 else "-",
            "bob_sign": "+" if r.bob_sign > 0 else "-", "bit": r.key_bit,
            "rate": r.rate, "class": r.classification, "sifted": int(r.sifted),
            "decoded": "" if r.decoded is None else r.decoded}


def run_session(model: SourceModel, cfg: QkdConfig, key=None) -> SessionReport:
    """Run ``cfg.rounds`` rounds with independent fair sign choices.

    ``key`` fixes Alice's bit per round (sequence of 0/1, cycled); otherwise
    bits are random. Round ``i`` draws everything from ``substream(seed, i)``.
    """
    channel = QkdChannel(model, cfg)
    key = None if key is None else [int(b) for b in key]
    rounds = []
    for i in range(cfg.rounds):
        rng = substream(cfg.seed, i)
        alice = 1 if rng.random() < 0.5 else -1
        bob = 1 if rng.random() < 0.5 else -1
        bit = int(rng.random() < 0.5)
        if key:
            bit = key[i % len(key)]
        rounds.append(run_round(channel, alice, bob, bit, rng))
    return SessionReport(rounds, channel.low, channel.high, cfg.anomaly_limit)
