"""SPDC pair source: joint angular density, angle-frequency relation and
the decoherence phase carried by the VV component.

All angles are in mrad, measured as shifts from the central emission
angles of the two arms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidModelError

# Beyond this many kernel widths the correlation kernel is treated as zero.
KERNEL_CUTOFF = 12.0


@dataclass(frozen=True)
class SourceModel:
    """Parameters of the two-photon source.

    ``sigma_corr`` and ``v0`` default to the values obtained by calibrating
    against the baseline (0.912) and compensated (0.888) visibilities.
    ``gamma`` is in mrad per nm of signal wavelength shift.
    """

    theta_central_signal: float = 3.0  # deg
    theta_central_idler: float = 3.0  # deg
    gamma: float = 0.1126  # sigma_corr over the 10 nm FWHM standard deviation
    sigma_corr: float = 0.47824  # mrad
    envelope_halfwidth: float = 5.0  # mrad
    eta: float = 0.7  # rad / mrad
    phi0: float = 0.0  # rad
    v0: float = 0.912

    def __post_init__(self):
        if not self.sigma_corr > 0:
            raise InvalidModelError(f"sigma_corr must be > 0, got {self.sigma_corr}")
        if not self.envelope_halfwidth > 0:
            raise InvalidModelError(
                f"envelope_halfwidth must be > 0, got {self.envelope_halfwidth}"
            )
        if not 0.0 <= self.v0 <= 1.0:
            raise InvalidModelError(f"v0 must lie in [0, 1], got {self.v0}")

    def with_(self, **changes) -> "SourceModel":
        return replace(self, **changes)

    @property
    def norm(self) -> float:
        """Integral of envelope x kernel pdf over the envelope square."""
        return _kernel_norm(self.sigma_corr, 2.0 * self.envelope_halfwidth)


def _norm_pdf(x, sigma):
    return np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))


def _kernel_norm(sigma: float, span: float) -> float:
    # int_{-L}^{L} (L - |s|) pdf(s) ds with L = span
    tail = 0.5 * math.erf(span / (sigma * math.sqrt(2.0)))
    pdf0 = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    pdfl = pdf0 * math.exp(-0.5 * (span / sigma) ** 2)
    return 2.0 * (span * tail - sigma**2 * (pdf0 - pdfl))


def kernel(model: SourceModel, s):
    """Normalized joint density as a function of the angle sum only.

    Valid inside the envelope square; used by the quadrature layer which
    integrates in (theta, theta + theta') coordinates.
    """
    return _norm_pdf(s, model.sigma_corr) / model.norm


def angular_density(model: SourceModel, theta, theta_prime):
    """|g(theta, theta')|^2, normalized to unit mass over the envelope."""
    theta = np.asarray(theta, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    h = model.envelope_halfwidth
    inside = (np.abs(theta) <= h) & (np.abs(theta_prime) <= h)
    value = np.where(inside, kernel(model, theta + theta_prime), 0.0)
    return value[()] if value.ndim == 0 else value


def spectral_shift(model: SourceModel, theta, theta_prime):
    """Signal frequency shift implied by theta' = -theta + gamma * omega."""
    if model.gamma == 0:
        raise InvalidModelError("gamma must be nonzero to invert the angle-frequency relation")
    return (np.asarray(theta) + np.asarray(theta_prime)) / model.gamma


def decoherence_phase(model: SourceModel, theta, theta_prime):
    """First-order angle-dependent phase eta*(theta - theta') + phi0."""
    return model.eta * (np.asarray(theta) - np.asarray(theta_prime)) + model.phi0


def sample_pairs(model: SourceModel, rng: np.random.Generator, n: int):
    """Draw ``n`` emission-angle pairs from the normalized angular density.

    The angle sum is drawn from the Gaussian kernel weighted by the length
    of the envelope cross-section at that sum (rejection), and the angle
    difference uniformly across that cross-section.
    """
    span = 2.0 * model.envelope_halfwidth
    sums = np.empty(0)
    while sums.size < n:
        need = n - sums.size
        batch = max(16, int(need * 1.3) + 16)
        s = rng.normal(0.0, model.sigma_corr, batch)
        u = rng.random(batch)
        keep = u * span < span - np.abs(s)
        sums = np.concatenate([sums, s[keep]])
    sums = sums[:n]
    half = span - np.abs(sums)
    diffs = rng.uniform(-1.0, 1.0, n) * half
    return 0.5 * (sums + diffs), 0.5 * (sums - diffs)


def sample_pair(model: SourceModel, rng: np.random.Generator) -> tuple[float, float]:
    theta, theta_prime = sample_pairs(model, rng, 1)
    return float(theta[0]), float(theta_prime[0])
