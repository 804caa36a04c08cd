"""SLM phase masks and composition of the total relative phase."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DomainError, InvalidModelError
from .source import SourceModel, decoherence_phase


@dataclass(frozen=True)
class PhaseMask:
    """One-dimensional phase function phi(theta), theta in mrad, phi in rad.

    Analytic masks evaluate ``sign*amplitude*sin(frequency*theta)
    + slope*theta + offset``. Sampled masks (``grid``/``values`` set)
    interpolate linearly and refuse to extrapolate. With ``pixel_pitch``
    set, the phase is held at its pixel-center value across each pixel,
    with pixel boundaries at integer multiples of the pitch.
    """

    amplitude: float = 0.0
    frequency: float = 0.0
    offset: float = 0.0
    sign: int = 1
    slope: float = 0.0
    grid: tuple | None = None
    values: tuple | None = None
    pixel_pitch: float | None = None
    _arrays: tuple | None = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise InvalidModelError(f"mask sign must be +1 or -1, got {self.sign}")
        if self.pixel_pitch is not None and not self.pixel_pitch > 0:
            raise InvalidModelError("pixel_pitch must be positive")
        if (self.grid is None) != (self.values is None):
            raise InvalidModelError("sampled masks need both grid and values")
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float)
            values = np.asarray(self.values, dtype=float)
            if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
                raise InvalidModelError("grid and values must be 1-D of equal length >= 2")
            if np.any(np.diff(grid) <= 0):
                raise InvalidModelError("mask grid must be strictly increasing")
            object.__setattr__(self, "grid", tuple(grid.tolist()))
            object.__setattr__(self, "values", tuple(values.tolist()))
            object.__setattr__(self, "_arrays", (grid, values))

    @classmethod
    def sinusoid(cls, amplitude, frequency, *, sign=1, offset=0.0, pixel_pitch=None):
        return cls(amplitude=amplitude, frequency=frequency, sign=sign,
                   offset=offset, pixel_pitch=pixel_pitch)

    @classmethod
    def sampled(cls, grid, values, *, pixel_pitch=None):
        return cls(grid=tuple(grid), values=tuple(values), pixel_pitch=pixel_pitch)

    @classmethod
    def from_csv(cls, path, *, pixel_pitch=None):
        """Load a two-column ``theta_mrad,phi_rad`` table (header required)."""
        path = Path(path)
        with path.open(newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        if not rows or [c.strip() for c in rows[0]] != ["theta_mrad", "phi_rad"]:
            raise InvalidModelError(f"{path}: expected header 'theta_mrad,phi_rad'")
        try:
            data = [(float(a), float(b)) for a, b in rows[1:]]
        except ValueError as exc:
            raise InvalidModelError(f"{path}: {exc}") from None
        grid, values = zip(*data) if data else ((), ())
        return cls.sampled(grid, values, pixel_pitch=pixel_pitch)

    @property
    def is_sampled(self) -> bool:
        return self.grid is not None

    def negated(self) -> "PhaseMask":
        if self.is_sampled:
            return replace(self, values=tuple(-v for v in self.values), _arrays=None)
        return replace(self, sign=-self.sign, slope=-self.slope, offset=-self.offset)

    def with_offset(self, offset: float) -> "PhaseMask":
        """Same mask plus a constant phase (sampled masks are shifted pointwise)."""
        if self.is_sampled:
            return replace(self, values=tuple(v + offset for v in self.values), _arrays=None)
        return replace(self, offset=self.offset + offset)

    def __call__(self, theta):
        return eval_mask(self, theta)


ZERO_MASK = PhaseMask()


def eval_mask(mask: PhaseMask, theta):
    theta = np.asarray(theta, dtype=float)
    if mask.pixel_pitch is not None:
        p = mask.pixel_pitch
        theta = (np.floor(theta / p) + 0.5) * p
    if mask.is_sampled:
        grid, values = mask._arrays
        if mask.pixel_pitch is not None:
            theta = np.clip(theta, grid[0], grid[-1])
        elif np.any((theta < grid[0]) | (theta > grid[-1])):
            raise DomainError(
                f"theta outside sampled mask range [{grid[0]}, {grid[-1]}] mrad"
            )
        out = np.interp(theta, grid, values)
    else:
        out = (mask.sign * mask.amplitude * np.sin(mask.frequency * theta)
               + mask.slope * theta + mask.offset)
    return out[()] if np.ndim(out) == 0 else out


def purification_mask(model: SourceModel, pixel_pitch=None) -> tuple[PhaseMask, PhaseMask]:
    """Per-arm masks summing to -Phi_D(theta, theta').

    Phi_D is linear and separable, so the signal arm carries
    ``-eta*theta - phi0`` and the idler arm ``+eta*theta'``.
    """
    signal = PhaseMask(slope=-model.eta, offset=-model.phi0, pixel_pitch=pixel_pitch)
    idler = PhaseMask(slope=model.eta, pixel_pitch=pixel_pitch)
    return signal, idler


def total_phase(model, pur, phi_s, phi_i, theta, theta_prime):
    """Phi_D + Phi_pur + phi_s(theta) + phi_i(theta').

    ``pur`` is the (signal, idler) pair from :func:`purification_mask` or
    None for an unpurified source; ``phi_s``/``phi_i`` may be None.
    """
    phase = decoherence_phase(model, theta, theta_prime)
    if pur is not None:
        phase = phase + eval_mask(pur[0], theta) + eval_mask(pur[1], theta_prime)
    if phi_s is not None:
        phase = phase + eval_mask(phi_s, theta)
    if phi_i is not None:
        phase = phase + eval_mask(phi_i, theta_prime)
    return phase


@dataclass(frozen=True)
class PhaseLayout:
    """Everything the SLM imposes on both beams, as a callable Phi(theta, theta').

    By default the source is purified with continuous masks; set
    ``purify=False`` to leave the decoherence phase in place.
    """

    model: SourceModel
    signal: PhaseMask | None = None
    idler: PhaseMask | None = None
    purify: bool = True
    pur_pitch: float | None = None

    @property
    def purification(self):
        return purification_mask(self.model, self.pur_pitch) if self.purify else None

    def __call__(self, theta, theta_prime):
        pur = self.purification
        # Continuous purification cancels exactly; skip the round-off.
        if pur is not None and self.pur_pitch is None:
            phase = np.zeros(np.broadcast(np.asarray(theta), np.asarray(theta_prime)).shape)
            if self.signal is not None:
                phase = phase + eval_mask(self.signal, theta)
            if self.idler is not None:
                phase = phase + eval_mask(self.idler, theta_prime)
            return phase[()] if phase.ndim == 0 else phase
        return total_phase(self.model, pur, self.signal, self.idler, theta, theta_prime)


MASK_MODES = ("none", "single", "compensated", "anti")


def mode_masks(mode: str, amplitude: float, frequency: float) -> tuple[PhaseMask | None, PhaseMask | None]:
    """Signal/idler phase objects for the four experiment configurations.

    ``compensated`` puts the same function on both arms, which cancels on the
    theta' = -theta ridge; ``anti`` puts its negative on the idler.
    """
    obj = PhaseMask.sinusoid(amplitude, frequency)
    if mode == "none":
        return None, None
    if mode == "single":
        return obj, None
    if mode == "compensated":
        return obj, obj
    if mode == "anti":
        return obj, obj.negated()
    raise InvalidModelError(f"unknown mask mode {mode!r}; expected one of {MASK_MODES}")


def grid_sinusoid(amplitude, frequency, spacing, halfwidth) -> PhaseMask:
    """Sampled version of ``amplitude*sin(frequency*theta)`` on a regular grid."""
    n = int(round(2 * halfwidth / spacing)) + 1
    grid = np.linspace(-halfwidth, halfwidth, n)
    return PhaseMask.sampled(grid, amplitude * np.sin(frequency * grid))

