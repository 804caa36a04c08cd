"""Fit the dephasing floor and correlation width to measured visibilities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DomainError, NumericalError
from .optics import MASK_MODES, mode_masks
from .source import SourceModel
from .state import epsilon

SIGMA_BOUNDS = (1e-3, 5.0)


def predicted_visibility(model: SourceModel, mode: str, amplitude=1.35, frequency=0.57) -> float:
    """Visibility Re(epsilon) for one of the four mask configurations."""
    phi_s, phi_i = mode_masks(mode, amplitude, frequency)
    return epsilon(model, phi_s, phi_i).real


@dataclass
class Calibration:
    model: SourceModel
    targets: dict
    residuals: dict
    predictions: dict
    cost: float

    def to_dict(self) -> dict:
        return {"v0": self.model.v0, "sigma_corr": self.model.sigma_corr,
                "targets": self.targets, "residuals": self.residuals,
                "predictions": self.predictions, "cost": self.cost}


def calibrate(model: SourceModel, targets: dict, amplitude=1.35, frequency=0.57,
              xtol=1e-10) -> Calibration:
    """Least-squares fit of (v0, sigma_corr) to ``{mode: visibility}`` targets.

    Modes are those of :func:`~phasecomp.optics.mode_masks`. After the fit
    the visibility of every mode is predicted from the fitted model.
    """
    if not targets:
        raise DomainError("calibration needs at least one target visibility")
    for mode in targets:
        if mode not in MASK_MODES:
            raise DomainError(f"unknown calibration target {mode!r}")
    modes = sorted(targets)

    def residuals(x):
        m = model.with_(v0=float(x[0]), sigma_corr=float(x[1]))
        return np.array([predicted_visibility(m, k, amplitude, frequency) - targets[k]
                         for k in modes])

    x0 = np.array([model.v0, np.clip(model.sigma_corr, *SIGMA_BOUNDS)])
    fit = optimize.least_squares(residuals, x0, bounds=([0.0, SIGMA_BOUNDS[0]],
                                                        [1.0, SIGMA_BOUNDS[1]]),
                                 xtol=xtol, ftol=1e-12, gtol=1e-12, diff_step=1e-6)
    if fit.status <= 0:
        raise NumericalError(f"calibration failed: {fit.message}")
    fitted = model.with_(v0=float(fit.x[0]), sigma_corr=float(fit.x[1]))
    res = dict(zip(modes, map(float, fit.fun)))
    preds = {k: predicted_visibility(fitted, k, amplitude, frequency) for k in MASK_MODES}
    return Calibration(fitted, dict(targets), res, preds, float(fit.cost))
