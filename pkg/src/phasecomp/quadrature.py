"""Adaptive integration of functions against the joint angular density.

The density is a narrow ridge along theta' = -theta, so integrals are done
in (theta, s = theta + theta') coordinates: the outer adaptive pass runs
over the signal window and the inner one over the few kernel widths of
``s`` that fall inside the idler window. The Jacobian of the map is 1.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate

from .errors import NumericalError
from .source import KERNEL_CUTOFF, SourceModel, kernel

EPSABS = 1e-10
EPSREL = 1e-10
LIMIT = 200


_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)


def _panel_rule(model, func, theta, a, b):
    """Composite Gauss-Legendre over [a, b] with panels no wider than sigma.

    The error estimate is the difference between the 20- and 10-node rules.
    """
    n = max(2, int(math.ceil((b - a) / model.sigma_corr)))
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1] - edges[0])
    out = []
    for x, w in (_GL_HI, _GL_LO):
        s = (mid + half * x[None, :]).ravel()
        vals = kernel(model, s)
        if func is not None:
            vals = vals * func(theta, s - theta)
        out.append(half * np.sum(np.tile(w, n) * vals))
    return out[0], abs(out[0] - out[1])


def _clip(window, h):
    lo, hi = (-h, h) if window is None else window
    return max(lo, -h), min(hi, h)


def window_integral(model: SourceModel, func=None, signal_window=None, idler_window=None,
                    *, complex_valued=False, epsabs=EPSABS, epsrel=EPSREL, method="panel"):
    """Integrate ``func(theta, theta') * |g|^2`` over a rectangle of slit windows.

    Windows are ``(lo, hi)`` in mrad, clipped to the envelope; None means the
    whole envelope. ``func=None`` integrates the density itself.
    ``method="panel"`` evaluates the inner integral with a vectorized
    composite Gauss-Legendre rule; ``"nested"`` uses adaptive quadrature in
    both directions (slower, used as a cross-check).
    Returns ``(value, error_estimate)``. If the adaptive pass reports
    non-convergence the fixed-grid fallback is tried, which raises
    NumericalError when it cannot reach 1e-8 either.
    """
    h = model.envelope_halfwidth
    s_lo, s_hi = _clip(signal_window, h)
    i_lo, i_hi = _clip(idler_window, h)
    if s_hi <= s_lo or i_hi <= i_lo:
        return (0j if complex_valued else 0.0), 0.0
    cut = KERNEL_CUTOFF * model.sigma_corr
    inner_err = [0.0]

    def inner(theta):
        a = max(theta + i_lo, -cut)
        b = min(theta + i_hi, cut)
        if b <= a:
            return 0.0
        if method == "nested":
            if func is None:
                f = lambda s: kernel(model, s)
            else:
                f = lambda s: kernel(model, s) * func(theta, s - theta)
            points = [0.0] if a < 0.0 < b else None
            val, err = integrate.quad(f, a, b, points=points, epsabs=epsabs * 0.1,
                                      epsrel=epsrel, limit=LIMIT, complex_func=complex_valued)
        else:
            val, err = _panel_rule(model, func, theta, a, b)
        inner_err[0] = max(inner_err[0], abs(err))
        return val

    # Kinks of the outer integrand: where the kernel support enters or
    # leaves the idler window.
    breaks = set()
    for edge in (i_lo, i_hi):
        for off in (-cut, 0.0, cut):
            t = off - edge
            if s_lo < t < s_hi:
                breaks.add(t)
    points = sorted(breaks) or None

    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(inner, s_lo, s_hi, points=points, epsabs=epsabs,
                                      epsrel=epsrel, limit=LIMIT, complex_func=complex_valued)
        except integrate.IntegrationWarning:
            return richardson_grid_integral(model, func, (s_lo, s_hi), (i_lo, i_hi))
    total_err = abs(err) + inner_err[0] * (s_hi - s_lo)
    return val, total_err


def density_mass(model: SourceModel, signal_window=None, idler_window=None) -> float:
    """Probability mass of the density inside the slit windows (1 for the envelope)."""
    if signal_window is None and idler_window is None:
        return 1.0
    return window_integral(model, None, signal_window, idler_window)[0]


def fixed_grid_integral(model: SourceModel, func, n=1000, signal_window=None, idler_window=None):
    """Tensor-product midpoint rule on an ``n x n`` grid over the windows."""
    h = model.envelope_halfwidth

    def mid(window):
        lo, hi = _clip(window, h)
        step = (hi - lo) / n
        return lo + step * (np.arange(n) + 0.5), step

    ts, ds = mid(signal_window)
    ti, di = mid(idler_window)
    T, TP = np.meshgrid(ts, ti, indexing="ij")
    w = kernel(model, T + TP) * ds * di
    return np.sum(w if func is None else w * func(T, TP))


def richardson_grid_integral(model: SourceModel, func, signal_window=None, idler_window=None,
                             n=500, tol=1e-8):
    """Fixed-grid fallback: midpoint rules at n, 2n and 4n, Richardson-extrapolated.

    The midpoint error is O(h^2), so two extrapolations are formed from
    consecutive levels and their difference is the error estimate. Raises
    NumericalError when it exceeds ``tol``.
    """
    f1, f2, f4 = (fixed_grid_integral(model, func, m, signal_window, idler_window)
                  for m in (n, 2 * n, 4 * n))
    r1 = (4.0 * f2 - f1) / 3.0
    r2 = (4.0 * f4 - f2) / 3.0
    err = abs(r2 - r1)
    if err > tol:
        raise NumericalError(f"fixed-grid fallback reached only {err:.3g}", achieved=err)
    return r2, err
