"""Independent reference computations used by the tests.

Nothing here imports the package's quadrature; the brute-force sums work
directly from the joint density |g|^2 = E(t) E(t') N(t + t'; sigma).
"""
import math

import numpy as np


def brute_grid(sigma, h, n=1000):
    """Midpoint grid on [-h, h]^2 and normalized density weights."""
    step = 2.0 * h / n
    x = -h + step * (np.arange(n) + 0.5)
    t, tp = np.meshgrid(x, x, indexing="ij")
    w = np.exp(-0.5 * ((t + tp) / sigma) ** 2)
    return t, tp, w / w.sum()


def brute_epsilon(sigma, h, v0, phi_s=None, phi_i=None, n=1000):
    t, tp, w = brute_grid(sigma, h, n)
    phase = np.zeros_like(t)
    if phi_s is not None:
        phase += phi_s(t)
    if phi_i is not None:
        phase += phi_i(tp)
    return v0 * np.sum(w * np.exp(1j * phase))


def density_normalization(sigma, span):
    """Closed form of the integral of N(s; sigma) over the square of side ``span``."""
    pdf = lambda x: math.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2 * math.pi))
    big_l = span
    phi = 0.5 * (1 + math.erf(big_l / (sigma * math.sqrt(2))))
    return 2.0 * (big_l * (phi - 0.5) - sigma**2 * (pdf(0.0) - pdf(big_l)))


def sinusoid(a, k):
    return lambda x: a * np.sin(k * x)


def werner_chsh_optimal(eps):
    return 2.0 * math.sqrt(1.0 + eps * eps)


def ghost_zeros(a, k, h):
    """Roots of a sin(k theta) inside [-h, h]: where the ghost curve vanishes."""
    n = int(math.floor(h * k / math.pi))
    return [j * math.pi / k for j in range(-n, n + 1)]


def s_marginal_cdf(sigma, h):
    """CDF of s = theta + theta' for uniform envelopes and Gaussian kernel."""
    big_l = 2.0 * h
    grid = np.linspace(-big_l, big_l, 40_001)
    dens = np.exp(-0.5 * (grid / sigma) ** 2) * (big_l - np.abs(grid))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return lambda s: np.interp(s, grid, cdf)


def theta_marginal_cdf(sigma, h):
    """CDF of the signal angle: density proportional to Phi((t+h)/s) - Phi((t-h)/s)."""
    from scipy.special import ndtr
    grid = np.linspace(-h, h, 20_001)
    dens = ndtr((grid + h) / sigma) - ndtr((grid - h) / sigma)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
    cdf /= cdf[-1]
    return lambda t: np.interp(t, grid, cdf)
