import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from oracles import density_normalization, s_marginal_cdf, theta_marginal_cdf
from phasecomp.errors import InvalidModelError
from phasecomp.source import (SourceModel, angular_density, decoherence_phase, sample_pair,
                              sample_pairs, spectral_shift)


def test_defaults_are_calibrated_operating_point():
    m = SourceModel()
    assert m.v0 == pytest.approx(0.912)
    assert m.sigma_corr == pytest.approx(0.4782, abs=1e-4)
    assert m.envelope_halfwidth == 5.0
    # gamma ties sigma_corr to the 10 nm FWHM bandwidth
    assert m.gamma == pytest.approx(m.sigma_corr / (10 / (2 * math.sqrt(2 * math.log(2)))), rel=1e-3)


@pytest.mark.parametrize("kwargs", [{"sigma_corr": 0.0}, {"sigma_corr": -1.0},
                                    {"envelope_halfwidth": 0.0}, {"v0": 1.2}, {"v0": -0.1}])
def test_invalid_parameters(kwargs):
    with pytest.raises(InvalidModelError):
        SourceModel(**kwargs)


@pytest.mark.parametrize("sigma", [0.05, 0.4782, 2.0, 20.0])
def test_norm_matches_closed_form(sigma):
    m = SourceModel(sigma_corr=sigma)
    assert m.norm == pytest.approx(density_normalization(sigma, 10.0), rel=1e-12)


def test_density_has_unit_mass(model):
    h = model.envelope_halfwidth
    val, _ = integrate.dblquad(lambda tp, t: angular_density(model, t, tp), -h, h,
                               lambda t: max(-h, -t - 8 * model.sigma_corr),
                               lambda t: min(h, -t + 8 * model.sigma_corr),
                               epsabs=1e-10, epsrel=1e-10)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_density_vanishes_outside_envelope(model):
    assert angular_density(model, 5.1, -5.1) == 0.0
    assert angular_density(model, 0.0, 0.0) > 0.0


def test_density_peaks_on_ridge(model):
    t = np.linspace(-4, 4, 9)
    ridge = angular_density(model, t, -t)
    off = angular_density(model, t, -t + 0.5)
    assert np.all(ridge > off)
    assert np.allclose(ridge, ridge[0])


def test_spectral_shift_and_gamma_zero(model):
    assert spectral_shift(model, 1.0, -1.0 + model.gamma * 2.0) == pytest.approx(2.0)
    with pytest.raises(InvalidModelError):
        spectral_shift(model.with_(gamma=0.0), 0.0, 0.0)


def test_decoherence_phase_linear(model):
    m = model.with_(phi0=0.3)
    assert decoherence_phase(m, 1.0, -1.0) == pytest.approx(2 * m.eta + 0.3)


def test_sample_pairs_inside_envelope_and_ridge(model):
    t, tp = sample_pairs(model, np.random.default_rng(1), 50_000)
    assert np.all(np.abs(t) <= 5) and np.all(np.abs(tp) <= 5)
    s = t + tp
    assert stats.kstest(s, s_marginal_cdf(model.sigma_corr, 5.0)).pvalue > 1e-3
    assert stats.kstest(t, theta_marginal_cdf(model.sigma_corr, 5.0)).pvalue > 1e-3


def test_sample_pairs_wide_kernel_matches_exact_marginal():
    m = SourceModel(sigma_corr=3.0)
    t, tp = sample_pairs(m, np.random.default_rng(2), 50_000)
    assert stats.kstest(t + tp, s_marginal_cdf(3.0, 5.0)).pvalue > 1e-3


def test_sample_pair_reproducible(model):
    a = sample_pair(model, np.random.default_rng(7))
    b = sample_pair(model, np.random.default_rng(7))
    assert a == b and isinstance(a[0], float)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.5, 20.0))
def test_norm_positive_and_bounded(sigma, h):
    m = SourceModel(sigma_corr=sigma, envelope_halfwidth=h)
    assert 0 < m.norm <= 2 * h
