import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecomp.errors import DomainError, InvalidModelError
from phasecomp.optics import (MASK_MODES, PhaseLayout, PhaseMask, ZERO_MASK, eval_mask,
                              grid_sinusoid, mode_masks, purification_mask, total_phase)
from phasecomp.source import decoherence_phase


def test_sinusoid_values():
    m = PhaseMask.sinusoid(1.35, 0.57)
    x = np.array([-2.0, 0.0, 1.3])
    assert np.allclose(m(x), 1.35 * np.sin(0.57 * x))
    assert m(0.0) == 0.0
    assert np.allclose(m.negated()(x), -m(x))
    assert m.with_offset(math.pi)(0.0) == pytest.approx(math.pi)
    assert ZERO_MASK(3.0) == 0.0


def test_sampled_interpolates_and_refuses_extrapolation():
    m = PhaseMask.sampled([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    assert m(0.5) == pytest.approx(0.5)
    assert m(1.5) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        m(2.5)
    assert np.allclose(m.negated()(np.array([0.5, 1.0])), [-0.5, -1.0])


@pytest.mark.parametrize("grid,values", [([0.0, 0.0], [1.0, 1.0]), ([0.0], [1.0]),
                                         ([1.0, 0.0], [0.0, 0.0])])
def test_sampled_validation(grid, values):
    with pytest.raises(InvalidModelError):
        PhaseMask.sampled(grid, values)


def test_invalid_sign_and_pitch():
    with pytest.raises(InvalidModelError):
        PhaseMask(sign=2)
    with pytest.raises(InvalidModelError):
        PhaseMask.sinusoid(1, 1, pixel_pitch=0.0)


def test_from_csv(tmp_path):
    p = tmp_path / "mask.csv"
    p.write_text("theta_mrad,phi_rad\n-1,0.5\n0,0\n1,-0.5\n")
    m = PhaseMask.from_csv(p)
    assert m(-0.5) == pytest.approx(0.25)
    bad = tmp_path / "bad.csv"
    bad.write_text("-1,0.5\n0,0\n")
    with pytest.raises(InvalidModelError, match="header"):
        PhaseMask.from_csv(bad)
    ugly = tmp_path / "ugly.csv"
    ugly.write_text("theta_mrad,phi_rad\n-1,abc\n0,0\n")
    with pytest.raises(InvalidModelError):
        PhaseMask.from_csv(ugly)


def test_pixelation_holds_pixel_center_value():
    m = PhaseMask.sinusoid(1.0, 1.0, pixel_pitch=0.5)
    assert m(0.1) == pytest.approx(math.sin(0.25))
    assert m(0.49) == pytest.approx(math.sin(0.25))
    assert m(-0.1) == pytest.approx(math.sin(-0.25))


def test_grid_sinusoid_matches_analytic():
    g = grid_sinusoid(1.35, 0.57, 0.01, 5.0)
    x = np.linspace(-5, 5, 101)
    assert np.max(np.abs(g(x) - 1.35 * np.sin(0.57 * x))) < 1e-4


def test_purification_cancels_decoherence_phase(model):
    m = model.with_(phi0=0.4)
    pur = purification_mask(m)
    t = np.linspace(-5, 5, 11)
    tp = np.linspace(5, -4, 11)
    assert np.allclose(total_phase(m, pur, None, None, t, tp), 0.0, atol=1e-12)
    assert np.allclose(total_phase(m, None, None, None, t, tp), decoherence_phase(m, t, tp))


def test_pixelated_purification_residual_bound(model):
    pitch = 0.2
    pur = purification_mask(model, pixel_pitch=pitch)
    rng = np.random.default_rng(0)
    t, tp = rng.uniform(-5, 5, (2, 20_000))
    resid = np.abs(total_phase(model, pur, None, None, t, tp))
    # each arm is off by at most eta * pitch / 2, so the pair by eta * pitch
    assert resid.max() <= model.eta * pitch + 1e-12
    assert resid.max() > model.eta * pitch / 2


def test_phase_layout_equals_total_phase(model):
    obj = PhaseMask.sinusoid(1.35, 0.57)
    lay = PhaseLayout(model, obj, obj.negated())
    t, tp = np.array([0.3, -1.2]), np.array([-0.1, 2.0])
    expected = total_phase(model, purification_mask(model), obj, obj.negated(), t, tp)
    assert np.allclose(lay(t, tp), expected, atol=1e-12)
    raw = PhaseLayout(model, purify=False)
    assert np.allclose(raw(t, tp), decoherence_phase(model, t, tp))


def test_mode_masks():
    assert mode_masks("none", 1, 1) == (None, None)
    s, i = mode_masks("single", 1.35, 0.57)
    assert i is None and s(1.0) == pytest.approx(1.35 * math.sin(0.57))
    s, i = mode_masks("compensated", 1.35, 0.57)
    assert s(1.0) + i(-1.0) == pytest.approx(0.0)
    s, i = mode_masks("anti", 1.35, 0.57)
    assert s(1.0) + i(-1.0) == pytest.approx(2 * 1.35 * math.sin(0.57))
    assert set(MASK_MODES) == {"none", "single", "compensated", "anti"}
    with pytest.raises(InvalidModelError):
        mode_masks("bogus", 1, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(0.01, 2), st.floats(-6, 6))
def test_compensation_odd_masks(a, k, theta):
    obj = PhaseMask.sinusoid(a, k)
    assert abs(eval_mask(obj, theta) + eval_mask(obj, -theta)) < 1e-12
