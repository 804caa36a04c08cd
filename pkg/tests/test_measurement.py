import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phasecomp.errors import DomainError, InvalidModelError
from phasecomp.measurement import (ALPHA, BETA, CoincidenceRecord, DetectionConfig,
                                   coincidence_probability, counts_from_probability,
                                   expected_accidentals, slit_grid, polarization_weights,
                                   probability_from_coherence, scan, scan_2d, simulate_counts,
                                   substream, visibility)
from phasecomp.optics import PhaseLayout, mode_masks
from phasecomp.quadrature import density_mass
from phasecomp.state import epsilon


def test_config_validation():
    with pytest.raises(InvalidModelError):
        DetectionConfig(signal_aperture=0)
    with pytest.raises(InvalidModelError):
        DetectionConfig(acquisition_time=-1)
    with pytest.raises(InvalidModelError):
        DetectionConfig(pair_rate=-1)
    cfg = DetectionConfig(signal_center=1.0, signal_aperture=2.0)
    assert cfg.signal_window == (0.0, 2.0)
    assert cfg.to_dict()["coincidence_window"] == 50e-9


def test_polarization_weights():
    assert polarization_weights(None, ALPHA) == (1.0, 0.0)
    assert polarization_weights(0.0, 0.0) == (1.0, 0.0)
    pop, inter = polarization_weights(ALPHA, BETA)
    assert pop == pytest.approx(0.5) and inter == pytest.approx(-0.5)


def test_polarizers_absent_reduce_to_half_mass(model):
    cfg = DetectionConfig(signal_polarizer=None, idler_polarizer=None,
                          signal_aperture=1.0, idler_aperture=1.0)
    p = coincidence_probability(model, PhaseLayout(model), cfg)
    assert p == pytest.approx(0.5 * density_mass(model, cfg.signal_window, cfg.idler_window))


@pytest.mark.parametrize("mode", ["none", "single", "compensated", "anti"])
def test_diagonal_probabilities_encode_epsilon(model, mode):
    phase = PhaseLayout(model, *mode_masks(mode, 1.35, 0.57))
    eps = epsilon(model, *mode_masks(mode, 1.35, 0.57)).real
    cfg = DetectionConfig()
    pmax = coincidence_probability(model, phase, cfg)
    pmin = coincidence_probability(model, phase, cfg.with_(idler_polarizer=BETA))
    assert pmax == pytest.approx((1 + eps) / 4, abs=1e-9)
    assert pmin == pytest.approx((1 - eps) / 4, abs=1e-9)
    assert (pmax - pmin) / (pmax + pmin) == pytest.approx(eps, abs=1e-9)


def test_probability_from_coherence_consistent(model):
    assert probability_from_coherence(ALPHA, ALPHA, 1.0, 0.888) == pytest.approx((1 + 0.888) / 4)


def test_counts_statistics():
    cfg = DetectionConfig(acquisition_time=10.0)
    acc = expected_accidentals(cfg)
    assert acc == pytest.approx(5000 * 5000 * 50e-9 * 10)
    rng = np.random.default_rng(0)
    raws = [counts_from_probability(0.25, cfg, rng).raw for _ in range(2000)]
    mean = 1000 * 0.25 * 10 + acc
    assert np.mean(raws) == pytest.approx(mean, abs=4 * math.sqrt(mean / 2000))
    assert np.var(raws) == pytest.approx(mean, rel=0.1)


def test_simulate_counts_seeded(model):
    cfg = DetectionConfig(seed=42)
    a = simulate_counts(model, PhaseLayout(model), cfg)
    b = simulate_counts(model, PhaseLayout(model), cfg)
    assert a == b


def test_visibility_and_errors():
    v = visibility(CoincidenceRecord(900, 0.0, 1.0), CoincidenceRecord(100, 0.0, 1.0))
    assert v.value == pytest.approx(0.8)
    # d/da and d/db propagation: 2/T^2 sqrt(b^2 a + a^2 b)
    assert v.stderr == pytest.approx(2 / 1000**2 * math.sqrt(100**2 * 900 + 900**2 * 100))
    with pytest.raises(DomainError):
        visibility(CoincidenceRecord(5, 5.0, 1.0), CoincidenceRecord(5, 5.0, 1.0))


def test_substreams_independent():
    a = substream(1, 0).random(5)
    b = substream(1, 1).random(5)
    c = substream(1, 0).random(5)
    assert not np.allclose(a, b) and np.array_equal(a, c)


def test_scan_worker_independent(model):
    cfg = DetectionConfig(signal_aperture=1.0, idler_aperture=1.0, seed=3)
    grid = slit_grid()
    one = scan(model, PhaseLayout(model), cfg, "idler", grid, workers=1)
    four = scan(model, PhaseLayout(model), cfg, "idler", grid, workers=4)
    assert one == four
    with pytest.raises(DomainError):
        scan(model, PhaseLayout(model), cfg, "idler", [])
    with pytest.raises(DomainError):
        scan(model, PhaseLayout(model), cfg, "pump", grid)


def test_scan_2d_ridge(model):
    cfg = DetectionConfig(signal_aperture=1.0, idler_aperture=1.0, signal_polarizer=0.0,
                          idler_polarizer=0.0, acquisition_time=6.0, singles_signal=0.0)
    grid = slit_grid()
    pts = scan_2d(model, PhaseLayout(model), cfg, grid, grid, workers=2)
    assert len(pts) == 81
    nets = {(x, y): r.net for x, y, r in pts}
    for x in grid:
        ridge = nets[(x, -x)]
        assert all(ridge >= nets[(x, y)] for y in grid)
    assert slit_grid(1.0) == [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]


@settings(max_examples=40, deadline=None)
@given(st.floats(0, math.pi), st.floats(0, math.pi), st.floats(0, 1), st.floats(-1, 1))
def test_probability_nonnegative(p, pp, mass, frac):
    coh = frac * mass
    assert probability_from_coherence(p, pp, mass, coh) >= -1e-12
