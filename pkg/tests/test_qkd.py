import math

import pytest

from phasecomp.errors import InvalidModelError
from phasecomp.qkd import (HIGH, INTERMEDIATE, LOW, QkdChannel, QkdConfig, round_row,
                           run_session)


def test_config_validation():
    for kw in ({"rounds": 0}, {"eavesdropper": 1.5}, {"decoder": "vote"},
               {"low_threshold": 5.0, "high_threshold": 1.0}):
        with pytest.raises(InvalidModelError):
            QkdConfig(**kw)


def test_expected_rate_ordering(model):
    ch = QkdChannel(model, QkdConfig())
    high = ch.expected_rate(1, 1, 1)
    low = ch.expected_rate(1, 1, 0)
    mid = [ch.expected_rate(1, -1, b) for b in (0, 1)] + [ch.expected_rate(-1, 1, b) for b in (0, 1)]
    assert high > max(mid) and min(mid) > low
    assert ch.expected_rate(-1, -1, 1) == pytest.approx(high)
    assert ch.low < min(mid) and ch.high > max(mid)
    assert ch.classify(high) == HIGH and ch.classify(low) == LOW
    assert ch.classify(mid[0]) == INTERMEDIATE


def test_session_statistics(model):
    rep = run_session(model, QkdConfig(rounds=2000, seed=5))
    n = len(rep.rounds)
    assert abs(rep.sifted_fraction - 0.5) < 4 * math.sqrt(0.25 / n)
    assert rep.anomaly_fraction < 0.1 and not rep.flagged
    labels = rep.mean_rates()
    assert labels["[++/1]"] > labels["[+-/0]"] > labels["[++/0]"]
    doc = rep.to_dict(include_rounds=True)
    assert len(doc["round_log"]) == 2000
    assert set(round_row(0, rep.rounds[0])) == {"round", "alice_sign", "bob_sign", "bit",
                                                "rate", "class", "sifted", "decoded"}


def test_rate_decoder_errors_small(model):
    rep = run_session(model, QkdConfig(rounds=500, decoder="rate", seed=1))
    assert rep.qber < 0.01


def test_fixed_key(model):
    rep = run_session(model, QkdConfig(rounds=40, seed=2, decoder="rate"), key=[1, 0, 1])
    assert [r.key_bit for r in rep.rounds][:6] == [1, 0, 1, 1, 0, 1]


def test_eavesdropper_detected(model):
    rep = run_session(model, QkdConfig(rounds=400, eavesdropper=0.0, seed=3))
    assert rep.anomaly_fraction > 0.95 and rep.flagged


def test_session_deterministic(model):
    a = run_session(model, QkdConfig(rounds=100, seed=9)).to_dict(include_rounds=True)
    b = run_session(model, QkdConfig(rounds=100, seed=9)).to_dict(include_rounds=True)
    assert a == b
