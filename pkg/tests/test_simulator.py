import json

import numpy as np
import pytest

from oneshot_reserving import ConfigError, SimConfig, aggregate, censor, expected_cl_factors, fit_cl_factors, simulate
from oneshot_reserving.simulator import expected_path, settlement_probabilities

SMALL = dict(I=6, J=3, claims_per_period=200, delay_probs=(0.8, 0.15, 0.05, 0.0),
             dev_multipliers=(1.8, 1.2, 1.05), closing_hazard=(0.3, 0.4, 0.5, 1.0))


def test_deterministic_per_seed():
    a = simulate(SimConfig(**SMALL, seed=3))
    b = simulate(SimConfig(**SMALL, seed=3))
    c = simulate(SimConfig(**SMALL, seed=4))
    assert a.equals(b)
    assert not a.equals(c)
    assert a.has_lower_triangle and a.I == 6 and a.J == 3


def test_overrides_and_roundtrip(tmp_path):
    cfg = SimConfig(**SMALL)
    assert simulate(cfg, seed=9).equals(simulate(cfg.replace(seed=9)))
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"simulator": cfg.to_dict()}))
    assert SimConfig.from_file(f) == cfg


def test_noise_free_factors_equal_multipliers():
    g = (2.0, 1.5, 1.2, 1.1)
    cfg = SimConfig(I=7, J=4, claims_per_period=50, delay_probs=(1, 0, 0, 0, 0), dev_multipliers=g,
                    closing_hazard=(0, 0, 0, 0, 1), payment_noise=0.0, zero_first_payment=0.0)
    cf = fit_cl_factors(aggregate(censor(simulate(cfg))))
    np.testing.assert_allclose(cf.f, g, rtol=1e-12)
    np.testing.assert_allclose(expected_cl_factors(cfg), g, rtol=1e-14)


def test_large_sample_factors_match_closed_form():
    cfg = SimConfig(claims_per_period=50_000, seed=2)
    cf = fit_cl_factors(aggregate(censor(simulate(cfg))))
    np.testing.assert_allclose(cf.f, expected_cl_factors(cfg), rtol=0.01)


def test_settlement_distribution():
    p = settlement_probabilities((0.5, 0.5, 1.0))
    np.testing.assert_allclose(p, [0.5, 0.25, 0.25])
    np.testing.assert_allclose(settlement_probabilities((0.2, 0.0, 0.0)), [0.2, 0.0, 0.8])
    cfg = SimConfig(**SMALL, zero_first_payment=0.0)
    assert expected_path(cfg)[0] == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("change, field", [
    ({"delay_probs": (0.5, 0.5, 0.5, 0.0)}, "delay_probs"),
    ({"delay_probs": (1.0, 0.0)}, "delay_probs"),
    ({"dev_multipliers": (0.9, 1.0, 1.0)}, "dev_multipliers"),
    ({"closing_hazard": (0.1, 1.2, 0.1, 1.0)}, "closing_hazard"),
    ({"I": 3}, "I"),
    ({"zero_first_payment": 1.0}, "zero_first_payment"),
    ({"claims_per_period": 0}, "claims_per_period"),
])
def test_config_errors_name_the_field(change, field):
    with pytest.raises(ConfigError) as exc:
        SimConfig(**{**SMALL, **change})
    assert exc.value.field == field
    with pytest.raises(ConfigError):
        SimConfig.from_dict({"bogus": 1})


def test_claim_level_consistency(sim_small):
    p = sim_small
    lags = np.arange(p.J + 1)
    before = lags[None, :] < p.reporting_delay[:, None]
    assert np.all(p.paid_cum[before] == 0) and np.all(p.status_open[before] == 0)
    assert np.all(np.diff(p.paid_cum, axis=1) >= 0)
    # settled claims never reopen
    assert np.all(np.diff(p.status_open, axis=1)[~before[:, :-1]] <= 0)
    assert np.all(p.status_open[:, -1] == 0)
    closed = (p.status_open == 0) & ~before
    np.testing.assert_allclose(p.incurred[closed], p.paid_cum[closed], rtol=1e-14)
    np.testing.assert_array_equal(p.incurred[:, -1], p.paid_cum[:, -1])
    assert set(p.statics) == {"line", "accident_month", "report_delay_days"}
    days = p.statics["report_delay_days"]
    np.testing.assert_array_equal(days // 365, p.reporting_delay)


def test_zero_first_payment_share():
    p = simulate(SimConfig(claims_per_period=20_000, zero_first_payment=0.15, seed=1))
    at_zero = p.reporting_delay == 0
    share = np.mean(p.paid_cum[at_zero, 0] == 0)
    assert share == pytest.approx(0.15, abs=0.01)


def test_large_late_developers():
    base = SimConfig(claims_per_period=300, seed=5)
    plain = simulate(base)
    big = simulate(base.replace(large_late_developers=True))
    diff = np.flatnonzero(np.any(plain.paid_cum != big.paid_cum, axis=1))
    assert len(diff) == 2
    assert np.all(big.accident_period[diff] <= base.I - base.J)
    inc = np.diff(big.paid_cum[diff], axis=1, prepend=0.0)
    assert np.all(inc[:, 3] > 10 * np.exp(base.severity_mu))
