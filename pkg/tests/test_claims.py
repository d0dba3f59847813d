import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oneshot_reserving import (
    CensoredCellError,
    Portfolio,
    SchemaError,
    Triangle,
    aggregate,
    censor,
    load_portfolio,
    write_portfolio,
)
from oneshot_reserving.claims import MaskWarning, portfolio_frame, rbns_cohort

from conftest import DATA, random_portfolio


def three_claims(**kw):
    # period 1: nu1 (T=0), nu2 (T=1), nu3 (T=2); one claim in each of periods 2, 3
    return Portfolio(
        ["n1", "n2", "n3", "p2", "p3"], [1, 1, 1, 2, 3], [0, 1, 2, 0, 0],
        [[60, 90, 100], [0, 30, 40], [0, 0, 25], [10, 20, float("nan")],
         [5, float("nan"), float("nan")]], I=3, **kw)


def test_aggregate_hand_sum():
    tri = aggregate(three_claims())
    np.testing.assert_array_equal(tri.values[0], [60, 120, 165])
    assert tri.cell(2, 1) == 20
    with pytest.raises(CensoredCellError):
        tri.cell(2, 2)


def test_aggregate_single_and_empty_period():
    p = Portfolio(["a"], [1], [0], [[5, 5, 5]], I=3, has_lower_triangle=True)
    tri = aggregate(p)
    np.testing.assert_array_equal(tri.values[0], [5, 5, 5])
    np.testing.assert_array_equal(tri.values[1:], 0.0)


def test_rbns_cohort_filters_on_reporting_delay():
    p = three_claims()
    assert [c.claim_id for c in rbns_cohort(p, 1, 1)] == ["n1", "n2"]
    assert [c.claim_id for c in rbns_cohort(p, 1, 0)] == ["n1"]
    assert [c.claim_id for c in rbns_cohort(p, 1, 2)] == ["n1", "n2", "n3"]
    with pytest.raises(IndexError):
        rbns_cohort(p, 4, 0)


def test_mask_overwrite_counts_and_warns():
    with pytest.warns(MaskWarning):
        p = Portfolio(["a", "b"], [1, 1], [0, 1], [[1, 2, 3], [7, 2, 3]], I=3, has_lower_triangle=True)
    assert p.mask_fixes == 1
    assert p.paid_cum[1, 0] == 0.0


def test_invariants_rejected():
    with pytest.raises(SchemaError):
        Portfolio(["a"], [1], [0], [[1, 2, 3]], I=2)          # J = 2 is not < I = 2
    with pytest.raises(SchemaError):
        Portfolio(["a"], [0], [0], [[1, 2]], I=3)            # accident period < 1
    with pytest.raises(SchemaError):
        Portfolio(["a"], [1], [-1], [[1, 2]], I=3)           # negative delay


def test_censored_reads_raise():
    p = three_claims()
    assert not p.has_lower_triangle
    with pytest.raises(CensoredCellError):
        p.column("paid_cum", 1, np.array([4]))
    assert p.cell("paid_cum", 3, 1) == 20


def test_censor_drops_unreported_and_is_idempotent():
    rng = np.random.default_rng(1)
    full = random_portfolio(rng, I=5, J=3, n=6)
    view = censor(full)
    assert not view.has_lower_triangle
    assert np.all(view.accident_period + view.reporting_delay <= view.I)
    assert censor(view).equals(view)
    assert full.has_lower_triangle  # truth retained in the original
    with pytest.raises(CensoredCellError):
        view.ultimate()


def test_oll_from_truth():
    full = random_portfolio(np.random.default_rng(2), I=5, J=3, n=4, late=False)
    tri = aggregate(full, "full")
    latest = aggregate(censor(full)).latest()
    oll = tri.values[:, 3] - latest
    assert np.all(oll[:2] == 0) and np.all(oll[2:] > 0)


@given(st.integers(0, 10_000))
def test_aggregate_equals_cohort_brute_force(seed):
    p = random_portfolio(np.random.default_rng(seed), I=5, J=3, n=5)
    tri = aggregate(p)
    for i in range(1, p.I + 1):
        for j in range(p.J + 1):
            brute = sum(c.paid_cum[j] for c in rbns_cohort(p, i, j))
            assert tri.values[i - 1, j] == brute


def test_load_fixture_and_roundtrip(tmp_path):
    p = load_portfolio(DATA / "tiny_triangle.csv")
    assert (p.I, p.J, len(p)) == (3, 2, 3)
    assert not p.has_lower_triangle
    out = tmp_path / "rt.csv"
    write_portfolio(p, out)
    assert out.read_bytes() == (DATA / "tiny_triangle.csv").read_bytes()


def test_roundtrip_full_square_with_extras(tmp_path, sim_small):
    f1, f2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_portfolio(sim_small, f1)
    q = load_portfolio(f1)
    assert q.has_lower_triangle and q.equals(sim_small)
    write_portfolio(q, f2)
    assert f1.read_bytes() == f2.read_bytes()


def test_load_masks_pre_reporting_rows(tmp_path):
    f = tmp_path / "m.csv"
    f.write_text("claim_id,accident_period,reporting_delay,dev_period,paid_cum\n"
                 "a,1,1,0,9\na,1,1,1,4\nb,2,0,0,3\n")
    with pytest.warns(MaskWarning):
        p = load_portfolio(f)
    assert p.paid_cum[0, 0] == 0.0 and p.mask_fixes == 1


@pytest.mark.parametrize("content, match", [
    ("claim_id,accident_period,reporting_delay,dev_period\na,1,0,0\n", "paid_cum"),
    ("claim_id,accident_period,reporting_delay,dev_period,paid_cum\na,1,0,0,1\na,1,0,0,2\nb,2,0,0,1\n", "duplicate"),
    ("claim_id,accident_period,reporting_delay,dev_period,paid_cum\na,1,0,0,x\nb,2,0,0,1\n", "non-numeric"),
    ("claim_id,accident_period,reporting_delay,dev_period,paid_cum\na,1,0,0,1\na,1,0,1,2\na,1,0,2,3\n"
     "b,2,0,0,1\nc,3,0,0,1\nd,1,0,0,1\n", "inconsistent J"),
])
def test_load_errors(tmp_path, content, match):
    f = tmp_path / "bad.csv"
    f.write_text(content)
    with pytest.raises(SchemaError, match=match):
        load_portfolio(f)


def test_schema_mapping(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("id,acc,delay,dev,paid\na,1,0,0,1\na,1,0,1,2\nb,2,0,0,3\n")
    p = load_portfolio(f, schema={"claim_id": "id", "accident_period": "acc", "reporting_delay": "delay",
                                  "dev_period": "dev", "paid_cum": "paid"})
    assert p.latest().tolist() == [2.0, 3.0]


def test_triangle_guards():
    tri = Triangle.from_rows([[1, 2], [3]])
    assert not tri.is_full
    with pytest.raises(CensoredCellError):
        tri.cell(2, 1)
    with pytest.raises(SchemaError):
        Triangle(np.ones((2, 3)))


def test_claims_are_sorted_and_stable():
    p = Portfolio(["c", "a", "b"], [1, 2, 1], [0, 0, 0], [[1, 2], [3, np.nan], [5, 6]], I=2)
    assert p.claim_ids.tolist() == ["a", "b", "c"]
    assert portfolio_frame(p)["claim_id"].tolist() == ["a", "b", "b", "c", "c"]
    hist = p.history(0)
    assert hist.accident_period == 2 and hist.paid_cum[0] == 3


def test_masking_idempotent():
    p = random_portfolio(np.random.default_rng(3), I=5, J=3, n=4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        q = Portfolio(p.claim_ids, p.accident_period, p.reporting_delay, p.paid_cum, I=p.I)
    assert q.equals(p) and q.mask_fixes == 0
