import math

import numpy as np
import pytest

from netopt.errors import InsufficientDataError
from netopt.nets import equidistant
from netopt.optimizer import OptimizerConfig
from netopt.rates import (RateRow, RateTable, check_power_floor, classify,
                          fit_exponent, probe_two_term_bound, scan,
                          split_worst, two_term_bound)
from netopt.weightfn import (ConstantWeight, LogPowerWeight, PowerWeight,
                             monotone_envelope)

CFG = OptimizerConfig()


def test_scan_constant_closed_form():
    table = scan(ConstantWeight(1.0), [1, 2, 4, 8], CFG)
    np.testing.assert_allclose(table.values(),
                               [math.sqrt(0.5), 0.5, math.sqrt(0.125), 0.25],
                               atol=1e-6)


def test_scan_power_mass_bound():
    table = scan(PowerWeight(1.0), [1, 2, 4, 8, 16], CFG)
    for row in table.rows:
        assert row.sqrt_n_value <= 2.0 + 1e-9


def test_scan_monotone_rows():
    table = scan(LogPowerWeight(0.9), [4, 8, 16, 32], CFG)
    vals = table.values()
    assert np.all(np.diff(vals) <= 1e-9)


def test_scan_validates_input():
    with pytest.raises(ValueError):
        scan(ConstantWeight(1.0), [], CFG)
    with pytest.raises(ValueError):
        scan(ConstantWeight(1.0), [4, 4], CFG)


def test_table_validation():
    rows = (RateRow(2, 0.5, "a"), RateRow(4, 0.8, "a"))
    with pytest.raises(ValueError):
        RateTable(rows=rows, h_spec="x")  # increasing values
    with pytest.raises(ValueError):
        RateTable(rows=(RateRow(4, 0.5, "a"), RateRow(2, 0.4, "a")), h_spec="x")


def test_table_csv_format():
    table = scan(ConstantWeight(1.0), [1, 2, 4], CFG)
    text = table.to_csv()
    assert text.splitlines()[0] == "n,value,method,sqrt_n_times_value"
    assert len(text.splitlines()) == 4


def test_split_worst_grows_net():
    h = PowerWeight(1.5)
    net = equidistant(4)
    grown = split_worst(h, net, 3)
    assert grown.n == 7


def test_scan_marks_divergent_rows():
    # every net has a divergent last cell: rows carry inf, not an exception
    from netopt.weightfn import WeightFunction

    class Reciprocal(WeightFunction):
        kind = "reciprocal"

        def _eval(self, t):
            return 1.0 / (1.0 - np.asarray(t))

        def _eval_w(self, t, w):
            return 1.0 / np.asarray(w)

        def spec_string(self):
            return "reciprocal-scan"

    table = scan(Reciprocal(), [2, 4], OptimizerConfig(grid_size=32))
    assert all(math.isinf(r.value) for r in table.rows)


# -- exponent fit --------------------------------------------------------------

def test_fit_constant_recovers_one():
    table = scan(ConstantWeight(1.0), [1, 2, 4, 8, 16, 32], CFG)
    beta, stderr = fit_exponent(table, tail_fraction=1.0)
    assert beta == pytest.approx(1.0, abs=0.01)
    assert stderr < 0.01


def test_fit_exact_power_law_any_window():
    rows = tuple(RateRow(n, 2.0 * n ** -0.35, "synthetic") for n in (4, 8, 16, 32, 64))
    table = RateTable(rows=rows, h_spec="synthetic")
    beta, stderr = fit_exponent(table, 0.5)
    assert beta == pytest.approx(0.7, abs=1e-9)
    assert stderr == pytest.approx(0.0, abs=1e-9)


def test_fit_insufficient_rows():
    rows = tuple(RateRow(n, 1.0 / n, "x") for n in (2, 4))
    table = RateTable(rows=rows, h_spec="x")
    with pytest.raises(InsufficientDataError):
        fit_exponent(table)


# -- classification --------------------------------------------------------------

def test_classify_integrable():
    v = classify(PowerWeight(1.0))
    assert v.kind == "rate_half_yes"
    assert v.witness["integral"] == pytest.approx(2.0, rel=1e-12)
    v = classify(ConstantWeight(1.0))
    assert v.kind == "rate_half_yes"
    assert v.witness["integral"] == pytest.approx(1.0)


def test_classify_log_power_exact():
    v = classify(LogPowerWeight(0.75, 1.0))
    assert v.kind == "log_power_band"
    assert v.witness["alpha"] == pytest.approx(0.75, abs=1e-6)
    assert v.witness["c_upper"] == pytest.approx(1.0, rel=1e-6)
    assert v.witness["c_lower"] == pytest.approx(1.0, rel=1e-6)


def test_classify_log_tail_exponent_above_one():
    # weight ~ C / ((alpha + log(1 + 1/(1-t)))^alpha (1-t)) with alpha = 2:
    # integrable, so the tabulated envelope classifies by its finite mass
    def fn(ts):
        ts = np.atleast_1d(ts)
        return 1.0 / ((2.0 + np.log1p(1.0 / (1.0 - ts))) ** 2 * (1.0 - ts))

    h = monotone_envelope(fn, 4096)
    assert classify(h).kind == "rate_half_yes"

    # a kind that declares its mass divergent exercises the envelope branch:
    # the fitted exponent above one yields the log-tail certificate
    class DeclaredDivergent(type(h)):
        def cumulative(self, t):
            return math.inf if t == 1.0 else super().cumulative(t)

    hd = DeclaredDivergent(h.breaks, h.values)
    v = classify(hd)
    assert v.kind == "log_tail_rate_half"
    assert v.witness["alpha"] > 1.0
    assert v.witness["C"] > 0.0


def test_verdict_json():
    doc = classify(LogPowerWeight(0.8)).to_json()
    assert set(doc) == {"kind", "witness"}


# -- certificates ------------------------------------------------------------------

@pytest.mark.parametrize("theta", [1.2, 1.5])
def test_power_floor_report(theta):
    report = check_power_floor(theta, 5, CFG)
    assert report.passed
    assert [r.n for r in report.rows] == [1, 2, 3, 4, 5]
    for r in report.rows:
        assert r.margin >= -1e-9
        assert r.floor == pytest.approx((theta - 1.0) ** (r.n - 1))


def test_power_floor_guard():
    with pytest.raises(ValueError):
        check_power_floor(1.5, 9, CFG)


def test_two_term_bound_constant_analytic():
    # inf_T [T^2 + (1-T)^2/2] for n=2: T* = 1/3, value 1/3
    val = two_term_bound(ConstantWeight(1.0), 2)
    assert val == pytest.approx(1.0 / 3.0, rel=1e-8)


def test_probe_skips_n1_and_records_ratios():
    report = probe_two_term_bound(ConstantWeight(1.0), [1, 2, 4], CFG)
    assert report.skipped == (1,)
    assert len(report.rows) == 2
    assert report.label == "EXPLORATORY"
    lo, hi = report.ratio_range
    assert 0.0 < lo <= hi < 10.0


def test_probe_log_power_rows():
    report = probe_two_term_bound(LogPowerWeight(0.75), [4, 16], CFG)
    for row in report.rows:
        assert math.isfinite(row.ratio)
        assert row.ratio > 0.0


# -- theorem-style invariants ----------------------------------------------------

def test_sqrt_n_bounded_for_integrable():
    for h in (ConstantWeight(1.0), PowerWeight(1.0), PowerWeight(1.5)):
        total = h.total_mass()
        table = scan(h, [1, 2, 4, 8, 16, 32], CFG)
        assert max(r.sqrt_n_value for r in table.rows) <= total + 1e-6


def test_sqrt_n_grows_for_log_power():
    table = scan(LogPowerWeight(0.75), [4, 8, 16, 32, 64], CFG)
    seq = [r.sqrt_n_value for r in table.rows]
    assert seq[-1] > seq[0]


def test_norm_equivalence_band():
    for h in (ConstantWeight(1.0), PowerWeight(1.0)):
        total = h.total_mass()
        table = scan(h, [1, 2, 4, 8, 16, 32, 64], CFG)
        sup = max(r.sqrt_n_value for r in table.rows)
        assert sup <= total + 1e-6
        assert total <= math.sqrt(2.0) * sup * 1.10