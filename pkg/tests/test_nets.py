import json
import math

import numpy as np
import pytest

from netopt.errors import BadCutoffError, NotIntegrableError
from netopt.nets import (TimeNet, balance_cutoff, equidistant, log_power_cutoff,
                         regular_net, score, truncated_net)
from netopt.weightfn import (ConstantWeight, LogPowerWeight, PowerWeight,
                             TabulatedWeight)


# -- construction and validation ---------------------------------------------

@pytest.mark.parametrize("n,expected", [
    (1, [0.0, 1.0]),
    (2, [0.0, 0.5, 1.0]),
    (4, [0.0, 0.25, 0.5, 0.75, 1.0]),
])
def test_equidistant(n, expected):
    np.testing.assert_array_equal(equidistant(n).knots, expected)


def test_net_validation():
    with pytest.raises(ValueError):
        TimeNet(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        TimeNet(np.array([0.1, 0.5, 1.0]))
    with pytest.raises(ValueError):
        TimeNet(np.array([0.0, 0.5, 0.9]))
    with pytest.raises(ValueError):
        TimeNet(np.array([1.0]))


def test_mesh_and_refine():
    net = TimeNet(np.array([0.0, 0.25, 1.0]))
    assert net.mesh == 0.75
    finer = net.refine([0.5, 0.25])  # duplicate dropped
    np.testing.assert_array_equal(finer.knots, [0.0, 0.25, 0.5, 1.0])


def test_regular_net_constant_is_equidistant():
    net = regular_net(ConstantWeight(3.0), 5)
    np.testing.assert_allclose(net.knots, np.linspace(0, 1, 6), atol=1e-15)


@pytest.mark.parametrize("n,expected", [
    (2, [0.0, 0.75, 1.0]),
    (4, [0.0, 0.4375, 0.75, 0.9375, 1.0]),
])
def test_regular_net_power(n, expected):
    net = regular_net(PowerWeight(1.0), n)
    np.testing.assert_allclose(net.knots, expected, atol=1e-12)


def test_regular_net_requires_integrable():
    with pytest.raises(NotIntegrableError):
        regular_net(LogPowerWeight(0.75), 4)


def test_regular_net_zero_mass_flagged():
    with pytest.warns(UserWarning):
        net = regular_net(ConstantWeight(0.0), 3)
    assert "zero-mass" in net.flags
    np.testing.assert_allclose(net.knots, np.linspace(0, 1, 4))


def test_regular_net_mass_equipartition():
    h = PowerWeight(1.5)
    n = 8
    net = regular_net(h, n)
    total = h.total_mass()
    for i, t in enumerate(net.knots):
        assert h.cumulative(float(t)) == pytest.approx(i * total / n, abs=1e-9)


def test_truncated_net_examples():
    np.testing.assert_allclose(truncated_net(ConstantWeight(1.0), 2, 0.5).knots,
                               [0.0, 0.5, 1.0])
    np.testing.assert_allclose(truncated_net(PowerWeight(1.0), 3, 0.75).knots,
                               [0.0, 0.4375, 0.75, 1.0], atol=1e-12)
    np.testing.assert_allclose(truncated_net(LogPowerWeight(0.75), 2, 0.9).knots,
                               [0.0, 0.9, 1.0])


def test_truncated_net_bad_cutoff():
    with pytest.raises(BadCutoffError):
        truncated_net(ConstantWeight(1.0), 3, 1.5)
    with pytest.raises(BadCutoffError):
        truncated_net(ConstantWeight(1.0), 3, 0.0)


# -- cutoffs ------------------------------------------------------------------

def test_balance_cutoff_constant():
    cut, flagged = balance_cutoff(ConstantWeight(1.0), 2)
    assert not flagged
    assert cut == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-9)


def test_balance_cutoff_power():
    cut, flagged = balance_cutoff(PowerWeight(1.0), 2)
    assert not flagged
    assert cut == pytest.approx(5.0 / 9.0, abs=1e-9)


def test_balance_cutoff_logpow_residual():
    h = LogPowerWeight(0.75)
    n = 16
    cut, flagged = balance_cutoff(h, n)
    assert not flagged
    resid = h.cumulative(cut) - math.sqrt((n - 1) * h.weighted_tail(cut))
    assert abs(resid) <= 1e-10


def test_log_power_cutoff_value():
    t = log_power_cutoff(0.75, 16)
    assert t == pytest.approx(1.0 - math.exp(-4.0625), rel=1e-12)
    assert t == pytest.approx(0.982794, abs=5e-7)
    # at the cutoff the bulk mass is exactly n^(1-alpha) for unit constant
    h = LogPowerWeight(0.75, 1.0)
    assert h.cumulative(t) == pytest.approx(16 ** 0.25, rel=1e-10)
    assert 0.0 < log_power_cutoff(0.9, 1) < 1.0


def test_log_power_cutoff_clamps_at_cap():
    t = log_power_cutoff(0.6, 1024)  # exact value underflows float64
    assert t < 1.0
    assert 1.0 - t >= 1e-16


# -- scoring -------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_score_constant_equidistant(n):
    s = score(ConstantWeight(1.0), equidistant(n))
    assert s.total == pytest.approx(1.0 / math.sqrt(2.0 * n), rel=1e-12)


def test_score_parts_consistent():
    h = PowerWeight(1.3)
    s = score(h, regular_net(h, 6))
    assert s.total ** 2 == pytest.approx(float(np.sum(s.cells)), rel=1e-12)
    assert s.mesh == regular_net(h, 6).mesh
    assert not s.divergent


def test_score_regular_mass_bound():
    # score(regular net) <= total mass / sqrt(n), for each family and n
    for h in (ConstantWeight(1.0), PowerWeight(1.0), PowerWeight(1.5),
              TabulatedWeight(np.array([0.0, 0.3, 0.6]), np.array([0.5, 1.0, 3.0]))):
        total = h.total_mass()
        for n in (1, 2, 4, 16, 64, 256):
            s = score(h, regular_net(h, n))
            assert math.sqrt(n) * s.total <= total + 1e-9


def test_score_truncated_two_term_bound():
    # score(truncated net)^2 <= bulk^2/(n-1) + tail, for sampled cutoffs
    for h in (ConstantWeight(1.0), PowerWeight(1.2), LogPowerWeight(0.75)):
        for n in (2, 5, 16):
            for cut in (0.3, 0.7, 0.95):
                s = score(h, truncated_net(h, n, cut))
                bound = h.cumulative(cut) ** 2 / (n - 1) + h.weighted_tail(cut)
                assert s.total ** 2 <= bound + 1e-9


def test_refinement_never_increases_score():
    rng = np.random.default_rng(17)
    for h in (ConstantWeight(1.0), PowerWeight(1.4), LogPowerWeight(0.8)):
        for _ in range(5):
            interior = np.sort(rng.uniform(0.01, 0.99, 5))
            net = TimeNet(np.concatenate([[0.0], interior, [1.0]]))
            base = score(h, net).total
            extra = rng.uniform(0.01, 0.99)
            finer = net.refine([extra])
            assert score(h, finer).total <= base + 1e-12


def test_divergent_last_cell():
    # H(t) = 1/(1-t) has a non-integrable weighted tail: the last cell (and
    # hence the total) is divergent while interior cells stay finite
    from netopt.weightfn import WeightFunction

    class Reciprocal(WeightFunction):
        kind = "reciprocal"

        def _eval(self, t):
            return 1.0 / (1.0 - np.asarray(t))

        def _eval_w(self, t, w):
            return 1.0 / np.asarray(w)

        def spec_string(self):
            return "reciprocal"

    s = score(Reciprocal(), equidistant(4))
    assert s.divergent
    assert math.isinf(s.total)
    assert np.all(np.isfinite(s.cells[:-1]))


# -- serialization -------------------------------------------------------------

def test_json_roundtrip_bit_exact():
    net = regular_net(PowerWeight(1.7), 9)
    text = json.dumps(net.to_json())
    again = TimeNet.from_json(json.loads(text))
    np.testing.assert_array_equal(net.knots, again.knots)


def test_csv_roundtrip_bit_exact():
    net = truncated_net(LogPowerWeight(0.6), 7, 0.99)
    again = TimeNet.from_csv(net.to_csv())
    np.testing.assert_array_equal(net.knots, again.knots)


def test_csv_ignores_comments():
    text = "# manifest: x\nknot\n0\n0.5\n1\n"
    net = TimeNet.from_csv(text)
    np.testing.assert_array_equal(net.knots, [0.0, 0.5, 1.0])
