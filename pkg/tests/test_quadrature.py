import math

import numpy as np
import pytest

from netopt.errors import QuadratureFailure
from netopt.quadrature import QuadratureConfig, integrate, integrate_to_one


def test_polynomial_exact():
    assert integrate(lambda t: 3.0 * t ** 2, 0.0, 1.0) == pytest.approx(1.0, abs=1e-13)


def test_oscillatory():
    val = integrate(lambda t: np.sin(40.0 * t), 0.0, 1.0)
    exact = (1.0 - math.cos(40.0)) / 40.0
    assert val == pytest.approx(exact, abs=1e-11)


def test_sqrt_singularity_at_zero():
    # integrable endpoint singularity handled by subdivision
    val = integrate(lambda t: 1.0 / np.sqrt(np.maximum(t, 1e-300)), 1e-14, 1.0)
    assert val == pytest.approx(2.0, abs=1e-6)


def test_tail_substitution_integrable():
    # integral of (1-t)^(-1/2) over [0, 1) equals 2
    val = integrate_to_one(lambda t: (1.0 - t) ** -0.5, 0.0)
    assert val == pytest.approx(2.0, rel=1e-10)


def test_tail_substitution_divergent_marked():
    val = integrate_to_one(lambda t: 1.0 / (1.0 - t), 0.0)
    assert math.isinf(val)


def test_tail_from_midpoint():
    val = integrate_to_one(lambda t: (1.0 - t) ** 2, 0.5)
    assert val == pytest.approx(0.5 ** 3 / 3.0, rel=1e-10)


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(max_depth=0)


def test_max_depth_failure():
    cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=1e-16, max_depth=2)
    with pytest.raises(QuadratureFailure):
        integrate(lambda t: np.abs(np.sin(200.0 * t)) ** 0.3, 0.0, 1.0, cfg)


def test_reversed_limits():
    assert integrate(lambda t: t, 1.0, 0.0) == pytest.approx(-0.5, abs=1e-13)
