import math

import pytest

import bivp as bv


class TestAdaptiveSimpson:
    def test_polynomial(self):
        assert bv.adaptive_simpson(lambda v: 3 * v * v, 0.0, 1.0) == pytest.approx(1.0)

    def test_reversed_limits(self):
        forward = bv.adaptive_simpson(math.exp, 0.0, 1.0)
        assert bv.adaptive_simpson(math.exp, 1.0, 0.0) == pytest.approx(-forward)

    def test_empty_interval(self):
        assert bv.adaptive_simpson(math.sin, 2.0, 2.0) == 0.0

    def test_tolerance(self):
        value = bv.adaptive_simpson(math.sin, 0.0, math.pi, tol=1e-12)
        assert abs(value - 2.0) < 1e-10

    def test_endpoint_kink(self):
        value = bv.adaptive_simpson(lambda v: math.sqrt(v), 0.0, 1.0, tol=1e-12)
        assert value == pytest.approx(2 / 3, abs=1e-8)

    def test_non_finite(self):
        with pytest.raises(FloatingPointError):
            bv.adaptive_simpson(lambda v: math.inf, 0.0, 1.0)
