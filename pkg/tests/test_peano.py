import math
import pathlib

import numpy as np
import pytest

import bivp as bv

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture
def example1():
    return bv.corpus.get("example1").problem


@pytest.fixture
def zero_field():
    return bv.ProblemSpec.load(DATA_DIR / "zero_field.json")


def triangle(problem, anchor, direction="right"):
    p = bv.to_origin(problem, anchor, direction)
    return bv.boundary_triangle(p, bv.classify_right(p))


class TestInteriorSegment:
    def test_example1(self, example1):
        g = bv.interior_segment(example1, (1.0, 1.0), 0.5, 0.5, n=257)
        assert g.M == pytest.approx(4.5)
        assert g.h == pytest.approx(1 / 9, abs=1e-12)
        assert g.kind == "interior"

    def test_zero_field(self, zero_field):
        g = bv.interior_segment(zero_field, (1.0, 1.0), 0.5, 0.5)
        assert g.M == 0.0
        assert g.h == 0.5

    def test_escapes_interior(self, example1):
        with pytest.raises(bv.RegionError, match="escapes"):
            bv.interior_segment(example1, (0.2, 0.2), 0.5, 0.5)

    def test_positive_sides(self, example1):
        with pytest.raises(ValueError):
            bv.interior_segment(example1, (1.0, 1.0), 0.0, 0.5)


class TestBoundaryTriangle:
    def test_example1(self, example1):
        g = triangle(example1, (0.0, 0.0))
        assert g.ok
        assert g.kind == "boundary-right"
        assert g.tau == 1.0
        assert g.delta == pytest.approx(1 / 3, rel=1e-6)
        assert g.h == pytest.approx(1 / 3, rel=1e-6)
        assert g.M <= 1.0 + 1e-9

    def test_legs_clipped_by_tangent_curve(self, example1):
        g = triangle(example1, (0.0, 0.0))
        lower, upper = g.leg_bounds(np.array([0.1, 0.2]))
        assert np.allclose(lower, 0.0)
        assert np.allclose(upper, [0.1, 0.2])

    def test_sloped_curve(self, zero_field):
        g = triangle(zero_field, (0.0, 0.0))
        assert str(g.tag) == "O1[<]"
        assert g.tau == pytest.approx(0.5)
        assert g.h == pytest.approx(1.0)
        assert g.M == 0.0

    def test_condition4_fails(self):
        g = triangle(bv.corpus.get("counterexample2").problem, (0.0, 0.0))
        assert not g.ok
        assert g.h > 0
        assert "field points outward across 'axis'" in g.reason
        assert [c.status.value for c in g.conditions] == ["holds", "fails"]

    def test_inapplicable(self):
        region = bv.Region(["y > x"], [bv.Curve("diagonal", "upper", "x")])
        g = triangle(bv.ProblemSpec("above", region, "0"), (0.0, 0.0))
        assert not g.ok
        assert g.h == 0.0
        assert g.reason == "existence theorem inapplicable"

    def test_half_rectangle(self):
        g = triangle(bv.corpus.get("counterexample1").problem, (0.0, 0.0))
        assert str(g.tag) == "N"
        assert g.ok
        assert 0 < g.h <= g.a
        assert g.h == pytest.approx(min(g.a, g.a / g.M))

    def test_left(self):
        g = triangle(bv.corpus.get("example3").problem, (0.0, 0.0), "left")
        assert g.kind == "boundary-left"
        assert g.direction is bv.Direction.LEFT
        assert g.h > 0

    def test_to_dict(self, example1):
        data = triangle(example1, (0.0, 0.0)).to_dict()
        assert data["tag"] == "O1[=]"
        assert data["ok"] is True
        assert not math.isnan(data["h"])
