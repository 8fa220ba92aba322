import pathlib

import numpy as np
import pandas as pd
import pytest

import bivp as bv

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture
def example1():
    return bv.corpus.get("example1").problem


@pytest.fixture
def counterexample2():
    return bv.corpus.get("counterexample2").problem


def final_error(problem, anchor, oracle, eps, span):
    p = bv.to_origin(problem, anchor)
    t = bv.euler(p, eps=eps, span=span)
    assert t.complete
    gx, gy = p.to_global(t.x, t.y)
    return abs(float(gy[-1]) - oracle(float(gx[-1])))


class TestTrace:
    def test_shapes(self):
        with pytest.raises(ValueError):
            bv.Trace([0.0, 1.0], [0.0], ["interior"], 1.0)

    def test_from_function(self):
        t = bv.Trace.from_function("x^2", 0.0, 1.0, 0.1)
        assert len(t) == 11
        assert t.y[-1] == pytest.approx(1.0)
        assert t.step == pytest.approx(0.1)

    def test_from_function_left(self):
        t = bv.Trace.from_function("x", 1.0, 0.0, 0.25)
        assert t.direction is bv.Direction.LEFT
        assert t.x[-1] == 0.0

    def test_interpolate(self):
        t = bv.Trace.from_function("2*x", 0.0, 1.0, 0.5)
        assert t(0.25) == pytest.approx(0.5)

    def test_frame_and_csv(self, tmp_path):
        t = bv.Trace.from_function("x", 0.0, 1.0, 0.5, flag="on-curve:diagonal")
        df = t.to_frame()
        assert list(df.columns) == ["x", "y", "flag"]
        path = t.to_csv(tmp_path / "trace.csv")
        loaded = pd.read_csv(path)
        assert loaded["flag"].tolist() == ["on-curve:diagonal"] * 3
        assert t.on_curve.all()


class TestEuler:
    def test_boundary_policy_slides(self, example1):
        p = bv.to_origin(example1, (0.0, 0.0))
        t = bv.euler(p, eps=0.01, policy="boundary", span=0.5)
        assert t.complete
        assert np.all(t.y == 0.0)
        assert all(flag == "on-curve:axis" for flag in t.flags)

    def test_interior_policy_leaves_tangent_curve(self, example1):
        p = bv.to_origin(example1, (0.0, 0.0))
        g = bv.boundary_triangle(p, bv.classify_right(p))
        t = bv.euler(p, g, eps=1e-3)
        assert t.x[-1] == pytest.approx(g.h)
        assert np.max(np.abs(t.y - t.x**3)) < 1e-2
        assert t.flags[-1] == "interior"

    def test_obstruction(self, counterexample2):
        p = bv.to_origin(counterexample2, (0.0, 0.0))
        t = bv.euler(p, eps=0.01, span=0.5)
        assert t.reason is bv.TraceReason.OBSTRUCTION
        assert t.flags[-1] == "terminal:obstruction-condition4"
        assert not t.complete

    def test_zero_field(self):
        problem = bv.ProblemSpec.load(DATA_DIR / "zero_field.json")
        p = bv.to_origin(problem, (0.0, 0.0))
        t = bv.euler(p, eps=0.1, span=1.0)
        assert np.array_equal(t.y, np.zeros(11))

    def test_bias(self):
        problem = bv.ProblemSpec.load(DATA_DIR / "zero_field.json")
        p = bv.to_origin(problem, (0.0, 0.0))
        t = bv.euler(p, eps=0.1, span=1.0, bias=0.5)
        assert t.y[-1] == pytest.approx(0.5)
        assert t.bias == 0.5

    def test_step_bound(self, example1):
        p = bv.to_origin(example1, (1.0, 1.0))
        t = bv.euler(p, eps=0.03, span=0.1)
        assert np.all(np.diff(t.x) <= 0.03 + 1e-12)
        assert t.x[-1] == pytest.approx(0.1)

    def test_positive_step(self, example1):
        p = bv.to_origin(example1, (1.0, 1.0))
        with pytest.raises(ValueError):
            bv.euler(p, eps=0.0, span=0.1)

    def test_no_segment(self, example1):
        p = bv.to_origin(example1, (1.0, 1.0))
        with pytest.raises(bv.GeometryError):
            bv.euler(p)

    def test_geometry_mismatch(self, example1):
        p = bv.to_origin(example1, (0.0, 0.0))
        g = bv.boundary_triangle(p, bv.classify_right(p))
        other = bv.to_origin(example1, (1.0, 0.0))
        with pytest.raises(ValueError, match="does not match"):
            bv.euler(other, g)

    def test_to_global(self, example1):
        p = bv.to_origin(example1, (1.0, 1.0))
        t = bv.euler(p, eps=0.01, span=0.2).to_global(p)
        assert t.x[0] == 1.0 and t.y[0] == 1.0
        assert t.x[-1] == pytest.approx(1.2)
        assert t.y[-1] == pytest.approx(1.2**3, rel=1e-2)


class TestContactAbscissa:
    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
    def test_meets_parabola(self, counterexample2, c):
        p = bv.to_origin(counterexample2, (c, 0.0), "left")
        t = bv.euler(p, eps=1e-4 * c, policy="boundary", span=0.95 * c)
        hit = np.flatnonzero(np.array(t.flags) == "on-curve:parabola")[0]
        gx, _ = p.to_global(t.x[hit], t.y[hit])
        assert float(gx) == pytest.approx(bv.corpus.contact_abscissa(c), rel=0.02)

    def test_integral_is_conserved(self, counterexample2):
        p = bv.to_origin(counterexample2, (1.0, 0.0), "left")
        t = bv.euler(p, eps=1e-4, policy="boundary", span=0.7)
        gx, gy = p.to_global(t.x, t.y)
        inside = [i for i, flag in enumerate(t.flags) if flag == "interior"]
        values = [bv.corpus.implicit_integral(gx[i], gy[i]) for i in inside[::500]]
        assert values
        assert np.allclose(values, 1.0, rtol=0.02)


class TestConvergence:
    @pytest.mark.parametrize(
        ("name", "anchor", "oracle", "span"),
        [
            ("example1", (1.0, 1.0), lambda x: x**3, 0.5),
            ("example3", (-1.0, 1.0), lambda x: x**-2, 0.25),
        ],
    )
    def test_first_order(self, name, anchor, oracle, span):
        problem = bv.corpus.get(name).problem
        errors = [final_error(problem, anchor, oracle, eps, span) for eps in (4e-3, 2e-3, 1e-3)]
        ratios = [errors[0] / errors[1], errors[1] / errors[2]]
        assert all(1.6 <= r <= 2.4 for r in ratios)


class TestResidual:
    def test_exact_polygon(self, example1):
        p = bv.to_origin(example1, (0.0, 0.0))
        t = bv.Trace.from_function("0", 0.0, 0.5, 0.01, flag="on-curve:axis")
        assert bv.residual(t, p) == 0.0

    def test_wrong_polygon(self, example1):
        p = bv.to_origin(example1, (0.0, 0.0))
        t = bv.Trace.from_function("x", 0.0, 0.5, 0.01)
        assert bv.residual(t, p) > 0.5

    def test_euler_residual_is_small(self, example1):
        p = bv.to_origin(example1, (1.0, 1.0))
        t = bv.euler(p, eps=1e-3, span=0.2)
        assert bv.residual(t, p) < 0.05


class TestVerifySolution:
    def test_passes(self, example1):
        check = bv.verify_solution("x^3", example1, (0.0, 2.0))
        assert check.passed
        assert check.graph_in_region
        assert check.max_defect < 1e-6

    def test_fails(self, example1):
        check = bv.verify_solution("x^2", example1, (0.1, 2.0))
        assert not check.passed
        assert check.to_dict()["max_defect"] > 0.1

    def test_outside_region(self):
        example3 = bv.corpus.get("example3").problem
        check = bv.verify_solution("0", example3, (0.5, 1.0))
        assert not check.graph_in_region

    def test_not_evaluable(self, example1):
        with pytest.raises(bv.DomainError):
            bv.verify_solution("ln(x)", example1, (0.0, 1.0))
