import math

import numpy as np
import pytest

import bivp as bv
from bivp import corpus, expr


@pytest.fixture
def example3():
    return bv.corpus.get("example3").problem.field


class TestParse:
    def test_caret_is_power(self):
        assert bv.parse("x^2 + y^3")(2.0, 1.0) == 5.0

    def test_text_is_kept(self):
        assert bv.parse("3*sqrt(x)*sqrt(y)").text == "3*sqrt(x)*sqrt(y)"

    def test_variables(self):
        assert bv.parse("sqrt(x) + 1").variables == {"x"}
        assert bv.parse("x*y").variables == {"x", "y"}

    def test_functions(self):
        e = bv.parse("abs(x) + sign(y) + exp(0) + ln(1) + pow(2, 3) + min(x, y, 0) + max(1, 2)")
        assert e(-1.0, -2.0) == 1.0 - 1.0 + 1.0 + 0.0 + 8.0 - 2.0 + 2.0

    def test_unknown_identifier(self):
        with pytest.raises(bv.ExpressionSyntaxError) as excinfo:
            bv.parse("x + foo")
        assert excinfo.value.position == 4
        assert excinfo.value.text == "x + foo"

    def test_unknown_function(self):
        with pytest.raises(bv.ExpressionSyntaxError, match="Unknown function"):
            bv.parse("cosh(x)")

    def test_arity(self):
        with pytest.raises(bv.ExpressionSyntaxError, match="expects 1 arguments"):
            bv.parse("sqrt(x, y)")

    def test_syntax_error_is_value_error(self):
        with pytest.raises(ValueError):
            bv.parse("x +* ")

    def test_empty(self):
        with pytest.raises(bv.ExpressionSyntaxError):
            bv.parse("   ")

    def test_comparison_is_not_a_value(self):
        with pytest.raises(bv.ExpressionSyntaxError):
            bv.parse("x < 1")

    def test_predicate(self):
        guard = bv.parse_predicate("x <= 0 or abs(y) >= x^2")
        assert guard(-1.0, 0.0)
        assert guard(1.0, 2.0)
        assert not guard(1.0, 0.5)

    def test_predicate_needs_comparison(self):
        with pytest.raises(bv.ExpressionSyntaxError):
            bv.parse_predicate("x + 1")

    def test_non_string(self):
        with pytest.raises(TypeError):
            bv.parse(1.0)


class TestEvaluate:
    def test_scalar(self):
        assert bv.evaluate("x*y", 2.0, 3.0) == 6.0

    def test_array(self):
        values = bv.evaluate("x^2", np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(values, [1.0, 4.0, 9.0])

    def test_sqrt_negative(self):
        with pytest.raises(bv.DomainError) as excinfo:
            bv.evaluate("sqrt(y)", 0.0, -1.0)
        assert excinfo.value.point == (0.0, -1.0)

    def test_sqrt_clamp(self):
        assert bv.evaluate("sqrt(y)", 0.0, -1e-13) == 0.0

    def test_array_domain_error(self):
        with pytest.raises(bv.DomainError):
            bv.evaluate("sqrt(y)", np.zeros(3), np.array([1.0, -1.0, 1.0]))

    def test_ln(self):
        with pytest.raises(bv.DomainError):
            bv.evaluate("ln(x)", 0.0)

    def test_division_by_zero(self):
        with pytest.raises(bv.DomainError):
            bv.evaluate("1/x", 0.0)

    def test_fractional_power_of_negative(self):
        with pytest.raises(bv.DomainError):
            bv.evaluate("x^0.5", -1.0)

    def test_domain_error_is_value_error(self):
        assert issubclass(bv.DomainError, ValueError)


class TestPiecewise:
    def test_first_match_wins(self):
        e = bv.parse("piecewise(x >= 0: 1, x >= -1: 2, x < -1: 3)")
        assert [e(v) for v in (0.5, -0.5, -2.0)] == [1.0, 2.0, 3.0]

    def test_array_matches_scalar(self, example3):
        xs = np.array([-1.0, 0.5, 1.0, 1.0])
        ys = np.array([0.3, 1.0, -2.0, 1.0])
        values = example3(xs, ys)
        assert np.allclose(values, [example3(x, y) for x, y in zip(xs, ys, strict=True)])

    def test_no_branch(self):
        e = bv.parse("piecewise(x > 0: 1)")
        with pytest.raises(bv.DomainError):
            e(-1.0)

    def test_boundary_solutions_of_example3(self, example3):
        for x in (0.25, 0.5, 1.0):
            assert math.isclose(example3(x, x * x), 2 * x)
            assert math.isclose(example3(x, -x * x), -2 * x)


class TestExpr:
    def test_substitute(self):
        e = bv.parse("x^2 + y").substitute(x=bv.parse("x + 1"), y=2.0)
        assert e(1.0, 0.0) == 6.0

    def test_arithmetic(self):
        e = 2 * bv.parse("x") - bv.parse("y") / 2
        assert e(1.0, 2.0) == 1.0

    def test_negation(self):
        assert (-bv.parse("x"))(3.0) == -3.0

    def test_equality(self):
        assert bv.parse("x + 1") == bv.parse("x+1")
        assert hash(bv.parse("x + 1")) == hash(bv.parse("x+1"))

    def test_non_finite(self):
        with pytest.raises(bv.DomainError):
            bv.evaluate("exp(x)", 1e6)


def corpus_expressions(name):
    """Yield each field, curve and predicate of a corpus entry with sample points."""
    problem = corpus.get(name).problem
    for p in (problem, problem.extension):
        if p is None:
            continue
        xs, ys = p.region.sample()
        yield p.field, xs, ys
        for item in p.region.inequalities:
            yield item, xs, ys
        x0, x1 = p.region.bbox[:2]
        for curve in p.region.curves:
            cx, _ = curve.sample(x0, x1, 257)
            yield curve.b, cx, np.zeros_like(cx)


def jumps(e, point, direction, offsets=(1e-3, 1e-5, 1e-7)):
    x, y = point
    dx, dy = direction
    return [abs(e(x + h * dx, y + h * dy) - e(x - h * dx, y - h * dy)) for h in offsets]


class TestRoundTrip:
    def test_text(self):
        e = bv.parse("-3*x^2 - (-y)")
        assert expr.to_text(e.root) == "(((-3.0) * (x ** 2.0)) - (-y))"

    @pytest.mark.parametrize("name", corpus.ids())
    def test_corpus(self, name):
        rng = np.random.default_rng(0)
        for e, xs, ys in corpus_expressions(name):
            text = expr.to_text(e.root)
            reparsed = bv.parse_predicate(text) if e.is_predicate else bv.parse(text)
            assert reparsed.root == e.root
            pick = rng.choice(xs.size, size=min(1000, xs.size), replace=False)
            assert np.array_equal(reparsed(xs[pick], ys[pick]), e(xs[pick], ys[pick]))


class TestSeams:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_band_ends(self, n):
        field = corpus.get("counterexample1").problem.field
        seam = corpus.psi_band(n)["right"]
        steps = jumps(field, (seam, 0.01), (1.0, 0.0))
        assert steps[0] > steps[1] > steps[2]
        assert steps[-1] < 1e-3

    @pytest.mark.parametrize("y", [-1.0, 0.0, 1.0])
    def test_extension(self, y):
        field = corpus.get("example2").problem.extension.field
        steps = jumps(field, (1.0, y), (0.0, 1.0))
        assert steps[0] > steps[1] > steps[2]
        assert steps[-1] < 1e-3
