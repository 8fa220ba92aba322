import pytest

import bivp as bv


def diagonal(interior):
    region = bv.Region(
        [interior], [bv.Curve("diagonal", "upper", "x")], bbox=(-1.0, 1.0, -1.0, 1.0)
    )
    return bv.ProblemSpec("diagonal", region, "0")


@pytest.fixture
def counterexample2_origin():
    return bv.to_origin(bv.corpus.get("counterexample2").problem, (0.0, 0.0))


class TestCaseTag:
    def test_str(self):
        tag = bv.CaseTag(bv.Family.B1, "=", "=")
        assert str(tag) == "B1[=,=]"
        assert str(bv.CaseTag(bv.Family.N)) == "N"

    @pytest.mark.parametrize("text", ["N", "U1[>]", "O2[<]", "B1[=,=]", "B2[>,<]"])
    def test_from_string(self, text):
        assert str(bv.CaseTag.from_string(text)) == text

    @pytest.mark.parametrize("text", ["X1", "U1[<]", "B1[=]", "N[=]", "O3[=]"])
    def test_invalid(self, text):
        with pytest.raises(ValueError):
            bv.CaseTag.from_string(text)

    def test_subcase_mismatch(self):
        with pytest.raises(ValueError):
            bv.CaseTag(bv.Family.U1)

    def test_unclassified(self):
        tag = bv.CaseTag.from_string("unclassified")
        assert not tag.classified


class TestClassifyRight:
    @pytest.mark.parametrize(
        "name",
        ["counterexample1", "counterexample2", "example1", "example2", "example3"],
    )
    def test_corpus_tags(self, name):
        entry = bv.corpus.get(name)
        for anchor, expected in entry.tags.items():
            p = bv.to_origin(entry.problem, anchor)
            assert str(bv.classify_right(p)) == expected

    def test_counterexample2(self, counterexample2_origin):
        tag = bv.classify_right(counterexample2_origin)
        assert str(tag) == "B1[=,=]"
        assert 0 < tag.witness <= 1.0

    def test_sloped_upper(self):
        p = bv.to_origin(diagonal("y < x"), (0.0, 0.0))
        assert str(bv.classify_right(p)) == "U1[>]"

    def test_empty_window(self):
        p = bv.to_origin(diagonal("y > x"), (0.0, 0.0))
        tag = bv.classify_right(p)
        assert str(tag) == "U2[>]"
        assert tag.family.empty_window

    def test_rejected_curve(self):
        p = bv.to_origin(bv.corpus.get("example3").problem, (0.0, 0.0))
        tag = bv.classify_right(p)
        assert str(tag) == "O1[=]"
        assert [curve.name for curve, _ in p.rejected] == ["lower"]
        assert any("rejected curve 'lower'" in item for item in tag.diagnostics)

    def test_unclassified(self):
        region = bv.Region(["y > 0 or y < -x"], walls=[bv.Wall("ordinate", 0.0)])
        p = bv.to_origin(bv.ProblemSpec("wedge", region, "0"), (0.0, 0.0))
        tag = bv.classify_right(p)
        assert tag.family is bv.Family.UNCLASSIFIED
        assert not tag.classified
        assert any("points in the window" in item for item in tag.diagnostics)

    def test_left_of_example3(self):
        p = bv.to_origin(bv.corpus.get("example3").problem, (0.0, 0.0), "left")
        assert str(bv.classify_right(p)) == "N"


class TestCondition4:
    def test_counterexample2(self, counterexample2_origin):
        p = counterexample2_origin
        upper, lower = (bv.check_condition4(p, c) for c in p.curves)
        assert upper.status == "holds"
        assert upper.equality
        assert lower.status == "fails"
        assert lower.witness == pytest.approx(1 / 256)
        assert str(lower).startswith("fails at x =")

    def test_example1(self):
        p = bv.to_origin(bv.corpus.get("example1").problem, (0.0, 0.0))
        (axis,) = p.lower
        result = bv.check_condition4(p, axis)
        assert result.status == "holds" and result.equality

    def test_not_applicable(self):
        p = bv.to_origin(diagonal("y < x"), (0.0, 0.0))
        assert bv.check_condition4(p, p.upper[0]).status == "not applicable"
