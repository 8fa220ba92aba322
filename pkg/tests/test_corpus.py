import math

import numpy as np
import pytest

import bivp as bv
from bivp import corpus


class TestConstants:
    def test_theta(self):
        assert 1.65 <= corpus.theta() <= 1.67

    def test_eta_limits(self):
        assert corpus.eta(2.0, 0.0) == 0.0
        assert corpus.eta(2.0, 4.0) == pytest.approx(corpus.theta())

    @pytest.mark.parametrize(("x", "y"), [(0.0, 0.0), (1.0, 2.0), (1.0, -0.5)])
    def test_eta_domain(self, x, y):
        with pytest.raises(ValueError):
            corpus.eta(x, y)

    @pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
    def test_integral_on_axis(self, c):
        assert corpus.implicit_integral(c, 0.0) == pytest.approx(c)

    def test_contact_abscissa(self):
        assert corpus.contact_abscissa(2.0) == pytest.approx(2 * math.exp(-corpus.theta()))
        with pytest.raises(ValueError):
            corpus.contact_abscissa(0.0)

    def test_lower_integral(self):
        assert corpus.lower_integral(1.0, 0.0) == 1.0
        with pytest.raises(ValueError):
            corpus.lower_integral(1.0, -2.0)


class TestPsi:
    def test_band(self):
        band = corpus.psi_band(3)
        assert band["a"] == 0.125
        assert band["right"] == 0.25
        assert band["b"] == 2.0**-8

    @pytest.mark.parametrize("n", [0, 1.5, -2])
    def test_band_index(self, n):
        with pytest.raises(ValueError):
            corpus.psi_band(n)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_vanishes_at_band_ends(self, n):
        assert corpus.psi(n, 2.0**-n) == 0.0
        assert corpus.psi(n, 2.0 ** -(n - 1)) == 0.0

    def test_outside_band(self):
        with pytest.raises(ValueError, match="outside"):
            corpus.psi(2, 0.6)

    def test_props(self):
        props = corpus.psi_props(1)
        assert props["max"] == pytest.approx(2.0**-6)
        assert props["argmax"] == 0.75
        third = corpus.psi_props(3)
        assert third["slope_minus"] == pytest.approx(3 * 2.0**-9, abs=1e-4)
        assert third["slope_plus"] == pytest.approx(-3 * 2.0**-9, abs=1e-4)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_solves_counterexample1(self, n):
        problem = corpus.get("counterexample1").problem
        check = bv.verify_solution(corpus.psi_text(), problem, (2.0**-n, 2.0 ** -(n - 1)))
        assert check.passed

    def test_text_matches_psi(self):
        e = bv.parse(corpus.psi_text())
        for n in (1, 2, 3):
            d = corpus.psi_band(n)["d"]
            assert e(d) == pytest.approx(corpus.psi(n, d))


class TestExample2Family:
    @pytest.mark.parametrize("c", [0.5, 1.0])
    def test_zeros(self, c):
        member = corpus.example2_member(c)
        assert member.expr(c) == pytest.approx(0.0, abs=1e-12)
        assert member.expr(-c / 3) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("c", [0.5, 1.0])
    def test_level(self, c):
        member = corpus.example2_member(c)
        for x in (c, 1.5, 2.0):
            assert corpus.lower_integral(x, member.expr(x)) == pytest.approx(c)

    def test_integral_along_polygon(self):
        extension = corpus.get("example2").problem.extension
        p = bv.to_origin(extension, (1.0, -0.25))
        t = bv.euler(p, eps=1e-3, span=0.5).to_global(p)
        level = corpus.lower_integral(1.0, -0.25)
        values = [corpus.lower_integral(x, y) for x, y in zip(t.x, t.y)]
        assert np.allclose(values, level, rtol=1e-2)


class TestEntries:
    def test_ids(self):
        assert corpus.ids() == [
            "example1",
            "counterexample1",
            "counterexample2",
            "example2",
            "example3",
        ]

    def test_cached(self):
        assert corpus.get("example1") is corpus.get("example1")

    def test_unknown(self):
        with pytest.raises(ValueError, match="Unknown corpus problem"):
            corpus.get("example9")

    @pytest.mark.parametrize("name", corpus.ids())
    def test_closed_forms(self, name):
        rows = corpus.get(name).verify()
        assert rows["passed"].all(), rows.loc[~rows["passed"], ["family", "name"]]

    @pytest.mark.parametrize("name", corpus.ids())
    def test_export(self, name, tmp_path):
        path = corpus.export(name, tmp_path / f"{name}.json")
        loaded = bv.ProblemSpec.load(path)
        original = corpus.get(name).problem
        assert loaded.field == original.field
        assert loaded.region.bbox == original.region.bbox

    def test_counterexample1_metadata(self):
        entry = corpus.get("counterexample1")
        assert entry.constants["bands"] == corpus.BANDS
        assert entry.constants["tail_bound"] == 2.0 ** (-3 * (corpus.BANDS + 1))

    def test_example2_notes(self):
        assert "swapped" in corpus.get("example2").notes
