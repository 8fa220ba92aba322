import numpy as np
import pandas as pd
import pytest

import bivp as bv


@pytest.fixture
def example1():
    return bv.corpus.get("example1").problem


@pytest.fixture
def example3():
    return bv.corpus.get("example3").problem


def corpus_points():
    return [
        (name, anchor, expected)
        for name in bv.corpus.ids()
        for anchor, expected in bv.corpus.get(name).verdicts.items()
    ]


class TestLipschitzScan:
    def test_bounded(self, example1):
        scan = bv.lipschitz_scan(example1, (1.0, 1.0), 0.5)
        assert scan["bounded"]
        # |df/dy| = 3 sqrt(x) / (2 sqrt(y)) peaks at (1.5, 0.5)
        assert 2.0 < scan["estimate"] <= 2.61
        assert scan["pairs"] > 0

    def test_unbounded_at_example3_origin(self, example3):
        scan = bv.lipschitz_scan(example3, (0.0, 0.0), 0.5)
        assert not scan["bounded"]

    @pytest.mark.parametrize("x", [0.1, 0.01])
    def test_example3_ratio(self, example3, x):
        ratio = abs(example3.f(x, x**2) - example3.f(x, -(x**2))) / (2 * x**2)
        assert ratio >= 1 / (2 * x)
        assert ratio == pytest.approx(2 / x)

    @pytest.mark.parametrize("x", [0.1, 0.01])
    def test_example3_scan_across_gap(self, example3, x):
        # the window around (x, x^2) reaches the lower curve y = -x^2
        scan = bv.lipschitz_scan(example3, (x, x**2), 2 * x**2)
        assert scan["estimate"] >= 1 / (2 * x)
        assert scan["estimate"] == pytest.approx(2 / x, rel=0.5)

    def test_example3_estimate_grows(self, example3):
        estimates = [
            bv.lipschitz_scan(example3, (x, x**2), 2 * x**2)["estimate"] for x in (0.1, 0.01)
        ]
        # 1 / sqrt(y) on the curve y = x^2 grows tenfold
        assert estimates[1] / estimates[0] == pytest.approx(10, rel=0.3)

    def test_deterministic(self, example1):
        first = bv.lipschitz_scan(example1, (1.0, 1.0), 0.25, seed=7)
        second = bv.lipschitz_scan(example1, (1.0, 1.0), 0.25, seed=7)
        pd.testing.assert_series_equal(first, second)

    def test_positive_window(self, example1):
        with pytest.raises(ValueError):
            bv.lipschitz_scan(example1, (1.0, 1.0), 0.0)


class TestWeakRoute:
    def test_convex_window(self, example1):
        assert bv.y_convexity(example1, (1.0, 1.0), 0.5)

    def test_example3_not_convex(self, example3):
        assert not bv.y_convexity(example3, (0.0, 0.0), 0.5)

    def test_dfdy_continuous(self, example1):
        report = bv.dfdy_report(example1, (1.0, 1.0), 0.5)
        assert report["continuous"]
        assert report["bound"] == pytest.approx(2.6, abs=0.05)

    def test_dfdy_blows_up_on_axis(self, example1):
        report = bv.dfdy_report(example1, (1.0, 0.0), 0.5)
        assert not report["continuous"]


class TestMembership:
    @pytest.mark.parametrize(("name", "anchor", "expected"), corpus_points())
    def test_corpus_verdicts(self, name, anchor, expected):
        verdict = bv.membership(bv.corpus.get(name).problem, anchor)
        assert verdict.cls == expected

    def test_lipschitz_route(self, example1):
        verdict = bv.membership(example1, (1.0, 1.0))
        assert verdict.route == "lipschitz"
        assert str(verdict) == "(1, 1): uniqueness (lipschitz)"

    def test_witness_traces(self, example3):
        verdict = bv.membership(example3, (0.0, 0.0))
        assert verdict.cls is bv.VerdictClass.NON_UNIQUENESS
        assert any(item.kind == "witness" for item in verdict.evidence)
        assert all(name.endswith(")") for name in verdict.traces)

    def test_summary(self, example3):
        row = bv.membership(example3, (0.0, 0.0)).summary()
        assert row["class"] == "non-uniqueness"
        assert not bool(row["y_convex"])
        assert not bool(row["lipschitz_bounded"])

    def test_report(self, example1):
        data = bv.membership(example1, (1.0, 1.0)).to_dict()
        assert data["version"] == 1
        assert data["class"] == "uniqueness"
        assert data["evidence"][0]["kind"] == "lipschitz"

    def test_outside(self, example1):
        with pytest.raises(bv.RegionError):
            bv.membership(example1, (1.0, -1.0))


class TestAtlas:
    def test_example1(self, example1):
        frame = bv.atlas(example1, [0.5, 1.0], [0.0, 0.5], workers=2, eps=1e-2)
        assert list(frame.columns) == bv.SUMMARY_KEYS
        assert len(frame) == 4
        on_axis = frame[frame["y"] == 0.0]
        above = frame[frame["y"] > 0.0]
        assert (on_axis["class"] == "non-uniqueness").all()
        assert (above["class"] == "uniqueness").all()

    def test_outside_rows_are_nan(self, example1):
        frame = bv.atlas(example1, [1.0], [-1.0, 1.0])
        outside = frame[frame["y"] < 0]
        assert outside["class"].isna().all()
        assert np.isfinite(frame["x"]).all()


ROUTE_POINTS = [
    ("example1", (1.0, 1.0)),
    ("example1", (0.5, 0.5)),
    ("example1", (1.5, 1.0)),
    ("example3", (1.0, 1.0)),
    ("example3", (0.5, 1.0)),
]


def window_pairs(p, point, c, n=1000, seed=1):
    """Draw ``n`` admissible pairs ``(x, y1), (x, y2)`` from the window."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(point[0] - c, point[0] + c, 8 * n)
    y1 = rng.uniform(point[1] - c, point[1] + c, 8 * n)
    y2 = rng.uniform(point[1] - c, point[1] + c, 8 * n)
    keep = (
        (p.region.codes(x, y1) > 0)
        & (p.region.codes(x, y2) > 0)
        & (np.abs(y1 - y2) >= 1e-8)
    )
    return x[keep][:n], y1[keep][:n], y2[keep][:n]


class TestRouteProperties:
    @pytest.mark.parametrize("c", [0.25, 0.1])
    @pytest.mark.parametrize(("name", "point"), ROUTE_POINTS)
    def test_estimate_bounds_random_pairs(self, name, point, c):
        p = bv.corpus.get(name).problem
        scan = bv.lipschitz_scan(p, point, c)
        assert scan["bounded"]
        x, y1, y2 = window_pairs(p, point, c)
        assert x.size == 1000
        change = np.abs(p.f(x, y1) - p.f(x, y2))
        # secants on the scan grid sit a little below the sup of |df/dy|
        bound = (scan["estimate"] * 1.05 + 1e-9) * np.abs(y1 - y2)
        assert np.all(change <= bound)

    def test_weak_route_implies_strong_route(self):
        weak = 0
        for name, point in ROUTE_POINTS:
            p = bv.corpus.get(name).problem
            for c in (0.25, 0.1):
                if not bv.y_convexity(p, point, c):
                    continue
                if not bv.dfdy_report(p, point, c)["continuous"]:
                    continue
                weak += 1
                assert bv.lipschitz_scan(p, point, c)["bounded"], (name, point, c)
        assert weak > 0
