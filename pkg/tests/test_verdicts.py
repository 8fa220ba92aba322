import json
import math

import pytest

import bivp as bv


def lipschitz(passed=True):
    return bv.Evidence("lipschitz", 0.5, passed, 2.6, "coarse 2.5")


class TestEvidence:
    def test_to_dict(self):
        data = bv.Evidence("y-convexity", 0.25, False).to_dict()
        assert data["value"] is None
        assert json.dumps(data)

    def test_value_kept(self):
        assert lipschitz().to_dict()["value"] == 2.6


class TestUniquenessVerdict:
    def test_str(self):
        verdict = bv.UniquenessVerdict((1.0, 0.5), "uniqueness", "lipschitz", [lipschitz()])
        assert str(verdict) == "(1, 0.5): uniqueness (lipschitz)"
        assert verdict.cls is bv.VerdictClass.UNIQUENESS

    def test_uniqueness_needs_positive_test(self):
        with pytest.raises(ValueError, match="positive test"):
            bv.UniquenessVerdict((0.0, 0.0), "uniqueness", "lipschitz", [lipschitz(False)])

    def test_non_uniqueness_needs_witness(self):
        with pytest.raises(ValueError, match="witness"):
            bv.UniquenessVerdict((0.0, 0.0), "non-uniqueness", "envelope", [lipschitz(False)])

    def test_unknown_class(self):
        with pytest.raises(ValueError):
            bv.UniquenessVerdict((0.0, 0.0), "maybe", "envelope")

    def test_summary(self):
        verdict = bv.UniquenessVerdict(
            (1.0, 0.5),
            "uniqueness",
            "lipschitz",
            [lipschitz()],
            summary_values={"lipschitz_estimate": 2.6, "unrelated": 1},
        )
        row = verdict.summary()
        assert list(row.index) == bv.SUMMARY_KEYS
        assert row["lipschitz_estimate"] == 2.6
        assert math.isnan(row["gap_max"])

    def test_to_dict(self):
        verdict = bv.UniquenessVerdict((0.0, 0.0), "unknown", "envelope")
        data = verdict.to_dict()
        assert data["version"] == 1
        assert data["point"] == [0.0, 0.0]
        assert data["traces"] == []


class TestFrame:
    def test_rows(self):
        verdicts = [
            bv.UniquenessVerdict((x, 1.0), "uniqueness", "lipschitz", [lipschitz()])
            for x in (0.5, 1.0)
        ]
        frame = bv.frame_from_verdicts(verdicts)
        assert frame["x"].tolist() == [0.5, 1.0]
        assert (frame["class"] == "uniqueness").all()

    def test_empty(self):
        assert list(bv.frame_from_verdicts([]).columns) == bv.SUMMARY_KEYS
