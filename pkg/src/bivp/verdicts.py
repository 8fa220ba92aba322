import dataclasses
import enum
import math

import numpy as np
import pandas as pd

from .helpers import SUMMARY_KEYS, point_label, summary_nan

REPORT_VERSION = 1


class VerdictClass(enum.StrEnum):
    UNIQUENESS = "uniqueness"
    FORMAL_ONLY = "formal-only"
    HIDDEN_NON_UNIQUENESS = "hidden-non-uniqueness"
    NON_UNIQUENESS = "non-uniqueness"
    UNKNOWN = "unknown"


@dataclasses.dataclass(frozen=True)
class Evidence:
    """
    One numeric observation behind a verdict.

    ``kind`` names the test (``lipschitz``, ``dfdy``, ``y-convexity``,
    ``envelope``, ``witness``, ``extension-probe``), ``window`` the half-side of
    the sampled square or the segment length, ``passed`` whether the test
    supports uniqueness, ``value`` its main number and ``detail`` a short text.
    """

    kind: str
    window: float
    passed: bool
    value: float = math.nan
    detail: str = ""

    def to_dict(self):
        data = dataclasses.asdict(self)
        data["value"] = None if math.isnan(self.value) else self.value
        return data


@dataclasses.dataclass
class UniquenessVerdict:
    """
    Class of a point with the evidence that led to it.

    Verdicts are numeric evidence at sampling resolution, never proofs.
    ``traces`` maps names to the traces behind a witness, in global
    coordinates.
    """

    point: tuple
    cls: VerdictClass
    route: str
    evidence: list = dataclasses.field(default_factory=list)
    traces: dict = dataclasses.field(default_factory=dict)
    summary_values: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.cls = VerdictClass(self.cls)
        if self.cls is VerdictClass.NON_UNIQUENESS and not any(
            item.kind == "witness" for item in self.evidence
        ):
            raise ValueError("A non-uniqueness verdict needs a witness pair")
        if self.cls is VerdictClass.UNIQUENESS and not any(
            item.passed for item in self.evidence
        ):
            raise ValueError("A uniqueness verdict needs a positive test")

    def __str__(self):
        return f"{point_label(*self.point)}: {self.cls.value} ({self.route})"

    def summary(self):
        """
        Return the verdict as a Series over the summary keys.

        Returns
        -------
        pd.Series
            Values of ``SUMMARY_KEYS``; tests that did not run hold NaN.
        """
        result = summary_nan(point_label(*self.point))
        result["x"], result["y"] = self.point
        result["class"] = self.cls.value
        result["route"] = self.route
        for key, value in self.summary_values.items():
            if key in SUMMARY_KEYS:
                result[key] = value
        return result

    def to_dict(self):
        return {
            "version": REPORT_VERSION,
            "point": list(self.point),
            "class": self.cls.value,
            "route": self.route,
            "evidence": [item.to_dict() for item in self.evidence],
            "traces": sorted(self.traces),
        }


def frame_from_verdicts(verdicts):
    """Stack verdict summaries into a DataFrame with one row per point."""
    rows = [verdict.summary() for verdict in verdicts]
    if not rows:
        return pd.DataFrame(columns=SUMMARY_KEYS)
    frame = pd.DataFrame(rows).reset_index(drop=True)
    for key in ("x", "y"):
        frame[key] = frame[key].astype(np.float64)
    return frame
