from . import corpus
from .classifier import CaseTag, Condition4, Family, check_condition4, classify_right
from .domain import (
    BoundaryCurve,
    Curve,
    Direction,
    Membership,
    PointClass,
    ProblemSpec,
    Region,
    Side,
    Wall,
    curve_deriv,
)
from .envelope import (
    Branching,
    EnvelopeReport,
    EnvelopeVerdict,
    LocalAnalysis,
    analyse,
    boundary_solutions,
    combine,
    detect_branching,
    envelopes,
    probe_extension,
    touch_points,
)
from .errors import (
    BivpError,
    ContinuityError,
    DomainError,
    ExpressionSyntaxError,
    GeometryError,
    RegionError,
)
from .expr import Expr, evaluate, parse, parse_predicate
from .helpers import SUMMARY_KEYS, summary_nan
from .integrator import Policy, Trace, TraceReason, euler, residual, verify_solution
from .normalize import NormalizedProblem, continuity_modulus, reflect_left, to_origin
from .peano import PeanoGeometry, boundary_triangle, interior_segment
from .quadrature import adaptive_simpson
from .uniqueness import atlas, dfdy_report, lipschitz_scan, membership, y_convexity
from .verdicts import Evidence, UniquenessVerdict, VerdictClass, frame_from_verdicts

__all__ = [
    "SUMMARY_KEYS",
    "BivpError",
    "BoundaryCurve",
    "Branching",
    "CaseTag",
    "Condition4",
    "ContinuityError",
    "Curve",
    "Direction",
    "DomainError",
    "EnvelopeReport",
    "EnvelopeVerdict",
    "Evidence",
    "Expr",
    "ExpressionSyntaxError",
    "Family",
    "GeometryError",
    "LocalAnalysis",
    "Membership",
    "NormalizedProblem",
    "PeanoGeometry",
    "PointClass",
    "Policy",
    "ProblemSpec",
    "Region",
    "RegionError",
    "Side",
    "Trace",
    "TraceReason",
    "UniquenessVerdict",
    "VerdictClass",
    "Wall",
    "adaptive_simpson",
    "analyse",
    "atlas",
    "boundary_solutions",
    "boundary_triangle",
    "check_condition4",
    "classify_right",
    "combine",
    "continuity_modulus",
    "corpus",
    "curve_deriv",
    "detect_branching",
    "dfdy_report",
    "envelopes",
    "euler",
    "evaluate",
    "frame_from_verdicts",
    "interior_segment",
    "lipschitz_scan",
    "membership",
    "parse",
    "parse_predicate",
    "probe_extension",
    "reflect_left",
    "residual",
    "summary_nan",
    "to_origin",
    "touch_points",
    "verify_solution",
    "y_convexity",
]
