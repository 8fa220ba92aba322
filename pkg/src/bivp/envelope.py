import dataclasses
import enum
import itertools
import logging

import numpy as np
import pandas as pd

from . import expr as ex
from .classifier import classify_right
from .domain import Direction, curve_deriv
from .errors import DomainError, GeometryError
from .helpers import (
    ATTAIN_TOL,
    BIAS0,
    BOUNDARY_TOL,
    BRANCH_TOL,
    DEFAULT_TAU,
    DYADIC_DEPTH,
    EULER_STEP,
    FAMILY_SIZE,
    GAP_TOL,
    TANGENCY_TOL,
)
from .integrator import Policy, Trace, TraceReason, euler, residual
from .normalize import NormalizedProblem
from .peano import boundary_triangle
from .verdicts import Evidence, UniquenessVerdict, VerdictClass

logger = logging.getLogger(__name__)

SOLUTION_SAMPLES = 256


class EnvelopeVerdict(enum.StrEnum):
    LOCALLY_UNIQUE = "locally-unique"
    BRANCHING = "non-unique-branching"
    TOUCH_SEQUENCE = "non-unique-touch-sequence"
    LOWER_NOT_ATTAINED = "lower-not-attained"
    UPPER_NOT_ATTAINED = "upper-not-attained"
    INCONCLUSIVE = "inconclusive"


class Branching(enum.StrEnum):
    BRANCH_RIGHT = "branch-right"
    TOUCH_SEQUENCE = "touch-sequence"
    LATE_SPLIT = "late-split"
    COINCIDE = "coincide"

    @property
    def non_unique(self):
        return self in (Branching.BRANCH_RIGHT, Branching.TOUCH_SEQUENCE)


def _check_grid(traces):
    x = traces[0].x
    for trace in traces[1:]:
        if trace.x.shape != x.shape or not np.allclose(trace.x, x, rtol=0, atol=1e-12):
            raise ValueError("Traces do not share the same x grid")
    return x


def combine(traces, mode):
    """
    Take the pointwise minimum or maximum of traces on a common grid.

    Where several traces attain the extreme value and one of them lies on a
    boundary curve there, the combined node keeps the on-curve flag.

    Parameters
    ----------
    traces : list of Trace
        Traces sharing the same ``x`` grid.
    mode : {"min", "max"}
        Reduction.

    Returns
    -------
    Trace
        Combined trace.

    Raises
    ------
    ValueError
        If the grids differ, ``traces`` is empty or ``mode`` is unknown.
    """
    if not traces:
        raise ValueError("Nothing to combine")
    if mode not in ("min", "max"):
        raise ValueError(f"Mode must be 'min' or 'max', got {mode!r}")
    x = _check_grid(traces)
    values = np.vstack([trace.y for trace in traces])
    pick = np.argmin(values, axis=0) if mode == "min" else np.argmax(values, axis=0)
    y = values[pick, np.arange(x.size)]
    ties = np.abs(values - y) <= BOUNDARY_TOL * (1 + np.abs(y))
    flags = []
    for j in range(x.size):
        tied = [traces[i].flags[j] for i in np.flatnonzero(ties[:, j])]
        on_curve = [flag for flag in tied if flag.startswith("on-curve:")]
        flags.append(on_curve[0] if on_curve else traces[pick[j]].flags[j])
    first = traces[0]
    return Trace(x, y, flags, first.step, first.direction)


def detect_branching(t1, t2, x0=0.0, delta=None, tol=BRANCH_TOL, depth=DYADIC_DEPTH):
    """
    Compare two traces that start at the same point.

    Parameters
    ----------
    t1, t2 : Trace
        Traces on the same grid.
    x0 : float
        Common initial abscissa.
    delta : float, optional
        Length of the window ``(x0, x0 + delta]``; the whole trace by default.
    tol : float
        Gap below which the traces count as touching.
    depth : int
        Number ``J`` of dyadic windows ``(x0, x0 + delta * 2**-j]``, ``j = 0..J``.

    Returns
    -------
    Branching
        ``coincide`` if the gap never exceeds ``tol``; ``branch-right`` if it
        exceeds ``tol`` at every grid point of ``(x0 + delta / 10, x0 + delta)``;
        ``touch-sequence`` if every dyadic window holds gaps both above and below
        ``tol``; ``late-split`` otherwise (the traces agree on a small window and
        separate later).

    Raises
    ------
    ValueError
        If the grids differ.
    """
    x = _check_grid([t1, t2])
    if delta is None:
        delta = x[-1] - x0
    gap = np.abs(t1.y - t2.y)
    window = (x > x0) & (x <= x0 + delta)
    if not np.any(gap[window] > tol):
        return Branching.COINCIDE

    late = (x > x0 + delta / 10) & (x < x0 + delta)
    if late.any() and np.all(gap[late] > tol):
        return Branching.BRANCH_RIGHT

    for j in range(depth + 1):
        dyadic = (x > x0) & (x <= x0 + delta * 2.0**-j)
        if dyadic.sum() < 2:
            break
        above = gap[dyadic] > tol
        if above.all() or not above.any():
            return Branching.LATE_SPLIT
    return Branching.TOUCH_SEQUENCE


def touch_points(t1, t2, tol=BRANCH_TOL):
    """
    Locate the abscissae where two traces touch.

    Returns
    -------
    np.ndarray
        Midpoints of the runs of consecutive grid points where the gap is at
        most ``tol``.
    """
    x = _check_grid([t1, t2])
    below = np.abs(t1.y - t2.y) <= tol
    edges = np.diff(np.concatenate([[0], below.astype(int), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return 0.5 * (x[starts] + x[stops])


@dataclasses.dataclass
class EnvelopeReport:
    """
    Lower and upper solutions approximated on ``[0, h]``.

    ``lower_sequence`` and ``upper_sequence`` hold the cumulative minima and
    maxima of the biased families; ``members`` holds the raw biased members and
    the unbiased ``interior`` and ``boundary`` polygons.
    """

    lower: Trace
    upper: Trace
    lower_attained: bool
    upper_attained: bool
    residuals: tuple
    verdict: EnvelopeVerdict
    branching: Branching | None
    lower_sequence: list
    upper_sequence: list
    members: dict
    eps: float
    bias0: float
    threshold: float

    @property
    def gap(self):
        return self.upper.y - self.lower.y

    @property
    def gap_max(self):
        return float(np.max(self.gap))

    @property
    def x(self):
        return self.lower.x

    def to_frame(self):
        """Return the envelopes as a DataFrame with columns x, lower, upper, gap."""
        return pd.DataFrame(
            {"x": self.x, "lower": self.lower.y, "upper": self.upper.y, "gap": self.gap}
        )

    def to_dict(self):
        return {
            "verdict": self.verdict.value,
            "branching": None if self.branching is None else self.branching.value,
            "lower_attained": self.lower_attained,
            "upper_attained": self.upper_attained,
            "residuals": list(self.residuals),
            "threshold": self.threshold,
            "h": float(self.x[-1]),
            "gap_max": self.gap_max,
            "gap_argmax": float(self.x[int(np.argmax(self.gap))]),
            "eps": self.eps,
            "bias0": self.bias0,
            "family_size": len(self.lower_sequence),
        }


def _family(p, geom, eps, K, bias0, sign):
    members = []
    for k in range(1, K + 1):
        trace = euler(p, geom, eps, Policy.BOUNDARY, bias=sign * bias0 * 2.0**-k)
        if not trace.complete:
            logger.warning(
                "Biased member k=%d stopped at x = %g (%s)", k, trace.x[-1], trace.reason
            )
            continue
        members.append(trace)
    return members


def _cumulative(members, reduce):
    sequence = []
    for trace in members:
        current = trace.y if not sequence else reduce(sequence[-1], trace.y)
        sequence.append(current)
    return sequence


def _extrapolate(members):
    if not members:
        return None
    if len(members) == 1:
        return members[-1]
    last, previous = members[-1], members[-2]
    return dataclasses.replace(last, y=2 * last.y - previous.y, bias=0.0)


def envelopes(
    p,
    geom,
    eps=EULER_STEP,
    K=FAMILY_SIZE,
    bias0=BIAS0,
    gap_tol=GAP_TOL,
    tol=BRANCH_TOL,
):
    """
    Approximate the lower and upper solutions on the Peano segment.

    Two families of boundary-sliding Euler polygons with the field shifted by
    ``-eta_k`` and ``+eta_k``, ``eta_k = bias0 * 2**-k`` for ``k = 1..K``, are
    integrated; their cumulative minima and maxima are recorded and the last
    two members are extrapolated to ``eta -> 0``. The lower (upper) envelope is
    the pointwise minimum (maximum) of the extrapolated family and the complete
    unbiased polygons. An envelope is attained when its residual is at most
    ``max(10 * eps, ATTAIN_TOL) * (1 + max|f0|)``.

    Parameters
    ----------
    p : NormalizedProblem
        Problem normalized at the initial point.
    geom : PeanoGeometry
        Boundary geometry with a positive segment.
    eps : float
        Euler step.
    K : int
        Family size, at least 2.
    bias0 : float
        Largest field shift.
    gap_tol : float
        Envelope gap, relative to ``1 + max|y|``, below which the solution is
        locally unique.
    tol : float
        Gap threshold used to tell branching from touching.

    Returns
    -------
    EnvelopeReport
        Envelopes, attainment flags and verdict.

    Raises
    ------
    ValueError
        If ``K < 2``.
    GeometryError
        If the geometry has no positive segment.
    """
    if K < 2:
        raise ValueError(f"Family size must be at least 2, got {K}")
    if not geom.h > 0:
        raise GeometryError(f"No Peano segment at {p.anchor}: {geom.reason}")

    lower_members = _family(p, geom, eps, K, bias0, -1.0)
    upper_members = _family(p, geom, eps, K, bias0, 1.0)
    interior = euler(p, geom, eps, Policy.INTERIOR)
    boundary = euler(p, geom, eps, Policy.BOUNDARY)
    unbiased = [trace for trace in (interior, boundary) if trace.complete]

    lower_pool = [t for t in (_extrapolate(lower_members), *unbiased) if t is not None]
    upper_pool = [t for t in (_extrapolate(upper_members), *unbiased) if t is not None]
    members = {
        "lower": lower_members,
        "upper": upper_members,
        "interior": interior if interior.complete else None,
        "boundary": boundary if boundary.complete else None,
    }
    if not lower_pool or not upper_pool:
        logger.info("No complete polygon at %s; envelopes inconclusive", p.anchor)
        empty = Trace([0.0], [0.0], ["interior"], eps, p.direction, TraceReason.REACHED_END)
        return EnvelopeReport(
            empty, empty, False, False, (np.inf, np.inf), EnvelopeVerdict.INCONCLUSIVE,
            None, [], [], members, eps, bias0, np.nan,
        )

    lower = combine(lower_pool, "min")
    upper = combine(upper_pool, "max")
    values = np.concatenate([lower.y, upper.y])
    field = ex.evaluate_or_nan(p.field, np.concatenate([lower.x, upper.x]), values)
    scale = float(np.nanmax(np.abs(field))) if np.any(np.isfinite(field)) else 0.0
    threshold = max(10 * eps, ATTAIN_TOL) * (1 + scale)
    residuals = (residual(lower, p), residual(upper, p))
    lower_attained = residuals[0] <= threshold
    upper_attained = residuals[1] <= threshold

    branching = None
    gap = upper.y - lower.y
    if not lower_attained:
        verdict = EnvelopeVerdict.LOWER_NOT_ATTAINED
    elif not upper_attained:
        verdict = EnvelopeVerdict.UPPER_NOT_ATTAINED
    elif np.max(gap) <= gap_tol * (1 + np.max(np.abs(values))):
        verdict = EnvelopeVerdict.LOCALLY_UNIQUE
    else:
        branching = detect_branching(lower, upper, 0.0, lower.x[-1], tol)
        verdict = {
            Branching.BRANCH_RIGHT: EnvelopeVerdict.BRANCHING,
            Branching.TOUCH_SEQUENCE: EnvelopeVerdict.TOUCH_SEQUENCE,
        }.get(branching, EnvelopeVerdict.LOCALLY_UNIQUE)

    logger.info(
        "Envelopes at %s (%s): %s, gap %g, residuals %g / %g",
        p.anchor,
        p.direction.value,
        verdict.value,
        float(np.max(gap)),
        *residuals,
    )
    return EnvelopeReport(
        lower,
        upper,
        lower_attained,
        upper_attained,
        residuals,
        verdict,
        branching,
        _cumulative(lower_members, np.minimum),
        _cumulative(upper_members, np.maximum),
        members,
        eps,
        bias0,
        threshold,
    )


def boundary_solutions(p, x, samples=SOLUTION_SAMPLES, tol=TANGENCY_TOL):
    """
    Return the boundary curves through the origin whose graphs solve the equation.

    Every curve of the region that passes through the origin and covers the
    grid ``x`` is tested with ``f0(x, b(x)) = b'(x)`` at sampled abscissae,
    whether or not it qualifies as a boundary function.

    Parameters
    ----------
    p : NormalizedProblem
        Problem normalized at the initial point.
    x : np.ndarray
        Grid the returned traces are sampled on.

    Returns
    -------
    list of Trace
        One trace per solving curve, flagged ``on-curve:<name>``.
    """
    length = float(x[-1])
    result = []
    for curve in p.region.curves:
        if not (curve.x_min <= 0 and curve.x_max >= length and bool(curve.on(0.0, 0.0))):
            continue
        xs = np.linspace(length / samples, length, samples)
        try:
            slopes = curve_deriv(curve, xs)
            values = p.field(xs, curve.b(xs))
        except DomainError:
            continue
        if np.all(np.abs(values - slopes) <= tol * (1 + np.abs(slopes))):
            name = f"on-curve:{curve.name}"
            result.append(Trace(x, curve.b(x), [name] * x.size, x[1] - x[0], p.direction))
    return result


@dataclasses.dataclass(frozen=True)
class Witness:
    """Pair of solution traces that branch or touch near the initial point."""

    first: str
    second: str
    kind: Branching
    gap_max: float
    traces: tuple = ()


@dataclasses.dataclass
class LocalAnalysis:
    """Case, geometry, envelopes and witnesses on one side of an initial point."""

    problem: NormalizedProblem
    tag: object
    geometry: object
    report: EnvelopeReport | None = None
    solutions: dict = dataclasses.field(default_factory=dict)
    witnesses: list = dataclasses.field(default_factory=list)
    pairs: dict = dataclasses.field(default_factory=dict)
    reason: str = ""

    @property
    def non_unique(self):
        return bool(self.witnesses)

    @property
    def locally_unique(self):
        return (
            self.report is not None
            and not self.witnesses
            and self.report.verdict is EnvelopeVerdict.LOCALLY_UNIQUE
        )

    @property
    def formally_unique(self):
        """Return True if every pair of computed solutions coincides near the origin."""
        return self.report is not None and all(
            kind in (Branching.COINCIDE, Branching.LATE_SPLIT) for kind in self.pairs.values()
        )

    @property
    def not_attained(self):
        return self.report is not None and self.report.verdict in (
            EnvelopeVerdict.LOWER_NOT_ATTAINED,
            EnvelopeVerdict.UPPER_NOT_ATTAINED,
        )


def analyse(
    p,
    anchor,
    direction=Direction.RIGHT,
    eps=EULER_STEP,
    K=FAMILY_SIZE,
    bias0=BIAS0,
    c_star=1.0,
    tau=DEFAULT_TAU,
    gap_tol=GAP_TOL,
    tol=BRANCH_TOL,
):
    """
    Run the boundary analysis on one side of an initial point.

    The problem is normalized, classified and given a boundary Peano triangle;
    envelopes are computed on its segment and every pair among the boundary
    solutions, the complete unbiased polygons and the attained envelopes is
    compared. Pairs whose gap exceeds ``gap_tol`` and that branch or touch are
    non-uniqueness witnesses.

    Parameters
    ----------
    p : ProblemSpec
        Problem.
    anchor : tuple of float
        Initial point.
    direction : Direction or str
        Side of the anchor.

    Returns
    -------
    LocalAnalysis
        Analysis; ``report`` is None when no segment could be built.
    """
    normalized = NormalizedProblem(p, anchor, direction)
    tag = classify_right(normalized, c_star)
    geometry = boundary_triangle(normalized, tag, tau)
    analysis = LocalAnalysis(normalized, tag, geometry)
    if not geometry.h > 0:
        analysis.reason = geometry.reason
        named = {
            trace.flags[-1]: trace
            for trace in boundary_solutions(normalized, _grid(c_star, eps))
        }
        _compare(analysis, named, c_star, gap_tol, tol)
        return analysis

    report = envelopes(normalized, geometry, eps, K, bias0, gap_tol, tol)
    analysis.report = report
    if report.verdict is EnvelopeVerdict.INCONCLUSIVE:
        analysis.reason = "no complete polygon"
        return analysis

    named = {trace.flags[-1]: trace for trace in boundary_solutions(normalized, report.x)}
    for name in ("interior", "boundary"):
        trace = report.members.get(name)
        if trace is not None and residual(trace, normalized) <= report.threshold:
            named[f"{name} polygon"] = trace
    if report.lower_attained:
        named["lower envelope"] = report.lower
    if report.upper_attained:
        named["upper envelope"] = report.upper
    _compare(analysis, named, float(report.x[-1]), gap_tol, tol)
    return analysis


def _grid(length, eps):
    n = max(int(np.ceil(length / eps - 1e-9)), 1)
    return np.linspace(0.0, length, n + 1)


def _compare(analysis, named, length, gap_tol, tol):
    """Record the branching kind of every pair of solutions and keep the witnesses."""
    analysis.solutions = named
    for (first, t1), (second, t2) in itertools.combinations(named.items(), 2):
        gap_max = float(np.max(np.abs(t1.y - t2.y)))
        scale = 1 + max(np.max(np.abs(t1.y)), np.max(np.abs(t2.y)))
        # traces closer than the gap tolerance are the same solution
        if gap_max <= gap_tol * scale:
            analysis.pairs[(first, second)] = Branching.COINCIDE
            continue
        kind = detect_branching(t1, t2, 0.0, length, tol)
        analysis.pairs[(first, second)] = kind
        if kind.non_unique:
            analysis.witnesses.append(Witness(first, second, kind, gap_max, (t1, t2)))
    if analysis.witnesses:
        logger.info(
            "Witnesses at %s (%s): %s",
            analysis.problem.anchor,
            analysis.problem.direction.value,
            [(w.first, w.second, w.kind.value) for w in analysis.witnesses],
        )


def witness_evidence(analysis):
    return [
        Evidence(
            "witness",
            float(w.traces[0].x[-1]),
            False,
            w.gap_max,
            f"{w.first} / {w.second}: {w.kind.value} ({analysis.problem.direction.value})",
        )
        for w in analysis.witnesses
    ]


def envelope_evidence(analysis):
    if analysis.report is None:
        return Evidence(
            "envelope",
            0.0,
            False,
            detail=f"{analysis.tag} ({analysis.problem.direction.value}): {analysis.reason}",
        )
    report = analysis.report
    return Evidence(
        "envelope",
        float(report.x[-1]),
        analysis.locally_unique,
        report.gap_max,
        f"{analysis.tag} ({analysis.problem.direction.value}): {report.verdict.value}",
    )


def global_traces(pairs, analysis):
    return {
        f"{name} ({analysis.problem.direction.value})": trace.to_global(analysis.problem)
        for name, trace in pairs
    }


def _evidence_pair(analysis, tol):
    """Pick the branching pair reported by the extension probe."""
    solutions = analysis.solutions
    order = [
        ("interior polygon", "lower envelope"),
        ("interior polygon", "upper envelope"),
        ("lower envelope", "upper envelope"),
    ]
    for first, second in order:
        if first in solutions and second in solutions:
            kind = detect_branching(solutions[first], solutions[second], tol=tol)
            if kind is Branching.BRANCH_RIGHT:
                return [(first, solutions[first]), (second, solutions[second])]
    for witness in analysis.witnesses:
        if witness.kind is Branching.BRANCH_RIGHT:
            return list(zip((witness.first, witness.second), witness.traces, strict=True))
    return []


def probe_extension(p, anchor, eps=EULER_STEP, K=FAMILY_SIZE, bias0=BIAS0, tol=BRANCH_TOL):
    """
    Look for hidden non-uniqueness through the problem's continuous extension.

    Parameters
    ----------
    p : ProblemSpec
        Problem with an extension.
    anchor : tuple of float
        Initial point.
    eps, K, bias0 : float, int, float
        Envelope parameters.
    tol : float
        Branching threshold.

    Returns
    -------
    UniquenessVerdict
        ``non-uniqueness`` if the original problem already has a witness;
        ``hidden-non-uniqueness`` if only the extended problem branches through
        the anchor, with the branching pair as evidence; otherwise the class the
        original analysis supports.

    Raises
    ------
    ValueError
        If the problem has no extension.
    """
    if p.extension is None:
        raise ValueError(f"Problem {p.name!r} has no extension to probe")
    original = analyse(p, anchor, eps=eps, K=K, bias0=bias0, tol=tol)
    evidence = [envelope_evidence(original), *witness_evidence(original)]
    if original.non_unique:
        witness = original.witnesses[0]
        traces = global_traces(zip((witness.first, witness.second), witness.traces), original)
        return UniquenessVerdict(
            anchor, VerdictClass.NON_UNIQUENESS, "extension-probe", evidence, traces
        )

    extended = analyse(p.extension, anchor, eps=eps, K=K, bias0=bias0, tol=tol)
    pair = _evidence_pair(extended, tol) if extended.report is not None else []
    if pair:
        gap = float(np.max(np.abs(pair[0][1].y - pair[1][1].y)))
        evidence.append(
            Evidence(
                "extension-probe",
                float(extended.report.x[-1]),
                False,
                gap,
                f"extended problem branches: {pair[0][0]} / {pair[1][0]}",
            )
        )
        return UniquenessVerdict(
            anchor,
            VerdictClass.HIDDEN_NON_UNIQUENESS,
            "extension-probe",
            evidence,
            global_traces(pair, extended),
        )

    evidence.append(
        Evidence("extension-probe", 0.0, True, detail="extended problem does not branch")
    )
    if original.locally_unique:
        cls = VerdictClass.UNIQUENESS
    elif original.not_attained:
        cls = VerdictClass.FORMAL_ONLY
    else:
        cls = VerdictClass.UNKNOWN
    return UniquenessVerdict(anchor, cls, "extension-probe", evidence)
