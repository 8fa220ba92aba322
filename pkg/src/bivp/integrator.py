import dataclasses
import enum
import logging
import math
import pathlib

import numpy as np
import pandas as pd

from . import expr as ex
from .domain import Direction, PointClass, Side, curve_deriv
from .errors import DomainError, GeometryError
from .helpers import (
    EULER_STEP,
    FD_STEP,
    TANGENCY_TOL,
    VERIFY_SAMPLES,
    VERIFY_TOL,
    band,
)

logger = logging.getLogger(__name__)


class Policy(enum.StrEnum):
    """What a polygon does on a good-boundary curve when the field allows both."""

    INTERIOR = "interior"  # step back into the interior
    BOUNDARY = "boundary"  # slide along the curve


class TraceReason(enum.StrEnum):
    REACHED_END = "reached-segment-end"
    LEFT_BAD_BOUNDARY = "left-through-bad-boundary"
    OBSTRUCTION = "obstruction-condition4"
    DOMAIN_ERROR = "field-domain-error"


@dataclasses.dataclass
class Trace:
    """
    Euler polygon: nodes on a monotone ``x`` grid with a flag per node.

    Flags are ``"interior"``, ``"on-curve:<name>"`` for nodes on a boundary
    curve, ``"boundary:<name>"`` for nodes on a vertical wall and
    ``"terminal:<reason>"`` for the last node of a polygon that stopped before
    the end of its segment.
    """

    x: np.ndarray
    y: np.ndarray
    flags: list
    step: float
    direction: Direction = Direction.RIGHT
    reason: TraceReason = TraceReason.REACHED_END
    policy: Policy | None = None
    bias: float = 0.0

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.flags = list(self.flags)
        self.direction = Direction(self.direction)
        self.reason = TraceReason(self.reason)
        if not (self.x.shape == self.y.shape and len(self.flags) == self.x.size):
            raise ValueError(
                f"Trace arrays disagree: {self.x.shape}, {self.y.shape}, {len(self.flags)}"
            )

    def __len__(self):
        return self.x.size

    def __call__(self, x):
        """Interpolate the polygon linearly."""
        return np.interp(x, self.x, self.y)

    @property
    def complete(self):
        return self.reason is TraceReason.REACHED_END

    @property
    def on_curve(self):
        """Return a boolean mask of the nodes on a boundary curve."""
        return np.array([flag.startswith("on-curve:") for flag in self.flags])

    def to_frame(self):
        """
        Return the trace as a DataFrame.

        Returns
        -------
        pd.DataFrame
            Columns ``x``, ``y`` and ``flag``.
        """
        return pd.DataFrame({"x": self.x, "y": self.y, "flag": self.flags})

    def to_csv(self, path):
        """Write the trace as CSV with columns x, y, flag."""
        path = pathlib.Path(path)
        self.to_frame().to_csv(path, index=False)
        return path

    def to_global(self, p):
        """Map the trace from the local coordinates of ``p`` to global ones."""
        gx, gy = p.to_global(self.x, self.y)
        return dataclasses.replace(self, x=gx, y=gy, direction=p.direction)

    @classmethod
    def from_function(cls, e, start, stop, step, flag="interior"):
        """
        Sample a closed-form function onto an equally spaced grid.

        Parameters
        ----------
        e : Expr or str
            Function of ``x``.
        start, stop : float
            Interval; ``stop < start`` gives a leftward trace.
        step : float
            Largest grid spacing.
        flag : str
            Flag given to every node.

        Returns
        -------
        Trace
            Sampled trace.
        """
        if isinstance(e, str):
            e = ex.parse(e)
        n = max(math.ceil(abs(stop - start) / step - 1e-9), 1)
        xs = np.linspace(start, stop, n + 1)
        direction = Direction.RIGHT if stop >= start else Direction.LEFT
        return cls(xs, e(xs), [flag] * xs.size, abs(stop - start) / n, direction)


class _Stepper:
    """Shared state of one Euler run."""

    def __init__(self, p, eps, policy, bias):
        self.p = p
        self.eps = eps
        self.policy = Policy(policy)
        self.bias = bias
        self.curves = {curve.name: curve for curve in p.region.curves}
        self.walls = {wall.name for wall in p.region.walls}

    def flag(self, x, y):
        membership = self.p.classify_point((x, y))
        if membership.kind is PointClass.OUTSIDE:
            return None
        if membership.kind is PointClass.INTERIOR:
            return "interior"
        if membership.curve in self.walls:
            return f"boundary:{membership.curve}"
        return f"on-curve:{membership.curve}"

    def slope(self, x, y):
        return self.p.field(x, y) + self.bias

    def inwardness(self, curve, x, slope):
        """Positive when ``slope`` points into the interior from ``curve`` at ``x``."""
        derivative = curve_deriv(curve, min(max(x, curve.x_min), curve.x_max))
        sign = 1.0 if curve.side is Side.UPPER else -1.0
        margin = sign * (derivative - slope)
        return margin, TANGENCY_TOL * (1 + abs(derivative))

    def cross(self, x, y, xn, candidate):
        """Project a candidate that left the region onto the curve it crossed."""
        options = []
        for curve in self.curves.values():
            if not (bool(curve.covers(xn, band(xn))) and bool(curve.covers(x, band(x)))):
                continue
            bn = curve.b(min(max(xn, curve.x_min), curve.x_max))
            bc = curve.b(min(max(x, curve.x_min), curve.x_max))
            if curve.side is Side.UPPER:
                crossed = candidate > bn and y <= bc + band(bc, 1e-6)
            else:
                crossed = candidate < bn and y >= bc - band(bc, 1e-6)
            if crossed:
                options.append((abs(bn - candidate), curve.name, bn))
        for _, name, bn in sorted(options):
            if self.p.classify_point((xn, bn)).admissible:
                return name, bn
        return None, None


def euler(
    p,
    geom=None,
    eps=EULER_STEP,
    policy=Policy.INTERIOR,
    bias=0.0,
    span=None,
):
    """
    Build an Euler polygon from the origin of a normalized problem.

    The polygon uses equal steps no longer than ``eps`` on ``[0, L]``, where
    ``L`` is the Peano segment of ``geom`` unless ``span`` is given. A step that
    leaves the region across a listed curve is projected onto the curve. On a
    curve the field decides: pointing strictly inward, the polygon steps into the
    interior; pointing strictly outward, the ``interior`` policy stops with
    ``obstruction-condition4`` while the ``boundary`` policy slides along the
    curve; tangent to it, the ``interior`` policy nudges the node inward by
    ``eps**2`` and the ``boundary`` policy slides. Leaving the region anywhere
    else ends the polygon with ``left-through-bad-boundary``.

    Parameters
    ----------
    p : NormalizedProblem
        Problem normalized at the initial point.
    geom : PeanoGeometry, optional
        Geometry built for ``p``.
    eps : float
        Largest step.
    policy : Policy or str
        Preference on good-boundary curves.
    bias : float
        Constant added to the field; used by the perturbed envelope families.
    span : float, optional
        Integration length replacing the Peano segment.

    Returns
    -------
    Trace
        Polygon in local coordinates.

    Raises
    ------
    ValueError
        If ``eps`` is not positive or ``geom`` was built for another anchor or
        direction.
    GeometryError
        If neither a positive segment nor ``span`` is available.

    Examples
    --------
    >>> import bivp as bv
    >>> p = bv.to_origin(bv.corpus.get("example1").problem, (0.0, 0.0))
    >>> t = euler(p, eps=0.01, policy="boundary", span=0.5)
    >>> float(abs(t.y).max()), t.reason.value
    (0.0, 'reached-segment-end')
    """
    if not eps > 0:
        raise ValueError(f"Step must be positive, got {eps}")
    if geom is not None:
        if tuple(geom.anchor) != tuple(p.anchor) or geom.direction is not p.direction:
            raise ValueError(
                f"Geometry built at {geom.anchor} ({geom.direction.value}) does not "
                f"match the problem at {p.anchor} ({p.direction.value})"
            )
    length = span if span is not None else (geom.h if geom is not None else 0.0)
    if not length > 0:
        raise GeometryError(f"No Peano segment to integrate on at {p.anchor}")

    stepper = _Stepper(p, eps, policy, bias)
    n = max(math.ceil(length / eps - 1e-9), 1)
    grid = np.linspace(0.0, length, n + 1)
    xs, ys = [0.0], [0.0]
    flags = [stepper.flag(0.0, 0.0) or "interior"]
    reason = TraceReason.REACHED_END

    for i in range(n):
        x, y, xn = grid[i], ys[-1], grid[i + 1]
        dx = xn - x
        try:
            slope = stepper.slope(x, y)
            curve = None
            if flags[-1].startswith("on-curve:"):
                curve = stepper.curves[flags[-1].split(":", 1)[1]]
                margin, width = stepper.inwardness(curve, x, slope)
                if margin < -width and stepper.policy is Policy.INTERIOR:
                    reason = TraceReason.OBSTRUCTION
                    break
                if margin <= width and stepper.policy is Policy.BOUNDARY:
                    yn = curve.b(min(xn, curve.x_max))
                    flag = stepper.flag(xn, yn)
                    if flag is None:
                        reason = TraceReason.LEFT_BAD_BOUNDARY
                        break
                    xs.append(xn)
                    ys.append(yn)
                    flags.append(f"on-curve:{curve.name}")
                    continue
            candidate = y + dx * slope
        except DomainError as exc:
            logger.debug("Field not evaluable at step %d: %s", i, exc)
            reason = TraceReason.DOMAIN_ERROR
            break

        flag = stepper.flag(xn, candidate)
        if flag is None:
            name, projected = stepper.cross(x, y, xn, candidate)
            if name is None:
                reason = TraceReason.LEFT_BAD_BOUNDARY
                break
            candidate, flag = projected, f"on-curve:{name}"

        if flag.startswith("on-curve:") and stepper.policy is Policy.INTERIOR:
            landed = stepper.curves[flag.split(":", 1)[1]]
            try:
                margin, width = stepper.inwardness(landed, xn, stepper.slope(xn, candidate))
            except DomainError:
                margin, width = 0.0, 0.0
            if abs(margin) <= width:
                nudge = -eps**2 if landed.side is Side.UPPER else eps**2
                nudged = stepper.flag(xn, candidate + nudge)
                if nudged == "interior":
                    candidate, flag = candidate + nudge, nudged

        xs.append(xn)
        ys.append(candidate)
        flags.append(flag)

    if reason is not TraceReason.REACHED_END:
        flags[-1] = f"terminal:{reason.value}"
        logger.debug(
            "Polygon at %s stopped at x = %g: %s", p.anchor, xs[-1], reason.value
        )
    return Trace(
        np.array(xs), np.array(ys), flags, length / n, p.direction, reason,
        stepper.policy, bias,
    )


def _project_outside(p, x, y):
    codes = p.codes(x, y)
    outside = codes == 0
    if not outside.any():
        return y
    y = y.copy()
    for i in np.flatnonzero(outside):
        best = None
        for curve in p.region.curves:
            distance = float(curve.distance(x[i], y[i]))
            if math.isfinite(distance) and (best is None or distance < best[0]):
                best = (distance, curve)
        if best is not None:
            y[i] = best[1].b(min(max(x[i], best[1].x_min), best[1].x_max))
    return y


def residual(t, p):
    """
    Measure how far a polygon is from solving the equation.

    Parameters
    ----------
    t : Trace
        Polygon in the local coordinates of ``p``.
    p : NormalizedProblem
        Problem.

    Returns
    -------
    float
        Maximum over segments of ``|dy/dx - f0(midpoint)|``; midpoints outside
        the region are moved onto the nearest curve, and ``inf`` is returned
        when the field cannot be evaluated.
    """
    if len(t) < 2:
        return 0.0
    slopes = np.diff(t.y) / np.diff(t.x)
    xm = 0.5 * (t.x[:-1] + t.x[1:])
    ym = _project_outside(p, xm, 0.5 * (t.y[:-1] + t.y[1:]))
    values = ex.evaluate_or_nan(p.field, xm, ym)
    if np.any(np.isnan(values)):
        logger.warning("Residual not finite: field not evaluable along the polygon")
        return math.inf
    return float(np.max(np.abs(slopes - values)))


@dataclasses.dataclass(frozen=True)
class SolutionCheck:
    """Sampled check of the solution definition for a closed-form candidate."""

    graph_in_region: bool
    max_defect: float
    worst_x: float
    passed: bool

    def to_dict(self):
        return dataclasses.asdict(self)


def verify_solution(
    candidate, p, interval, n=VERIFY_SAMPLES, tol=VERIFY_TOL, h=FD_STEP
):
    """
    Check a closed-form candidate ``y = phi(x)`` against a problem.

    Parameters
    ----------
    candidate : Expr or str
        Function of ``x``.
    p : ProblemSpec
        Problem in global coordinates.
    interval : tuple of float
        Closed interval ``(start, stop)``.
    n : int
        Number of sampled abscissae.
    tol : float
        Derivative defect allowed, relative to ``1 + |f|``.
    h : float
        Finite-difference step.

    Returns
    -------
    SolutionCheck
        Graph membership, the largest defect ``|phi'_fd - f(x, phi)|`` over
        cell midpoints, and whether both checks pass.

    Raises
    ------
    DomainError
        If the candidate or the field cannot be evaluated.

    Examples
    --------
    >>> import bivp as bv
    >>> p = bv.corpus.get("example1").problem
    >>> verify_solution("(x^1.5 + 1)^2", p, (0.0, 2.0)).passed
    True
    """
    if isinstance(candidate, str):
        candidate = ex.parse(candidate)
    start, stop = float(interval[0]), float(interval[1])
    xs = np.linspace(start, stop, n)
    try:
        ys = candidate(xs)
        mids = 0.5 * (xs[:-1] + xs[1:])
        derivative = (candidate(mids + h) - candidate(mids - h)) / (2 * h)
        ym = candidate(mids)
    except DomainError as exc:
        raise DomainError(f"Candidate {candidate.text!r} not evaluable", exc.point) from None
    inside = p.region.codes(np.concatenate([xs, mids]), np.concatenate([ys, ym])) > 0
    try:
        values = p.field(mids, ym)
    except DomainError as exc:
        raise DomainError(
            f"Field not evaluable along {candidate.text!r}", exc.point
        ) from None
    defect = np.abs(derivative - values)
    scaled = defect / (1 + np.abs(values))
    worst = int(np.argmax(scaled))
    return SolutionCheck(
        graph_in_region=bool(inside.all()),
        max_defect=float(defect.max()),
        worst_x=float(mids[worst]),
        passed=bool(inside.all() and scaled.max() <= tol),
    )

