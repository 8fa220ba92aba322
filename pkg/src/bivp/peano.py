import dataclasses
import enum
import logging
import math

import numpy as np

from . import expr as ex
from .classifier import Condition4Status, Family, check_condition4
from .domain import Direction
from .errors import ContinuityError, RegionError
from .helpers import DEFAULT_TAU, PEANO_GRID, TRIANGLE_SAMPLES, box
from .normalize import continuity_modulus

logger = logging.getLogger(__name__)

MAX_HALVINGS = 30


class GeometryKind(enum.StrEnum):
    INTERIOR = "interior"
    BOUNDARY_RIGHT = "boundary-right"
    BOUNDARY_LEFT = "boundary-left"


@dataclasses.dataclass
class PeanoGeometry:
    """
    Peano rectangle and segment, or boundary Peano triangle and segment.

    For the interior kind ``h`` is the half-length of the segment
    ``[x0 - h, x0 + h]``; for the boundary kinds it is the length of the right
    segment ``[0, h]`` in local coordinates. ``slopes`` holds the lower and
    upper leg slopes of the triangle. A failed boundary construction keeps
    ``ok = False`` together with the reason; ``h`` is still reported when the
    triangle itself could be built.
    """

    kind: GeometryKind
    anchor: tuple
    h: float
    M: float
    slopes: tuple = (math.nan, math.nan)
    a: float = math.nan
    b: float = math.nan
    tau: float = math.nan
    delta: float = math.nan
    tag: object = None
    ok: bool = True
    reason: str = ""
    conditions: tuple = ()
    clip: tuple = (None, None)

    def __post_init__(self):
        self.kind = GeometryKind(self.kind)

    @property
    def direction(self):
        if self.kind is GeometryKind.BOUNDARY_LEFT:
            return Direction.LEFT
        return Direction.RIGHT

    def leg_bounds(self, x):
        """
        Return the lower and upper ``y`` limits of the triangle at ``x``.

        Legs are clipped by the tangent boundary curves the triangle rests on.
        """
        x = np.asarray(x, dtype=float)
        lower = self.slopes[0] * x
        upper = self.slopes[1] * x
        low_curve, up_curve = self.clip
        if low_curve is not None:
            lower = np.maximum(lower, low_curve.b(np.minimum(x, low_curve.a)))
        if up_curve is not None:
            upper = np.minimum(upper, up_curve.b(np.minimum(x, up_curve.a)))
        return lower, upper

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "anchor": list(self.anchor),
            "h": self.h,
            "M": self.M,
            "slopes": list(self.slopes),
            "a": self.a,
            "b": self.b,
            "tau": self.tau,
            "delta": self.delta,
            "tag": None if self.tag is None else str(self.tag),
            "ok": self.ok,
            "reason": self.reason,
        }


def interior_segment(p, anchor, a, b, n=PEANO_GRID):
    """
    Build the Peano rectangle and segment at an interior point.

    Parameters
    ----------
    p : ProblemSpec
        Problem.
    anchor : tuple of float
        Centre ``(x0, y0)`` of the rectangle.
    a, b : float
        Half-width and half-height of the rectangle.
    n : int
        Grid samples per side used for the maximum of ``|f|``.

    Returns
    -------
    PeanoGeometry
        Geometry with ``M`` the sampled maximum of ``|f|`` and
        ``h = a`` if ``M = 0``, else ``h = min(a, b / M)``.

    Raises
    ------
    ValueError
        If ``a`` or ``b`` is not positive.
    RegionError
        If a sampled point of the closed rectangle is not interior.

    Examples
    --------
    >>> import bivp as bv
    >>> p = bv.corpus.get("example1").problem
    >>> round(interior_segment(p, (1.0, 1.0), 0.5, 0.5).h, 12)
    0.111111111111
    """
    if not (a > 0 and b > 0):
        raise ValueError(f"Rectangle half-sides must be positive, got a={a}, b={b}")
    xs, ys = box(anchor, a, b, n)
    codes = p.region.codes(xs, ys)
    if np.any(codes != 2):
        i = int(np.flatnonzero(codes != 2)[0])
        raise RegionError(
            f"Rectangle around {tuple(anchor)} escapes the interior at ({xs[i]}, {ys[i]})"
        )
    M = float(np.max(np.abs(p.field(xs, ys))))
    h = a if M == 0 else min(a, b / M)
    logger.debug("Peano segment at %s: M = %g, h = %g", anchor, M, h)
    return PeanoGeometry(
        GeometryKind.INTERIOR,
        tuple(float(v) for v in anchor),
        h,
        M,
        slopes=(-M, M),
        a=a,
        b=b,
    )


def _triangle_points(geometry, h, samples):
    side = max(int(math.sqrt(samples)), 2)
    xs = np.linspace(h / side, h, side)
    lower, upper = geometry.leg_bounds(xs)
    t = np.linspace(0.0, 1.0, side)
    gx = np.repeat(xs, side)
    gy = (lower[:, None] + (upper - lower)[:, None] * t[None, :]).ravel()
    return gx, gy, lower, upper


def _fit(p, geometry, h, samples):
    """Halve ``h`` until the sampled triangle lies in the region."""
    for _ in range(MAX_HALVINGS):
        gx, gy, lower, upper = _triangle_points(geometry, h, samples)
        if np.all(lower <= upper + 1e-12) and np.all(p.codes(gx, gy) > 0):
            return h, gx, gy
        h /= 2
    return 0.0, None, None


def _kind(p):
    if p.direction is Direction.LEFT:
        return GeometryKind.BOUNDARY_LEFT
    return GeometryKind.BOUNDARY_RIGHT


def boundary_triangle(p, tag, tau=DEFAULT_TAU, samples=TRIANGLE_SAMPLES):
    """
    Build the right boundary Peano triangle and segment at the origin.

    The ``N`` case uses the half rectangle ``[0, c] x [-c, c]`` with
    ``h = min(c, c / M)``. For the ``U1``, ``O1`` and ``B1`` families a slope
    bound ``t`` is taken from the curves with non-zero slope (``min(tau_u,
    tau_l)`` over the positive ones, else ``tau``), ``delta`` is the continuity
    modulus of ``f0`` for ``t``, the legs have slopes ``-t`` and ``t`` and the
    segment length starts at ``min(delta, delta / t, a_u, a_l)``. Legs next to a
    tangent curve are clipped by that curve, and the length is halved until the
    sampled triangle lies in the region. The inward-field check runs on every
    tangent curve; a failure is reported through ``ok`` and ``reason``.

    Parameters
    ----------
    p : NormalizedProblem
        Problem normalized at the initial point.
    tag : CaseTag
        Case found by :func:`classify_right`.
    tau : float
        Slope bound used when no curve leaves the origin with a positive slope.
    samples : int
        Number of sampled triangle points.

    Returns
    -------
    PeanoGeometry
        Boundary geometry; ``ok`` is False when the existence theorem does not
        apply or the construction failed.

    Examples
    --------
    >>> import bivp as bv
    >>> p = bv.to_origin(bv.corpus.get("example1").problem, (0.0, 0.0))
    >>> g = boundary_triangle(p, bv.classify_right(p))
    >>> g.ok, round(g.h, 6)
    (True, 0.333333)
    """
    kind = _kind(p)
    if tag.family in (Family.U2, Family.O2, Family.B2, Family.UNCLASSIFIED):
        logger.info("No boundary triangle at %s: case %s", p.anchor, tag)
        return PeanoGeometry(
            kind, p.anchor, 0.0, math.nan, tag=tag, ok=False,
            reason="existence theorem inapplicable",
        )

    if tag.family is Family.N:
        c = tag.witness
        xs, ys = box((c / 2, 0.0), c / 2, c, int(math.sqrt(samples)) * 2 + 1)
        M = float(np.nanmax(np.abs(ex.evaluate_or_nan(p.field, xs, ys))))
        h = c if M == 0 else min(c, c / M)
        geometry = PeanoGeometry(kind, p.anchor, h, M, slopes=(-M, M), a=c, b=c, tag=tag)
        logger.info("Half-rectangle segment at %s: M = %g, h = %g", p.anchor, M, h)
        return geometry

    upper = p.upper[0] if tag.family.has_upper else None
    lower = p.lower[0] if tag.family.has_lower else None
    curves = [curve for curve in (upper, lower) if curve is not None]

    conditions = tuple(check_condition4(p, curve) for curve in curves)
    failed = [c for c in conditions if c.status is Condition4Status.FAILS]
    positive = [curve.tau for curve in curves if curve.tau > 0]
    slope = min(positive) if positive else tau

    try:
        delta = continuity_modulus(p, slope)
    except ContinuityError as exc:
        return PeanoGeometry(
            kind, p.anchor, 0.0, math.nan, tau=slope, tag=tag, ok=False,
            reason=str(exc), conditions=conditions,
        )
    h = min([delta, delta / slope] + [curve.a for curve in curves])
    clip = (
        lower if lower is not None and lower.tangent else None,
        upper if upper is not None and upper.tangent else None,
    )
    geometry = PeanoGeometry(
        kind, p.anchor, h, math.nan, slopes=(-slope, slope), tau=slope,
        delta=delta, tag=tag, conditions=conditions, clip=clip,
    )
    h, gx, gy = _fit(p, geometry, h, samples)
    geometry.h = h
    if h <= 0:
        geometry.ok = False
        geometry.reason = "no triangle fits in the region"
        logger.info("Boundary triangle at %s failed: %s", p.anchor, geometry.reason)
        return geometry

    geometry.M = float(np.nanmax(np.abs(ex.evaluate_or_nan(p.field, gx, gy))))
    if failed:
        geometry.ok = False
        geometry.reason = "; ".join(
            f"field points outward across {c.curve!r} at x = {c.witness:.6g}" for c in failed
        )
    logger.info(
        "Boundary triangle at %s (%s): h = %g, ok = %s", p.anchor, tag, h, geometry.ok
    )
    return geometry
