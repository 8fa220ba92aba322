import logging

import numpy as np

from . import expr as ex
from .domain import BoundaryCurve, Curve, Direction, Region, Side, Wall
from .errors import ContinuityError, RegionError
from .helpers import DELTA_FLOOR, MODULUS_GRID, band, box

logger = logging.getLogger(__name__)

ANCHOR_EXTENT = 1.0
MAX_HALVINGS = 30
BISECTION_STEPS = 30

X = ex.Expr(ex.Var("x"))
Y = ex.Expr(ex.Var("y"))


class NormalizedProblem:
    """
    Problem moved to the origin and sheared so that the field vanishes there.

    With ``s = f(x0, y0)`` and ``sigma = +1`` (right) or ``-1`` (left), local
    coordinates are ``x = x0 + sigma * X`` and ``y = y0 + Y + s * sigma * X``; the
    local field is ``f0(X, Y) = sigma * (f(x, y) - s)``. Curves tangent to the
    field at the anchor become tangent to ``Y = 0``, which is what activates the
    ``"="`` slope subcases of the classifier. The left direction is the right
    analysis of the reflected problem.

    Parameters
    ----------
    base : ProblemSpec
        Problem in global coordinates.
    anchor : tuple of float
        Initial point; must belong to the closure set.
    direction : Direction or str
        Side of the anchor to analyse.
    extent : float
        Largest extent ``a`` of the anchored boundary curves.

    Raises
    ------
    RegionError
        If the anchor is outside the region.
    DomainError
        If the field cannot be evaluated at the anchor.
    """

    def __init__(self, base, anchor, direction=Direction.RIGHT, extent=ANCHOR_EXTENT):
        self.base = base
        self.anchor = (float(anchor[0]), float(anchor[1]))
        self.direction = Direction(direction)
        self.extent = float(extent)
        self.membership = base.region.classify_point(self.anchor)
        if not self.membership.admissible:
            raise RegionError(f"Anchor {self.anchor} is outside the region of {base.name!r}")

        x0, y0 = self.anchor
        self.shear = base.field(x0, y0)
        sigma = self.direction.sign
        self.sigma = sigma
        gx = x0 + sigma * X
        gy = y0 + Y + (self.shear * sigma) * X
        self.field = sigma * (base.field.substitute(x=gx, y=gy) - self.shear)

        self.region = Region(
            [item.substitute(x=gx, y=gy) for item in base.region.inequalities],
            [self._local_curve(curve, gx) for curve in base.region.curves],
            [self._local_wall(wall) for wall in base.region.walls],
            self._local_bbox(),
        )
        self.upper, self.lower, self.rejected = self._anchor_curves()
        logger.debug(
            "Normalized %s at %s (%s): shear %g, upper %s, lower %s",
            base.name,
            self.anchor,
            self.direction.value,
            self.shear,
            self.upper,
            self.lower,
        )

    def __repr__(self):
        return (
            f"NormalizedProblem({self.base.name!r}, anchor={self.anchor}, "
            f"direction={self.direction.value!r})"
        )

    def _local_range(self, lo, hi):
        x0, sigma = self.anchor[0], self.sigma
        return tuple(sorted([sigma * (lo - x0), sigma * (hi - x0)]))

    def _local_curve(self, curve, gx):
        x0, y0 = self.anchor
        b = curve.b.substitute(x=gx) - y0 - (self.shear * self.sigma) * X
        lo, hi = self._local_range(curve.x_min, curve.x_max)
        return Curve(curve.name, curve.side, b, lo, hi)

    def _local_wall(self, wall):
        x0, y0 = self.anchor
        at = self.sigma * (wall.x - x0)
        offset = y0 + self.shear * self.sigma * at
        return Wall(wall.name, at, wall.y_min - offset, wall.y_max - offset)

    def _local_bbox(self):
        x0, x1, y0, y1 = self.base.region.bbox
        corners = np.array([self.to_local(x, y) for x in (x0, x1) for y in (y0, y1)])
        return (
            corners[:, 0].min(),
            corners[:, 0].max(),
            corners[:, 1].min(),
            corners[:, 1].max(),
        )

    def _anchor_curves(self):
        upper, lower, rejected = [], [], []
        for curve in self.region.curves:
            if curve.x_max <= 0 or curve.x_min > band(0.0):
                continue
            if not bool(curve.on(0.0, 0.0, tol=1e-8)):
                continue
            a = min(curve.x_max, self.extent)
            for _ in range(MAX_HALVINGS):
                try:
                    anchored = BoundaryCurve(
                        curve.name, curve.side, curve.b, a, self.direction
                    )
                except RegionError as exc:
                    reason = str(exc)
                    a /= 2
                    continue
                (upper if anchored.side is Side.UPPER else lower).append(anchored)
                break
            else:
                logger.warning(
                    "Boundary curve %r dropped at %s: %s", curve.name, self.anchor, reason
                )
                rejected.append((curve, reason))
        return upper, lower, rejected

    @property
    def curves(self):
        """Return the anchored boundary curves, upper ones first."""
        return self.upper + self.lower

    def f0(self, x, y):
        """Evaluate the normalized field."""
        return self.field(x, y)

    def to_global(self, x, y):
        """Map local coordinates to the base problem's coordinates."""
        x0, y0 = self.anchor
        gx = x0 + self.sigma * np.asarray(x, dtype=float)
        gy = y0 + np.asarray(y, dtype=float) + self.shear * self.sigma * np.asarray(x)
        return gx, gy

    def to_local(self, x, y):
        """Map base-problem coordinates to local coordinates."""
        x0, y0 = self.anchor
        dx = np.asarray(x, dtype=float) - x0
        return self.sigma * dx, np.asarray(y, dtype=float) - y0 - self.shear * dx

    def classify_point(self, p):
        return self.region.classify_point(p)

    def codes(self, x, y):
        return self.region.codes(x, y)

    def sample(self, delta, n=MODULUS_GRID):
        """
        Return admissible sample points of the closed square of half-side ``delta``.

        Grid points are supplemented by points of the boundary curves and walls so
        that thin regions are represented.
        """
        xs, ys = box((0.0, 0.0), delta, delta, n)
        xs, ys = [xs, np.zeros(1)], [ys, np.zeros(1)]
        for curve in self.region.curves:
            cx, cy = curve.sample(-delta, delta, n)
            keep = np.abs(cy) <= delta
            xs.append(cx[keep])
            ys.append(cy[keep])
        for wall in self.region.walls:
            if abs(wall.x) <= delta:
                lo, hi = max(-delta, wall.y_min), min(delta, wall.y_max)
                if lo <= hi:
                    xs.append(np.full(n, wall.x))
                    ys.append(np.linspace(lo, hi, n))
        xs, ys = np.concatenate(xs), np.concatenate(ys)
        keep = self.codes(xs, ys) > 0
        return xs[keep], ys[keep]

    def sup_field(self, delta, n=MODULUS_GRID):
        """Return the sampled supremum of ``|f0|`` over the square of half-side ``delta``."""
        xs, ys = self.sample(delta, n)
        values = ex.evaluate_or_nan(self.field, xs, ys)
        return float(np.nanmax(np.abs(values)))


def to_origin(p, anchor, direction=Direction.RIGHT):
    """
    Normalize an initial value problem at a point of its closure set.

    Parameters
    ----------
    p : ProblemSpec
        Problem.
    anchor : tuple of float
        Initial point.
    direction : Direction or str
        Side of the anchor to analyse.

    Returns
    -------
    NormalizedProblem
        Problem with ``f0(0, 0) = 0``.

    Raises
    ------
    RegionError
        If the anchor is outside the region.
    """
    return NormalizedProblem(p, anchor, direction)


def reflect_left(p):
    """
    Reflect a normalized problem through ``X -> -X``.

    The result's right side is the input's left side and its field is
    ``-f0(-X, Y)``. Reflecting twice gives back the original problem.

    Parameters
    ----------
    p : NormalizedProblem
        Problem to reflect.

    Returns
    -------
    NormalizedProblem
        Reflected problem.
    """
    return NormalizedProblem(p.base, p.anchor, p.direction.opposite, p.extent)


def continuity_modulus(p, tau, window=1.0, floor=DELTA_FLOOR, n=MODULUS_GRID):
    """
    Find ``delta`` with ``|f0| <= tau`` on the closed ``delta``-square at the origin.

    The window is halved until the sampled supremum drops to ``tau`` and the
    threshold is then refined by bisection.

    Parameters
    ----------
    p : NormalizedProblem
        Problem.
    tau : float
        Positive field bound.
    window : float
        Initial and largest half-side.
    floor : float
        Smallest half-side tried.
    n : int
        Grid samples per side.

    Returns
    -------
    float
        Largest ``delta <= window`` found.

    Raises
    ------
    ValueError
        If ``tau`` is not positive.
    ContinuityError
        If no ``delta`` above ``floor`` satisfies the bound.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    delta = window
    if p.sup_field(delta, n) <= tau:
        return delta
    while p.sup_field(delta, n) > tau:
        delta /= 2
        if delta < floor:
            raise ContinuityError(
                f"|f0| exceeds {tau} on every window above {floor} at {p.anchor}; "
                "the field looks discontinuous there"
            )
    lo, hi = delta, 2 * delta
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if p.sup_field(mid, n) <= tau:
            lo = mid
        else:
            hi = mid
    logger.debug("Continuity modulus at %s for tau=%g: %g", p.anchor, tau, lo)
    return lo
