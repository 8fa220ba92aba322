import dataclasses
import enum
import json
import logging
import math
import pathlib

import numpy as np

from . import expr as ex
from .errors import DomainError, RegionError
from .helpers import (
    BOUNDARY_TOL,
    CONVEXITY_SAMPLES,
    FD_STEP,
    SLOPE_TOL,
    band,
)

logger = logging.getLogger(__name__)

OUTSIDE, ON, INSIDE = 0, 1, 2
VALIDATION_GRID = 65
AGREEMENT_TOL = 1e-9


class Side(enum.StrEnum):
    """Which side of a boundary curve the interior lies on."""

    UPPER = "upper"  # interior below the curve
    LOWER = "lower"  # interior above the curve


class Direction(enum.StrEnum):
    RIGHT = "right"
    LEFT = "left"

    @property
    def sign(self):
        return 1.0 if self is Direction.RIGHT else -1.0

    @property
    def opposite(self):
        return Direction.LEFT if self is Direction.RIGHT else Direction.RIGHT


class PointClass(enum.StrEnum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    OUTSIDE = "outside"


@dataclasses.dataclass(frozen=True)
class Membership:
    """Classification of a point against a region."""

    kind: PointClass
    curve: str | None = None
    param: float | None = None

    @property
    def admissible(self):
        """Return True for points of the closure set (interior or good boundary)."""
        return self.kind is not PointClass.OUTSIDE


def _as_expr(value):
    if isinstance(value, ex.Expr):
        return value
    if isinstance(value, int | float):
        return ex.Expr(ex.Const(float(value)))
    return ex.parse(value)


def _bound(value, default):
    return default if value is None else float(value)


def _json_bound(value):
    return None if math.isinf(value) else value


class Curve:
    """
    Good-boundary arc ``y = b(x)`` for ``x`` in ``[x_min, x_max]``.

    Parameters
    ----------
    name : str
        Identifier reported in classifications and trace flags.
    side : Side or str
        ``"upper"`` if the interior lies below the curve, ``"lower"`` if above.
    b : Expr or str
        Curve function of ``x``.
    x_min, x_max : float, optional
        Extent of the arc; unbounded by default.

    Raises
    ------
    ValueError
        If ``b`` depends on ``y`` or the extent is empty.
    """

    def __init__(self, name, side, b, x_min=-math.inf, x_max=math.inf):
        self.name = str(name)
        self.side = Side(side)
        self.b = _as_expr(b)
        self.x_min = _bound(x_min, -math.inf)
        self.x_max = _bound(x_max, math.inf)
        if "y" in self.b.variables:
            raise ValueError(f"Curve {self.name!r} must depend on x only: {self.b}")
        if self.x_min > self.x_max:
            raise ValueError(
                f"Curve {self.name!r} has empty extent [{self.x_min}, {self.x_max}]"
            )

    def __call__(self, x):
        return self.b(x)

    def __repr__(self):
        return (
            f"{type(self).__name__}({self.name!r}, {self.side.value!r}, "
            f"'{self.b}', {self.x_min}, {self.x_max})"
        )

    def covers(self, x, tol=0.0):
        """Return True where ``x`` lies within the curve's extent."""
        return (np.asarray(x) >= self.x_min - tol) & (np.asarray(x) <= self.x_max + tol)

    def distance(self, x, y):
        """
        Return ``|y - b(x)|`` where the curve covers ``x`` and ``inf`` elsewhere.

        Parameters
        ----------
        x, y : array_like
            Coordinates.

        Returns
        -------
        np.ndarray
            Vertical distances.
        """
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, float))
        out = np.full(x.shape, np.inf)
        mask = self.covers(x, band(x))
        if mask.any():
            xs = np.clip(x[mask], self.x_min, self.x_max)
            out[mask] = np.abs(y[mask] - self.b(xs))
        return out

    def on(self, x, y, tol=BOUNDARY_TOL):
        """Return True where the point lies on the curve within the membership band."""
        return self.distance(x, y) <= band(y, tol)

    def sample(self, x_lo, x_hi, n):
        """Sample ``n`` points of the arc inside ``[x_lo, x_hi]``."""
        lo, hi = max(x_lo, self.x_min), min(x_hi, self.x_max)
        if lo > hi:
            return np.empty(0), np.empty(0)
        xs = np.linspace(lo, hi, n)
        return xs, self.b(xs)

    def to_dict(self):
        return {
            "name": self.name,
            "side": self.side.value,
            "b": str(self.b) if self.b.text is None else self.b.text,
            "x_min": _json_bound(self.x_min),
            "x_max": _json_bound(self.x_max),
        }


def curve_deriv(c, x, h=FD_STEP):
    """
    Differentiate a curve by finite differences.

    A central difference is used inside the curve's extent and a one-sided
    difference within ``h`` of its ends.

    Parameters
    ----------
    c : Curve
        Curve to differentiate.
    x : float or array_like
        Abscissa in the curve's extent.
    h : float
        Finite-difference step.

    Returns
    -------
    float or np.ndarray
        Approximation of ``b'(x)``.

    Raises
    ------
    DomainError
        If ``b`` cannot be evaluated near ``x``.

    Examples
    --------
    >>> c = Curve("parabola", "upper", "x^2", 0, 2)
    >>> round(curve_deriv(c, 1.0), 6)
    2.0
    """
    x = np.asarray(x, dtype=float)
    lo = np.maximum(x - h, c.x_min)
    hi = np.minimum(x + h, c.x_max)
    lo = np.where(hi - lo < h, np.minimum(lo, x), lo)
    if np.any(hi <= lo):
        raise DomainError(f"Curve {c.name!r} has no neighbourhood at x = {x}")
    result = (c.b(hi) - c.b(lo)) / (hi - lo)
    return float(result) if result.ndim == 0 else result


class BoundaryCurve(Curve):
    """
    Anchored boundary function on ``[0, a]`` in anchor-local coordinates.

    The curve starts at the origin, ``b(0) = 0``, and must satisfy the boundary
    function conditions together with the slope condition:

    - upper curves have ``b'(0) >= 0``; with ``b'(0) = 0`` they are convex and
      ``b(a) <= a``, with ``b'(0) > 0`` every sampled ``b'(x) >= b'(0) / 2``;
    - lower curves mirror this with ``-b``, except that no convexity is
      required.

    Parameters
    ----------
    name : str
        Identifier of the global curve this arc comes from.
    side : Side or str
        Curve side.
    b : Expr or str
        Boundary function in local coordinates.
    a : float
        Extent of the arc.
    direction : Direction or str
        Direction of the arc relative to the anchor.
    slope0 : float, optional
        ``b'(0)``; estimated with a one-sided finite difference if omitted.
    samples : int
        Number of samples for the convexity and slope checks.

    Raises
    ------
    RegionError
        If any of the conditions fails.
    """

    def __init__(
        self,
        name,
        side,
        b,
        a,
        direction=Direction.RIGHT,
        slope0=None,
        samples=CONVEXITY_SAMPLES,
    ):
        if not a > 0:
            raise RegionError(f"Boundary curve {name!r} needs a positive extent, got {a}")
        super().__init__(name, side, b, 0.0, a)
        self.a = float(a)
        self.direction = Direction(direction)
        self.samples = samples

        b0 = self.b(0.0)
        if abs(b0) > 1e-8:
            raise RegionError(f"Boundary curve {self.name!r} has b(0) = {b0}, not 0")

        if slope0 is None:
            slope0 = (self.b(FD_STEP) - b0) / FD_STEP
        self.slope0 = 0.0 if abs(slope0) < SLOPE_TOL else float(slope0)
        self._validate()

    @property
    def tau(self):
        """Return the slope bound of the slope condition, 0 for tangent curves."""
        if self.side is Side.UPPER:
            return self.slope0 / 2 if self.slope0 > 0 else 0.0
        return -self.slope0 / 2 if self.slope0 < 0 else 0.0

    @property
    def tangent(self):
        """Return True if the curve leaves the anchor with zero slope."""
        return self.slope0 == 0.0

    @property
    def convex(self):
        """Return True if sampled second differences are non-negative."""
        xs = np.linspace(0.0, self.a, self.samples)
        values = self.b(xs)
        second = values[2:] - 2 * values[1:-1] + values[:-2]
        return bool(np.all(second >= -BOUNDARY_TOL * (1 + np.max(np.abs(values)))))

    def _validate(self):
        sign = 1.0 if self.side is Side.UPPER else -1.0
        if sign * self.slope0 < 0:
            raise RegionError(
                f"{self.side.value.capitalize()} boundary curve {self.name!r} has "
                f"b'(0) = {self.slope0} of the wrong sign"
            )

        if self.tangent:
            if self.side is Side.UPPER and not self.convex:
                raise RegionError(
                    f"Upper boundary curve {self.name!r} is tangent at the anchor "
                    "but not convex"
                )
            end = sign * self.b(self.a)
            if end > self.a:
                raise RegionError(
                    f"Boundary curve {self.name!r} violates |b(a)| <= a: "
                    f"b({self.a}) = {self.b(self.a)}"
                )
            return

        xs = np.linspace(0.0, self.a, self.samples)
        slopes = sign * curve_deriv(self, xs)
        if np.min(slopes) < self.tau:
            worst = xs[int(np.argmin(slopes))]
            raise RegionError(
                f"Boundary curve {self.name!r} violates the slope bound "
                f"{self.tau} at x = {worst}"
            )


class Wall:
    """Vertical good-boundary segment ``x = const`` for ``y`` in ``[y_min, y_max]``."""

    def __init__(self, name, x, y_min=-math.inf, y_max=math.inf):
        self.name = str(name)
        self.x = float(x)
        self.y_min = _bound(y_min, -math.inf)
        self.y_max = _bound(y_max, math.inf)

    def __repr__(self):
        return f"Wall({self.name!r}, {self.x}, {self.y_min}, {self.y_max})"

    def on(self, x, y, tol=BOUNDARY_TOL):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        width = band(y, tol)
        return (
            (np.abs(x - self.x) <= band(x, tol))
            & (y >= self.y_min - width)
            & (y <= self.y_max + width)
        )

    def to_dict(self):
        return {
            "name": self.name,
            "x": self.x,
            "y_min": _json_bound(self.y_min),
            "y_max": _json_bound(self.y_max),
        }


def _margins(op, left, right):
    if op in ("<", "<="):
        return right - left
    if op in (">", ">="):
        return left - right
    return -np.abs(left - right)


def _level(margin, width):
    return np.where(margin > width, INSIDE, np.where(margin >= -width, ON, OUTSIDE))


def _compile_truth(node):
    """Compile a guard into a three-valued function: 0 outside, 1 on, 2 inside."""
    if isinstance(node, ex.Compare):
        operands = [ex.Expr(item) for item in node.operands]
        ops = node.ops

        def truth(x, y):
            values = [operand(x, y) for operand in operands]
            result = np.full(np.shape(x), INSIDE)
            for op, left, right in zip(ops, values, values[1:], strict=False):
                width = BOUNDARY_TOL * (1 + np.abs(left) + np.abs(right))
                result = np.minimum(result, _level(_margins(op, left, right), width))
            return result

        return truth

    items = [_compile_truth(item) for item in node.operands]
    reduce = np.minimum if node.op == "and" else np.maximum

    def combine(x, y):
        result = items[0](x, y)
        for item in items[1:]:
            result = reduce(result, item(x, y))
        return result

    return combine


class Region:
    """
    Closure set of an equation: an open interior plus listed good-boundary arcs.

    Parameters
    ----------
    interior : str, Expr or list
        Inequalities whose conjunction defines the interior. Each may use
        ``and``/``or``. Points satisfying them strictly (beyond the membership
        band) are interior.
    curves : list of Curve, optional
        Good-boundary arcs ``y = b(x)``.
    walls : list of Wall, optional
        Vertical good-boundary segments.
    bbox : tuple of float
        ``(x_min, x_max, y_min, y_max)`` used for sampling.

    Raises
    ------
    RegionError
        If sampled curve points are interior.
    """

    def __init__(self, interior, curves=(), walls=(), bbox=(-1.0, 1.0, -1.0, 1.0)):
        if isinstance(interior, str | ex.Expr):
            interior = [interior]
        self.inequalities = [
            item if isinstance(item, ex.Expr) else ex.parse_predicate(item)
            for item in interior
        ]
        if not self.inequalities:
            raise ValueError("Region needs at least one inequality")
        roots = tuple(item.root for item in self.inequalities)
        self.predicate = roots[0] if len(roots) == 1 else ex.Logical("and", roots)
        self._truth = _compile_truth(self.predicate)
        self.curves = list(curves)
        self.walls = list(walls)
        self.bbox = tuple(float(v) for v in bbox)

        names = [item.name for item in self.curves + self.walls]
        if len(names) != len(set(names)):
            raise ValueError(f"Boundary names must be unique: {names}")
        self._check_curves()

    def __repr__(self):
        inequalities = ", ".join(repr(item.text) for item in self.inequalities)
        return f"Region([{inequalities}], curves={self.curves}, walls={self.walls})"

    def _check_curves(self):
        x0, x1, _, _ = self.bbox
        for curve in self.curves:
            xs, ys = curve.sample(x0, x1, CONVEXITY_SAMPLES)
            if xs.size == 0:
                continue
            inside = self.truth(xs, ys) == INSIDE
            if inside.any():
                i = int(np.flatnonzero(inside)[0])
                raise RegionError(
                    f"Curve {curve.name!r} passes through the interior at "
                    f"({xs[i]}, {ys[i]})"
                )

    def boundary(self, name):
        """Return the curve or wall called ``name``."""
        for item in self.curves + self.walls:
            if item.name == name:
                return item
        raise KeyError(f"No boundary called {name!r}")

    def truth(self, x, y):
        """
        Evaluate the interior predicate with three-valued logic.

        Parameters
        ----------
        x, y : array_like
            Coordinates.

        Returns
        -------
        np.ndarray
            0 where the point is outside, 1 on the predicate's boundary and 2
            inside. Points where an inequality cannot be evaluated are outside.
        """
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, float))
        try:
            with np.errstate(all="ignore"):
                return np.asarray(self._truth(x, y), dtype=int)
        except DomainError:
            out = np.empty(x.shape, dtype=int)
            for index in np.ndindex(x.shape):
                try:
                    out[index] = int(self._truth(x[index], y[index]))
                except DomainError:
                    out[index] = OUTSIDE
            return out

    def codes(self, x, y):
        """
        Classify points in bulk.

        Returns
        -------
        np.ndarray
            2 for interior, 1 for good-boundary and 0 for outside points.
        """
        truth = self.truth(x, y)
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, float))
        result = np.where(truth == INSIDE, INSIDE, OUTSIDE)
        rest = result != INSIDE
        if rest.any():
            on = np.zeros(x.shape, dtype=bool)
            for item in self.curves + self.walls:
                on |= item.on(x, y)
            result = np.where(rest & on, ON, result)
        return result

    def classify_point(self, p):
        """
        Classify a point as interior, good boundary or outside.

        Parameters
        ----------
        p : tuple of float
            Point ``(x, y)``.

        Returns
        -------
        Membership
            Classification; boundary points carry the nearest curve's name and
            the abscissa (``y`` for walls) as parameter.

        Examples
        --------
        >>> r = Region(["x >= 0", "y >= 0"], [Curve("axis", "lower", "0", 0)])
        >>> r.classify_point((2.0, 0.0))
        Membership(kind=<PointClass.BOUNDARY: 'boundary'>, curve='axis', param=2.0)
        """
        x, y = float(p[0]), float(p[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"Point must be finite, got {p}")
        if int(self.truth(x, y)) == INSIDE:
            return Membership(PointClass.INTERIOR)

        best, best_distance = None, math.inf
        for curve in self.curves:
            distance = float(curve.distance(x, y))
            if distance <= band(y) and distance < best_distance:
                best, best_distance = curve, distance
        if best is not None:
            return Membership(PointClass.BOUNDARY, best.name, x)
        for wall in self.walls:
            if bool(wall.on(x, y)):
                return Membership(PointClass.BOUNDARY, wall.name, y)
        return Membership(PointClass.OUTSIDE)

    def sample(self, n=VALIDATION_GRID):
        """Return admissible grid and boundary points of the bounding box."""
        x0, x1, y0, y1 = self.bbox
        gx, gy = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
        xs, ys = [gx.ravel()], [gy.ravel()]
        for curve in self.curves:
            cx, cy = curve.sample(x0, x1, n)
            keep = (cy >= y0) & (cy <= y1)
            xs.append(cx[keep])
            ys.append(cy[keep])
        for wall in self.walls:
            if x0 <= wall.x <= x1:
                lo, hi = max(y0, wall.y_min), min(y1, wall.y_max)
                if lo <= hi:
                    wy = np.linspace(lo, hi, n)
                    xs.append(np.full(n, wall.x))
                    ys.append(wy)
        xs, ys = np.concatenate(xs), np.concatenate(ys)
        keep = self.codes(xs, ys) != OUTSIDE
        return xs[keep], ys[keep]

    def to_dict(self):
        return {
            "interior": [item.text for item in self.inequalities],
            "curves": [curve.to_dict() for curve in self.curves],
            "walls": [wall.to_dict() for wall in self.walls],
            "bbox": list(self.bbox),
        }


class ProblemSpec:
    """
    Equation ``y' = f(x, y)`` on a region, with an optional continuous extension.

    Parameters
    ----------
    name : str
        Identifier of the problem.
    region : Region
        Closure set of the equation.
    field : Expr or str
        Right-hand side.
    extension : ProblemSpec, optional
        Problem on a larger region whose field agrees with ``field`` on
        ``region``.
    initial_point : tuple of float, optional
        Default anchor.
    validate : bool
        Check by sampling that ``field`` is evaluable on the region and that the
        extension agrees with it.

    Raises
    ------
    DomainError
        If the field cannot be evaluated at a sampled admissible point.
    ValueError
        If the extension disagrees with the field on the region.
    """

    def __init__(
        self, name, region, field, extension=None, initial_point=None, validate=True
    ):
        self.name = str(name)
        self.region = region
        self.field = _as_expr(field)
        self.extension = extension
        self.initial_point = (
            None if initial_point is None else tuple(float(v) for v in initial_point)
        )
        if validate:
            self._validate()

    def __repr__(self):
        return f"ProblemSpec({self.name!r}, field='{self.field.text}')"

    def f(self, x, y):
        """Evaluate the right-hand side."""
        return self.field(x, y)

    def _validate(self):
        xs, ys = self.region.sample()
        values = self.field(xs, ys)
        logger.debug(
            "Problem %s evaluable at %d sampled points", self.name, values.size
        )
        if self.extension is None:
            return
        codes = self.extension.region.codes(xs, ys)
        if np.any(codes == OUTSIDE):
            i = int(np.flatnonzero(codes == OUTSIDE)[0])
            raise ValueError(
                f"Extension of {self.name!r} does not contain ({xs[i]}, {ys[i]})"
            )
        extended = self.extension.field(xs, ys)
        mismatch = np.abs(extended - values) > AGREEMENT_TOL * (1 + np.abs(values))
        if mismatch.any():
            i = int(np.flatnonzero(mismatch)[0])
            raise ValueError(
                f"Extension of {self.name!r} disagrees with the field at "
                f"({xs[i]}, {ys[i]}): {extended[i]} != {values[i]}"
            )

    def to_dict(self):
        data = {"name": self.name, "field": self.field.text, **self.region.to_dict()}
        data["extension"] = None if self.extension is None else self.extension.to_dict()
        data["initial_point"] = (
            None if self.initial_point is None else list(self.initial_point)
        )
        return data

    @classmethod
    def from_dict(cls, data):
        """
        Build a problem from its JSON representation.

        Parameters
        ----------
        data : dict
            Mapping with keys ``name``, ``field``, ``interior`` and optionally
            ``curves``, ``walls``, ``bbox``, ``extension`` and ``initial_point``.

        Returns
        -------
        ProblemSpec
            The problem.

        Raises
        ------
        ValueError
            If a required key is missing or a value is malformed.
        """
        if not isinstance(data, dict):
            raise ValueError(f"Problem must be a JSON object, got {type(data).__name__}")
        for key in ("name", "field", "interior"):
            if key not in data:
                raise ValueError(f"Problem is missing the field {key!r}")
        try:
            curves = []
            for item in data.get("curves", []):
                x_min = _bound(item.get("x_min"), -math.inf)
                x_max = item.get("x_max")
                if x_max is None and "a" in item:
                    x_max = x_min + float(item["a"])
                curves.append(
                    Curve(item["name"], item["side"], item["b"], x_min, x_max)
                )
            walls = [
                Wall(item["name"], item["x"], item.get("y_min"), item.get("y_max"))
                for item in data.get("walls", [])
            ]
        except KeyError as exc:
            raise ValueError(f"Boundary entry is missing the field {exc}") from None
        region = Region(
            data["interior"], curves, walls, data.get("bbox", (-1.0, 1.0, -1.0, 1.0))
        )
        extension = data.get("extension")
        return cls(
            data["name"],
            region,
            data["field"],
            extension=None if extension is None else cls.from_dict(extension),
            initial_point=data.get("initial_point"),
        )

    @classmethod
    def load(cls, path):
        """
        Read a problem from a JSON file.

        Parameters
        ----------
        path : str or pathlib.Path
            Problem file.

        Returns
        -------
        ProblemSpec
            The problem.

        Raises
        ------
        FileNotFoundError
            If the file does not exist.
        ValueError
            If the file is not valid JSON or not a valid problem.
        """
        path = pathlib.Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Problem file not found: {path}")
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls.from_dict(data)

    def dump(self, path):
        """Write the problem as a JSON file."""
        path = pathlib.Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path
