import dataclasses
import enum
import logging
import re

import numpy as np

from .domain import Direction, Side, curve_deriv
from .errors import DomainError
from .helpers import (
    CASE_SAMPLES,
    CASE_SLICES,
    CONDITION4_SAMPLES,
    TANGENCY_TOL,
    band,
)

logger = logging.getLogger(__name__)

MAX_HALVINGS = 20

_TAG = re.compile(r"^(N|[UOB][12])(?:\[([<>=])(?:,([<>=]))?\])?$")


class Family(enum.StrEnum):
    """Local geometry of the good boundary to the right of the origin."""

    N = "N"
    U1 = "U1"
    U2 = "U2"
    O1 = "O1"
    O2 = "O2"
    B1 = "B1"
    B2 = "B2"
    UNCLASSIFIED = "unclassified"

    @property
    def has_upper(self):
        return self.value[0] in "UB"

    @property
    def has_lower(self):
        return self.value[0] in "OB"

    @property
    def empty_window(self):
        """Return True for the families whose window holds no interior points."""
        return self.value.endswith("2")


@dataclasses.dataclass(frozen=True)
class CaseTag:
    """
    Boundary case found at the origin of a normalized problem.

    ``upper_sub`` is ``">"`` or ``"="`` for families with an upper curve and
    ``lower_sub`` is ``"<"`` or ``"="`` for families with a lower curve; both are
    None otherwise. ``witness`` is the window size ``c`` for which the set
    identities held.
    """

    family: Family
    upper_sub: str | None = None
    lower_sub: str | None = None
    witness: float = float("nan")
    direction: Direction = Direction.RIGHT
    diagnostics: tuple = ()

    def __post_init__(self):
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "direction", Direction(self.direction))
        if family is Family.UNCLASSIFIED:
            return
        if (self.upper_sub is not None) != family.has_upper:
            raise ValueError(f"Family {family} and upper subcase {self.upper_sub!r} disagree")
        if (self.lower_sub is not None) != family.has_lower:
            raise ValueError(f"Family {family} and lower subcase {self.lower_sub!r} disagree")
        if self.upper_sub not in (None, ">", "="):
            raise ValueError(f"Invalid upper subcase: {self.upper_sub!r}")
        if self.lower_sub not in (None, "<", "="):
            raise ValueError(f"Invalid lower subcase: {self.lower_sub!r}")

    def __str__(self):
        subs = [s for s in (self.upper_sub, self.lower_sub) if s is not None]
        if not subs:
            return self.family.value
        return f"{self.family.value}[{','.join(subs)}]"

    @property
    def classified(self):
        return self.family is not Family.UNCLASSIFIED

    @classmethod
    def from_string(cls, text, witness=float("nan"), direction=Direction.RIGHT):
        """
        Parse a tag such as ``"N"``, ``"U1[>]"`` or ``"B1[=,=]"``.

        Raises
        ------
        ValueError
            If the text is not a valid tag.
        """
        text = text.strip()
        if text == Family.UNCLASSIFIED.value:
            return cls(Family.UNCLASSIFIED, witness=witness, direction=direction)
        match = _TAG.match(text.replace(" ", ""))
        if match is None:
            raise ValueError(f"Invalid case tag: {text!r}")
        family = Family(match.group(1))
        subs = [s for s in match.group(2, 3) if s is not None]
        upper = subs.pop(0) if family.has_upper and subs else None
        lower = subs.pop(0) if family.has_lower and subs else None
        if subs:
            raise ValueError(f"Invalid case tag: {text!r}")
        return cls(family, upper, lower, witness, direction)


class Condition4Status(enum.StrEnum):
    HOLDS = "holds"
    FAILS = "fails"
    NOT_APPLICABLE = "not applicable"


@dataclasses.dataclass(frozen=True)
class Condition4:
    """Result of checking that the field points inside or along a tangent curve."""

    curve: str
    side: Side
    status: Condition4Status
    witness: float | None = None
    equality: bool = False
    violation: float = 0.0

    def __str__(self):
        if self.status is Condition4Status.FAILS:
            return f"fails at x = {self.witness:.6g}"
        return self.status.value


def _slice_ranges(upper, lower, c, xs):
    lo = np.full(xs.shape, -c)
    hi = np.full(xs.shape, c)
    lo_on = np.zeros(xs.shape, dtype=bool)
    hi_on = np.zeros(xs.shape, dtype=bool)
    if upper is not None:
        bu = upper.b(xs)
        hi_on = bu <= c
        hi = np.minimum(bu, c)
    if lower is not None:
        bl = lower.b(xs)
        lo_on = bl >= -c
        lo = np.maximum(bl, -c)
    return lo, hi, lo_on, hi_on


def _check_window(p, upper, lower, c, slices, samples):
    """Sample the case set for window ``c``; return (subscript, diagnostic)."""
    xs = np.linspace(c / slices, c, slices)
    lo, hi, lo_on, hi_on = _slice_ranges(upper, lower, c, xs)
    if np.any(lo > hi + band(hi)):
        i = int(np.flatnonzero(lo > hi + band(hi))[0])
        return None, f"boundary curves cross at x = {xs[i]:.6g} (c = {c:.6g})"

    for curve, ends, on in ((upper, hi, hi_on), (lower, lo, lo_on)):
        if curve is None:
            continue
        codes = p.codes(xs[on], ends[on])
        if np.any(codes == 0):
            i = int(np.flatnonzero(codes == 0)[0])
            return None, (
                f"curve {curve.name!r} point ({xs[on][i]:.6g}, {ends[on][i]:.6g}) "
                "is not in the region"
            )

    t = np.linspace(0.0, 1.0, samples)
    gx = np.repeat(xs, samples)
    gy = (lo[:, None] + (hi - lo)[:, None] * t[None, :]).ravel()
    keep = np.ones((slices, samples), dtype=bool)
    keep[:, 0] = ~lo_on
    keep[:, -1] = ~hi_on
    keep = keep.ravel()
    gx, gy = gx[keep], gy[keep]
    codes = p.codes(gx, gy)
    for curve in (upper, lower):
        if curve is not None:
            codes = np.where(curve.on(gx, gy), -1, codes)
    off = codes >= 0
    codes, gx = codes[off], gx[off]
    if codes.size == 0 or np.all(codes == 2):
        return "1", None
    if np.all(codes == 0):
        return "2", None
    kind = "boundary" if np.any(codes == 1) else "mixed interior/outside"
    i = int(np.flatnonzero(codes == 1)[0]) if np.any(codes == 1) else 0
    return None, f"{kind} points in the window (c = {c:.6g}, x = {gx[i]:.6g})"


def classify_right(p, c_star=1.0, slices=CASE_SLICES, samples=CASE_SAMPLES):
    """
    Classify the good boundary to the right of the origin.

    The family follows from the anchored boundary curves of ``p``: none gives
    ``N``, an upper curve ``U``, a lower curve ``O`` and both ``B``. The window
    ``c`` starts at ``c_star`` (capped by the curve extents) and is halved until
    every sampled point of the case set agrees with the set identities:
    curve points are boundary points and all other points are interior
    (subscript 1) or all outside (subscript 2).

    Parameters
    ----------
    p : NormalizedProblem
        Problem normalized at the initial point.
    c_star : float
        Largest window tried.
    slices, samples : int
        Number of ``x``-slices and ``y``-samples per slice.

    Returns
    -------
    CaseTag
        Tag of the matching case, or ``unclassified`` with diagnostics.

    Examples
    --------
    >>> import bivp as bv
    >>> p = bv.to_origin(bv.corpus.get("example1").problem, (0.0, 0.0))
    >>> str(classify_right(p))
    'O1[=]'
    """
    upper = p.upper[0] if p.upper else None
    lower = p.lower[0] if p.lower else None
    if len(p.upper) > 1 or len(p.lower) > 1:
        logger.warning("Several curves on one side at %s; using the first", p.anchor)
    family = "B" if upper and lower else "U" if upper else "O" if lower else "N"

    c = c_star
    for curve in (upper, lower):
        if curve is not None:
            c = min(c, curve.a)

    diagnostics = [f"rejected curve {curve.name!r}: {reason}" for curve, reason in p.rejected]
    for _ in range(MAX_HALVINGS):
        subscript, diagnostic = _check_window(p, upper, lower, c, slices, samples)
        if subscript is not None and not (family == "N" and subscript == "2"):
            name = "N" if family == "N" else family + subscript
            tag = CaseTag(
                Family(name),
                None if upper is None else (">" if upper.slope0 > 0 else "="),
                None if lower is None else ("<" if lower.slope0 < 0 else "="),
                witness=c,
                direction=p.direction,
                diagnostics=tuple(diagnostics),
            )
            logger.info("Case at %s (%s): %s, c = %g", p.anchor, p.direction.value, tag, c)
            return tag
        diagnostics.append(diagnostic or f"window outside the region (c = {c:.6g})")
        logger.debug("Case set rejected: %s", diagnostics[-1])
        c /= 2

    logger.info("No case matches at %s (%s)", p.anchor, p.direction.value)
    return CaseTag(
        Family.UNCLASSIFIED,
        witness=c * 2,
        direction=p.direction,
        diagnostics=tuple(diagnostics[-3:]),
    )


def check_condition4(p, curve, samples=CONDITION4_SAMPLES, tol=TANGENCY_TOL):
    """
    Check that the field points inside or along a tangent boundary curve.

    For curves leaving the origin with zero slope the field must satisfy
    ``f0(x, b(x)) <= b'(x)`` on an upper curve and ``f0(x, b(x)) >= b'(x)`` on a
    lower curve for ``x`` in ``(0, a]``.

    Parameters
    ----------
    p : NormalizedProblem
        Problem the curve is anchored in.
    curve : BoundaryCurve
        Anchored boundary curve.
    samples : int
        Number of sampled abscissae.
    tol : float
        Tolerance relative to ``1 + |b'(x)|``.

    Returns
    -------
    Condition4
        ``holds`` (with an ``equality`` flag when the curve is a solution graph),
        ``fails`` with the first violating abscissa, or ``not applicable`` when
        the curve has a non-zero slope at the origin.

    Raises
    ------
    DomainError
        If the field cannot be evaluated on the curve.
    """
    if not curve.tangent:
        return Condition4(curve.name, curve.side, Condition4Status.NOT_APPLICABLE)

    xs = np.linspace(curve.a / samples, curve.a, samples)
    try:
        values = p.field(xs, curve.b(xs))
    except DomainError as exc:
        raise DomainError(f"Field not evaluable on curve {curve.name!r}", exc.point) from None
    slopes = curve_deriv(curve, xs)
    width = tol * (1 + np.abs(slopes))
    excess = values - slopes if curve.side is Side.UPPER else slopes - values
    equality = bool(np.all(np.abs(values - slopes) <= width))
    bad = excess > width
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        return Condition4(
            curve.name,
            curve.side,
            Condition4Status.FAILS,
            witness=float(xs[i]),
            violation=float(np.max(excess)),
        )
    return Condition4(curve.name, curve.side, Condition4Status.HOLDS, equality=equality)
