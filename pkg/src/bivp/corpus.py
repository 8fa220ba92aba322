"""Worked problems with closed-form solutions and the constants tied to them."""

import dataclasses
import functools
import logging
import math

import pandas as pd

from . import expr as ex
from .domain import Curve, ProblemSpec, Region, Wall
from .integrator import verify_solution
from .quadrature import adaptive_simpson

logger = logging.getLogger(__name__)

# Bands J_n with n > BANDS are cut off; the field and psi vanish there
BANDS = 12
QUAD_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class ClosedForm:
    """
    Member of a closed-form solution family.

    ``extended`` marks solutions of the problem's extension rather than of the
    problem itself.
    """

    name: str
    text: str
    interval: tuple
    extended: bool = False

    @functools.cached_property
    def expr(self):
        return ex.parse(self.text)

    def verify(self, problem, **kwargs):
        """Check the member against ``problem`` (or its extension) on its interval."""
        target = problem.extension if self.extended else problem
        return verify_solution(self.expr, target, self.interval, **kwargs)


@dataclasses.dataclass
class CorpusEntry:
    """
    Worked problem with its expected classifications.

    ``tags`` and ``verdicts`` map anchor points to the expected case tag and
    uniqueness class, ``envelopes`` to the expected envelope verdict.
    """

    id: str
    problem: ProblemSpec
    families: dict
    tags: dict = dataclasses.field(default_factory=dict)
    verdicts: dict = dataclasses.field(default_factory=dict)
    envelopes: dict = dataclasses.field(default_factory=dict)
    constants: dict = dataclasses.field(default_factory=dict)
    notes: str = ""

    def solutions(self):
        """Return every closed-form family member."""
        return [member for members in self.families.values() for member in members]

    def verify(self, **kwargs):
        """
        Check every family member against the problem.

        Returns
        -------
        pd.DataFrame
            One row per member with its family, text, interval and check result.
        """
        rows = []
        for family, members in self.families.items():
            for member in members:
                check = member.verify(self.problem, **kwargs)
                rows.append(
                    {
                        "family": family,
                        "name": member.name,
                        "interval": member.interval,
                        **check.to_dict(),
                    }
                )
        return pd.DataFrame(rows)


# Counterexample 2 and Example 2


def _kernel(s):
    """Integrand of ``eta`` after the change ``v = 1 - s**2``; smooth on [0, 1]."""
    r = 2.0 - s * s
    return 4.0 * (1.0 - s * s) / (2.0 * math.sqrt(r) - 2.0 * s * r + s)


def h(v):
    """Right-hand side ``h(u)`` of the separated form of Counterexample 2."""
    return 2 * math.sqrt(1 - v * v) - 2 * (1 - v * v) + (1 - v)


@functools.cache
def theta(tol=QUAD_TOL):
    """
    Integral of ``2v / h(v)`` over ``[0, 1]``.

    The endpoint singularity at ``v = 1`` is removed by the change
    ``v = 1 - s**2`` before adaptive Simpson integration.

    Examples
    --------
    >>> round(theta(), 2)
    1.66
    """
    return adaptive_simpson(_kernel, 0.0, 1.0, tol)


def eta(x, y, tol=QUAD_TOL):
    """
    Return ``eta(x, y)``, the integral of ``2v / h(v)`` from 0 to ``sqrt(y) / x``.

    Raises
    ------
    ValueError
        If ``x <= 0`` or ``(x, y)`` is not in ``0 <= y <= x**2``.
    """
    if not x > 0:
        raise ValueError(f"eta needs x > 0, got {x}")
    if y < -1e-12 or y > x * x * (1 + 1e-12):
        raise ValueError(f"eta needs 0 <= y <= x^2, got ({x}, {y})")
    u = min(math.sqrt(max(y, 0.0)) / x, 1.0)
    return adaptive_simpson(_kernel, math.sqrt(1.0 - u), 1.0, tol)


def implicit_integral(x, y):
    """
    Return the first integral ``U = x * exp(eta)`` of Counterexample 2.

    ``U`` is constant along solutions in ``0 <= y <= x**2``; ``U(c, 0) = c``.
    """
    return x * math.exp(eta(x, y))


def contact_abscissa(c):
    """Return the abscissa where the solution ``U = c`` touches ``y = x**2``."""
    if not c > 0:
        raise ValueError(f"Integral level must be positive, got {c}")
    return c * math.exp(-theta())


def lower_integral(x, y):
    """
    Return the first integral ``V = 2 * sqrt(x**2 + y) - x`` of Example 2.

    Raises
    ------
    ValueError
        If ``x**2 + y < 0``.
    """
    radicand = x * x + y
    if radicand < -1e-12:
        raise ValueError(f"V needs y >= -x^2, got ({x}, {y})")
    return 2 * math.sqrt(max(radicand, 0.0)) - x


# Counterexample 1


def psi_band(n):
    """
    Return the constants of the band ``J_n``.

    Returns
    -------
    pd.Series
        ``a`` (left end ``2**-n``), ``b``, ``d`` (midpoint) and ``right``
        (right end ``2**-(n - 1)``).

    Examples
    --------
    >>> psi_band(1).to_dict()
    {'a': 0.5, 'b': 0.0625, 'd': 0.75, 'right': 1.0}
    """
    if int(n) != n or n < 1:
        raise ValueError(f"Band index must be a positive integer, got {n}")
    n = int(n)
    return pd.Series(
        {
            "a": 2.0**-n,
            "b": 2.0 ** (-2 * (n + 1)),
            "d": 3 * 2.0 ** -(n + 1),
            "right": 2.0 ** -(n - 1),
        },
        name=f"J{n}",
    )


def psi(n, x):
    """
    Evaluate ``psi_n(x) = (b_n - (x - d_n)**2)**1.5`` on ``J_n``.

    Raises
    ------
    ValueError
        If ``x`` is outside ``J_n``.
    """
    band = psi_band(n)
    if not band["a"] - 1e-15 <= x <= band["right"] + 1e-15:
        raise ValueError(f"x = {x} is outside J{n} = [{band['a']}, {band['right']}]")
    return max(band["b"] - (x - band["d"]) ** 2, 0.0) ** 1.5


def psi_props(n):
    """
    Return the maximum of ``psi_n`` and the extreme slopes of its graph.

    Returns
    -------
    pd.Series
        ``max`` and ``argmax``; ``x_minus`` and ``x_plus`` where the slope is
        extreme, with the slopes ``slope_minus`` and ``slope_plus`` there.
    """
    band = psi_band(n)
    b, d = band["b"], band["d"]
    offset = math.sqrt(b / 2)

    def slope(x):
        return -3 * (x - d) * math.sqrt(b - (x - d) ** 2)

    return pd.Series(
        {
            "max": psi(n, d),
            "argmax": d,
            "x_minus": d - offset,
            "x_plus": d + offset,
            "slope_minus": slope(d - offset),
            "slope_plus": slope(d + offset),
        },
        name=f"psi{n}",
    )


def _band_piecewise(value, bands=BANDS):
    """Join per-band texts into one piecewise expression on ``x``."""
    items = [f"x <= {2.0**-bands!r}: 0"]
    for n in range(bands, 0, -1):
        band = psi_band(n)
        items.append(f"x <= {band['right']!r}: {value(band['b'], band['d'])}")
    items.append("x > 1.0: 0")
    return f"piecewise({', '.join(items)})"


def _cube_root_field(b, d):
    s = f"sqrt(max({b!r} - (x - {d!r})^2, 0))"
    return f"-3*(x - {d!r})*max(-{s}, min({s}, sign(y)*abs(y)^(1/3)))"


def psi_text(bands=BANDS):
    """Return the expression text of ``psi`` on ``[0, 1]``."""
    return _band_piecewise(lambda b, d: f"max({b!r} - (x - {d!r})^2, 0)^1.5", bands)


def _counterexample1():
    field = _band_piecewise(_cube_root_field)
    region = Region(["x >= 0"], walls=[Wall("ordinate", 0.0)], bbox=(0.0, 1.0, -0.25, 0.25))
    problem = ProblemSpec("counterexample1", region, field, initial_point=(0.0, 0.0))
    band = psi_band(2)
    c = band["b"] / 2
    lens = (band["d"] - math.sqrt(c), band["d"] + math.sqrt(c))
    families = {
        "trivial": [ClosedForm("zero", "0", (0.0, 1.0))],
        "psi": [
            ClosedForm(f"{sign}(psi + {shift})", f"{sign}({psi_text()} + {shift})", (0.0, 1.0))
            for sign in ("", "-")
            for shift in (0.0, 0.01)
        ],
        "lens": [
            ClosedForm(f"{sign}lens J2", f"{sign}max({c!r} - (x - {band['d']!r})^2, 0)^1.5", lens)
            for sign in ("", "-")
        ],
    }
    return CorpusEntry(
        "counterexample1",
        problem,
        families,
        tags={(0.0, 0.0): "N"},
        verdicts={(0.0, 0.0): "non-uniqueness"},
        constants={"bands": BANDS, "tail_bound": 2.0 ** (-3 * (BANDS + 1))},
        notes=(
            f"Field and psi are cut off at x <= 2^-{BANDS}; both are below "
            f"2^-{3 * (BANDS + 1)} there."
        ),
    )


PARABOLA_FIELD = "sqrt(y) - 2*sqrt(x^2 - y) + x"


def _parabola_region():
    return Region(
        ["x >= 0", "y >= 0", "y <= x^2"],
        [Curve("parabola", "upper", "x^2", 0.0), Curve("axis", "lower", "0", 0.0)],
        bbox=(0.0, 2.0, 0.0, 4.0),
    )


def _counterexample2():
    problem = ProblemSpec(
        "counterexample2", _parabola_region(), PARABOLA_FIELD, initial_point=(0.0, 0.0)
    )
    return CorpusEntry(
        "counterexample2",
        problem,
        {"boundary": [ClosedForm("parabola", "x^2", (0.0, 2.0))]},
        tags={(0.0, 0.0): "B1[=,=]"},
        verdicts={(0.0, 0.0): "formal-only"},
        envelopes={(0.0, 0.0): "lower-not-attained"},
        constants={"theta": theta()},
        notes="Integral U = x*exp(eta) is constant along solutions; U(c, 0) = c.",
    )


PARABOLA_FIELD_EXTENDED = (
    "piecewise(y > x^2: sqrt(y) + x, y >= 0: sqrt(y) - 2*sqrt(x^2 - y) + x, "
    "y >= -x^2: sqrt(x^2 + y) - 2*x, y < -x^2: -2*x)"
)


def example2_member(c):
    """Return the solution ``V = c`` of the extended problem in the lower half-plane."""
    start = c if c > 0 else -c
    return ClosedForm(
        f"V = {c}", f"-(3*x^2 - 2*({c!r})*x - ({c!r})^2)/4", (float(start), 2.0), True
    )


def _example2():
    extension = ProblemSpec(
        "example2-extension",
        Region(["x >= 0"], walls=[Wall("ordinate", 0.0)], bbox=(0.0, 2.0, -4.0, 4.0)),
        PARABOLA_FIELD_EXTENDED,
        initial_point=(0.0, 0.0),
    )
    problem = ProblemSpec(
        "example2",
        _parabola_region(),
        PARABOLA_FIELD,
        extension=extension,
        initial_point=(0.0, 0.0),
    )
    families = {
        "boundary": [
            ClosedForm("parabola", "x^2", (0.0, 2.0)),
            ClosedForm("lower parabola", "-x^2", (0.0, 2.0), True),
        ],
        "mixed": [ClosedForm("V = 0", "-3*x^2/4", (0.0, 2.0), True)],
        "V": [example2_member(c) for c in (-1.0, -0.5, 0.5, 1.0)],
    }
    return CorpusEntry(
        "example2",
        problem,
        families,
        tags={(0.0, 0.0): "B1[=,=]"},
        verdicts={(0.0, 0.0): "hidden-non-uniqueness"},
        envelopes={(0.0, 0.0): "lower-not-attained"},
        notes=(
            "Cross-references between the two displayed equations are swapped in "
            "the source prose; the displayed formulas are used. The extension is "
            "continued by sqrt(y) + x above y = x^2 and by -2x below y = -x^2."
        ),
    )


def example1_branch(s):
    """Return the solution leaving the abscissa axis at ``(s, 0)``."""
    return ClosedForm(f"branch at {s}", f"(x^1.5 - {s!r}^1.5)^2", (float(s), 2.0))


def _example1():
    region = Region(
        ["x >= 0", "y >= 0"],
        [Curve("axis", "lower", "0", 0.0)],
        [Wall("ordinate", 0.0, 0.0)],
        bbox=(0.0, 2.0, 0.0, 2.0),
    )
    problem = ProblemSpec("example1", region, "3*sqrt(x)*sqrt(y)", initial_point=(0.0, 0.0))
    families = {
        "boundary": [ClosedForm("axis", "0", (0.0, 2.0))],
        "branch": [example1_branch(s) for s in (0.0, 0.5, 1.0)],
        "from ordinate": [
            ClosedForm(f"through (0, {y0})", f"(x^1.5 + {math.sqrt(y0)!r})^2", (0.0, 2.0))
            for y0 in (0.25, 1.0)
        ],
        "piecewise": [
            ClosedForm(
                f"C = {c}",
                f"piecewise(x <= {c ** (2 / 3)!r}: 0, x > {c ** (2 / 3)!r}: (x^1.5 - {c!r})^2)",
                (0.0, 2.0),
            )
            for c in (0.5, 1.0)
        ],
    }
    return CorpusEntry(
        "example1",
        problem,
        families,
        tags={(0.0, 0.0): "O1[=]", (1.0, 0.0): "O1[=]"},
        verdicts={
            (0.0, 0.0): "non-uniqueness",
            (1.0, 0.0): "non-uniqueness",
            (1.0, 1.0): "uniqueness",
        },
        envelopes={(0.0, 0.0): "non-unique-branching"},
    )


SPLIT_FIELD = (
    "piecewise(x <= 0: 2*abs(y)^1.5, "
    "x > 0: 2*max(abs(y) - x^2, 0)^1.5 + 2*x*sign(y))"
)


def _example3():
    region = Region(
        ["x <= 0 or abs(y) >= x^2"],
        [Curve("upper", "lower", "x^2", 0.0), Curve("lower", "upper", "-x^2", 0.0)],
        bbox=(-2.0, 2.0, -4.0, 4.0),
    )
    problem = ProblemSpec("example3", region, SPLIT_FIELD, initial_point=(0.0, 0.0))
    families = {
        "boundary": [
            ClosedForm("upper", "x^2", (0.0, 2.0)),
            ClosedForm("lower", "-x^2", (0.0, 2.0)),
            ClosedForm("zero", "0", (-2.0, 0.0)),
        ],
        "upper": [
            ClosedForm(
                "C = 1",
                "piecewise(x <= 0: (1 - x)^-2, x > 0: (1 - x)^-2 + x^2)",
                (-1.0, 0.5),
            ),
            ClosedForm("C = 0", "(0 - x)^-2", (-2.0, -0.5)),
            ClosedForm("C = -0.5", "(-0.5 - x)^-2", (-2.0, -1.0)),
        ],
        "lower": [
            ClosedForm("C = 0", "-(x - 0)^-2 - x^2", (0.5, 2.0)),
            ClosedForm("C = 0.5", "-(x - 0.5)^-2 - x^2", (1.0, 2.0)),
            ClosedForm(
                "C = -1", "piecewise(x <= 0: -(x + 1)^-2, x > 0: -(x + 1)^-2 - x^2)", (-0.5, 2.0)
            ),
        ],
    }
    return CorpusEntry(
        "example3",
        problem,
        families,
        tags={(1.0, 1.0): "O1[=]"},
        verdicts={(0.0, 0.0): "non-uniqueness", (1.0, 1.0): "uniqueness"},
        envelopes={(1.0, 1.0): "locally-unique"},
        notes=(
            "The x*sign(y) term is doubled so that y = +-x^2 and the listed "
            "general solutions solve the equation."
        ),
    )


_BUILDERS = {
    "example1": _example1,
    "counterexample1": _counterexample1,
    "counterexample2": _counterexample2,
    "example2": _example2,
    "example3": _example3,
}


def ids():
    """Return the identifiers of the corpus problems."""
    return list(_BUILDERS)


@functools.cache
def get(id):
    """
    Return a corpus entry.

    Raises
    ------
    ValueError
        If ``id`` is not a corpus identifier.

    Examples
    --------
    >>> get("example1").problem.field.text
    '3*sqrt(x)*sqrt(y)'
    """
    if id not in _BUILDERS:
        raise ValueError(f"Unknown corpus problem {id!r}; choose from {ids()}")
    logger.debug("Building corpus problem %s", id)
    return _BUILDERS[id]()


def export(id, path):
    """Write the problem of a corpus entry as a JSON problem file."""
    return get(id).problem.dump(path)
