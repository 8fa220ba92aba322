import concurrent.futures
import logging
import math

import numpy as np
import pandas as pd

from . import expr as ex
from .domain import Direction
from .envelope import (
    analyse,
    envelope_evidence,
    global_traces,
    probe_extension,
    witness_evidence,
)
from .errors import BivpError, RegionError
from .helpers import (
    BIAS0,
    DFDY_RTOL,
    EULER_STEP,
    FAMILY_SIZE,
    FD_STEP,
    LIPSCHITZ_LEVELS,
    LIPSCHITZ_SAMPLES,
    LIPSCHITZ_SLICES,
    PAIR_FLOOR,
    SEED,
    SUMMARY_KEYS,
    WINDOWS,
    point_label,
    summary_nan,
)
from .verdicts import Evidence, UniquenessVerdict, VerdictClass, frame_from_verdicts

logger = logging.getLogger(__name__)

RANDOM_SLICES = 8
RANDOM_SAMPLES = 16
DFDY_GRID = 17


def _slices(point, c, rng, n, levels):
    x0 = point[0]
    dyadic = c * 2.0 ** -np.arange(1, levels + 1)
    return np.unique(
        np.concatenate(
            [
                np.linspace(x0 - c, x0 + c, n),
                x0 + dyadic,
                x0 - dyadic,
                rng.uniform(x0 - c, x0 + c, RANDOM_SLICES),
            ]
        )
    )


def _column(p, x, point, c, rng, n, levels):
    """Admissible ``y`` samples of the window on the slice at ``x``."""
    y0 = point[1]
    dyadic = c * 2.0 ** -np.arange(1, 2 * levels + 1)
    ys = [
        np.linspace(y0 - c, y0 + c, n),
        y0 + dyadic,
        y0 - dyadic,
        [y0 - c, y0, y0 + c],
        rng.uniform(y0 - c, y0 + c, RANDOM_SAMPLES),
    ]
    for curve in p.region.curves:
        if bool(curve.covers(x)):
            value = float(curve.b(x))
            if abs(value - y0) <= c:
                ys.append([value])
    ys = np.unique(np.concatenate([np.asarray(item, dtype=float) for item in ys]))
    return ys[p.region.codes(np.full(ys.shape, x), ys) > 0]


def lipschitz_scan(
    p,
    point,
    c,
    seed=SEED,
    slices=LIPSCHITZ_SLICES,
    samples=LIPSCHITZ_SAMPLES,
    levels=LIPSCHITZ_LEVELS,
    floor=PAIR_FLOOR,
):
    """
    Estimate a Lipschitz constant in ``y`` on the closed window around a point.

    ``x``-slices are uniform, dyadic towards ``x0`` and random; on each slice the
    admissible ``y`` values are uniform, dyadic towards ``y0``, random and the
    boundary curve values. The ratio ``|f(x, y1) - f(x, y2)| / |y1 - y2|`` is
    maximized over pairs separated by at least ``c * 2**-levels`` (coarse) and
    at least ``max(c * 2**(-2 * levels), floor)`` (fine).

    Parameters
    ----------
    p : ProblemSpec
        Problem.
    point : tuple of float
        Centre of the window.
    c : float
        Half side of the window.
    seed : int
        Seed of the random slices.

    Returns
    -------
    pd.Series
        ``window``, ``estimate`` (fine), ``coarse``, ``pairs`` and ``bounded``,
        True when the estimate less than doubles as the separation floor drops.

    Raises
    ------
    RegionError
        If the window holds no admissible pair.
    """
    if not c > 0:
        raise ValueError(f"Window must be positive, got {c}")
    rng = np.random.default_rng(seed)
    coarse_floor = c * 2.0**-levels
    fine_floor = max(c * 2.0 ** (-2 * levels), floor)
    coarse, fine, pairs = -math.inf, -math.inf, 0
    for x in _slices(point, c, rng, slices, levels):
        ys = _column(p, x, point, c, rng, samples, levels)
        if ys.size < 2:
            continue
        values = ex.evaluate_or_nan(p.field, np.full(ys.shape, x), ys)
        keep = np.isfinite(values)
        ys, values = ys[keep], values[keep]
        if ys.size < 2:
            continue
        dy = np.abs(np.subtract.outer(ys, ys))
        df = np.abs(np.subtract.outer(values, values))
        upper = np.triu(np.ones(dy.shape, dtype=bool), k=1)
        fine_mask = upper & (dy >= fine_floor)
        if not fine_mask.any():
            continue
        pairs += int(fine_mask.sum())
        ratios = df / np.where(dy > 0, dy, 1.0)
        fine = max(fine, float(ratios[fine_mask].max()))
        coarse_mask = upper & (dy >= coarse_floor)
        if coarse_mask.any():
            coarse = max(coarse, float(ratios[coarse_mask].max()))

    if pairs == 0:
        raise RegionError(f"No admissible pair in the window {c} around {tuple(point)}")
    coarse = coarse if math.isfinite(coarse) else math.nan
    bounded = bool(fine < 2 * coarse + floor) if math.isfinite(coarse) else False
    logger.debug(
        "Lipschitz scan at %s, c = %g: coarse %g, fine %g", point, c, coarse, fine
    )
    return pd.Series(
        {"window": c, "estimate": fine, "coarse": coarse, "pairs": pairs, "bounded": bounded},
        name=point_label(*point),
    )


def _dfdy(p, x, y, h):
    """Finite-difference derivative in ``y``, central where possible, else one-sided."""
    up = p.region.codes(x, y + h) > 0
    down = p.region.codes(x, y - h) > 0
    f0 = ex.evaluate_or_nan(p.field, x, y)
    fu = ex.evaluate_or_nan(p.field, x, np.where(up, y + h, y))
    fd = ex.evaluate_or_nan(p.field, x, np.where(down, y - h, y))
    central = (fu - fd) / (2 * h)
    forward = (fu - f0) / h
    backward = (f0 - fd) / h
    return np.where(up & down, central, np.where(up, forward, np.where(down, backward, np.nan)))


def dfdy_report(p, point, c, n=DFDY_GRID, h=FD_STEP, rtol=DFDY_RTOL):
    """
    Sample the partial derivative of the field in ``y`` on a window.

    The derivative is taken by finite differences with steps ``h`` and ``h / 4``;
    it counts as continuous when both agree at every sampled admissible point,
    within ``rtol * (1 + |df/dy|)``. A one-sided difference at a point where the
    derivative blows up changes with the step and fails the test.

    Returns
    -------
    pd.Series
        ``window``, ``continuous``, ``bound`` (sampled maximum of ``|df/dy|``)
        and ``samples``.

    Raises
    ------
    RegionError
        If the derivative is not evaluable anywhere in the window.

    Examples
    --------
    >>> import bivp as bv
    >>> region = bv.Region(["y > -2", "y < 2"], bbox=(-1, 1, -1, 1))
    >>> p = bv.ProblemSpec("square", region, "y^2")
    >>> r = dfdy_report(p, (0.0, 0.0), 1.0)
    >>> bool(r["continuous"]), round(r["bound"], 6)
    (True, 2.0)
    """
    xs, ys = np.meshgrid(
        np.linspace(point[0] - c, point[0] + c, n),
        np.linspace(point[1] - c, point[1] + c, n),
        indexing="ij",
    )
    xs, ys = xs.ravel(), ys.ravel()
    keep = p.region.codes(xs, ys) > 0
    xs, ys = xs[keep], ys[keep]
    coarse = _dfdy(p, xs, ys, h)
    fine = _dfdy(p, xs, ys, h / 4)
    valid = np.isfinite(coarse) & np.isfinite(fine)
    if not valid.any():
        raise RegionError(f"df/dy not evaluable in the window {c} around {tuple(point)}")
    agree = np.abs(coarse - fine) <= rtol * (1 + np.abs(fine))
    continuous = bool(np.all(agree[valid]) and valid.sum() == xs.size)
    return pd.Series(
        {
            "window": c,
            "continuous": continuous,
            "bound": float(np.max(np.abs(fine[valid]))),
            "samples": int(valid.sum()),
        },
        name=point_label(*point),
    )


def y_convexity(p, point, c, slices=LIPSCHITZ_SLICES, samples=LIPSCHITZ_SAMPLES):
    """
    Check that every ``x``-slice of the window meets the closure set in one interval.

    Returns
    -------
    bool
        False if some sampled slice holds two admissible runs separated by
        non-admissible samples.
    """
    ys = np.linspace(point[1] - c, point[1] + c, samples)
    for x in np.linspace(point[0] - c, point[0] + c, slices):
        admissible = p.region.codes(np.full(ys.shape, x), ys) > 0
        starts = np.flatnonzero(np.diff(admissible.astype(int)) == 1)
        runs = starts.size + int(admissible[0])
        if runs > 1:
            logger.debug("Slice x = %g splits into %d runs", x, runs)
            return False
    return True


def _windows(p, windows):
    x0, x1, y0, y1 = p.region.bbox
    scale = min(x1 - x0, y1 - y0) / 2
    return [w * scale for w in windows]


def _theorem_routes(p, point, windows, seed, evidence, summary):
    """Try the Lipschitz route, then the weak route; return the route that holds."""
    for c in windows:
        try:
            scan = lipschitz_scan(p, point, c, seed)
        except RegionError as exc:
            evidence.append(Evidence("lipschitz", c, False, detail=str(exc)))
            continue
        evidence.append(
            Evidence(
                "lipschitz", c, bool(scan["bounded"]), float(scan["estimate"]),
                f"coarse {scan['coarse']:.6g}, {scan['pairs']} pairs",
            )
        )
        summary.update(
            lipschitz_window=c,
            lipschitz_estimate=float(scan["estimate"]),
            lipschitz_bounded=bool(scan["bounded"]),
        )
        if scan["bounded"]:
            return "lipschitz"

    for c in windows:
        convex = y_convexity(p, point, c)
        evidence.append(Evidence("y-convexity", c, convex))
        summary["y_convex"] = convex
        try:
            report = dfdy_report(p, point, c)
        except RegionError as exc:
            evidence.append(Evidence("dfdy", c, False, detail=str(exc)))
            continue
        evidence.append(
            Evidence(
                "dfdy", c, bool(report["continuous"]), float(report["bound"]),
                f"{report['samples']} samples",
            )
        )
        summary.update(dfdy_continuous=bool(report["continuous"]), dfdy_bound=report["bound"])
        if report["continuous"] and convex:
            return "weak"
    return None


def membership(
    p,
    point,
    eps=EULER_STEP,
    K=FAMILY_SIZE,
    bias0=BIAS0,
    windows=WINDOWS,
    seed=SEED,
    probe=True,
):
    """
    Decide whether a point belongs to the uniqueness set of a problem.

    The strong route scans a local Lipschitz constant in ``y`` over shrinking
    windows; the weak route asks for a continuous ``df/dy`` on a ``y``-convex
    window. When both fail, the boundary analysis runs on the right side and,
    through the reflected problem, on the left side: a branching or touching
    pair of solutions on either side gives ``non-uniqueness``, locally unique
    envelopes on every analysed side give ``uniqueness`` and an unattained
    envelope gives ``formal-only``, upgraded to ``hidden-non-uniqueness`` when
    the extension probe branches.

    Parameters
    ----------
    p : ProblemSpec
        Problem.
    point : tuple of float
        Point of the closure set.
    eps, K, bias0 : float, int, float
        Envelope parameters.
    windows : tuple of float
        Window schedule as fractions of half the smaller bounding-box side.
    seed : int
        Seed of the random Lipschitz slices.
    probe : bool
        Run the extension probe when the problem has an extension.

    Returns
    -------
    UniquenessVerdict
        Class, route and evidence. Verdicts are numeric evidence at sampling
        resolution.

    Raises
    ------
    RegionError
        If the point is outside the closure set.
    """
    point = (float(point[0]), float(point[1]))
    if not p.region.classify_point(point).admissible:
        raise RegionError(f"Point {point} is outside the region of {p.name!r}")
    evidence, summary = [], {}
    route = _theorem_routes(p, point, _windows(p, windows), seed, evidence, summary)
    if route is not None:
        logger.info("%s at %s: uniqueness (%s route)", p.name, point, route)
        return UniquenessVerdict(point, VerdictClass.UNIQUENESS, route, evidence, {}, summary)

    analyses = []
    for direction in Direction:
        try:
            analysis = analyse(p, point, direction, eps=eps, K=K, bias0=bias0)
        except BivpError as exc:
            logger.warning("Boundary analysis at %s (%s) failed: %s", point, direction, exc)
            evidence.append(Evidence("envelope", 0.0, False, detail=f"{direction}: {exc}"))
            continue
        analyses.append(analysis)
        evidence.append(envelope_evidence(analysis))
        evidence.extend(witness_evidence(analysis))
        if direction is Direction.RIGHT:
            summary["case"] = str(analysis.tag)
            summary["h_plus"] = analysis.geometry.h
            if analysis.report is not None:
                summary["gap_max"] = analysis.report.gap_max
                summary["envelope_verdict"] = analysis.report.verdict.value
                if analysis.report.branching is not None:
                    summary["branching"] = analysis.report.branching.value

    witnessed = [a for a in analyses if a.non_unique]
    analysed = [a for a in analyses if a.report is not None]
    if witnessed:
        witness = witnessed[0].witnesses[0]
        traces = global_traces(
            zip((witness.first, witness.second), witness.traces, strict=True), witnessed[0]
        )
        cls, route = VerdictClass.NON_UNIQUENESS, "envelope"
        summary.setdefault("branching", witness.kind.value)
    elif analysed and all(a.locally_unique for a in analysed):
        cls, route, traces = VerdictClass.UNIQUENESS, "envelope", {}
    elif any(a.not_attained for a in analysed):
        cls, route, traces = VerdictClass.FORMAL_ONLY, "envelope", {}
        if probe and p.extension is not None:
            probed = probe_extension(p, point, eps=eps, K=K, bias0=bias0)
            evidence.extend(item for item in probed.evidence if item.kind == "extension-probe")
            if probed.cls is VerdictClass.HIDDEN_NON_UNIQUENESS:
                cls, route, traces = probed.cls, "extension-probe", probed.traces
    else:
        cls, route, traces = VerdictClass.UNKNOWN, "envelope", {}

    logger.info("%s at %s: %s (%s route)", p.name, point, cls.value, route)
    return UniquenessVerdict(point, cls, route, evidence, traces, summary)


def _atlas_row(p, point, kwargs):
    try:
        return membership(p, point, **kwargs).summary()
    except RegionError:
        row = summary_nan(point_label(*point))
        row["x"], row["y"] = point
        return row


def atlas(p, xs, ys, workers=None, **kwargs):
    """
    Classify every point of a lattice.

    Parameters
    ----------
    p : ProblemSpec
        Problem.
    xs, ys : array_like
        Lattice abscissae and ordinates.
    workers : int, optional
        Number of worker threads.
    **kwargs
        Passed to :func:`membership`.

    Returns
    -------
    pd.DataFrame
        One row per lattice point with the summary columns; points outside the
        closure set keep NaN values.
    """
    points = [(float(x), float(y)) for x in np.ravel(xs) for y in np.ravel(ys)]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda point: _atlas_row(p, point, kwargs), points))
    if not rows:
        return frame_from_verdicts([])
    frame = pd.DataFrame(rows, columns=SUMMARY_KEYS).reset_index(drop=True)
    frame[["x", "y"]] = frame[["x", "y"]].astype(np.float64)
    return frame
