import logging
import math

logger = logging.getLogger(__name__)

MAX_DEPTH = 50


def _simpson(f, a, fa, b, fb):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, abs(b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _adaptive(f, a, fa, b, fb, tol, whole, m, fm, depth):
    lm, flm, left = _simpson(f, a, fa, m, fm)
    rm, frm, right = _simpson(f, m, fm, b, fb)
    delta = left + right - whole
    if depth >= MAX_DEPTH or abs(delta) <= 15.0 * tol:
        if depth >= MAX_DEPTH:
            logger.warning("Simpson recursion depth reached on [%g, %g]", a, b)
        return left + right + delta / 15.0
    return _adaptive(f, a, fa, m, fm, tol / 2.0, left, lm, flm, depth + 1) + _adaptive(
        f, m, fm, b, fb, tol / 2.0, right, rm, frm, depth + 1
    )


def adaptive_simpson(f, a, b, tol=1e-10):
    """
    Integrate a scalar function with adaptive Simpson's rule.

    The interval is bisected until the difference between the Simpson estimate on a
    panel and on its two halves is below ``15 * tol``; the Richardson correction
    ``delta / 15`` is added to each accepted panel.

    Parameters
    ----------
    f : callable
        Integrand, called with a single float.
    a, b : float
        Integration limits. ``b < a`` gives the negated integral.
    tol : float
        Absolute error target.

    Returns
    -------
    float
        Approximation of the integral.

    Examples
    --------
    >>> round(adaptive_simpson(lambda v: v**3, 0.0, 2.0), 12)
    4.0
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol)
    fa, fb = f(a), f(b)
    m, fm, whole = _simpson(f, a, fa, b, fb)
    result = _adaptive(f, a, fa, b, fb, tol, whole, m, fm, 0)
    if not math.isfinite(result):
        raise FloatingPointError(f"Non-finite integral on [{a}, {b}]")
    return result
