import numpy as np
import pandas as pd

# Membership band: a point is on a curve when |y - b(x)| <= BOUNDARY_TOL * (1 + |y|)
BOUNDARY_TOL = 1e-9
# sqrt arguments in [-SQRT_CLAMP, 0) are treated as 0
SQRT_CLAMP = 1e-12
FD_STEP = 1e-6
# |b'(0)| below this counts as a zero slope
SLOPE_TOL = 1e-5
# Tolerance of the inward-field and tangency tests, relative to 1 + |b'|
TANGENCY_TOL = 1e-6

CONVEXITY_SAMPLES = 64
PEANO_GRID = 129
TRIANGLE_SAMPLES = 256
CASE_SLICES = 64
CASE_SAMPLES = 64
CONDITION4_SAMPLES = 256

DELTA_FLOOR = 1e-6
MODULUS_GRID = 65
DEFAULT_TAU = 1.0

EULER_STEP = 1e-3
BIAS0 = 0.1
FAMILY_SIZE = 6
GAP_TOL = 1e-3
# Residual allowed for an envelope to count as attained, relative to 1 + max|f0|
ATTAIN_TOL = 1e-2
BRANCH_TOL = 1e-9
DYADIC_DEPTH = 8
VERIFY_TOL = 1e-6
VERIFY_SAMPLES = 100

WINDOWS = (0.5, 0.25, 0.1, 0.05)
LIPSCHITZ_SLICES = 33
LIPSCHITZ_SAMPLES = 65
LIPSCHITZ_LEVELS = 8
PAIR_FLOOR = 1e-8
# Agreement of d f / d y at steps h and h / 4, relative to 1 + |d f / d y|
DFDY_RTOL = 1e-2

SEED = 0

# Keys of the per-point summary used by atlas rows and reports
SUMMARY_KEYS = [
    # Point
    "x",
    "y",
    # Verdict
    "class",
    "route",
    # Strong route
    "lipschitz_window",
    "lipschitz_estimate",
    "lipschitz_bounded",
    # Weak route
    "dfdy_continuous",
    "dfdy_bound",
    "y_convex",
    # Envelope route
    "case",
    "h_plus",
    "gap_max",
    "envelope_verdict",
    "branching",
]


def summary_nan(name):
    """
    Create a Series with NaN values for all summary keys.

    Parameters
    ----------
    name : str
        Name of the series, usually the point label.

    Returns
    -------
    pd.Series
        Series with summary keys as index and NaN values.
    """
    return pd.Series({key: np.nan for key in SUMMARY_KEYS}, name=name)


def band(value, tol=BOUNDARY_TOL):
    """Return the membership band at ``value``."""
    return tol * (1.0 + np.abs(value))


def box(center, half_width, half_height, n):
    """
    Sample a closed axis-aligned box on a regular grid.

    Parameters
    ----------
    center : tuple of float
        Centre (x, y) of the box.
    half_width, half_height : float
        Half side lengths.
    n : int
        Number of samples along each side.

    Returns
    -------
    tuple of np.ndarray
        Flattened x and y coordinates of the ``n * n`` grid points.
    """
    xs = np.linspace(center[0] - half_width, center[0] + half_width, n)
    ys = np.linspace(center[1] - half_height, center[1] + half_height, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return gx.ravel(), gy.ravel()


def point_label(x, y):
    """Return a stable text label for a point."""
    return f"({x:.6g}, {y:.6g})"
