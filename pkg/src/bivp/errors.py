class BivpError(Exception):
    """Base class for errors raised by bivp."""


class ExpressionSyntaxError(BivpError, ValueError):
    """
    Expression text cannot be parsed.

    Parameters
    ----------
    message : str
        Description of the problem.
    text : str
        The offending expression text.
    position : int, optional
        0-based character offset of the problem in ``text``.
    """

    def __init__(self, message, text, position=None):
        self.text = text
        self.position = position
        if position is not None:
            message = f"{message} at position {position}: {text!r}"
        super().__init__(message)


class DomainError(BivpError, ValueError):
    """
    Expression evaluated outside its admissible set.

    Parameters
    ----------
    message : str
        Description of the problem.
    point : tuple of float, optional
        The (x, y) point at which evaluation failed.
    """

    def __init__(self, message, point=None):
        self.point = point
        if point is not None:
            message = f"{message} at (x, y) = ({point[0]!r}, {point[1]!r})"
        super().__init__(message)


class RegionError(BivpError, ValueError):
    """Point, rectangle or boundary curve incompatible with the region."""


class GeometryError(BivpError, RuntimeError):
    """Analysis requested on a Peano geometry that could not be built."""


class ContinuityError(BivpError, RuntimeError):
    """Continuity modulus could not be verified above the search floor."""
