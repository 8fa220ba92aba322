"""Scalar expressions in the variables ``x`` and ``y``.

Expressions use infix syntax with ``^`` or ``**`` for powers, the functions
``sqrt, abs, sign, pow, exp, ln, min, max`` and a piecewise form::

    piecewise(y >= 0: sqrt(y), y < 0: 0)

Guards are comparisons (possibly chained, e.g. ``0 <= y <= x^2``) joined with
``and``/``or``; the first guard that holds selects the branch.
"""

import ast
import dataclasses
import functools
import math
import operator

import numpy as np

from .errors import DomainError, ExpressionSyntaxError
from .helpers import SQRT_CLAMP

VARIABLES = ("x", "y")
ARITY = {
    "sqrt": 1,
    "abs": 1,
    "sign": 1,
    "exp": 1,
    "ln": 1,
    "pow": 2,
    "min": None,
    "max": None,
}


@dataclasses.dataclass(frozen=True)
class Const:
    value: float


@dataclasses.dataclass(frozen=True)
class Var:
    name: str


@dataclasses.dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclasses.dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclasses.dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclasses.dataclass(frozen=True)
class Compare:
    ops: tuple
    operands: tuple


@dataclasses.dataclass(frozen=True)
class Logical:
    op: str
    operands: tuple


@dataclasses.dataclass(frozen=True)
class Piecewise:
    branches: tuple  # ((guard, value), ...)


GUARDS = (Compare, Logical)

_BINARY_OPS = {
    ast.Add: "+",
    ast.Sub: "-",
    ast.Mult: "*",
    ast.Div: "/",
    ast.Pow: "**",
}
_COMPARE_OPS = {
    ast.Lt: "<",
    ast.LtE: "<=",
    ast.Gt: ">",
    ast.GtE: ">=",
    ast.Eq: "==",
}
COMPARATORS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
}


def _preprocess(text):
    """Rewrite expression text into Python syntax, keeping a map to the original."""
    out, origin, stack = [], [], []
    i, n = 0, len(text)

    def emit(chars, position):
        out.extend(chars)
        origin.extend([position] * len(chars))

    while i < n:
        ch = text[i]
        if ch == "^":
            emit("**", i)
        elif (
            text.startswith("piecewise", i)
            and (i == 0 or not (text[i - 1].isalnum() or text[i - 1] == "_"))
            and not (i + 9 < n and (text[i + 9].isalnum() or text[i + 9] == "_"))
        ):
            for k in range(9):
                emit(text[i + k], i + k)
            i += 9
            while i < n and text[i].isspace():
                emit(text[i], i)
                i += 1
            if i < n and text[i] == "(":
                emit("({", i)
                stack.append(True)
                i += 1
            continue
        elif ch == "(":
            stack.append(False)
            emit(ch, i)
        elif ch == ")":
            emit("})" if stack and stack.pop() else ")", i)
        else:
            emit(ch, i)
        i += 1
    return "".join(out), origin


class _Builder:
    """Convert a Python AST into expression nodes."""

    def __init__(self, text, origin):
        self.text = text
        self.origin = origin

    def position(self, node):
        offset = getattr(node, "col_offset", None)
        if offset is None or not self.origin:
            return None
        return self.origin[min(offset, len(self.origin) - 1)]

    def fail(self, message, node):
        raise ExpressionSyntaxError(message, self.text, self.position(node))

    def value(self, node):
        built = self.build(node)
        if isinstance(built, GUARDS):
            self.fail("Comparison used as a value", node)
        return built

    def guard(self, node):
        built = self.build(node)
        if not isinstance(built, GUARDS):
            self.fail("Guard must be a comparison", node)
        return built

    def build(self, node):
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, int | float):
                self.fail(f"Unsupported literal {node.value!r}", node)
            return Const(float(node.value))

        if isinstance(node, ast.Name):
            if node.id in VARIABLES:
                return Var(node.id)
            if node.id in ARITY or node.id == "piecewise":
                self.fail(f"Function {node.id!r} used without arguments", node)
            self.fail(f"Unknown identifier {node.id!r}", node)

        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.UAdd):
                return self.value(node.operand)
            if isinstance(node.op, ast.USub):
                return negate(self.value(node.operand))
            self.fail("Unsupported unary operator", node)

        if isinstance(node, ast.BinOp):
            op = _BINARY_OPS.get(type(node.op))
            if op is None:
                self.fail("Unsupported operator", node)
            return Binary(op, self.value(node.left), self.value(node.right))

        if isinstance(node, ast.Call):
            return self.call(node)

        if isinstance(node, ast.Compare):
            ops = []
            for op in node.ops:
                symbol = _COMPARE_OPS.get(type(op))
                if symbol is None:
                    self.fail("Unsupported comparison", node)
                ops.append(symbol)
            operands = [self.value(node.left)] + [
                self.value(item) for item in node.comparators
            ]
            return Compare(tuple(ops), tuple(operands))

        if isinstance(node, ast.BoolOp):
            op = "and" if isinstance(node.op, ast.And) else "or"
            return Logical(op, tuple(self.guard(item) for item in node.values))

        self.fail(f"Unsupported syntax {type(node).__name__}", node)

    def call(self, node):
        if not isinstance(node.func, ast.Name):
            self.fail("Only named functions can be called", node)
        name = node.func.id
        if node.keywords:
            self.fail(f"Keyword arguments are not supported in {name!r}", node)

        if name == "piecewise":
            if len(node.args) != 1 or not isinstance(node.args[0], ast.Dict):
                self.fail("piecewise expects 'guard: value' pairs", node)
            pairs = node.args[0]
            if not pairs.keys or any(key is None for key in pairs.keys):
                self.fail("piecewise expects 'guard: value' pairs", node)
            return Piecewise(
                tuple(
                    (self.guard(key), self.value(value))
                    for key, value in zip(pairs.keys, pairs.values, strict=True)
                )
            )

        if name not in ARITY:
            self.fail(f"Unknown function {name!r}", node.func)
        arity = ARITY[name]
        n_args = len(node.args)
        if (arity is None and n_args < 2) or (arity is not None and n_args != arity):
            expected = "at least 2" if arity is None else str(arity)
            self.fail(f"{name!r} expects {expected} arguments, got {n_args}", node)
        return Call(name, tuple(self.value(arg) for arg in node.args))


def negate(node):
    """Return the negation of a node, folding numeric literals."""
    if isinstance(node, Const):
        return Const(-node.value)
    return Unary("-", node)


def to_text(node):
    """
    Print a node as fully parenthesised expression text.

    The output reparses to an equal tree.

    Parameters
    ----------
    node : Const, Var, Unary, Binary, Call, Compare, Logical or Piecewise
        Node to print.

    Returns
    -------
    str
        Expression text.
    """
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if text.startswith("-") else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(arg) for arg in node.args)})"
    if isinstance(node, Compare):
        parts = [to_text(node.operands[0])]
        for op, operand in zip(node.ops, node.operands[1:], strict=True):
            parts.extend([op, to_text(operand)])
        return f"({' '.join(parts)})"
    if isinstance(node, Logical):
        return "(" + f" {node.op} ".join(to_text(item) for item in node.operands) + ")"
    if isinstance(node, Piecewise):
        branches = ", ".join(f"{to_text(g)}: {to_text(v)}" for g, v in node.branches)
        return f"piecewise({branches})"
    raise TypeError(f"Unknown expression node: {node!r}")


def _substitute(node, mapping):
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Const):
        return node
    if isinstance(node, Unary):
        return negate(_substitute(node.operand, mapping))
    if isinstance(node, Binary):
        return Binary(
            node.op, _substitute(node.left, mapping), _substitute(node.right, mapping)
        )
    if isinstance(node, Call):
        return Call(node.name, tuple(_substitute(arg, mapping) for arg in node.args))
    if isinstance(node, Compare):
        return Compare(
            node.ops, tuple(_substitute(item, mapping) for item in node.operands)
        )
    if isinstance(node, Logical):
        return Logical(
            node.op, tuple(_substitute(item, mapping) for item in node.operands)
        )
    return Piecewise(
        tuple(
            (_substitute(g, mapping), _substitute(v, mapping)) for g, v in node.branches
        )
    )


def _variables(node):
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Const):
        return set()
    if isinstance(node, Unary):
        return _variables(node.operand)
    if isinstance(node, Binary):
        return _variables(node.left) | _variables(node.right)
    if isinstance(node, Call):
        return set().union(*(_variables(arg) for arg in node.args))
    if isinstance(node, Compare | Logical):
        return set().union(*(_variables(item) for item in node.operands))
    return set().union(*(_variables(g) | _variables(v) for g, v in node.branches))


# Scalar evaluation


def _sqrt(a):
    if a < 0:
        if a >= -SQRT_CLAMP:
            return 0.0
        raise DomainError(f"sqrt of negative argument {a!r}")
    return math.sqrt(a)


def _ln(a):
    if a <= 0:
        raise DomainError(f"ln of non-positive argument {a!r}")
    return math.log(a)


def _exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        raise DomainError(f"exp overflow for argument {a!r}") from None


def _pow(a, b):
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError):
        raise DomainError(f"invalid power {a!r} ** {b!r}") from None


def _div(a, b):
    if b == 0:
        raise DomainError("division by zero")
    return a / b


def _sign(a):
    return float((a > 0) - (a < 0))


_SCALAR_BINARY = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": _div,
    "**": _pow,
}
_SCALAR_CALLS = {
    "sqrt": _sqrt,
    "abs": abs,
    "sign": _sign,
    "exp": _exp,
    "ln": _ln,
    "pow": _pow,
    "min": min,
    "max": max,
}


def _compile_scalar(node):
    if isinstance(node, Const):
        value = node.value
        return lambda x, y: value
    if isinstance(node, Var):
        return (lambda x, y: x) if node.name == "x" else (lambda x, y: y)
    if isinstance(node, Unary):
        f = _compile_scalar(node.operand)
        return lambda x, y: -f(x, y)
    if isinstance(node, Binary):
        op = _SCALAR_BINARY[node.op]
        left, right = _compile_scalar(node.left), _compile_scalar(node.right)
        return lambda x, y: op(left(x, y), right(x, y))
    if isinstance(node, Call):
        fn = _SCALAR_CALLS[node.name]
        args = [_compile_scalar(arg) for arg in node.args]
        if len(args) == 1:
            (arg,) = args
            return lambda x, y: fn(arg(x, y))
        return lambda x, y: fn(*[arg(x, y) for arg in args])
    if isinstance(node, Compare):
        ops = [COMPARATORS[op] for op in node.ops]
        operands = [_compile_scalar(item) for item in node.operands]

        def compare(x, y):
            left = operands[0](x, y)
            for op, item in zip(ops, operands[1:], strict=True):
                right = item(x, y)
                if not op(left, right):
                    return False
                left = right
            return True

        return compare
    if isinstance(node, Logical):
        items = [_compile_scalar(item) for item in node.operands]
        if node.op == "and":
            return lambda x, y: all(item(x, y) for item in items)
        return lambda x, y: any(item(x, y) for item in items)

    branches = [(_compile_scalar(g), _compile_scalar(v)) for g, v in node.branches]

    def piecewise(x, y):
        for guard, value in branches:
            if guard(x, y):
                return value(x, y)
        raise DomainError("no piecewise branch applies")

    return piecewise


# Array evaluation


def _first(mask, x, y):
    i = int(np.flatnonzero(mask)[0])
    return float(x[i]), float(y[i])


def _compile_array(node):
    if isinstance(node, Const):
        value = node.value
        return lambda x, y: np.full(x.shape, value)
    if isinstance(node, Var):
        return (lambda x, y: x) if node.name == "x" else (lambda x, y: y)
    if isinstance(node, Unary):
        f = _compile_array(node.operand)
        return lambda x, y: -f(x, y)
    if isinstance(node, Binary):
        left, right = _compile_array(node.left), _compile_array(node.right)
        if node.op == "/":

            def divide(x, y):
                a, b = left(x, y), right(x, y)
                zero = b == 0
                if zero.any():
                    raise DomainError("division by zero", _first(zero, x, y))
                return a / b

            return divide
        op = {"+": np.add, "-": np.subtract, "*": np.multiply, "**": np.power}[
            node.op
        ]
        return lambda x, y: op(left(x, y), right(x, y))
    if isinstance(node, Call):
        return _compile_array_call(node)
    if isinstance(node, Compare):
        ops = [COMPARATORS[op] for op in node.ops]
        operands = [_compile_array(item) for item in node.operands]

        def compare(x, y):
            result = np.ones(x.shape, dtype=bool)
            left = operands[0](x, y)
            for op, item in zip(ops, operands[1:], strict=True):
                right = item(x, y)
                result &= op(left, right)
                left = right
            return result

        return compare
    if isinstance(node, Logical):
        items = [_compile_array(item) for item in node.operands]
        reduce = np.logical_and if node.op == "and" else np.logical_or
        return lambda x, y: functools.reduce(reduce, [item(x, y) for item in items])

    branches = [(_compile_array(g), _compile_array(v)) for g, v in node.branches]

    def piecewise(x, y):
        out = np.empty(x.shape)
        remaining = np.arange(x.size)
        for guard, value in branches:
            if remaining.size == 0:
                break
            hit = guard(x[remaining], y[remaining])
            selected = remaining[hit]
            if selected.size:
                out[selected] = value(x[selected], y[selected])
            remaining = remaining[~hit]
        if remaining.size:
            i = remaining[0]
            raise DomainError(
                "no piecewise branch applies", (float(x[i]), float(y[i]))
            )
        return out

    return piecewise


def _compile_array_call(node):
    args = [_compile_array(arg) for arg in node.args]
    name = node.name

    if name == "sqrt":

        def sqrt(x, y):
            a = args[0](x, y)
            bad = a < -SQRT_CLAMP
            if bad.any():
                raise DomainError("sqrt of negative argument", _first(bad, x, y))
            return np.sqrt(np.maximum(a, 0.0))

        return sqrt
    if name == "ln":

        def ln(x, y):
            a = args[0](x, y)
            bad = a <= 0
            if bad.any():
                raise DomainError("ln of non-positive argument", _first(bad, x, y))
            return np.log(a)

        return ln
    if name in ("min", "max"):
        reduce = np.minimum if name == "min" else np.maximum
        return lambda x, y: functools.reduce(reduce, [arg(x, y) for arg in args])
    if name == "pow":
        return lambda x, y: np.power(args[0](x, y), args[1](x, y))
    fn = {"abs": np.abs, "sign": np.sign, "exp": np.exp}[name]
    return lambda x, y: fn(args[0](x, y))


def _as_node(value):
    if isinstance(value, Expr):
        return value.root
    if isinstance(value, Const | Var | Unary | Binary | Call | Piecewise):
        return value
    return Const(float(value))


class Expr:
    """
    Immutable scalar expression in ``x`` and ``y``.

    Instances are created with :func:`parse`, :func:`parse_predicate` or by
    combining existing expressions with arithmetic operators. Calling an
    expression evaluates it; scalars give a float, arrays are evaluated
    elementwise with broadcasting.

    Parameters
    ----------
    root : node
        Root node of the expression tree.
    text : str, optional
        Source text the expression was parsed from.

    Examples
    --------
    >>> f = parse("3*sqrt(x)*sqrt(y)")
    >>> f(1.0, 4.0)
    6.0
    """

    def __init__(self, root, text=None):
        self.root = root
        self.text = text if text is not None else to_text(root)

    @functools.cached_property
    def _scalar(self):
        return _compile_scalar(self.root)

    @functools.cached_property
    def _array(self):
        return _compile_array(self.root)

    @property
    def is_predicate(self):
        """Return True if the expression is a guard (comparison or logical)."""
        return isinstance(self.root, GUARDS)

    @functools.cached_property
    def variables(self):
        """Return the set of variable names the expression depends on."""
        return frozenset(_variables(self.root))

    def __call__(self, x, y=0.0):
        if np.ndim(x) == 0 and np.ndim(y) == 0:
            point = (float(x), float(y))
            try:
                value = self._scalar(x, y)
            except DomainError as exc:
                if exc.point is None:
                    raise DomainError(str(exc), point) from None
                raise
            if self.is_predicate:
                return bool(value)
            if not math.isfinite(value):
                raise DomainError("non-finite value", point)
            return float(value)

        xa, ya = np.broadcast_arrays(
            np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        )
        shape = xa.shape
        xs, ys = xa.ravel(), ya.ravel()
        with np.errstate(all="ignore"):
            out = self._array(xs, ys)
        if self.is_predicate:
            return np.asarray(out, dtype=bool).reshape(shape)
        out = np.asarray(out, dtype=float)
        bad = ~np.isfinite(out)
        if bad.any():
            raise DomainError("non-finite value", _first(bad, xs, ys))
        return out.reshape(shape)

    def substitute(self, x=None, y=None):
        """
        Replace variables by expressions or numbers.

        Parameters
        ----------
        x, y : Expr or float, optional
            Replacement for the variable; ``None`` keeps it.

        Returns
        -------
        Expr
            New expression.
        """
        mapping = {}
        if x is not None:
            mapping["x"] = _as_node(x)
        if y is not None:
            mapping["y"] = _as_node(y)
        return Expr(_substitute(self.root, mapping))

    def __str__(self):
        return to_text(self.root)

    def __repr__(self):
        return f"Expr({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expr) and self.root == other.root

    def __hash__(self):
        return hash(self.root)

    def __neg__(self):
        return Expr(negate(self.root))

    def __add__(self, other):
        return Expr(Binary("+", self.root, _as_node(other)))

    def __radd__(self, other):
        return Expr(Binary("+", _as_node(other), self.root))

    def __sub__(self, other):
        return Expr(Binary("-", self.root, _as_node(other)))

    def __rsub__(self, other):
        return Expr(Binary("-", _as_node(other), self.root))

    def __mul__(self, other):
        return Expr(Binary("*", self.root, _as_node(other)))

    def __rmul__(self, other):
        return Expr(Binary("*", _as_node(other), self.root))

    def __truediv__(self, other):
        return Expr(Binary("/", self.root, _as_node(other)))

    def __rtruediv__(self, other):
        return Expr(Binary("/", _as_node(other), self.root))

    def __pow__(self, other):
        return Expr(Binary("**", self.root, _as_node(other)))


def _parse_node(text):
    if not isinstance(text, str):
        raise TypeError(f"Expression must be a string, got {type(text).__name__}")
    if not text.strip():
        raise ExpressionSyntaxError("Empty expression", text, 0)
    source, origin = _preprocess(text)
    lead = len(source) - len(source.lstrip())
    try:
        tree = ast.parse(source.strip(), mode="eval")
    except SyntaxError as exc:
        position = None
        if exc.offset is not None and origin:
            index = min(max(exc.offset - 1 + lead, 0), len(origin) - 1)
            position = origin[index]
        raise ExpressionSyntaxError(
            f"Invalid syntax ({exc.msg})", text, position
        ) from None
    builder = _Builder(text, origin[lead:])
    return builder.build(tree.body), builder


def parse(text):
    """
    Parse expression text.

    Parameters
    ----------
    text : str
        Expression over ``x``, ``y``, numeric literals, the supported functions
        and the ``piecewise(guard: value, ...)`` form.

    Returns
    -------
    Expr
        Parsed expression.

    Raises
    ------
    ExpressionSyntaxError
        If the text is malformed, names an unknown identifier or calls a function
        with the wrong number of arguments.

    Examples
    --------
    >>> parse("piecewise(y>=0: sqrt(y), y<0: 0)")(0.0, -1.0)
    0.0
    >>> str(parse("x^2 - 1"))
    '((x ** 2.0) - 1.0)'
    """
    root, builder = _parse_node(text)
    if isinstance(root, GUARDS):
        builder.fail("Expected a value, got a comparison", None)
    return Expr(root, text)


def parse_predicate(text):
    """
    Parse a guard such as ``"y <= x^2"`` or ``"x <= 0 or abs(y) >= x^2"``.

    Parameters
    ----------
    text : str
        Comparison text, possibly chained or joined with ``and``/``or``.

    Returns
    -------
    Expr
        Expression whose evaluation returns booleans.

    Raises
    ------
    ExpressionSyntaxError
        If the text is not a comparison.
    """
    root, builder = _parse_node(text)
    if not isinstance(root, GUARDS):
        builder.fail("Expected a comparison", None)
    return Expr(root, text)


def evaluate(e, x, y=0.0):
    """
    Evaluate an expression at a point.

    Parameters
    ----------
    e : Expr or str
        Expression or expression text.
    x, y : float or array_like
        Coordinates.

    Returns
    -------
    float or np.ndarray
        Value of the expression.

    Raises
    ------
    DomainError
        If the point is outside the expression's admissible set.
    """
    if isinstance(e, str):
        e = parse(e)
    return e(x, y)


def evaluate_or_nan(e, x, y=0.0):
    """
    Evaluate an expression on arrays, with NaN where evaluation fails.

    Parameters
    ----------
    e : Expr
        Expression.
    x, y : array_like
        Coordinates.

    Returns
    -------
    np.ndarray
        Values; points outside the admissible set hold NaN.
    """
    xa, ya = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    try:
        return np.asarray(e(xa, ya), dtype=float)
    except DomainError:
        out = np.full(xa.shape, np.nan)
        for index in np.ndindex(xa.shape):
            try:
                out[index] = e(xa[index], ya[index])
            except DomainError:
                pass
        return out
