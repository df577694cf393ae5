"""Complex-analytic expression DSL.

Expressions are built over the holomorphic variables ``z1 .. z{n-1}``, ``w`` and
their formal conjugates ``cz1 .. cz{n-1}``, ``cw``. Conjugate variables are
independent symbols; ``conj(...)`` rewrites its argument structurally. The
reserved variable ``Lw`` stands for a continuously tracked value of log w.
"""
import cmath
import dataclasses
import math
import re
from typing import Callable, Mapping

import numpy as np

from segretool.errors import (
    ExprError,
    ExprSyntaxError,
    SingularEvaluationError,
    UnboundVariableError,
    UnknownIdentifierError,
)

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "tan")
LOG_W = "Lw"
TWO_PI_I = 2j * math.pi

_VARIABLE_RE = re.compile(r"^(c?)z([0-9]+)$")


# ----- AST -----

@dataclasses.dataclass(frozen=True)
class Const:
    value: complex
    symbol: str | None = None


@dataclasses.dataclass(frozen=True)
class Var:
    name: str


@dataclasses.dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclasses.dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclasses.dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Const | Var | Neg | BinOp | Call

I = Const(1j, "i")
PI = Const(complex(math.pi), "pi")


def _children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, Neg):
        return (node.arg,)
    if isinstance(node, BinOp):
        return node.left, node.right
    if isinstance(node, Call):
        return (node.arg,)
    return ()


def _walk(node: Node):
    yield node
    for child in _children(node):
        yield from _walk(child)


@dataclasses.dataclass(frozen=True)
class AnalyticExpr:
    """An immutable expression tree.

    Two expressions compare equal when their trees are structurally equal.
    """

    root: Node
    _compiled: Callable = dataclasses.field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_compiled", _compile(self.root))

    @property
    def variables(self) -> frozenset[str]:
        return frozenset(node.name for node in _walk(self.root) if isinstance(node, Var))

    def __str__(self) -> str:
        return to_source(self)


def is_conjugate_variable(name: str) -> bool:
    return name == "cw" or bool(_VARIABLE_RE.match(name) and name.startswith("c"))


def conjugate_name(name: str) -> str:
    """Swap a variable name with its formal conjugate (z1 <-> cz1, w <-> cw)."""
    if name == LOG_W:
        raise ExprError("The tracked logarithm Lw has no formal conjugate")
    if name == "w":
        return "cw"
    if name == "cw":
        return "w"
    return name[1:] if name.startswith("c") else "c" + name


def _conjugate_node(node: Node) -> Node:
    if isinstance(node, Const):
        if node.symbol == "i":
            return Neg(node)
        if node.value.imag == 0:
            return node
        return Const(node.value.conjugate())
    if isinstance(node, Var):
        return Var(conjugate_name(node.name))
    if isinstance(node, Neg):
        return Neg(_conjugate_node(node.arg))
    if isinstance(node, BinOp):
        return BinOp(node.op, _conjugate_node(node.left), _conjugate_node(node.right))
    return Call(node.func, _conjugate_node(node.arg))


def conjugate(e: AnalyticExpr) -> AnalyticExpr:
    """Formal conjugate: swaps every variable with its conjugate and conjugates constants."""
    return AnalyticExpr(_conjugate_node(e.root))


# ----- tokenizer -----

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_PRIMARY_START = frozenset({"number", "identifier", "(", "-", "+"})


@dataclasses.dataclass(frozen=True)
class _Token:
    kind: str  # number, ident, op, end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    position = 0
    while True:
        while position < len(source) and source[position].isspace():
            position += 1
        if position >= len(source):
            break
        match = _TOKEN_RE.match(source, position)
        offset = len(source[:position].encode("utf-8"))
        if match is None or match.end() == position:
            raise ExprSyntaxError(f"Unexpected character {source[position]!r}", offset, _PRIMARY_START)
        kind = match.lastgroup
        text = match.group(kind)
        offset = len(source[: match.start(kind)].encode("utf-8"))
        tokens.append(_Token(kind, text, offset))
        position = match.end()
    tokens.append(_Token("end", "", len(source.encode("utf-8"))))
    return tokens


# ----- parser -----

class _Parser:
    """Recursive descent over the token list.

    expr  := term (('+'|'-') term)*
    term  := unary (('*'|'/') unary)*
    unary := ('-'|'+') unary | power
    power := base ('^' unary)?
    base  := number | 'i' | 'pi' | variable | func '(' expr ')' | 'conj' '(' expr ')' | '(' expr ')'
    """

    def __init__(self, source: str, n: int | None):
        self.tokens = _tokenize(source)
        self.index = 0
        self.n = n

    @property
    def current(self) -> _Token:
        return self.tokens[self.index]

    def _advance(self) -> _Token:
        token = self.current
        self.index += 1
        return token

    def _is_op(self, *ops: str) -> bool:
        return self.current.kind == "op" and self.current.text in ops

    def _expect(self, op: str):
        if not self._is_op(op):
            found = self.current.text or "end of input"
            raise ExprSyntaxError(f"Expected '{op}' but found '{found}'", self.current.offset, frozenset({op}))
        self._advance()

    def parse(self) -> Node:
        node = self._expr()
        if self.current.kind != "end":
            raise ExprSyntaxError(
                f"Unexpected '{self.current.text}'", self.current.offset, frozenset({"+", "-", "*", "/", "^", "end"})
            )
        return node

    def _expr(self) -> Node:
        node = self._term()
        while self._is_op("+", "-"):
            op = self._advance().text
            node = BinOp(op, node, self._term())
        return node

    def _term(self) -> Node:
        node = self._unary()
        while self._is_op("*", "/"):
            op = self._advance().text
            node = BinOp(op, node, self._unary())
        return node

    def _unary(self) -> Node:
        if self._is_op("-"):
            self._advance()
            return Neg(self._unary())
        if self._is_op("+"):
            self._advance()
            return self._unary()
        return self._power()

    def _power(self) -> Node:
        node = self._base()
        if self._is_op("^"):
            self._advance()
            node = BinOp("^", node, self._unary())
        return node

    def _base(self) -> Node:
        token = self.current
        if token.kind == "number":
            self._advance()
            return Const(complex(float(token.text)))
        if self._is_op("("):
            self._advance()
            node = self._expr()
            self._expect(")")
            return node
        if token.kind == "ident":
            self._advance()
            return self._identifier(token)
        found = token.text or "end of input"
        raise ExprSyntaxError(f"Unexpected '{found}'", token.offset, _PRIMARY_START)

    def _identifier(self, token: _Token) -> Node:
        name = token.text
        if name == "i":
            return I
        if name == "pi":
            return PI
        if name in FUNCTIONS or name == "conj":
            self._expect("(")
            arg = self._expr()
            self._expect(")")
            if name == "conj":
                try:
                    return _conjugate_node(arg)
                except ExprError as error:
                    raise ExprSyntaxError(str(error), token.offset) from error
            return Call(name, arg)
        if name in ("w", "cw", LOG_W):
            return Var(name)
        match = _VARIABLE_RE.match(name)
        if match is not None:
            index = int(match.group(2))
            upper = None if self.n is None else self.n - 1
            if index < 1 or (upper is not None and index > upper):
                raise UnknownIdentifierError(name, token.offset)
            return Var(name)
        raise UnknownIdentifierError(name, token.offset)


def parse(source: str, n: int | None = None) -> AnalyticExpr:
    """Parse DSL source into an expression.

    :param source: Expression text, e.g. ``"conj(w) * exp(2*i*z1*conj(z1))"``.
    :param n: Ambient dimension; when given, z indices above n-1 are rejected.
    :return: The parsed expression.
    """
    return AnalyticExpr(_Parser(source, n).parse())


# ----- printing -----

def _format_real(x: float) -> str:
    return f"({x!r})" if math.copysign(1.0, x) < 0 else repr(x)


def _format_number(value: complex) -> str:
    # parenthesized so a leading sign never binds looser than ^
    if value.imag == 0:
        return _format_real(value.real)
    return f"({_format_real(value.real)} + {_format_real(value.imag)} * i)"


def _to_source(node: Node) -> str:
    if isinstance(node, Const):
        return node.symbol if node.symbol else _format_number(node.value)
    if isinstance(node, Var):
        if is_conjugate_variable(node.name):
            return f"conj({conjugate_name(node.name)})"
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_source(node.arg)})"
    if isinstance(node, BinOp):
        return f"({_to_source(node.left)} {node.op} {_to_source(node.right)})"
    return f"{node.func}({_to_source(node.arg)})"


def to_source(e: AnalyticExpr) -> str:
    """Fully parenthesized source text that parses back to the same tree."""
    return _to_source(e.root)


def substitute(e: AnalyticExpr, mapping: Mapping[str, "AnalyticExpr | complex"]) -> AnalyticExpr:
    """Replace variables by expressions or constants."""
    replacements = {
        name: value.root if isinstance(value, AnalyticExpr) else Const(complex(value))
        for name, value in mapping.items()
    }

    def rewrite(node: Node) -> Node:
        if isinstance(node, Var):
            return replacements.get(node.name, node)
        if isinstance(node, Neg):
            return Neg(rewrite(node.arg))
        if isinstance(node, BinOp):
            return BinOp(node.op, rewrite(node.left), rewrite(node.right))
        if isinstance(node, Call):
            return Call(node.func, rewrite(node.arg))
        return node

    return AnalyticExpr(rewrite(e.root))


# ----- evaluation -----

def principal_log(x: complex) -> complex:
    """Principal logarithm with Arg in (-pi, pi]."""
    value = cmath.log(x)
    if value.imag == -math.pi:
        value = complex(value.real, math.pi)
    return value


def principal_sqrt(x: complex) -> complex:
    if x.imag == 0 and x.real < 0:
        return complex(0.0, math.sqrt(-x.real))
    return cmath.sqrt(x)


class _Jet:
    """Truncated Taylor number: value, gradient and (optionally) Hessian."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: complex, grad: np.ndarray, hess: np.ndarray | None):
        self.value = value
        self.grad = grad
        self.hess = hess

    def _lift(self, other) -> "_Jet":
        if isinstance(other, _Jet):
            return other
        hess = None if self.hess is None else np.zeros_like(self.hess)
        return _Jet(complex(other), np.zeros_like(self.grad), hess)

    def chain(self, f0: complex, f1: complex, f2: complex) -> "_Jet":
        grad = f1 * self.grad
        hess = None
        if self.hess is not None:
            hess = f1 * self.hess + f2 * np.outer(self.grad, self.grad)
        return _Jet(f0, grad, hess)

    def __neg__(self):
        return _Jet(-self.value, -self.grad, None if self.hess is None else -self.hess)

    def __add__(self, other):
        other = self._lift(other)
        hess = None if self.hess is None else self.hess + other.hess
        return _Jet(self.value + other.value, self.grad + other.grad, hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        if not isinstance(other, _Jet):
            c = complex(other)
            return _Jet(self.value * c, self.grad * c, None if self.hess is None else self.hess * c)
        grad = self.value * other.grad + other.value * self.grad
        hess = None
        if self.hess is not None:
            hess = (
                self.value * other.hess
                + other.value * self.hess
                + np.outer(self.grad, other.grad)
                + np.outer(other.grad, self.grad)
            )
        return _Jet(self.value * other.value, grad, hess)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other)
        v = other.value
        return self * other.chain(1 / v, -1 / v**2, 2 / v**3)

    def __rtruediv__(self, other):
        return self._lift(other) / self


def _value_of(x) -> complex:
    return x.value if isinstance(x, _Jet) else x


def _checked(x):
    v = _value_of(x)
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise SingularEvaluationError(f"Non-finite intermediate value {v}")
    return x


def _log_value(v: complex, winding: int, what: str) -> complex:
    if v == 0:
        raise SingularEvaluationError(f"{what} evaluated at the branch point 0")
    return principal_log(v) + TWO_PI_I * winding


def _primitive(func: str, v: complex, winding: int) -> tuple[complex, complex, complex]:
    """Value, first and second derivative of a library function at v."""
    if func == "exp":
        e = cmath.exp(v)
        return e, e, e
    if func == "log":
        return _log_value(v, winding, "log"), 1 / v, -1 / v**2
    if func == "sqrt":
        if v == 0:
            raise SingularEvaluationError("sqrt evaluated at the branch point 0")
        s = principal_sqrt(v) * (-1) ** (winding % 2)
        return s, 0.5 / s, -0.25 / (s * v)
    if func == "sin":
        s, c = cmath.sin(v), cmath.cos(v)
        return s, c, -s
    if func == "cos":
        s, c = cmath.sin(v), cmath.cos(v)
        return c, -s, -c
    if func == "tan":
        c = cmath.cos(v)
        if c == 0:
            raise SingularEvaluationError(f"tan evaluated at its pole {v}")
        t = cmath.sin(v) / c
        return t, 1 + t * t, 2 * t * (1 + t * t)
    raise ExprError(f"Unknown function '{func}'")


def _apply(func: str, x, winding: int):
    f0, f1, f2 = _primitive(func, _value_of(x), winding)
    return x.chain(f0, f1, f2) if isinstance(x, _Jet) else f0


def _integer_power(x, k: int):
    v = _value_of(x)
    if k == 0:
        return x * 0 + 1 if isinstance(x, _Jet) else complex(1)
    if k < 0 and v == 0:
        raise SingularEvaluationError(f"Negative power {k} of 0")
    f0 = v**k
    if not isinstance(x, _Jet):
        return f0
    f1 = k * v ** (k - 1) if k != 1 else complex(1)
    f2 = k * (k - 1) * v ** (k - 2) if k not in (1, 2) else complex(2 if k == 2 else 0)
    return x.chain(f0, f1, f2)


def _real_power(x, a: complex, winding: int):
    v = _value_of(x)
    if v == 0:
        raise SingularEvaluationError(f"Non-integer power {a} of 0")
    f0 = cmath.exp(a * _log_value(v, winding, "power"))
    if not isinstance(x, _Jet):
        return f0
    return x.chain(f0, a * f0 / v, a * (a - 1) * f0 / v**2)


def _integer_exponent(node: Node) -> int | None:
    value = None
    if isinstance(node, Const):
        value = node.value
    elif isinstance(node, Neg) and isinstance(node.arg, Const):
        value = -node.arg.value
    if value is not None and value.imag == 0 and float(value.real).is_integer():
        return int(value.real)
    return None


def _constant_value(node: Node) -> complex | None:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        inner = _constant_value(node.arg)
        return None if inner is None else -inner
    if isinstance(node, BinOp) and node.op != "^":
        left, right = _constant_value(node.left), _constant_value(node.right)
        if left is None or right is None:
            return None
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right if right != 0 else None
    return None


def _compile(node: Node) -> Callable:
    """Turn a tree into a closure ``f(env, winding)`` working on complex or jet values."""
    if isinstance(node, Const):
        value = node.value
        return lambda env, winding: value
    if isinstance(node, Var):
        name = node.name

        def variable(env, winding):
            try:
                return env[name]
            except KeyError:
                raise UnboundVariableError(name) from None

        return variable
    if isinstance(node, Neg):
        arg = _compile(node.arg)
        return lambda env, winding: -arg(env, winding)
    if isinstance(node, Call):
        arg, func = _compile(node.arg), node.func
        return lambda env, winding: _checked(_apply(func, arg(env, winding), winding))

    left = _compile(node.left)
    if node.op == "^":
        k = _integer_exponent(node.right)
        if k is not None:
            return lambda env, winding: _checked(_integer_power(left(env, winding), k))
        a = _constant_value(node.right)
        if a is not None:
            return lambda env, winding: _checked(_real_power(left(env, winding), a, winding))
        right = _compile(node.right)

        def general_power(env, winding):
            base = left(env, winding)
            return _checked(_apply("exp", right(env, winding) * _apply("log", base, winding), 0))

        return general_power

    right = _compile(node.right)
    if node.op == "+":
        return lambda env, winding: _checked(left(env, winding) + right(env, winding))
    if node.op == "-":
        return lambda env, winding: _checked(left(env, winding) - right(env, winding))
    if node.op == "*":
        return lambda env, winding: _checked(left(env, winding) * right(env, winding))

    def divide(env, winding):
        denominator = right(env, winding)
        if _value_of(denominator) == 0:
            raise SingularEvaluationError("Division by zero")
        return _checked(left(env, winding) / denominator)

    return divide


def evaluate(e: AnalyticExpr, point: Mapping[str, complex], winding: int = 0) -> complex:
    """Evaluate an expression.

    :param e: Expression.
    :param point: Value for every variable of e (conjugates are supplied separately).
    :param winding: Integer offset added to every logarithm as 2*pi*i*winding.
    :return: Complex value.
    """
    try:
        return complex(e._compiled(point, winding))
    except (OverflowError, ZeroDivisionError) as error:
        raise SingularEvaluationError(str(error)) from error


@dataclasses.dataclass(frozen=True, eq=False)
class Jet:
    """Value and partial derivatives of an expression at a point."""

    value: complex
    variables: tuple[str, ...]
    gradient: np.ndarray
    hessian: np.ndarray | None = None

    @property
    def partials(self) -> dict[str, complex]:
        return {name: complex(d) for name, d in zip(self.variables, self.gradient)}

    @property
    def second_partials(self) -> dict[tuple[str, str], complex] | None:
        if self.hessian is None:
            return None
        return {
            (a, b): complex(self.hessian[i, j])
            for i, a in enumerate(self.variables)
            for j, b in enumerate(self.variables)
        }


def eval_jet(
    e: AnalyticExpr,
    point: Mapping[str, complex],
    order: int = 1,
    variables: tuple[str, ...] | None = None,
    winding: int = 0,
) -> Jet:
    """Forward-mode derivatives of an expression up to second order.

    :param variables: Variables to differentiate in; defaults to every variable of e, sorted.
    """
    if order not in (1, 2):
        raise ExprError(f"Jet order must be 1 or 2, got {order}")
    variables = tuple(sorted(e.variables)) if variables is None else tuple(variables)
    m = len(variables)
    env = dict(point)
    for index, name in enumerate(variables):
        if name not in env:
            raise UnboundVariableError(name)
        grad = np.zeros(m, dtype=complex)
        grad[index] = 1
        env[name] = _Jet(complex(env[name]), grad, np.zeros((m, m), dtype=complex) if order == 2 else None)
    try:
        result = e._compiled(env, winding)
    except (OverflowError, ZeroDivisionError) as error:
        raise SingularEvaluationError(str(error)) from error
    if not isinstance(result, _Jet):
        return Jet(complex(result), variables, np.zeros(m, dtype=complex),
                   np.zeros((m, m), dtype=complex) if order == 2 else None)
    hessian = None
    if order == 2:
        hessian = (result.hess + result.hess.T) / 2
    return Jet(complex(result.value), variables, result.grad.copy(), hessian)


def derivative(e: AnalyticExpr, point: Mapping[str, complex], var: str, winding: int = 0) -> complex:
    """Single partial derivative."""
    return complex(eval_jet(e, point, 1, (var,), winding).gradient[0])


def assignment(z, w: complex, cz, cw: complex, log_w: complex | None = None) -> dict[str, complex]:
    """Build an evaluation point from coordinate arrays.

    :param z: z1 .. z{n-1} values.
    :param cz: Values of the conjugate symbols cz1 .. cz{n-1}.
    """
    point = {f"z{j + 1}": complex(value) for j, value in enumerate(z)}
    point.update({f"cz{j + 1}": complex(value) for j, value in enumerate(cz)})
    point["w"] = complex(w)
    point["cw"] = complex(cw)
    if log_w is not None:
        point[LOG_W] = complex(log_w)
    return point


def dimension_of(e: AnalyticExpr) -> int:
    """Smallest ambient dimension n the expression's variables fit in."""
    indices = [int(m.group(2)) for m in map(_VARIABLE_RE.match, e.variables) if m is not None]
    return max(indices, default=0) + 1
