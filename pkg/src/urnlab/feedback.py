"""Feedback functions F: {1, 2, ...} -> (0, inf) and their analytic structure.

A feedback function maps an agent's current count to its attractiveness
weight.  This module provides the built-in families, a small expression
parser for custom feedbacks, reciprocal tail sums with guaranteed error
bounds, regime classification (explosivity, growth class, sub-linearity),
the time transform a(t) = integral of 1/F with its inverse, and the
logarithmic derivative used by the growth-type criteria.

All operations are pure; specs are immutable after construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate as _sint
from scipy import special as _sspec

from .errors import (
    DomainError,
    NotDifferentiable,
    OutOfRange,
    ToleranceUnreachable,
)

__all__ = [
    "Feedback", "Polynomial", "Exponential", "StretchedExp", "LogLinear",
    "Log", "Constant", "Custom", "TailSum", "RegimeClass",
    "parse_feedback", "evaluate", "values", "log_values", "cont_value",
    "tail_sum", "classify", "a_transform", "a_inverse", "log_derivative",
    "HOLDS", "FAILS", "INDETERMINATE",
    "TYPE_P", "TYPE_E", "NOT_APPLICABLE",
    "SUBLINEAR_TO_ZERO", "LINEAR", "SUPERLINEAR",
]

# tri-state verdicts and enum labels (plain strings so reports serialize as-is)
HOLDS = "holds"
FAILS = "fails"
INDETERMINATE = "indeterminate"

TYPE_P = "type_p"
TYPE_E = "type_e"
NOT_APPLICABLE = "not_applicable"

SUBLINEAR_TO_ZERO = "sublinear_to_zero"
LINEAR = "linear_with_constant"
SUPERLINEAR = "superlinear"

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# expression AST
# ---------------------------------------------------------------------------

class Node:
    """Base class of expression tree nodes."""

    __slots__ = ()


class Num(Node):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)

    def __repr__(self):
        return f"Num({self.value})"


class Var(Node):
    """The count variable k."""

    __slots__ = ()

    def __repr__(self):
        return "Var(k)"


class BinOp(Node):
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Node, right: Node):
        self.op = op
        self.left = left
        self.right = right

    def __repr__(self):
        return f"BinOp({self.op!r}, {self.left!r}, {self.right!r})"


class Call(Node):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: Node):
        self.fn = fn
        self.arg = arg

    def __repr__(self):
        return f"Call({self.fn!r}, {self.arg!r})"


class Neg(Node):
    __slots__ = ("arg",)

    def __init__(self, arg: Node):
        self.arg = arg

    def __repr__(self):
        return f"Neg({self.arg!r})"


_FUNCS = {"log": np.log, "exp": np.exp, "sqrt": np.sqrt}


def eval_tree(node: Node, k) -> np.ndarray:
    """Evaluate an expression tree at k (scalar or array, float semantics)."""
    if isinstance(node, Num):
        return np.broadcast_to(np.float64(node.value), np.shape(k)).copy() \
            if np.ndim(k) else np.float64(node.value)
    if isinstance(node, Var):
        return np.asarray(k, dtype=float) if np.ndim(k) else np.float64(k)
    if isinstance(node, Neg):
        return -eval_tree(node.arg, k)
    if isinstance(node, Call):
        with np.errstate(all="ignore"):
            return _FUNCS[node.fn](eval_tree(node.arg, k))
    assert isinstance(node, BinOp)
    a = eval_tree(node.left, k)
    b = eval_tree(node.right, k)
    with np.errstate(all="ignore"):
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)


def _contains_var(node: Node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, (Num,)):
        return False
    if isinstance(node, Neg):
        return _contains_var(node.arg)
    if isinstance(node, Call):
        return _contains_var(node.arg)
    return _contains_var(node.left) or _contains_var(node.right)


# ---------------------------------------------------------------------------
# tokenizer / recursive-descent parser
#
# expr   := term (('+'|'-') term)*
# term   := factor (('*'|'/') factor)*
# factor := base ('^' factor)?          -- '^' right-associative
# base   := ['-'] (number | 'k' | fn '(' expr ')' | '(' expr ')')
# fn     := 'log' | 'exp' | 'sqrt'      -- log is the natural logarithm
#
# The leading '-' in base is a convenience extension; every string valid
# without it parses identically.
# ---------------------------------------------------------------------------

_T_NUM, _T_IDENT, _T_OP, _T_END = 0, 1, 2, 3


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE" and j + 1 < n and \
                    (text[j + 1].isdigit() or text[j + 1] in "+-" and j + 2 < n and text[j + 2].isdigit()):
                j += 2 if text[j + 1] in "+-" else 1
                while j < n and text[j].isdigit():
                    j += 1
            try:
                val = float(text[i:j])
            except ValueError:
                raise SyntaxError(f"bad numeric literal {text[i:j]!r} at position {i}")
            tokens.append((_T_NUM, val, i))
            i = j
            continue
        if c.isalpha():
            j = i
            while j < n and text[j].isalnum():
                j += 1
            tokens.append((_T_IDENT, text[i:j], i))
            i = j
            continue
        if c in "+-*/^()":
            tokens.append((_T_OP, c, i))
            i += 1
            continue
        raise SyntaxError(f"unexpected character {c!r} at position {i}")
    tokens.append((_T_END, None, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def _peek(self):
        return self.tokens[self.pos]

    def _next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def _error(self, msg: str, tok):
        err = SyntaxError(f"{msg} at position {tok[2]}")
        err.offset = tok[2] + 1
        raise err

    def parse(self) -> Node:
        node = self.expr()
        tok = self._peek()
        if tok[0] != _T_END:
            self._error(f"unexpected token {tok[1]!r}", tok)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self._peek()[:2] in ((_T_OP, "+"), (_T_OP, "-")):
            op = self._next()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self._peek()[:2] in ((_T_OP, "*"), (_T_OP, "/")):
            op = self._next()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        node = self.base()
        if self._peek()[:2] == (_T_OP, "^"):
            self._next()
            node = BinOp("^", node, self.factor())
        return node

    def base(self) -> Node:
        tok = self._next()
        if tok[:2] == (_T_OP, "-"):
            return Neg(self.base())
        if tok[0] == _T_NUM:
            return Num(tok[1])
        if tok[0] == _T_IDENT:
            if tok[1] == "k":
                return Var()
            if tok[1] in _FUNCS:
                opening = self._next()
                if opening[:2] != (_T_OP, "("):
                    self._error(f"expected '(' after {tok[1]!r}", opening)
                arg = self.expr()
                closing = self._next()
                if closing[:2] != (_T_OP, ")"):
                    self._error("expected ')'", closing)
                return Call(tok[1], arg)
            self._error(f"unknown identifier {tok[1]!r}", tok)
        if tok[:2] == (_T_OP, "("):
            node = self.expr()
            closing = self._next()
            if closing[:2] != (_T_OP, ")"):
                self._error("expected ')'", closing)
            return node
        self._error("expected a number, 'k', a function call or '('", tok)


# ---------------------------------------------------------------------------
# feedback families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Feedback:
    """Base class; concrete families define the weight F(k)."""

    def __post_init__(self):
        pass

    @property
    def label(self) -> str:
        return repr(self)


@dataclass(frozen=True, repr=False)
class Polynomial(Feedback):
    """F(k) = alpha * k**beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("Polynomial requires alpha > 0 and finite beta")

    def __repr__(self):
        return f"Polynomial(alpha={self.alpha:g}, beta={self.beta:g})"


@dataclass(frozen=True, repr=False)
class Exponential(Feedback):
    """F(k) = alpha * exp(beta * k); beta may be negative."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError("Exponential requires alpha > 0 and finite beta")

    def __repr__(self):
        return f"Exponential(alpha={self.alpha:g}, beta={self.beta:g})"


@dataclass(frozen=True, repr=False)
class StretchedExp(Feedback):
    """F(k) = alpha * exp(beta * k**gamma), beta > 0, gamma > 0."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and self.gamma > 0):
            raise ValueError("StretchedExp requires alpha, beta, gamma > 0")

    def __repr__(self):
        return f"StretchedExp(alpha={self.alpha:g}, beta={self.beta:g}, gamma={self.gamma:g})"


@dataclass(frozen=True, repr=False)
class LogLinear(Feedback):
    """F(k) = alpha * k * log(k+1)**beta."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.beta)):
            raise ValueError("LogLinear requires alpha > 0 and finite beta")

    def __repr__(self):
        return f"LogLinear(alpha={self.alpha:g}, beta={self.beta:g})"


@dataclass(frozen=True, repr=False)
class Log(Feedback):
    """F(k) = alpha * log(k+1)."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("Log requires alpha > 0")

    def __repr__(self):
        return f"Log(alpha={self.alpha:g})"


@dataclass(frozen=True, repr=False)
class Constant(Feedback):
    """F(k) = alpha."""

    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("Constant requires alpha > 0")

    def __repr__(self):
        return f"Constant(alpha={self.alpha:g})"


@dataclass(frozen=True, repr=False, eq=False)
class Custom(Feedback):
    """Feedback defined by a parsed expression tree in the variable k."""

    tree: Node = field(compare=False)
    source: str = ""

    def __repr__(self):
        return f"Custom({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Custom) and self.source == other.source

    def __hash__(self):
        return hash(("Custom", self.source))


FeedbackLike = Union[Polynomial, Exponential, StretchedExp, LogLinear, Log, Constant, Custom]


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def cont_value(spec: Feedback, x):
    """Continuum extension F(x) at real x > 0 (scalar or array)."""
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    with np.errstate(all="ignore"):
        if isinstance(spec, Polynomial):
            return spec.alpha * np.power(x, spec.beta)
        if isinstance(spec, Exponential):
            return spec.alpha * np.exp(spec.beta * x)
        if isinstance(spec, StretchedExp):
            return spec.alpha * np.exp(spec.beta * np.power(x, spec.gamma))
        if isinstance(spec, LogLinear):
            return spec.alpha * x * np.power(np.log1p(x), spec.beta)
        if isinstance(spec, Log):
            return spec.alpha * np.log1p(x)
        if isinstance(spec, Constant):
            return spec.alpha * np.ones_like(x) if np.ndim(x) else spec.alpha
        return eval_tree(spec.tree, x)


def values(spec: Feedback, ks) -> np.ndarray:
    """F on an integer grid (vectorized)."""
    return np.asarray(cont_value(spec, np.asarray(ks, dtype=float)))


def log_values(spec: Feedback, ks) -> np.ndarray:
    """log F on an integer grid; exact in the exponent for the exp families."""
    ks = np.asarray(ks, dtype=float)
    with np.errstate(all="ignore"):
        if isinstance(spec, Polynomial):
            return math.log(spec.alpha) + spec.beta * np.log(ks)
        if isinstance(spec, Exponential):
            return math.log(spec.alpha) + spec.beta * ks
        if isinstance(spec, StretchedExp):
            return math.log(spec.alpha) + spec.beta * np.power(ks, spec.gamma)
        if isinstance(spec, LogLinear):
            return math.log(spec.alpha) + np.log(ks) + spec.beta * np.log(np.log1p(ks))
        if isinstance(spec, Log):
            return math.log(spec.alpha) + np.log(np.log1p(ks))
        if isinstance(spec, Constant):
            return np.full_like(ks, math.log(spec.alpha))
        return np.log(eval_tree(spec.tree, ks))


def evaluate(spec: Feedback, k: int) -> float:
    """F(k) for integer k >= 1.

    Raises OverflowError when the value exceeds the double range; use the
    log-domain helpers in that case.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = float(cont_value(spec, float(k)))
    if math.isinf(v):
        raise OverflowError(f"F({k}) exceeds the floating-point range for {spec!r}")
    if not (v > 0) or math.isnan(v):
        raise DomainError(f"F({k}) = {v} is not a positive finite weight for {spec!r}")
    return v


# ---------------------------------------------------------------------------
# parsing with normalization to built-in families
# ---------------------------------------------------------------------------

class _NotCanonical(Exception):
    pass


def _const_value(node: Node) -> float:
    if _contains_var(node):
        raise _NotCanonical
    v = float(eval_tree(node, 1.0))
    if not math.isfinite(v):
        raise _NotCanonical
    return v


def _match_exp_arg(node: Node):
    """Match beta * k**gamma inside exp(...); returns (beta, gamma)."""
    if isinstance(node, Var):
        return 1.0, 1.0
    if isinstance(node, Neg):
        b, g = _match_exp_arg(node.arg)
        return -b, g
    if isinstance(node, BinOp) and node.op == "^" and isinstance(node.left, Var):
        return 1.0, _const_value(node.right)
    if isinstance(node, BinOp) and node.op == "*":
        left_const = not _contains_var(node.left)
        const_part, var_part = (node.left, node.right) if left_const else (node.right, node.left)
        if _contains_var(const_part):
            raise _NotCanonical
        b0 = _const_value(const_part)
        b, g = _match_exp_arg(var_part)
        return b0 * b, g
    if isinstance(node, BinOp) and node.op == "/" and not _contains_var(node.right):
        b, g = _match_exp_arg(node.left)
        return b / _const_value(node.right), g
    if isinstance(node, Call) and node.fn == "sqrt" and isinstance(node.arg, Var):
        return 1.0, 0.5
    raise _NotCanonical


def _is_log_kp1(node: Node) -> bool:
    # log(k+1) in either operand order
    if not (isinstance(node, Call) and node.fn == "log"):
        return False
    a = node.arg
    return (isinstance(a, BinOp) and a.op == "+" and
            ((isinstance(a.left, Var) and isinstance(a.right, Num) and a.right.value == 1.0) or
             (isinstance(a.right, Var) and isinstance(a.left, Num) and a.left.value == 1.0)))


class _Factors:
    """Accumulated canonical form: coef * k**poly * log(k+1)**logp * exp(beta*k**gamma)."""

    def __init__(self):
        self.coef = 1.0
        self.poly = 0.0
        self.logp = 0.0
        self.exp_beta = 0.0
        self.exp_gamma: Optional[float] = None

    def mul_exp(self, beta, gamma, sign=1.0):
        if self.exp_gamma is None or self.exp_gamma == gamma:
            self.exp_gamma = gamma
            self.exp_beta += sign * beta
        else:
            raise _NotCanonical


def _collect(node: Node, acc: _Factors, power: float = 1.0):
    """Walk a product tree, folding each factor into acc with exponent `power`."""
    if isinstance(node, Num):
        acc.coef *= node.value ** power
        return
    if not _contains_var(node):
        acc.coef *= _const_value(node) ** power
        return
    if isinstance(node, Neg):
        acc.coef *= (-1.0) ** power
        _collect(node.arg, acc, power)
        return
    if isinstance(node, Var):
        acc.poly += power
        return
    if isinstance(node, BinOp) and node.op == "*":
        _collect(node.left, acc, power)
        _collect(node.right, acc, power)
        return
    if isinstance(node, BinOp) and node.op == "/":
        _collect(node.left, acc, power)
        _collect(node.right, acc, -power)
        return
    if isinstance(node, BinOp) and node.op == "^":
        exp = _const_value(node.right)
        _collect(node.left, acc, power * exp)
        return
    if isinstance(node, Call) and node.fn == "sqrt" and isinstance(node.arg, Var):
        acc.poly += 0.5 * power
        return
    if _is_log_kp1(node):
        acc.logp += power
        return
    if isinstance(node, Call) and node.fn == "exp":
        beta, gamma = _match_exp_arg(node.arg)
        acc.mul_exp(beta * power, gamma)
        return
    raise _NotCanonical


def _normalize(tree: Node, source: str) -> Feedback:
    """Map an AST onto a built-in family when it is a canonical product."""
    try:
        acc = _Factors()
        _collect(tree, acc)
    except _NotCanonical:
        return Custom(tree=tree, source=source)
    if not (acc.coef > 0 and math.isfinite(acc.coef)):
        return Custom(tree=tree, source=source)
    has_exp = acc.exp_gamma is not None and acc.exp_beta != 0.0
    if has_exp:
        if acc.poly != 0.0 or acc.logp != 0.0:
            return Custom(tree=tree, source=source)
        if acc.exp_gamma == 1.0:
            return Exponential(acc.coef, acc.exp_beta)
        if acc.exp_beta > 0 and acc.exp_gamma > 0:
            return StretchedExp(acc.coef, acc.exp_beta, acc.exp_gamma)
        return Custom(tree=tree, source=source)
    if acc.logp != 0.0:
        if acc.poly == 1.0:
            return LogLinear(acc.coef, acc.logp)
        if acc.poly == 0.0 and acc.logp == 1.0:
            return Log(acc.coef)
        return Custom(tree=tree, source=source)
    if acc.poly == 0.0:
        return Constant(acc.coef)
    return Polynomial(acc.coef, acc.poly)


def parse_feedback(expr: str) -> Feedback:
    """Parse an expression in k into a feedback spec.

    Canonical products are normalized to the matching built-in family,
    e.g. "2*k^1.5" becomes Polynomial(2, 1.5).  Everything else stays a
    Custom spec evaluating the tree directly.

    Raises SyntaxError (with position) on malformed input and DomainError
    when evaluation on the probe grid k = 1..64 yields a non-positive or
    non-finite weight.
    """
    tree = _Parser(expr).parse()
    probe = np.arange(1, 65, dtype=float)
    with np.errstate(all="ignore"):
        vals = np.asarray(eval_tree(tree, probe), dtype=float)
    bad = ~np.isfinite(vals) | (vals <= 0)
    if np.any(bad):
        k_bad = int(probe[bad][0])
        raise DomainError(
            f"expression {expr!r} evaluates to {vals[bad][0]!r} at k={k_bad}; "
            "feedback weights must be positive and finite")
    return _normalize(tree, expr)


# ---------------------------------------------------------------------------
# tail sums  sum_{k=start}^inf F(k)**(-power)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailSum:
    """Value of a reciprocal tail sum with a guaranteed absolute error bound.

    kind is "finite", "divergent" or "indeterminate"; value/error are only
    meaningful for finite sums.
    """

    kind: str
    value: float = math.inf
    error: float = 0.0

    @property
    def is_finite(self) -> bool:
        return self.kind == "finite"

    @property
    def is_divergent(self) -> bool:
        return self.kind == "divergent"


_DIVERGENT = TailSum("divergent")
_INDETERMINATE = TailSum("indeterminate")


def _tail_summand(spec: Feedback, power: int) -> Callable[[np.ndarray], np.ndarray]:
    def f(x):
        with np.errstate(all="ignore"):
            return np.exp(-power * log_values(spec, x))
    return f


def _find_decreasing_start(f, start: int, cap: int = 2 ** 26) -> Optional[int]:
    """Smallest probed m >= start from which the summand looks decreasing."""
    m = max(start, 1)
    while m <= cap:
        xs = np.unique(np.linspace(m, 4 * m + 8, 33).astype(np.int64))
        ys = f(xs.astype(float))
        if not np.all(np.isfinite(ys) | (ys == 0.0)):
            return None
        if np.all(np.diff(ys) <= 0):
            return m
        m *= 4
    return None


def _v_space_integral(spec: Feedback, f, power: int, v0: float):
    """int_{x=K}^inf f(x) dx computed in v = log(x+1).

    Returns (value, quadrature_error, far_tail_error) or None when the
    behaviour beyond the representable range cannot be pinned down.  For
    LogLinear the integrand has an exact log-domain form valid for every v;
    other specs are integrated up to v = 600 (x ~ 2.6e260) and the mass
    beyond is estimated from the local power-law decay and charged fully
    to the error.
    """
    if isinstance(spec, LogLinear):
        la, b = math.log(spec.alpha), spec.beta

        def g(v):
            # log x = v + log(1 - e^{-v}) and log(x+1) = v, so the summand
            # 1/F(x)^p has the exact log-domain value below
            lx = v + math.log(-math.expm1(-v)) if v < 40 else v - math.exp(-min(v, 700))
            lg = v - power * (la + lx + b * math.log(v))
            return math.exp(lg) if lg < 700 else math.inf

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", _sint.IntegrationWarning)
            val, err = _sint.quad(g, v0, np.inf, limit=400)
        return val, err, 0.0

    def g(v):
        return float(f(math.expm1(v))) * math.exp(v)

    v_cap = 600.0
    v_mid = min(v_cap, max(2.0 * v0, v0 + 20.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _sint.IntegrationWarning)
        q1, e1 = _sint.quad(g, v0, v_mid, limit=400)
        q2, e2 = (_sint.quad(g, v_mid, v_cap, limit=400) if v_mid < v_cap else (0.0, 0.0))
    g5, g6 = g(500.0), g(v_cap)
    far = 0.0
    if g6 > 0.0:
        if not g5 > g6:
            return None
        decay = math.log(g5 / g6) / math.log(v_cap / 500.0)
        if decay <= 1.05:
            return None
        far = g6 * v_cap / (decay - 1.0)
    return q1 + q2 + far, e1 + e2, far


def _tail_numeric(spec: Feedback, start: int, power: int, tol: float,
                  convergent_hint: Optional[bool] = None) -> TailSum:
    """Generic route: exact partial sum, then an integral/Euler-Maclaurin
    tail estimate with an explicit error bound.

    Works for summands that are eventually decreasing; divergence is
    certified by non-vanishing geometric block sums."""
    f = _tail_summand(spec, power)
    m0 = _find_decreasing_start(f, start)

    if convergent_hint is None:
        # dyadic block sums b_j over [2^j, 2^{j+1}): the series diverges
        # iff sum_j b_j does, i.e. iff b_j decays no faster than ~1/j
        blocks, js = [], []
        for j in range(int(math.log2(max(start, 1))), 25):
            lo = max(start, 2 ** j)
            hi = 2 ** (j + 1)
            if lo >= hi:
                continue
            ks = np.arange(lo, hi, dtype=float)
            blocks.append(float(np.sum(f(ks))))
            js.append(j)
        b = np.asarray(blocks)
        jj = np.asarray(js, dtype=float)
        pos = np.isfinite(b) & (b > 0)
        b, jj = b[pos][-12:], jj[pos][-12:]
        if len(b) >= 6 and float(np.min(b)) > 1e-12:
            slope = float(np.polyfit(np.log(jj + 1.0), np.log(b), 1)[0])
            if slope >= -1.02:
                return _DIVERGENT
        if m0 is None:
            return _INDETERMINATE
    if m0 is None:
        return _INDETERMINATE

    K = max(m0, start, 64)
    budget = 2 ** 24
    while True:
        ks = np.arange(start, K, dtype=float)
        partial = float(np.sum(f(ks))) if len(ks) else 0.0

        # fast-decay route: when the summand drops by e^60 within <= 2^23
        # steps, the tail is summed exactly; quadrature cannot resolve
        # integrands whose decay length is far below the interval width
        fK = float(f(float(K)))
        drop = fK * math.exp(-60.0)
        window = None
        for i in range(8, 24):
            if float(f(float(K + 2 ** i))) <= drop:
                window = 2 ** i
                break
        if window is not None:
            ks2 = np.arange(K, K + window + 1, dtype=float)
            tail_exact = float(np.sum(f(ks2)))
            # decreasing summand with accelerating decay: each further
            # window of the same width contributes another e^-60 factor
            rem = window * float(f(float(K + window))) / (1.0 - math.exp(-60.0))
            err = rem + 16 * _EPS * (partial + tail_exact)
            if err <= tol:
                return TailSum("finite", partial + tail_exact, err)
            if K >= budget:
                raise ToleranceUnreachable(
                    f"tail bound {err:.3g} still above tol={tol:.3g} at cut {K}")
            K *= 4
            continue

        # slow-decay route: integrate in v = log(x+1); the substitution
        # turns logarithmic decay into algebraic decay, which the
        # infinite-range transform resolves (direct quad on 1/(x log^b x)
        # under-reports its own error)
        v0 = math.log(K + 1.0)
        res = _v_space_integral(spec, f, power, v0)
        if res is None:
            return _INDETERMINATE
        quad_val, quad_err, far_err = res
        if far_err > 0.5 * tol:
            # the K-independent mass beyond x ~ e^600 cannot be certified
            raise ToleranceUnreachable(
                f"tail mass beyond the floating-point range cannot be bounded "
                f"below tol={tol:.3g} for {spec!r}")
        quad_err += far_err
        if not math.isfinite(quad_val):
            return _DIVERGENT if convergent_hint is not True else _INDETERMINATE
        # Euler-Maclaurin at the cut: sum_{k>=K} f(k) = int_K^inf f + f(K)/2
        #   - f'(K)/12 + R, |R| <= |f'''(K)|/720 for completely monotone f
        h = max(K * 1e-4, 1e-3)
        fk = float(f(float(K)))
        fp = (float(f(K + h)) - float(f(K - h))) / (2 * h)
        f3 = (float(f(K + 2 * h)) - 2 * float(f(K + h)) + 2 * float(f(K - h))
              - float(f(K - 2 * h))) / (2 * h ** 3)
        tail = quad_val + fk / 2.0 - fp / 12.0
        err = abs(f3) / 720.0 * 4.0 + quad_err + 16 * _EPS * (partial + abs(tail))
        if err <= tol:
            return TailSum("finite", partial + tail, err)
        if K >= budget:
            raise ToleranceUnreachable(
                f"tail bound {err:.3g} still above tol={tol:.3g} at cut {K}")
        K *= 4


def tail_sum(spec: Feedback, start: int, power: int = 1, tol: float = 1e-10) -> TailSum:
    """sum_{k=start}^inf F(k)**(-power) as a TailSum.

    Closed forms are used where the family admits them (Hurwitz zeta for
    polynomial, geometric for exponential); otherwise adaptive truncation
    with integral-comparison bounds.  The result's error field is a
    guaranteed absolute bound and is at most tol.
    """
    if start < 1:
        raise ValueError("start must be >= 1")
    if power < 1:
        raise ValueError("power must be a positive integer")
    if tol <= 0:
        raise ValueError("tol must be > 0")

    if isinstance(spec, Polynomial):
        bp = spec.beta * power
        if bp <= 1.0:
            return _DIVERGENT
        value = spec.alpha ** (-power) * float(_sspec.zeta(bp, start))
        err = 8 * _EPS * value
        if err > tol:
            raise ToleranceUnreachable("closed form accurate to ~1e-15 relative only")
        return TailSum("finite", value, err)

    if isinstance(spec, Exponential):
        bp = spec.beta * power
        if bp <= 0.0:
            return _DIVERGENT
        value = spec.alpha ** (-power) * math.exp(-bp * start) / (-math.expm1(-bp))
        err = 8 * _EPS * value
        if err > tol:
            raise ToleranceUnreachable("closed form accurate to ~1e-15 relative only")
        return TailSum("finite", value, err)

    if isinstance(spec, StretchedExp):
        # decreasing summand; incomplete-gamma integral bounds are exact
        a, c, g = spec.alpha, power * spec.beta, spec.gamma

        def integral_from(x: float) -> float:
            # int_x^inf exp(-c u^g) du = (1/g) c^(-1/g) Gamma(1/g) Q(1/g, c x^g)
            return (1.0 / g) * c ** (-1.0 / g) * float(
                _sspec.gamma(1.0 / g) * _sspec.gammaincc(1.0 / g, c * x ** g))

        f = _tail_summand(spec, power)
        K = start
        partial = 0.0
        chunk = 4096
        for _ in range(64):
            up = integral_from(K - 1)       # tail from k=K is below int_{K-1}^inf
            lo = integral_from(K)
            mid = a ** (-power) * 0.5 * (up + lo)
            err = a ** (-power) * 0.5 * (up - lo) + 16 * _EPS * (partial + mid)
            if err <= tol:
                return TailSum("finite", partial + mid, err)
            ks = np.arange(K, K + chunk, dtype=float)
            partial += float(np.sum(f(ks)))
            K += chunk
        raise ToleranceUnreachable(f"stretched-exponential tail still above tol at cut {K}")

    if isinstance(spec, LogLinear):
        if power == 1 and spec.beta <= 1.0:
            return _DIVERGENT
        return _tail_numeric(spec, start, power, tol, convergent_hint=True)

    if isinstance(spec, Log):
        return _DIVERGENT      # summand ~ log(k)^-p does not vanish fast enough

    if isinstance(spec, Constant):
        return _DIVERGENT

    return _tail_numeric(spec, start, power, tol)


# ---------------------------------------------------------------------------
# regime classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeClass:
    """Analytic verdicts for one feedback function.

    monopoly_condition: summability of 1/F (tri-state).
    pe_type: growth type (type_p / type_e) when the monopoly condition
        holds, not_applicable otherwise.
    growth_class: limit behaviour of F(k)/k, with the constant recorded
        for the linear case.
    sublin_flag / sublin2_flag: the sub-linearity conditions, the second
        with its witness exponent p > 1/2.
    square_summable: finiteness of sigma^2 = sum 1/F(k)^2 (from k=1),
        with the value when finite.
    """

    monopoly_condition: str
    pe_type: str
    growth_class: str
    growth_constant: Optional[float] = None
    sublin_flag: str = INDETERMINATE
    sublin2_flag: str = INDETERMINATE
    sublin2_witness: Optional[float] = None
    square_summable: str = INDETERMINATE
    sigma2: Optional[float] = None

    def as_dict(self) -> dict:
        return {
            "monopoly_condition": self.monopoly_condition,
            "pe_type": self.pe_type,
            "growth_class": self.growth_class,
            "growth_constant": self.growth_constant,
            "sublin": self.sublin_flag,
            "sublin2": self.sublin2_flag,
            "sublin2_witness": self.sublin2_witness,
            "square_summable": self.square_summable,
            "sigma2": self.sigma2,
        }


def _sigma2_of(spec: Feedback) -> Optional[float]:
    ts = tail_sum(spec, 1, 2, tol=1e-9)
    return ts.value if ts.is_finite else None


def classify(spec: Feedback) -> RegimeClass:
    """RegimeClass of a feedback function.

    Built-in families get exact symbolic verdicts.  Custom specs are probed
    numerically along k = 2^j, j <= 24; a limit is declared only when the
    last five probes are monotone and within 1% relative spread, otherwise
    the corresponding flag is indeterminate.
    """
    if isinstance(spec, Polynomial):
        b = spec.beta
        if b > 1:
            return RegimeClass(HOLDS, TYPE_P, SUPERLINEAR,
                               sublin_flag=FAILS, sublin2_flag=HOLDS, sublin2_witness=1.0,
                               square_summable=HOLDS if 2 * b > 1 else FAILS,
                               sigma2=_sigma2_of(spec) if 2 * b > 1 else None)
        growth = LINEAR if b == 1 else SUBLINEAR_TO_ZERO
        gconst = spec.alpha if b == 1 else None
        sq = HOLDS if 2 * b > 1 else FAILS
        return RegimeClass(FAILS, NOT_APPLICABLE, growth, growth_constant=gconst,
                           sublin_flag=HOLDS if b < 1 else FAILS,
                           sublin2_flag=HOLDS, sublin2_witness=1.0,
                           square_summable=sq,
                           sigma2=_sigma2_of(spec) if sq == HOLDS else None)

    if isinstance(spec, Exponential):
        if spec.beta > 0:
            return RegimeClass(HOLDS, TYPE_E, SUPERLINEAR,
                               sublin_flag=FAILS, sublin2_flag=HOLDS, sublin2_witness=1.0,
                               square_summable=HOLDS, sigma2=_sigma2_of(spec))
        if spec.beta == 0:
            return classify(Constant(spec.alpha))
        # decreasing: bounded self-normalized sums, but no p > 1/2 witness
        return RegimeClass(FAILS, NOT_APPLICABLE, SUBLINEAR_TO_ZERO,
                           sublin_flag=HOLDS, sublin2_flag=FAILS,
                           square_summable=FAILS)

    if isinstance(spec, StretchedExp):
        pe = TYPE_P if spec.gamma < 1 else TYPE_E
        return RegimeClass(HOLDS, pe, SUPERLINEAR,
                           sublin_flag=FAILS, sublin2_flag=HOLDS, sublin2_witness=1.0,
                           square_summable=HOLDS, sigma2=_sigma2_of(spec))

    if isinstance(spec, LogLinear):
        b = spec.beta
        if b > 1:
            return RegimeClass(HOLDS, TYPE_P, SUPERLINEAR,
                               sublin_flag=FAILS, sublin2_flag=HOLDS, sublin2_witness=1.0,
                               square_summable=HOLDS, sigma2=_sigma2_of(spec))
        growth = SUPERLINEAR if b > 0 else (LINEAR if b == 0 else SUBLINEAR_TO_ZERO)
        gconst = spec.alpha if b == 0 else None
        return RegimeClass(FAILS, NOT_APPLICABLE, growth, growth_constant=gconst,
                           sublin_flag=FAILS, sublin2_flag=HOLDS, sublin2_witness=1.0,
                           square_summable=HOLDS, sigma2=_sigma2_of(spec))

    if isinstance(spec, Log):
        return RegimeClass(FAILS, NOT_APPLICABLE, SUBLINEAR_TO_ZERO,
                           sublin_flag=HOLDS, sublin2_flag=HOLDS, sublin2_witness=1.0,
                           square_summable=FAILS)

    if isinstance(spec, Constant):
        return RegimeClass(FAILS, NOT_APPLICABLE, SUBLINEAR_TO_ZERO,
                           sublin_flag=HOLDS, sublin2_flag=HOLDS, sublin2_witness=1.0,
                           square_summable=FAILS)

    return _classify_numeric(spec)


def _stable_limit(seq: np.ndarray) -> Optional[float]:
    """Last-five-probes rule: monotone and within 1% relative spread."""
    w = seq[-5:]
    if len(w) < 5 or not np.all(np.isfinite(w)):
        return None
    if not (np.all(np.diff(w) >= 0) or np.all(np.diff(w) <= 0)):
        return None
    lo, hi = float(np.min(w)), float(np.max(w))
    if hi == 0.0:
        return 0.0
    if (hi - lo) / max(abs(hi), abs(lo)) <= 0.01:
        return float(w[-1])
    return None


def _classify_numeric(spec: Custom) -> RegimeClass:
    with np.errstate(all="ignore"):
        return _classify_numeric_inner(spec)


def _classify_numeric_inner(spec: Custom) -> RegimeClass:
    js = np.arange(0, 25)
    ks = 2.0 ** js
    F = values(spec, ks)
    if not np.all(np.isfinite(F) & (F > 0)):
        # overflow range: superlinear growth is the only way to get there
        finite = np.isfinite(F) & (F > 0)
        F = F[finite]
        ks = ks[finite]

    # growth class: F(k)/k along the grid
    growth, gconst = INDETERMINATE, None
    r = F / ks
    lim = _stable_limit(r)
    if lim is not None and lim > 1e-12:
        growth, gconst = LINEAR, lim
    elif lim is not None or (np.all(np.diff(r[-5:]) < 0) and r[-1] < 0.01 * r[0]):
        growth = SUBLINEAR_TO_ZERO
    elif np.all(np.diff(r[-5:]) > 0) and r[-1] > 100 * max(r[0], 1e-300):
        growth = SUPERLINEAR

    # monopoly condition via the tail sum
    try:
        ts = tail_sum(spec, 1, 1, tol=1e-8)
    except ToleranceUnreachable:
        ts = _INDETERMINATE
    mono = {"finite": HOLDS, "divergent": FAILS}.get(ts.kind, INDETERMINATE)

    pe = NOT_APPLICABLE
    if mono == HOLDS:
        if growth == INDETERMINATE:
            growth = SUPERLINEAR      # forced by summable reciprocals on stable probes
        pe = INDETERMINATE
        t = []
        for k in ks[(ks >= 2 ** 8)]:
            Fk = float(cont_value(spec, float(k)))
            if not (math.isfinite(Fk) and Fk > 0):
                break
            try:
                tk = tail_sum(spec, int(k), 1, tol=1e-8)
            except ToleranceUnreachable:
                break
            if not tk.is_finite or tk.value <= 0.0:
                break
            t.append(Fk * tk.value)
        t = np.asarray(t)
        if len(t) >= 5:
            lim = _stable_limit(t)
            if lim is not None:
                pe = TYPE_E
            elif np.all(np.diff(t[-5:]) > 0) and t[-1] > 1.2 * t[-5]:
                pe = TYPE_P

    # cumulative reciprocal sums for the sub-linearity probes
    grid = np.arange(1, 2 ** 24 + 1, dtype=float)
    with np.errstate(all="ignore"):
        recip = 1.0 / values(spec, grid)
    cum = np.cumsum(recip)
    idx = (2 ** js[js <= 24]).astype(int) - 1
    s = cum[idx]
    Fg = values(spec, (idx + 1).astype(float))

    q = Fg * s / (idx + 1)
    sublin = INDETERMINATE
    limq = _stable_limit(q)
    if limq is not None:
        sublin = HOLDS
    elif np.all(np.diff(q[-5:]) > 0) and q[-1] > 1.5 * q[-5]:
        sublin = FAILS
    if mono == HOLDS or growth in (LINEAR, SUPERLINEAR):
        # at-least-linear growth makes F(k) * sum_{l<=k} 1/F(l) outgrow k
        sublin = FAILS

    sublin2, witness = FAILS, None
    for p in (1.0, 0.75, 0.55):
        u = Fg * s / (idx + 1) ** p
        w = u[-5:]
        if np.all(np.isfinite(w)) and np.min(w) > 1e-9 and w[-1] > 0.2 * np.max(w):
            sublin2, witness = HOLDS, p
            break

    try:
        ts2 = tail_sum(spec, 1, 2, tol=1e-8)
    except ToleranceUnreachable:
        ts2 = _INDETERMINATE
    sq = {"finite": HOLDS, "divergent": FAILS}.get(ts2.kind, INDETERMINATE)

    return RegimeClass(mono, pe, growth, growth_constant=gconst,
                       sublin_flag=sublin, sublin2_flag=sublin2, sublin2_witness=witness,
                       square_summable=sq,
                       sigma2=ts2.value if ts2.is_finite else None)


# ---------------------------------------------------------------------------
# time transform a(t) = int_{x0}^{x0+t} dx / F(floor(x)) and its inverse
# ---------------------------------------------------------------------------

_STEP_CACHE: dict = {}
_STEP_BUDGET = 10 ** 8


def _step_cumsum(spec: Feedback, x0: int, need: int) -> np.ndarray:
    """Cumulative sums S[m] = sum_{j=0}^{m-1} 1/F(x0+j), grown by doubling."""
    key = (spec, x0)
    cum = _STEP_CACHE.get(key)
    have = 0 if cum is None else len(cum) - 1
    if have >= need:
        return cum
    if need > _STEP_BUDGET:
        raise ToleranceUnreachable(
            f"step-exact transform capped at {_STEP_BUDGET} unit steps")
    n_new = max(2 * max(have, 1024), need)
    ks = np.arange(x0 + have, x0 + n_new, dtype=float)
    with np.errstate(all="ignore"):
        recip = np.exp(-log_values(spec, ks))
    base = 0.0 if cum is None else cum[-1]
    ext = base + np.cumsum(recip)
    cum = np.concatenate(([0.0], ext)) if cum is None else np.concatenate((cum, ext))
    _STEP_CACHE[key] = cum
    if len(_STEP_CACHE) > 64:
        _STEP_CACHE.pop(next(iter(_STEP_CACHE)))
    return cum


def a_transform(spec: Feedback, t: float, x0: int = 1) -> float:
    """a(t) under the right-continuous step extension F(x) = F(floor(x)).

    Exact partial sum of reciprocals plus the fractional endpoint term;
    strictly increasing in t.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if x0 < 1:
        raise ValueError("x0 must be >= 1")
    m = int(math.floor(t))
    frac = t - m
    cum = _step_cumsum(spec, x0, m + 1)
    val = float(cum[m])
    if frac > 0:
        val += frac * math.exp(-float(log_values(spec, np.array([x0 + m], dtype=float))[0]))
    return val


def a_inverse(spec: Feedback, y: float, x0: int = 1, mode: str = "step") -> float:
    """Inverse of the time transform: t with |a(t) - y| <= 1e-12 * max(1, y).

    mode="step" inverts the exact step integral by exponential bracketing
    of the cached partial sums, bisection to the bracketing unit step and
    linear interpolation inside it.  mode="continuum" inverts the smooth
    family formula instead (closed form for polynomial feedback), matching
    the integral of 1/F(x) without the step flooring.

    Raises OutOfRange when y is at or beyond the total mass a(inf).
    """
    if y < 0:
        raise ValueError("y must be >= 0")
    if mode == "continuum":
        return _a_cont_inverse(spec, y, x0)
    if isinstance(spec, (Constant, Log)):
        total = _DIVERGENT
    else:
        try:
            total = tail_sum(spec, x0, 1, tol=1e-12)
        except ToleranceUnreachable:
            total = _INDETERMINATE
    if total.is_finite and y >= total.value - total.error:
        raise OutOfRange(
            f"y={y} is not below the total transform mass {total.value:.6g}")
    if y == 0.0:
        return 0.0
    n = 1024
    while True:
        cum = _step_cumsum(spec, x0, n)
        if cum[-1] >= y:
            break
        n *= 2
    m = int(np.searchsorted(cum, y, side="right") - 1)
    remainder = y - float(cum[m])
    Fm = math.exp(float(log_values(spec, np.array([x0 + m], dtype=float))[0]))
    return m + remainder * Fm


# continuum-mode helpers (smooth formulas; used for the sub-linear limit
# cross-checks where the growth scale of the inverse is what matters)

def a_cont(spec: Feedback, t: float, x0: float = 1.0) -> float:
    """Integral of 1/F(x) over [x0, x0+t] for the smooth extension."""
    if isinstance(spec, Polynomial):
        a, b = spec.alpha, spec.beta
        hi, lo = x0 + t, x0
        if b == 1.0:
            return (math.log(hi) - math.log(lo)) / a
        return (hi ** (1 - b) - lo ** (1 - b)) / (a * (1 - b))
    if isinstance(spec, Exponential):
        a, b = spec.alpha, spec.beta
        if b == 0.0:
            return t / a
        return (math.exp(-b * x0) - math.exp(-b * (x0 + t))) / (a * b)
    if isinstance(spec, Constant):
        return t / spec.alpha
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _sint.IntegrationWarning)
        val, _ = _sint.quad(lambda x: 1.0 / float(cont_value(spec, x)), x0, x0 + t, limit=200)
    return val


def _a_cont_inverse(spec: Feedback, y: float, x0: float = 1.0) -> float:
    if isinstance(spec, Polynomial):
        a, b = spec.alpha, spec.beta
        if b == 1.0:
            return x0 * math.expm1(a * y)
        base = x0 ** (1 - b) + a * (1 - b) * y
        if base <= 0:
            raise OutOfRange(f"y={y} beyond the continuum mass for {spec!r}")
        return base ** (1.0 / (1 - b)) - x0
    if isinstance(spec, Constant):
        return spec.alpha * y
    if isinstance(spec, Exponential) and spec.beta != 0:
        a, b = spec.alpha, spec.beta
        inner = math.exp(-b * x0) - a * b * y
        if inner <= 0:
            raise OutOfRange(f"y={y} beyond the continuum mass for {spec!r}")
        return -math.log(inner) / b - x0
    # monotone bracketing + bisection on the numeric integral
    lo, hi = 0.0, 1.0
    while a_cont(spec, hi, x0) < y:
        hi *= 2
        if hi > 1e18:
            raise OutOfRange(f"y={y} appears to exceed the continuum mass for {spec!r}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if a_cont(spec, mid, x0) < y:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# logarithmic derivative d/dx log F(x)
# ---------------------------------------------------------------------------

def log_derivative(spec: Feedback, x: float) -> float:
    """d/dx log F(x) of the smooth extension at x > 0.

    Analytic for the built-in families; central finite differences with
    step h = x * 1e-6 for Custom specs.
    """
    if x <= 0:
        raise ValueError("x must be > 0")
    if isinstance(spec, Polynomial):
        return spec.beta / x
    if isinstance(spec, Exponential):
        return spec.beta
    if isinstance(spec, StretchedExp):
        return spec.beta * spec.gamma * x ** (spec.gamma - 1.0)
    if isinstance(spec, LogLinear):
        return 1.0 / x + spec.beta / ((x + 1.0) * math.log1p(x))
    if isinstance(spec, Log):
        return 1.0 / ((x + 1.0) * math.log1p(x))
    if isinstance(spec, Constant):
        return 0.0
    h = x * 1e-6
    with np.errstate(all="ignore"):
        hi = float(cont_value(spec, x + h))
        lo = float(cont_value(spec, x - h))
    if not (hi > 0 and lo > 0 and math.isfinite(hi) and math.isfinite(lo)):
        raise NotDifferentiable(
            f"finite-difference probe of {spec!r} non-finite near x={x}")
    return (math.log(hi) - math.log(lo)) / (2 * h)
