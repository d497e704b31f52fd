"""Minimal computer-algebra substrate for phase-space computations.

Expressions are immutable trees over named real variables with complex
rational coefficients.  The node set is deliberately small: constants,
variables, sums, products, integer powers, and the functions exp/sin/cos.
That is exactly the class needed downstream: polynomials multiplied by
exponentials of polynomial phases, with occasional trig factors.

Two layers live here:

* the user-facing tree (parse / print / differentiate / evaluate), and
* an internal normal form (expanded sum of monomial*atom products with
  exact coefficients) that powers ``simplify`` and ``is_zero``.

On the polynomial-times-exp(polynomial phase) class the normal form is a
decision procedure for zero: distinct exponential atoms are linearly
independent over the exact coefficient field, so a function is zero iff
every normal-form coefficient is zero.  Expressions containing sin/cos or
non-expandable reciprocals fall back to randomized evaluation, and the
verdict records which path decided.
"""

from __future__ import annotations

import cmath
import random
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence


class ExprError(Exception):
    """Base class for expression-layer errors."""


class ParseError(ExprError):
    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalError(ExprError):
    pass


# ---------------------------------------------------------------------------
# Exact complex rational coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QC:
    """A complex number with exact rational real and imaginary parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(value) -> "QC":
        if isinstance(value, QC):
            return value
        if isinstance(value, (int, Fraction)):
            return QC(Fraction(value), Fraction(0))
        if isinstance(value, float):
            return QC(Fraction(value), Fraction(0))
        if isinstance(value, complex):
            return QC(Fraction(value.real), Fraction(value.imag))
        raise TypeError(f"cannot build exact coefficient from {value!r}")

    def __add__(self, other: "QC") -> "QC":
        return QC(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "QC") -> "QC":
        return QC(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "QC":
        return QC(-self.re, -self.im)

    def __mul__(self, other: "QC") -> "QC":
        return QC(self.re * other.re - self.im * other.im,
                  self.re * other.im + self.im * other.re)

    def inverse(self) -> "QC":
        d = self.re * self.re + self.im * self.im
        if d == 0:
            raise ZeroDivisionError("division by zero coefficient")
        return QC(self.re / d, -self.im / d)

    def __truediv__(self, other: "QC") -> "QC":
        return self * other.inverse()

    def power(self, n: int) -> "QC":
        if n < 0:
            return self.inverse().power(-n)
        out = QC(Fraction(1))
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    @property
    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    @property
    def is_integer(self) -> bool:
        return self.im == 0 and self.re.denominator == 1

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def key(self):
        return (self.re.numerator, self.re.denominator,
                self.im.numerator, self.im.denominator)


QC_ZERO = QC()
QC_ONE = QC(Fraction(1))
QC_I = QC(Fraction(0), Fraction(1))


# ---------------------------------------------------------------------------
# Expression trees
# ---------------------------------------------------------------------------

class Expr:
    """Immutable expression node.  Supports arithmetic operators."""

    __slots__ = ()

    def __add__(self, other):
        return Sum((self, as_expr(other)))

    def __radd__(self, other):
        return Sum((as_expr(other), self))

    def __sub__(self, other):
        return Sum((self, Product((Const(QC(Fraction(-1))), as_expr(other)))))

    def __rsub__(self, other):
        return Sum((as_expr(other), Product((Const(QC(Fraction(-1))), self))))

    def __mul__(self, other):
        return Product((self, as_expr(other)))

    def __rmul__(self, other):
        return Product((as_expr(other), self))

    def __truediv__(self, other):
        return _divide(self, as_expr(other))

    def __rtruediv__(self, other):
        return _divide(as_expr(other), self)

    def __pow__(self, n):
        if not isinstance(n, int):
            raise ExprError("exponents must be integers")
        return Power(self, n)

    def __neg__(self):
        return Product((Const(QC(Fraction(-1))), self))

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"<expr {to_string(self)}>"


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: QC


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str


@dataclass(frozen=True, repr=False)
class Sum(Expr):
    terms: tuple


@dataclass(frozen=True, repr=False)
class Product(Expr):
    factors: tuple


@dataclass(frozen=True, repr=False)
class Power(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True, repr=False)
class Func(Expr):
    kind: str  # 'exp' | 'sin' | 'cos'
    arg: Expr


FUNCTIONS = ("exp", "sin", "cos")

ZERO = Const(QC_ZERO)
ONE = Const(QC_ONE)
I = Const(QC_I)


def const(value) -> Const:
    return Const(QC.of(value))


def var(name: str) -> Var:
    return Var(name)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return const(value)


def _divide(num: Expr, den: Expr) -> Expr:
    folded = _fold_constant(den)
    if folded is not None:
        if folded.is_zero:
            raise ExprError("division by zero")
        return Product((num, Const(folded.inverse())))
    return Product((num, Power(den, -1)))


def _fold_constant(e: Expr):
    """Return the QC value of a variable-free rational subtree, else None."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Sum):
        acc = QC_ZERO
        for t in e.terms:
            v = _fold_constant(t)
            if v is None:
                return None
            acc = acc + v
        return acc
    if isinstance(e, Product):
        acc = QC_ONE
        for f in e.factors:
            v = _fold_constant(f)
            if v is None:
                return None
            acc = acc * v
        return acc
    if isinstance(e, Power):
        v = _fold_constant(e.base)
        if v is None:
            return None
        if e.exponent < 0 and v.is_zero:
            raise ExprError("division by zero")
        return v.power(e.exponent)
    return None


def variables(e: Expr) -> frozenset:
    out = set()

    def walk(node):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Sum):
            for t in node.terms:
                walk(t)
        elif isinstance(node, Product):
            for f in node.factors:
                walk(f)
        elif isinstance(node, Power):
            walk(node.base)
        elif isinstance(node, Func):
            walk(node.arg)

    walk(e)
    return frozenset(out)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (simultaneous substitution)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, Sum):
        return Sum(tuple(substitute(t, mapping) for t in e.terms))
    if isinstance(e, Product):
        return Product(tuple(substitute(f, mapping) for f in e.factors))
    if isinstance(e, Power):
        return Power(substitute(e.base, mapping), e.exponent)
    if isinstance(e, Func):
        return Func(e.kind, substitute(e.arg, mapping))
    raise ExprError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_OPS = set("+-*/^()")


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch in _TOKEN_OPS:
            tokens.append((ch, ch, pos))
            pos += 1
            continue
        if ch.isdigit() or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            start = pos
            while pos < n and (text[pos].isdigit() or text[pos] == "."):
                pos += 1
            # scientific exponent
            if pos < n and text[pos] in "eE":
                look = pos + 1
                if look < n and text[look] in "+-":
                    look += 1
                if look < n and text[look].isdigit():
                    pos = look
                    while pos < n and text[pos].isdigit():
                        pos += 1
            tokens.append(("num", text[start:pos], start))
            continue
        if ch.isalpha() or ch == "_":
            start = pos
            while pos < n and (text[pos].isalnum() or text[pos] == "_"):
                pos += 1
            tokens.append(("name", text[start:pos], start))
            continue
        raise ParseError(f"unexpected character {ch!r}", pos)
    tokens.append(("end", "", n))
    return tokens


def _number_const(literal: str, pos: int) -> Const:
    try:
        return Const(QC(Fraction(Decimal(literal))))
    except InvalidOperation:
        raise ParseError(f"bad numeric literal {literal!r}", pos) from None


class _Parser:
    """Recursive-descent parser for the documented grammar.

    expr    := term (('+'|'-') term)*
    term    := factor (('*'|'/') factor)*
    factor  := ('+'|'-')* power
    power   := primary ('^' factor)?        -- exponent must fold to an integer
    primary := number | 'i' | name | name '(' expr ')' | '(' expr ')'
    """

    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind):
        tok = self.advance()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected trailing input {tok[1]!r}", tok[2])
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            t = self.term()
            terms.append(t if op == "+" else Product((Const(QC(Fraction(-1))), t)))
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()
            rhs = self.factor()
            if op[0] == "*":
                e = Product((e, rhs))
            else:
                try:
                    e = _divide(e, rhs)
                except ExprError as err:
                    raise ParseError(str(err), op[2]) from None
        return e

    def factor(self) -> Expr:
        sign = 1
        while self.peek()[0] in ("+", "-"):
            if self.advance()[0] == "-":
                sign = -sign
        e = self.power()
        if sign < 0:
            e = Product((Const(QC(Fraction(-1))), e))
        return e

    def power(self) -> Expr:
        base = self.primary()
        if self.peek()[0] == "^":
            tok = self.advance()
            exponent = self.factor()
            folded = _fold_constant(exponent)
            if folded is None or not folded.is_integer:
                raise ParseError("exponent must be an integer constant", tok[2])
            return Power(base, int(folded.re))
        return base

    def primary(self) -> Expr:
        tok = self.advance()
        kind, text, pos = tok
        if kind == "num":
            return _number_const(text, pos)
        if kind == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            if self.peek()[0] == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Func(text, arg)
            if text == "i":
                return I
            if text in FUNCTIONS:
                raise ParseError(f"{text!r} needs an argument list", pos)
            return Var(text)
        raise ParseError(f"unexpected token {text!r}", pos)


def parse(text: str) -> Expr:
    """Parse infix text into an Expression.

    Raises ParseError (with position) on syntax errors, unknown function
    names, non-integer exponents, and division by a zero literal.
    """
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

def _qc_string(v: QC) -> str:
    def frac(f: Fraction) -> str:
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"

    if v.im == 0:
        s = frac(v.re)
        return f"({s})" if v.re < 0 or v.re.denominator != 1 else s
    if v.re == 0:
        if v.im == 1:
            return "i"
        if v.im == -1:
            return "(-i)"
        return f"({frac(v.im)}*i)"
    sign = "-" if v.im < 0 else "+"
    imag = abs(v.im)
    istr = "i" if imag == 1 else f"{frac(imag)}*i"
    return f"({frac(v.re)} {sign} {istr})"


def to_string(e: Expr) -> str:
    """Deterministic infix form; parse(to_string(e)) is value-equal to e."""
    if isinstance(e, Const):
        return _qc_string(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sum):
        return " + ".join(_paren_for_sum(t) for t in e.terms)
    if isinstance(e, Product):
        return "*".join(_paren_for_product(f) for f in e.factors)
    if isinstance(e, Power):
        base = to_string(e.base)
        if not isinstance(e.base, (Var, Func)):
            base = f"({base})"
        return f"{base}^{e.exponent}" if e.exponent >= 0 else f"{base}^({e.exponent})"
    if isinstance(e, Func):
        return f"{e.kind}({to_string(e.arg)})"
    raise ExprError(f"unknown node {e!r}")


def _paren_for_sum(t: Expr) -> str:
    return to_string(t)


def _paren_for_product(f: Expr) -> str:
    s = to_string(f)
    return f"({s})" if isinstance(f, Sum) else s


# ---------------------------------------------------------------------------
# Differentiation (exact, on trees)
# ---------------------------------------------------------------------------

def differentiate(e: Expr, name: str) -> Expr:
    """Exact partial derivative; other variables are held constant."""
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == name else ZERO
    if isinstance(e, Sum):
        return Sum(tuple(differentiate(t, name) for t in e.terms))
    if isinstance(e, Product):
        pieces = []
        for k, f in enumerate(e.factors):
            df = differentiate(f, name)
            if df == ZERO:
                continue
            others = e.factors[:k] + e.factors[k + 1:] if df == ONE \
                else e.factors[:k] + (df,) + e.factors[k + 1:]
            pieces.append(others[0] if len(others) == 1 else Product(others))
        if not pieces:
            return ZERO
        return pieces[0] if len(pieces) == 1 else Sum(tuple(pieces))
    if isinstance(e, Power):
        if e.exponent == 0:
            return ZERO
        db = differentiate(e.base, name)
        if db == ZERO:
            return ZERO
        lead = Const(QC(Fraction(e.exponent)))
        inner = Power(e.base, e.exponent - 1) if e.exponent != 1 else None
        factors = [lead] + ([inner] if inner is not None else [])
        if db != ONE:
            factors.append(db)
        return factors[0] if len(factors) == 1 else Product(tuple(factors))
    if isinstance(e, Func):
        da = differentiate(e.arg, name)
        if da == ZERO:
            return ZERO
        if e.kind == "exp":
            outer = Func("exp", e.arg)
        elif e.kind == "sin":
            outer = Func("cos", e.arg)
        else:  # cos
            outer = Product((Const(QC(Fraction(-1))), Func("sin", e.arg)))
        return outer if da == ONE else Product((da, outer))
    raise ExprError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _eval_node(e: Expr, bindings: Mapping[str, object]):
    """Evaluate to QC where the subtree is exact-rational, else complex."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            v = bindings[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
        if isinstance(v, (int, Fraction)):
            return QC(Fraction(v))
        if isinstance(v, QC):
            return v
        if isinstance(v, float):
            return complex(v)
        return complex(v)
    if isinstance(e, Sum):
        acc = QC_ZERO
        for t in e.terms:
            acc = _acc_add(acc, _eval_node(t, bindings))
        return acc
    if isinstance(e, Product):
        acc = QC_ONE
        for f in e.factors:
            acc = _acc_mul(acc, _eval_node(f, bindings))
        return acc
    if isinstance(e, Power):
        b = _eval_node(e.base, bindings)
        if isinstance(b, QC):
            if e.exponent < 0 and b.is_zero:
                raise EvalError("zero raised to a negative power")
            return b.power(e.exponent)
        if e.exponent < 0 and b == 0:
            raise EvalError("zero raised to a negative power")
        return b ** e.exponent
    if isinstance(e, Func):
        a = _eval_node(e.arg, bindings)
        z = a.to_complex() if isinstance(a, QC) else a
        if e.kind == "exp":
            return cmath.exp(z)
        if e.kind == "sin":
            return cmath.sin(z)
        return cmath.cos(z)
    raise ExprError(f"unknown node {e!r}")


def _acc_add(a, b):
    if isinstance(a, QC) and isinstance(b, QC):
        return a + b
    az = a.to_complex() if isinstance(a, QC) else a
    bz = b.to_complex() if isinstance(b, QC) else b
    return az + bz


def _acc_mul(a, b):
    if isinstance(a, QC) and isinstance(b, QC):
        return a * b
    az = a.to_complex() if isinstance(a, QC) else a
    bz = b.to_complex() if isinstance(b, QC) else b
    return az * bz


def evaluate(e: Expr, bindings: Mapping[str, object]) -> complex:
    """Evaluate with the given variable bindings.

    Exact-rational subtrees are evaluated in exact arithmetic and converted
    to complex at the end.  Raises EvalError for unbound variables.
    """
    v = _eval_node(e, bindings)
    return v.to_complex() if isinstance(v, QC) else complex(v)


# ---------------------------------------------------------------------------
# Normal form
#
# An NF is a dict mapping TermKey -> QC coefficient, where
#   TermKey = (mono, atoms)
#   mono    = sorted tuple of (variable name, nonzero integer power)
#   atoms   = sorted tuple of atom keys:
#             ('exp', frozen-arg)            merged exponential factor
#             ('sin', frozen-arg, power)     trig factors, power may be negative
#             ('cos', frozen-arg, power)
#             ('pow', frozen-base, power)    non-expandable reciprocal powers
# Frozen arguments are normal forms rendered hashable/sortable.
# ---------------------------------------------------------------------------

def _freeze(nf: dict) -> tuple:
    return tuple(sorted((k, v.key()) for k, v in nf.items()))


def _thaw(frozen: tuple) -> dict:
    return {k: QC(Fraction(a, b), Fraction(c, d)) for k, (a, b, c, d) in frozen}


def _nf_const(v: QC) -> dict:
    return {} if v.is_zero else {((), ()): v}


def _nf_var(name: str) -> dict:
    return {(((name, 1),), ()): QC_ONE}


def _nf_add(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        s = out.get(k, QC_ZERO) + v
        if s.is_zero:
            out.pop(k, None)
        else:
            out[k] = s
    return out


def _nf_scale(a: dict, c: QC) -> dict:
    if c.is_zero:
        return {}
    return {k: v * c for k, v in a.items()}


def _merge_monos(m1, m2):
    powers = dict(m1)
    for name, p in m2:
        q = powers.get(name, 0) + p
        if q == 0:
            powers.pop(name, None)
        else:
            powers[name] = q
    return tuple(sorted(powers.items()))


def _merge_atoms(a1, a2):
    """Combine atom multisets; exp args add, like powers add.

    Returns (atoms, expansion) where expansion is an NF to multiply in when
    a 'pow' atom collapses to a nonnegative exponent.
    """
    exp_arg = {}
    trig = {}
    pows = {}

    def absorb(atom):
        if atom[0] == "exp":
            arg = _thaw(atom[1])
            for k, v in arg.items():
                s = exp_arg.get(k, QC_ZERO) + v
                if s.is_zero:
                    exp_arg.pop(k, None)
                else:
                    exp_arg[k] = s
        elif atom[0] in ("sin", "cos"):
            key = (atom[0], atom[1])
            trig[key] = trig.get(key, 0) + atom[2]
        else:  # pow
            key = atom[1]
            pows[key] = pows.get(key, 0) + atom[2]

    for atom in a1:
        absorb(atom)
    for atom in a2:
        absorb(atom)

    atoms = []
    if exp_arg:
        atoms.append(("exp", _freeze(exp_arg)))
    for (kind, arg), p in trig.items():
        if p != 0:
            atoms.append((kind, arg, p))
    expansion = None
    for base_key, p in pows.items():
        if p < 0:
            atoms.append(("pow", base_key, p))
        elif p > 0:
            grown = _nf_pow(_thaw(base_key), p)
            expansion = grown if expansion is None else _nf_mul(expansion, grown)
    return tuple(sorted(atoms)), expansion


def _nf_mul(a: dict, b: dict) -> dict:
    out = {}
    for (m1, at1), c1 in a.items():
        for (m2, at2), c2 in b.items():
            coeff = c1 * c2
            mono = _merge_monos(m1, m2)
            atoms, expansion = _merge_atoms(at1, at2)
            piece = {(mono, atoms): coeff}
            if expansion is not None:
                piece = _nf_mul(piece, expansion)
            for k, v in piece.items():
                s = out.get(k, QC_ZERO) + v
                if s.is_zero:
                    out.pop(k, None)
                else:
                    out[k] = s
    return out


def _nf_pow(a: dict, n: int) -> dict:
    if n == 0:
        return _nf_const(QC_ONE)
    if n < 0:
        if len(a) == 1:
            ((mono, atoms), coeff), = a.items()
            inv_mono = tuple((name, -p) for name, p in mono)
            inv_atoms = []
            for atom in atoms:
                if atom[0] == "exp":
                    inv_atoms.append(("exp", _freeze(_nf_scale(_thaw(atom[1]), QC(Fraction(-1))))))
                else:
                    inv_atoms.append((atom[0], atom[1], -atom[2]))
            one = {(tuple(sorted(inv_mono)), tuple(sorted(inv_atoms))): coeff.inverse()}
            return _nf_pow(one, -n)
        if not a:
            raise ExprError("division by zero expression")
        base_key = _freeze(a)
        return {((), (("pow", base_key, n),)): QC_ONE}
    out = _nf_const(QC_ONE)
    base = a
    while n:
        if n & 1:
            out = _nf_mul(out, base)
        base = _nf_mul(base, base) if n > 1 else base
        n >>= 1
    return out


def _nf_func(kind: str, arg_nf: dict) -> dict:
    if kind == "exp":
        if not arg_nf:
            return _nf_const(QC_ONE)
        return {((), (("exp", _freeze(arg_nf)),)): QC_ONE}
    if not arg_nf and kind == "sin":
        return {}
    if not arg_nf and kind == "cos":
        return _nf_const(QC_ONE)
    return {((), ((kind, _freeze(arg_nf), 1),)): QC_ONE}


def normal_form(e: Expr) -> dict:
    if isinstance(e, Const):
        return _nf_const(e.value)
    if isinstance(e, Var):
        return _nf_var(e.name)
    if isinstance(e, Sum):
        out = {}
        for t in e.terms:
            out = _nf_add(out, normal_form(t))
        return out
    if isinstance(e, Product):
        out = _nf_const(QC_ONE)
        for f in e.factors:
            out = _nf_mul(out, normal_form(f))
        return out
    if isinstance(e, Power):
        return _nf_pow(normal_form(e.base), e.exponent)
    if isinstance(e, Func):
        return _nf_func(e.kind, normal_form(e.arg))
    raise ExprError(f"unknown node {e!r}")


def _atom_to_expr(atom) -> Expr:
    if atom[0] == "exp":
        return Func("exp", nf_to_expr(_thaw(atom[1])))
    if atom[0] in ("sin", "cos"):
        f = Func(atom[0], nf_to_expr(_thaw(atom[1])))
        return f if atom[2] == 1 else Power(f, atom[2])
    base = nf_to_expr(_thaw(atom[1]))
    return Power(base, atom[2])


def nf_to_expr(nf: dict) -> Expr:
    if not nf:
        return ZERO
    terms = []
    for (mono, atoms) in sorted(nf.keys()):
        coeff = nf[(mono, atoms)]
        factors = []
        if coeff != QC_ONE or (not mono and not atoms):
            factors.append(Const(coeff))
        for name, p in mono:
            factors.append(Var(name) if p == 1 else Power(Var(name), p))
        for atom in atoms:
            factors.append(_atom_to_expr(atom))
        terms.append(factors[0] if len(factors) == 1 else Product(tuple(factors)))
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


def simplify(e: Expr) -> Expr:
    """Expand to the canonical sum-of-products form and rebuild a tree."""
    return nf_to_expr(normal_form(e))


def nf_diff(nf: dict, name: str) -> dict:
    """Partial derivative computed directly on a normal form.

    Keeps iterated derivatives compact (no tree re-expansion), which the
    bidifferential contractions rely on at higher orders.
    """
    out = {}
    for (mono, atoms), coeff in nf.items():
        # monomial part
        for idx, (vname, p) in enumerate(mono):
            if vname != name:
                continue
            new_mono = list(mono)
            if p == 1:
                del new_mono[idx]
            else:
                new_mono[idx] = (vname, p - 1)
            piece = {(tuple(new_mono), atoms): coeff * QC(Fraction(p))}
            out = _nf_add(out, piece)
        # atom part
        for idx, atom in enumerate(atoms):
            arg = _thaw(atom[1])
            darg = nf_diff(arg, name)
            if not darg:
                continue
            rest = atoms[:idx] + atoms[idx + 1:]
            if atom[0] == "exp":
                base = {(mono, atoms): coeff}
                out = _nf_add(out, _nf_mul(base, darg))
            elif atom[0] in ("sin", "cos"):
                p = atom[2]
                partner = "cos" if atom[0] == "sin" else "sin"
                lowered = [] if p == 1 else [(atom[0], atom[1], p - 1)]
                raised = [(partner, atom[1], 1)]
                merged, expansion = _merge_atoms(tuple(rest), tuple(lowered + raised))
                sign = Fraction(p) if atom[0] == "sin" else Fraction(-p)
                piece = {(mono, merged): coeff * QC(sign)}
                if expansion is not None:
                    piece = _nf_mul(piece, expansion)
                out = _nf_add(out, _nf_mul(piece, darg))
            else:  # pow
                p = atom[2]
                merged, expansion = _merge_atoms(tuple(rest), (("pow", atom[1], p - 1),))
                piece = {(mono, merged): coeff * QC(Fraction(p))}
                if expansion is not None:
                    piece = _nf_mul(piece, expansion)
                out = _nf_add(out, _nf_mul(piece, darg))
    return out


# public aliases for normal-form arithmetic used by the star-product layer
nf_add = _nf_add
nf_mul = _nf_mul
nf_scale = _nf_scale
nf_pow = _nf_pow
nf_freeze = _freeze
nf_thaw = _thaw


def evaluate_exact(e: Expr, bindings: Mapping[str, object]) -> QC:
    """Evaluate with exact rational bindings, staying in exact arithmetic.

    Transcendental nodes are only admitted at special exact points
    (exp(0)=1, sin(0)=0, cos(0)=1); anything else raises EvalError so the
    caller can fall back to floating evaluation.
    """
    exact_bindings = {k: QC.of(v) for k, v in bindings.items()}

    def walk(node) -> QC:
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Var):
            try:
                return exact_bindings[node.name]
            except KeyError:
                raise EvalError(f"unbound variable {node.name!r}") from None
        if isinstance(node, Sum):
            acc = QC_ZERO
            for t in node.terms:
                acc = acc + walk(t)
            return acc
        if isinstance(node, Product):
            acc = QC_ONE
            for f in node.factors:
                acc = acc * walk(f)
            return acc
        if isinstance(node, Power):
            return walk(node.base).power(node.exponent)
        if isinstance(node, Func):
            a = walk(node.arg)
            if not a.is_zero:
                raise EvalError("transcendental value is not exactly representable")
            return QC_ZERO if node.kind == "sin" else QC_ONE
        raise ExprError(f"unknown node {node!r}")

    return walk(e)


def _nf_decidable(nf: dict) -> bool:
    """True when zero-testing by normal form is a proof on this input.

    Requires every atom to be an exponential whose argument is itself a
    pure polynomial (atom-free) normal form: distinct such exponentials
    are linearly independent over exact complex rationals.
    """
    for (mono, atoms) in nf.keys():
        for atom in atoms:
            if atom[0] != "exp":
                return False
            for (amono, aatoms), _ in _thaw(atom[1]).items():
                if aatoms:
                    return False
                if any(p < 0 for _, p in amono):
                    return False
        if any(p < 0 for _, p in mono):
            return False
    return True


@dataclass(frozen=True)
class ZeroVerdict:
    """Outcome of a zero test: truth value plus which path decided it."""

    value: bool
    decided_by: str  # 'symbolic' | 'numeric'
    max_abs: float = 0.0
    seed: int = 0

    def __bool__(self):
        return self.value


DEFAULT_ZERO_SEED = 20210
ZERO_SAMPLES = 32
ZERO_THRESHOLD = 1e-10


def is_zero(e: Expr, seed: int = DEFAULT_ZERO_SEED,
            samples: int = ZERO_SAMPLES,
            threshold: float = ZERO_THRESHOLD) -> ZeroVerdict:
    """Decide whether an expression is identically zero.

    Symbolically when the normal form lies in the decidable class
    (polynomials times exponentials of polynomial phases); otherwise by
    evaluation at `samples` seeded random points in [-2, 2]^n with the
    given threshold.  The verdict reports which path decided.
    """
    nf = normal_form(e)
    if not nf:
        return ZeroVerdict(True, "symbolic")
    if _nf_decidable(nf):
        return ZeroVerdict(False, "symbolic")
    names = sorted(variables(e))
    rng = random.Random(seed)
    worst = 0.0
    for _ in range(max(1, samples)):
        bindings = {n: rng.uniform(-2.0, 2.0) for n in names}
        try:
            v = abs(evaluate(e, bindings))
        except EvalError:
            continue
        worst = max(worst, v)
    return ZeroVerdict(worst <= threshold, "numeric", worst, seed)


# ---------------------------------------------------------------------------
# Vectorized evaluation over numpy arrays
# ---------------------------------------------------------------------------

def compile_evaluator(e: Expr, names: Sequence[str]) -> Callable:
    """Compile to a function of numpy arrays (one per name, broadcastable).

    Used on grid-heavy paths where per-point tree walks would dominate.
    """
    import numpy as np

    index = {n: k for k, n in enumerate(names)}
    missing = variables(e) - set(names)
    if missing:
        raise EvalError(f"unbound variables {sorted(missing)}")
    nf = normal_form(e)

    compiled_terms = []
    for (mono, atoms), coeff in sorted(nf.items()):
        atom_fns = []
        for atom in atoms:
            if atom[0] == "exp":
                inner = compile_evaluator(nf_to_expr(_thaw(atom[1])), names)
                atom_fns.append(lambda args, f=inner: np.exp(f(*args)))
            elif atom[0] in ("sin", "cos"):
                inner = compile_evaluator(nf_to_expr(_thaw(atom[1])), names)
                trig = np.sin if atom[0] == "sin" else np.cos
                p = atom[2]
                atom_fns.append(lambda args, f=inner, t=trig, p=p: t(f(*args)) ** p)
            else:
                inner = compile_evaluator(nf_to_expr(_thaw(atom[1])), names)
                p = atom[2]
                atom_fns.append(lambda args, f=inner, p=p: f(*args) ** (1.0 * p))
        compiled_terms.append((coeff.to_complex(), mono, atom_fns))

    def run(*arrays):
        if len(arrays) != len(names):
            raise EvalError(f"expected {len(names)} arrays, got {len(arrays)}")
        shape = np.broadcast(*[np.asarray(a) for a in arrays]).shape if arrays else ()
        total = np.zeros(shape, dtype=complex)
        for coeff, mono, atom_fns in compiled_terms:
            term = np.full(shape, coeff, dtype=complex)
            for name, p in mono:
                term = term * np.asarray(arrays[index[name]]) ** p
            for fn in atom_fns:
                term = term * fn(arrays)
            total = total + term
        return total

    return run
