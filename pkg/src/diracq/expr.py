"""Exact symbolic scalars.

An :class:`Expr` is a rational function over the rationals in coordinate and
parameter symbols, extended by the opaque transcendental atoms ``exp``, ``sin``
and ``cos`` (and the constant ``pi``).  The rational fragment has a canonical
reduced numerator/denominator form; transcendental atoms are treated as extra
generators that are closed under differentiation but never rewritten (in
particular ``sin(x)**2 + cos(x)**2`` is *not* folded to ``1``).  Equality on
the transcendental fragment is decided probabilistically by exact-rational
seeding of high-precision evaluation.

Semantics are generic-point: two rational functions are equal when they agree
off their pole sets, so ``x/x`` normalizes to ``1``.  Values are immutable and
all operations are pure functions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

import mpmath
import sympy as sp

__all__ = [
    "Expr",
    "ComplexExpr",
    "Point",
    "ExprError",
    "SingularPointError",
    "UnknownSymbolError",
    "symbol",
    "rational",
    "integer",
    "as_expr",
    "complex_equal",
    "complex_is_zero",
    "PI",
    "ZERO",
    "ONE",
    "I",
    "differentiate",
    "normalize",
    "equal",
    "is_zero",
    "evaluate",
    "random_rational",
    "equality_config",
    "set_equality_config",
    "get_equality_config",
]

Scalar = Union["Expr", "ComplexExpr", int, Fraction]

# Working precision for transcendental evaluation: ~100 bits, comfortably
# above the required 64 fractional bits.
_EVAL_DIGITS = 30

_ATOM_HEADS = (sp.exp, sp.sin, sp.cos)


class ExprError(Exception):
    """Raised on malformed symbolic input (zero denominators, bad nodes)."""


class SingularPointError(ExprError):
    """Raised when an evaluation point lies on a pole."""


class UnknownSymbolError(ExprError):
    """Raised when a symbol is not declared in the active chart."""

    def __init__(self, name: str):
        super().__init__(f"unknown symbol {name!r}")
        self.name = name


def symbol(name: str) -> sp.Symbol:
    """The (real) sympy symbol used for a coordinate or parameter."""
    return sp.Symbol(name, real=True)


def _check_tree(node: sp.Expr) -> None:
    if node.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise ExprError("division by the zero expression")


def _coerce(value) -> sp.Expr:
    if isinstance(value, Expr):
        return value.node
    if isinstance(value, bool):
        raise ExprError("booleans are not scalars")
    if isinstance(value, int):
        return sp.Integer(value)
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    if isinstance(value, sp.Expr):
        return value
    raise ExprError(f"cannot interpret {value!r} as an exact scalar")


@dataclass(frozen=True)
class Expr:
    """Immutable exact scalar; arithmetic via the usual operators."""

    node: sp.Expr

    def __post_init__(self):
        _check_tree(self.node)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other) -> "Expr":
        if isinstance(other, ComplexExpr):
            return NotImplemented
        return Expr(self.node + _coerce(other))

    __radd__ = __add__

    def __sub__(self, other) -> "Expr":
        if isinstance(other, ComplexExpr):
            return NotImplemented
        return Expr(self.node - _coerce(other))

    def __rsub__(self, other) -> "Expr":
        return Expr(_coerce(other) - self.node)

    def __mul__(self, other) -> "Expr":
        if isinstance(other, ComplexExpr):
            return NotImplemented
        return Expr(self.node * _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Expr":
        if isinstance(other, ComplexExpr):
            return NotImplemented
        return Expr(self.node / _coerce(other))

    def __rtruediv__(self, other) -> "Expr":
        return Expr(_coerce(other) / self.node)

    def __pow__(self, exponent: int) -> "Expr":
        if not isinstance(exponent, int):
            raise ExprError("only integer exponents are supported")
        return Expr(self.node ** exponent)

    def __neg__(self) -> "Expr":
        return Expr(-self.node)

    # -- calculus -----------------------------------------------------------

    def diff(self, sym: sp.Symbol) -> "Expr":
        return Expr(sp.diff(self.node, sym))

    def subs(self, mapping: Mapping[sp.Symbol, sp.Expr]) -> "Expr":
        out = self.node.subs(mapping, simultaneous=True)
        _check_tree(out)
        return Expr(out)

    @property
    def free_symbols(self) -> frozenset:
        return frozenset(self.node.free_symbols)

    def is_rational_fragment(self) -> bool:
        """True when no transcendental atom or constant (pi, e) occurs."""
        return not self.node.has(*_ATOM_HEADS, sp.pi, sp.E)

    def __str__(self) -> str:
        return sp.sstr(self.node)

    def __repr__(self) -> str:
        return f"Expr({sp.sstr(self.node)})"


ZERO = Expr(sp.Integer(0))
ONE = Expr(sp.Integer(1))
PI = Expr(sp.pi)


def rational(p: int, q: int = 1) -> Expr:
    if q == 0:
        raise ExprError("division by the zero expression")
    return Expr(sp.Rational(p, q))


def integer(n: int) -> Expr:
    return Expr(sp.Integer(n))


def as_expr(value) -> Expr:
    return value if isinstance(value, Expr) else Expr(_coerce(value))


# ---------------------------------------------------------------------------
# normalize / differentiate / evaluate / equal


def _canonical(node: sp.Expr) -> sp.Expr:
    """Bottom-up canonical form: atom arguments normalized, then one
    rational cancellation over the atoms-as-generators field."""
    def walk(m: sp.Expr) -> sp.Expr:
        if not m.args:
            return m
        rebuilt = m.func(*[walk(a) for a in m.args])
        if isinstance(rebuilt, _ATOM_HEADS):
            rebuilt = rebuilt.func(sp.cancel(rebuilt.args[0]))
        return rebuilt

    out = sp.cancel(walk(node))
    _check_tree(out)
    return out


def normalize(e: Expr) -> Expr:
    """Canonical reduced form of the rational fragment.

    Idempotent; zero is represented uniquely; sums and products are flattened
    and sorted under sympy's fixed total node order.
    """
    return Expr(_canonical(as_expr(e).node))


def differentiate(e: Expr, sym: sp.Symbol) -> Expr:
    """Partial derivative, with the chain rule through transcendental atoms."""
    return as_expr(e).diff(sym)


@dataclass(frozen=True)
class Point:
    """Exact rational values for every coordinate and parameter of a chart."""

    chart: str
    values: Mapping[str, Fraction]

    def substitution(self) -> dict:
        return {
            symbol(name): sp.Rational(v.numerator, v.denominator)
            for name, v in self.values.items()
        }


def _to_mpf(value: sp.Expr) -> mpmath.mpf:
    with mpmath.workdps(_EVAL_DIGITS):
        f = sp.Float(value, _EVAL_DIGITS)
        return mpmath.mpf(f._mpf_)


def evaluate(e: Expr, point: Point):
    """Exact :class:`Fraction` on the rational fragment, high-precision
    ``mpmath.mpf`` otherwise.  Poles raise :class:`SingularPointError`."""
    e = as_expr(e)
    subs = point.substitution()
    missing = {s for s in e.free_symbols if s not in subs}
    if missing:
        names = ", ".join(sorted(str(s) for s in missing))
        raise UnknownSymbolError(names)
    try:
        ex = e.node.subs(subs, simultaneous=True)
    except ZeroDivisionError as err:  # sympy raises on 0**-1 directly
        raise SingularPointError(f"singular at point {point.values}") from err
    if ex.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise SingularPointError(f"singular at point {point.values}")
    if e.is_rational_fragment():
        if not ex.is_Rational:
            raise ExprError(f"expected a rational value, got {ex}")
        return Fraction(int(ex.p), int(ex.q))
    val = ex.evalf(_EVAL_DIGITS)
    if not val.is_number or val.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise SingularPointError(f"singular at point {point.values}")
    return _to_mpf(val)


# -- probabilistic equality --------------------------------------------------


@dataclass
class EqualityConfig:
    trials: int = 20
    seed: int = 0
    tolerance: float = 1e-9
    bound: int = 10**4
    retries: int = 8


_CONFIG = EqualityConfig()


def get_equality_config() -> EqualityConfig:
    return _CONFIG


def set_equality_config(*, trials: int | None = None, seed: int | None = None,
                        tolerance: float | None = None) -> None:
    if trials is not None:
        _CONFIG.trials = trials
    if seed is not None:
        _CONFIG.seed = seed
    if tolerance is not None:
        _CONFIG.tolerance = tolerance


class equality_config:
    """Context manager scoping the equality seed/trials (used by the CLI)."""

    def __init__(self, *, trials: int | None = None, seed: int | None = None):
        self._new = (trials, seed)
        self._old: tuple[int, int] | None = None

    def __enter__(self):
        self._old = (_CONFIG.trials, _CONFIG.seed)
        trials, seed = self._new
        set_equality_config(trials=trials, seed=seed)
        return self

    def __exit__(self, *exc):
        set_equality_config(trials=self._old[0], seed=self._old[1])
        return False


def random_rational(rng: random.Random, bound: int | None = None) -> Fraction:
    """A random rational with numerator/denominator bounded by ``bound``."""
    bound = bound or _CONFIG.bound
    num = rng.randint(-bound, bound)
    den = rng.randint(1, bound)
    return Fraction(num, den)


def _sample_point(rng: random.Random, symbols) -> dict:
    return {s: sp.Rational(random_rational(rng)) for s in symbols}


def _probabilistic_equal(lhs: sp.Expr, rhs: sp.Expr, *, trials: int, seed: int,
                         tolerance: float) -> bool:
    """Compare two scalars at ``trials`` random rational points.

    Exact rational arithmetic decides the rational fragment; otherwise the
    comparison is high-precision floating point with a relative tolerance.
    Sample points on a pole are resampled a bounded number of times.
    """
    diff = lhs - rhs
    symbols = sorted(diff.free_symbols, key=str)
    rng = random.Random(seed)
    rational_only = not diff.has(*_ATOM_HEADS) and not diff.has(sp.pi)
    for _ in range(trials):
        for _attempt in range(_CONFIG.retries + 1):
            subs = _sample_point(rng, symbols)
            try:
                value = diff.subs(subs, simultaneous=True)
                sides = (lhs.subs(subs, simultaneous=True),
                         rhs.subs(subs, simultaneous=True))
            except ZeroDivisionError:
                continue
            if any(v.has(sp.zoo, sp.nan, sp.oo, -sp.oo) for v in (value, *sides)):
                continue
            break
        else:
            raise SingularPointError(
                "could not find a pole-free sample point for equality testing")
        if rational_only:
            if value != 0:
                return False
            continue
        approx = value.evalf(_EVAL_DIGITS)
        if not approx.is_number:
            raise ExprError(f"cannot evaluate {diff} numerically")
        scale = max(
            1.0,
            *(abs(float(v.evalf(_EVAL_DIGITS))) for v in sides if v.is_number),
        )
        if abs(float(approx)) > tolerance * scale:
            return False
    return True


def equal(e1, e2, *, trials: int | None = None, seed: int | None = None) -> bool:
    """Semantic equality: canonical on the rational fragment, probabilistic
    (exact rational sampling / high-precision evaluation) otherwise."""
    lhs, rhs = as_expr(e1).node, as_expr(e2).node
    diff = _canonical(lhs - rhs)
    if diff == 0:
        return True
    # pi is transcendental over Q, so polynomial identities in pi are decided
    # canonically along with the plain rational fragment.
    if not diff.has(*_ATOM_HEADS):
        return False
    return _probabilistic_equal(
        lhs, rhs,
        trials=trials if trials is not None else _CONFIG.trials,
        seed=seed if seed is not None else _CONFIG.seed,
        tolerance=_CONFIG.tolerance,
    )


def is_zero(e) -> bool:
    return equal(e, ZERO)


# ---------------------------------------------------------------------------
# complex scalars


@dataclass(frozen=True)
class ComplexExpr:
    """Complex scalar modeled as an exact (re, im) pair."""

    re: Expr
    im: Expr

    @staticmethod
    def of(value) -> "ComplexExpr":
        if isinstance(value, ComplexExpr):
            return value
        return ComplexExpr(as_expr(value), ZERO)

    def conj(self) -> "ComplexExpr":
        return ComplexExpr(self.re, -self.im)

    def __add__(self, other) -> "ComplexExpr":
        other = ComplexExpr.of(other)
        return ComplexExpr(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other) -> "ComplexExpr":
        other = ComplexExpr.of(other)
        return ComplexExpr(self.re - other.re, self.im - other.im)

    def __rsub__(self, other) -> "ComplexExpr":
        return ComplexExpr.of(other) - self

    def __mul__(self, other) -> "ComplexExpr":
        other = ComplexExpr.of(other)
        return ComplexExpr(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ComplexExpr":
        other = ComplexExpr.of(other)
        norm = other.re * other.re + other.im * other.im
        num = self * other.conj()
        return ComplexExpr(num.re / norm, num.im / norm)

    def __rtruediv__(self, other) -> "ComplexExpr":
        return ComplexExpr.of(other) / self

    def __neg__(self) -> "ComplexExpr":
        return ComplexExpr(-self.re, -self.im)

    def diff(self, sym: sp.Symbol) -> "ComplexExpr":
        return ComplexExpr(self.re.diff(sym), self.im.diff(sym))

    def __str__(self) -> str:
        return f"({self.re}) + i*({self.im})"


I = ComplexExpr(ZERO, ONE)


def complex_equal(z1, z2, **kw) -> bool:
    z1, z2 = ComplexExpr.of(z1), ComplexExpr.of(z2)
    return equal(z1.re, z2.re, **kw) and equal(z1.im, z2.im, **kw)


def complex_is_zero(z) -> bool:
    return complex_equal(z, ComplexExpr(ZERO, ZERO))
