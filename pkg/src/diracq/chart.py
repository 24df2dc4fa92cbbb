"""Tensor calculus on a single coordinate chart.

Vector fields, k-forms and k-vectors carry exact :class:`~diracq.expr.Expr`
coefficients over the coordinate frame.  Antisymmetric objects store one
coefficient per strictly increasing index tuple, with the determinant pairing
convention ``(dx1 ^ dx2)(X, Y) = X1*Y2 - X2*Y1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

import sympy as sp

from .expr import (
    ComplexExpr,
    Expr,
    ExprError,
    UnknownSymbolError,
    ZERO,
    as_expr,
    is_zero,
    symbol,
)

__all__ = [
    "Chart",
    "VectorField",
    "KForm",
    "KVector",
    "AlphaDensity",
    "ChartMismatchError",
    "exterior_derivative",
    "interior_product",
    "lie_derivative_form",
    "contravariant_derivative",
    "lie_derivative_density",
]


class ChartMismatchError(ExprError):
    pass


def _require_same_chart(*objects) -> "Chart":
    chart = objects[0].chart
    for obj in objects[1:]:
        if obj.chart != chart:
            raise ChartMismatchError(
                f"chart mismatch: {obj.chart.name} vs {chart.name}")
    return chart


@dataclass(frozen=True)
class Chart:
    """A named coordinate chart with ordered coordinates and parameters."""

    name: str
    coord_names: tuple[str, ...]
    param_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.coord_names) < 1:
            raise ExprError("a chart needs at least one coordinate")
        names = self.coord_names + self.param_names
        if len(set(names)) != len(names):
            raise ExprError("coordinate/parameter names must be distinct")

    @property
    def dim(self) -> int:
        return len(self.coord_names)

    @property
    def coords(self) -> tuple[sp.Symbol, ...]:
        return tuple(symbol(n) for n in self.coord_names)

    @property
    def params(self) -> tuple[sp.Symbol, ...]:
        return tuple(symbol(n) for n in self.param_names)

    def coordinate(self, i: int) -> sp.Symbol:
        return self.coords[i]

    def diff(self, e: Expr, name: Union[str, sp.Symbol]) -> Expr:
        sym = symbol(name) if isinstance(name, str) else name
        if str(sym) not in self.coord_names:
            raise UnknownSymbolError(str(sym))
        return as_expr(e).diff(sym)

    def extend(self, extra: str) -> "Chart":
        """The product chart with one extra coordinate appended."""
        if extra in self.coord_names + self.param_names:
            raise ExprError(f"coordinate {extra!r} already declared")
        return Chart(f"{self.name}x{extra}",
                     self.coord_names + (extra,), self.param_names)

    def basis_vector(self, i: int) -> "VectorField":
        comps = [ZERO] * self.dim
        comps[i] = as_expr(1)
        return VectorField(self, tuple(comps))

    def basis_covector(self, i: int) -> "KForm":
        return KForm(self, 1, {(i,): as_expr(1)})

    def scalar_form(self, e) -> "KForm":
        return KForm(self, 0, {(): as_expr(e)})


def _apply_scalar(components: Sequence[Expr], chart: Chart, f):
    """Directional derivative sum(X_i * d f / dx_i); f real or complex."""
    if isinstance(f, ComplexExpr):
        return ComplexExpr(_apply_scalar(components, chart, f.re),
                           _apply_scalar(components, chart, f.im))
    f = as_expr(f)
    out = ZERO
    for comp, sym in zip(components, chart.coords):
        out = out + comp * f.diff(sym)
    return out


@dataclass(frozen=True)
class VectorField:
    chart: Chart
    components: tuple[Expr, ...]

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ExprError("component count must match the chart dimension")

    def apply(self, f):
        return _apply_scalar(self.components, self.chart, f)

    def lie_bracket(self, other: "VectorField") -> "VectorField":
        _require_same_chart(self, other)
        comps = tuple(self.apply(c) - other.apply(d)
                      for d, c in zip(self.components, other.components))
        return VectorField(self.chart, comps)

    def divergence(self) -> Expr:
        out = ZERO
        for comp, sym in zip(self.components, self.chart.coords):
            out = out + comp.diff(sym)
        return out

    def __add__(self, other: "VectorField") -> "VectorField":
        _require_same_chart(self, other)
        return VectorField(self.chart, tuple(a + b for a, b in
                                             zip(self.components, other.components)))

    def __sub__(self, other: "VectorField") -> "VectorField":
        return self + (-other)

    def __neg__(self) -> "VectorField":
        return VectorField(self.chart, tuple(-c for c in self.components))

    def scale(self, factor) -> "VectorField":
        factor = as_expr(factor)
        return VectorField(self.chart, tuple(factor * c for c in self.components))

    def is_zero_field(self) -> bool:
        return all(is_zero(c) for c in self.components)

    def __str__(self) -> str:
        terms = [f"({c})*d_{n}" for c, n in zip(self.components, self.chart.coord_names)
                 if c.node != 0]
        return " + ".join(terms) if terms else "0"


def _det(rows: list[list[Expr]]) -> Expr:
    n = len(rows)
    if n == 0:
        return as_expr(1)
    if n == 1:
        return rows[0][0]
    out = ZERO
    for j in range(n):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = rows[0][j] * _det(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


def _merge_sign(left: tuple[int, ...], right: tuple[int, ...]):
    """Sorted merge of two increasing disjoint tuples with permutation sign."""
    combined = left + right
    if len(set(combined)) != len(combined):
        return None, 0
    inversions = sum(1 for a, b in itertools.combinations(combined, 2) if a > b)
    return tuple(sorted(combined)), (-1) ** inversions


class _Alternating:
    """Shared storage/arithmetic for k-forms and k-vectors."""

    def __init__(self, chart: Chart, degree: int, coeffs: Mapping):
        if degree < 0:
            raise ExprError("negative degree")
        clean = {}
        for key, value in coeffs.items():
            key = tuple(key)
            if len(key) != degree or list(key) != sorted(set(key)):
                raise ExprError(f"index tuple {key} is not strictly increasing")
            if any(i < 0 or i >= chart.dim for i in key):
                raise ExprError(f"index tuple {key} out of range")
            value = as_expr(value)
            if value.node != 0:
                clean[key] = value
        if degree > chart.dim and clean:
            raise ExprError("degree exceeds the chart dimension")
        self.chart = chart
        self.degree = degree
        self.coeffs = clean

    def coeff(self, key: Iterable[int]) -> Expr:
        return self.coeffs.get(tuple(key), ZERO)

    def __eq__(self, other) -> bool:
        return (type(self) is type(other) and self.chart == other.chart
                and self.degree == other.degree and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((type(self).__name__, self.chart, self.degree,
                     tuple(sorted(self.coeffs.items(), key=lambda kv: kv[0]))))

    def _combine(self, other, sign: int):
        _require_same_chart(self, other)
        if self.degree != other.degree:
            raise ExprError("degree mismatch")
        keys = set(self.coeffs) | set(other.coeffs)
        if sign > 0:
            return {k: self.coeff(k) + other.coeff(k) for k in keys}
        return {k: self.coeff(k) - other.coeff(k) for k in keys}

    def is_zero_tensor(self) -> bool:
        return all(is_zero(c) for c in self.coeffs.values())

    def _wedge_coeffs(self, other) -> dict:
        out: dict[tuple[int, ...], Expr] = {}
        for key1, c1 in self.coeffs.items():
            for key2, c2 in other.coeffs.items():
                merged, sign = _merge_sign(key1, key2)
                if merged is None:
                    continue
                term = c1 * c2 if sign > 0 else -(c1 * c2)
                out[merged] = out.get(merged, ZERO) + term
        return out

    def _str(self, prefix: str, names) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for key in sorted(self.coeffs):
            basis = "/\\".join(f"{prefix}{names[i]}" for i in key) or "1"
            parts.append(f"({self.coeffs[key]})*{basis}")
        return " + ".join(parts)


class KForm(_Alternating):
    """Differential k-form with exact coefficients."""

    def __add__(self, other: "KForm") -> "KForm":
        return KForm(self.chart, self.degree, self._combine(other, +1))

    def __sub__(self, other: "KForm") -> "KForm":
        return KForm(self.chart, self.degree, self._combine(other, -1))

    def __neg__(self) -> "KForm":
        return KForm(self.chart, self.degree,
                     {k: -v for k, v in self.coeffs.items()})

    def scale(self, factor) -> "KForm":
        factor = as_expr(factor)
        return KForm(self.chart, self.degree,
                     {k: factor * v for k, v in self.coeffs.items()})

    def wedge(self, other: "KForm") -> "KForm":
        _require_same_chart(self, other)
        return KForm(self.chart, self.degree + other.degree,
                     self._wedge_coeffs(other))

    def evaluate(self, vectors: Sequence[VectorField]) -> Expr:
        if len(vectors) != self.degree:
            raise ExprError("argument count must equal the degree")
        if self.degree == 0:
            return self.coeff(())
        out = ZERO
        for key, c in self.coeffs.items():
            rows = [[v.components[i] for i in key] for v in vectors]
            out = out + c * _det(rows)
        return out

    def __call__(self, *vectors: VectorField) -> Expr:
        return self.evaluate(vectors)

    def __str__(self) -> str:
        return self._str("d", self.chart.coord_names)


class KVector(_Alternating):
    """Antisymmetric k-vector (wedge of coordinate vector fields)."""

    def __add__(self, other: "KVector") -> "KVector":
        return KVector(self.chart, self.degree, self._combine(other, +1))

    def __sub__(self, other: "KVector") -> "KVector":
        return KVector(self.chart, self.degree, self._combine(other, -1))

    def __neg__(self) -> "KVector":
        return KVector(self.chart, self.degree,
                       {k: -v for k, v in self.coeffs.items()})

    def scale(self, factor) -> "KVector":
        factor = as_expr(factor)
        return KVector(self.chart, self.degree,
                       {k: factor * v for k, v in self.coeffs.items()})

    def wedge(self, other: "KVector") -> "KVector":
        _require_same_chart(self, other)
        return KVector(self.chart, self.degree + other.degree,
                       self._wedge_coeffs(other))

    def evaluate(self, covectors: Sequence[KForm]) -> Expr:
        if len(covectors) != self.degree:
            raise ExprError("argument count must equal the degree")
        for alpha in covectors:
            if alpha.degree != 1:
                raise ExprError("k-vectors evaluate on 1-forms")
        if self.degree == 0:
            return self.coeff(())
        out = ZERO
        for key, c in self.coeffs.items():
            rows = [[alpha.coeff((i,)) for i in key] for alpha in covectors]
            out = out + c * _det(rows)
        return out

    def __call__(self, *covectors: KForm) -> Expr:
        return self.evaluate(covectors)

    def sharp(self, alpha: KForm) -> VectorField:
        """For a bivector: the map ``alpha -> (beta -> Pi(beta, alpha))``."""
        if self.degree != 2:
            raise ExprError("sharp is defined for bivectors")
        _require_same_chart(self, alpha)
        comps = tuple(
            self.evaluate([self.chart.basis_covector(i), alpha])
            for i in range(self.chart.dim))
        return VectorField(self.chart, comps)

    def __str__(self) -> str:
        return self._str("d_", self.chart.coord_names)


def vector_from_components(chart: Chart, comps) -> VectorField:
    return VectorField(chart, tuple(as_expr(c) for c in comps))


# ---------------------------------------------------------------------------
# differential operators


def exterior_derivative(phi: KForm) -> KForm:
    """Coordinate exterior derivative; the d of a top form is the empty
    (k+1)-form."""
    chart = phi.chart
    out: dict[tuple[int, ...], Expr] = {}
    for key, c in phi.coeffs.items():
        for i in range(chart.dim):
            if i in key:
                continue
            below = sum(1 for j in key if j < i)
            merged = tuple(sorted(key + (i,)))
            term = c.diff(chart.coordinate(i))
            if below % 2 == 1:
                term = -term
            out[merged] = out.get(merged, ZERO) + term
    return KForm(chart, phi.degree + 1, out)


def interior_product(x: VectorField, phi: KForm) -> KForm:
    """Contraction in the first slot; degree 0 input is an error."""
    if phi.degree == 0:
        raise ExprError("cannot contract 0-form")
    _require_same_chart(x, phi)
    out: dict[tuple[int, ...], Expr] = {}
    for key, c in phi.coeffs.items():
        for pos, idx in enumerate(key):
            rest = key[:pos] + key[pos + 1:]
            term = c * x.components[idx]
            if pos % 2 == 1:
                term = -term
            out[rest] = out.get(rest, ZERO) + term
    return KForm(phi.chart, phi.degree - 1, out)


def lie_derivative_form(x: VectorField, phi: KForm) -> KForm:
    """Cartan formula ``L_X = i_X d + d i_X``."""
    _require_same_chart(x, phi)
    out = interior_product(x, exterior_derivative(phi))
    if phi.degree > 0:
        out = out + exterior_derivative(interior_product(x, phi))
    return out


def contravariant_derivative(pi: KVector, q: KVector) -> KVector:
    """Contravariant exterior derivative associated with a bivector.

    Coefficients are obtained by evaluating the defining alternating sum on
    coordinate covectors, with the covector bracket
    ``{a, b} = L_{pi#a} b - i_{pi#b} da``.
    """
    if pi.degree != 2:
        raise ExprError("the bivector must have degree 2")
    chart = _require_same_chart(pi, q)
    n = chart.dim
    ell = q.degree
    basis = [chart.basis_covector(i) for i in range(n)]
    sharps = [pi.sharp(basis[i]) for i in range(n)]

    def bracket(a: int, b: int) -> KForm:
        # d(dx_a) = 0, so only the Lie-derivative term survives.
        return lie_derivative_form(sharps[a], basis[b])

    out: dict[tuple[int, ...], Expr] = {}
    for key in itertools.combinations(range(n), ell + 1):
        total = ZERO
        for pos, idx in enumerate(key):
            rest = [basis[i] for p, i in enumerate(key) if p != pos]
            term = sharps[idx].apply(q.evaluate(rest))
            total = total + term if pos % 2 == 0 else total - term
        for pa in range(len(key)):
            for pb in range(pa + 1, len(key)):
                rest = [basis[i] for p, i in enumerate(key)
                        if p not in (pa, pb)]
                args = [bracket(key[pa], key[pb])] + rest
                term = q.evaluate(args)
                total = total + term if (pa + pb) % 2 == 0 else total - term
        if total.node != 0:
            out[key] = total
    return KVector(chart, ell + 1, out)


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class AlphaDensity:
    """``coeff * |dx_1 ^ ... ^ dx_n|**alpha`` on a chart; alpha > 0."""

    chart: Chart
    alpha: Fraction
    coeff: ComplexExpr

    def __post_init__(self):
        if self.alpha <= 0:
            raise ExprError("the density exponent must be positive")

    def scale(self, factor) -> "AlphaDensity":
        return AlphaDensity(self.chart, self.alpha,
                            ComplexExpr.of(factor) * self.coeff)

    def __add__(self, other: "AlphaDensity") -> "AlphaDensity":
        _require_same_chart(self, other)
        if self.alpha != other.alpha:
            raise ExprError("cannot add densities of different exponents")
        return AlphaDensity(self.chart, self.alpha, self.coeff + other.coeff)

    def __sub__(self, other: "AlphaDensity") -> "AlphaDensity":
        return self + other.scale(-1)

    def tensor(self, other: "AlphaDensity") -> "AlphaDensity":
        _require_same_chart(self, other)
        return AlphaDensity(self.chart, self.alpha + other.alpha,
                            self.coeff * other.coeff)

    def conj(self) -> "AlphaDensity":
        return AlphaDensity(self.chart, self.alpha, self.coeff.conj())

    def __str__(self) -> str:
        measure = "".join("d" + n for n in self.chart.coord_names)
        return f"({self.coeff})*|{measure}|^({self.alpha})"


def lie_derivative_density(x: VectorField, kappa: AlphaDensity) -> AlphaDensity:
    """``L_X (f |dx|^a) = (Xf + a f div X) |dx|^a`` in chart coordinates."""
    _require_same_chart(x, kappa)
    alpha_scalar = as_expr(Fraction(kappa.alpha))
    coeff = x.apply(kappa.coeff) + kappa.coeff * (alpha_scalar * x.divergence())
    return AlphaDensity(kappa.chart, kappa.alpha, coeff)
