"""Deterministic random generators for property suites.

Everything is driven by an explicit :class:`random.Random` so CLI runs with a
fixed seed reproduce byte-identical reports.
"""

from __future__ import annotations

import itertools
import random

import sympy as sp

from .chart import Chart, KForm, KVector, VectorField
from .expr import Expr, symbol

__all__ = [
    "rng_for",
    "random_polynomial",
    "random_vector_field",
    "random_kform",
    "random_kvector",
    "random_rational_expr",
    "random_mixed_expr",
]


def rng_for(seed: int, label: str) -> random.Random:
    # str seeds hash stably (sha512) across runs and processes
    return random.Random(f"{seed}:{label}")


def random_polynomial(rng: random.Random, chart: Chart, degree: int = 3,
                      terms: int = 3, bound: int = 5,
                      use_params: bool = False) -> Expr:
    """Small random polynomial in the chart coordinates (and optionally the
    parameters), integer coefficients, total degree bounded."""
    symbols = list(chart.coords) + (list(chart.params) if use_params else [])
    node = sp.Integer(0)
    for _ in range(terms):
        coeff = rng.randint(-bound, bound)
        if coeff == 0:
            coeff = 1
        monomial = sp.Integer(coeff)
        for _ in range(rng.randint(0, degree)):
            monomial *= rng.choice(symbols)
        node += monomial
    return Expr(sp.expand(node))


def random_vector_field(rng: random.Random, chart: Chart,
                        degree: int = 2) -> VectorField:
    return VectorField(chart, tuple(
        random_polynomial(rng, chart, degree=degree, terms=2)
        for _ in range(chart.dim)))


def random_kform(rng: random.Random, chart: Chart, degree: int,
                 poly_degree: int = 2) -> KForm:
    coeffs = {}
    for key in itertools.combinations(range(chart.dim), degree):
        coeffs[key] = random_polynomial(rng, chart, degree=poly_degree, terms=2)
    return KForm(chart, degree, coeffs)


def random_kvector(rng: random.Random, chart: Chart, degree: int,
                   poly_degree: int = 2) -> KVector:
    coeffs = {}
    for key in itertools.combinations(range(chart.dim), degree):
        coeffs[key] = random_polynomial(rng, chart, degree=poly_degree, terms=2)
    return KVector(chart, degree, coeffs)


def random_rational_expr(rng: random.Random, names: list[str],
                         depth: int = 4) -> Expr:
    """Random expression in the rational fragment, bounded depth, with
    denominators kept away from the constant zero."""
    def leaf() -> sp.Expr:
        if rng.random() < 0.5:
            return sp.Integer(rng.randint(-6, 6))
        return symbol(rng.choice(names))

    def build(d: int) -> sp.Expr:
        if d <= 0:
            return leaf()
        op = rng.choice("++**-/^")
        left = build(d - 1)
        right = build(d - 1)
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "^":
            return left ** rng.randint(1, 3)
        divisor = right if right != 0 else right + 1
        return left / divisor

    while True:
        try:
            return Expr(build(depth))
        except Exception:
            continue


def random_mixed_expr(rng: random.Random, names: list[str],
                      depth: int = 3) -> Expr:
    """Rational skeleton with a transcendental atom spliced in sometimes."""
    base = random_rational_expr(rng, names, depth)
    roll = rng.random()
    if roll < 0.25:
        return base
    inner = random_rational_expr(rng, names, 2)
    head = rng.choice((sp.sin, sp.cos, sp.exp))
    atom = Expr(head(inner.node))
    combinators = [lambda: base + atom, lambda: base * atom,
                   lambda: atom - base]
    return rng.choice(combinators)()
