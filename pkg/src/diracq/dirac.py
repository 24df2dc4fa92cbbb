"""Sections of TM + T*M, the two pairings, the Courant bracket, and Dirac
structures on a chart with their verification machinery.

A Dirac structure is presented by a frame of ``n = dim M`` sections spanning
it generically.  Verification checks isotropy of the symmetric pairing,
generic rank, closure of the frame under the Courant bracket (via membership
certificates), and the integrability identity on frame triples.  Rank and
membership are generic-point statements; pivot loci where they may degenerate
are reported, not handled fiberwise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

from . import linalg
from .chart import (
    Chart,
    KForm,
    KVector,
    VectorField,
    _require_same_chart,
    exterior_derivative,
    interior_product,
    lie_derivative_form,
)
from .expr import Expr, ExprError, ZERO, as_expr, is_zero

__all__ = [
    "Section",
    "DiracStructure",
    "MembershipCertificate",
    "DiracReport",
    "DiracConstructionError",
    "AdmissibleRangeError",
    "VerificationError",
    "pairing_plus",
    "pairing_minus",
    "courant_bracket",
    "graph_presymplectic",
    "graph_poisson",
    "regular_distribution",
    "verify_dirac",
    "membership",
    "omega_on_frame",
    "pi_sharp_on_frame",
]


class DiracConstructionError(ExprError):
    pass


class AdmissibleRangeError(ExprError):
    pass


class VerificationError(ExprError):
    pass


@dataclass(frozen=True)
class Section:
    """A pair (vector field, 1-form) on one chart."""

    X: VectorField
    xi: KForm

    def __post_init__(self):
        _require_same_chart(self.X, self.xi)
        if self.xi.degree != 1:
            raise ExprError("the form part of a section must have degree 1")

    @property
    def chart(self) -> Chart:
        return self.X.chart

    def __add__(self, other: "Section") -> "Section":
        return Section(self.X + other.X, self.xi + other.xi)

    def __sub__(self, other: "Section") -> "Section":
        return Section(self.X - other.X, self.xi - other.xi)

    def __neg__(self) -> "Section":
        return Section(-self.X, -self.xi)

    def scale(self, factor) -> "Section":
        return Section(self.X.scale(factor), self.xi.scale(factor))

    def is_zero_section(self) -> bool:
        return self.X.is_zero_field() and self.xi.is_zero_tensor()

    def __str__(self) -> str:
        return f"({self.X}, {self.xi})"


def zero_section(chart: Chart) -> Section:
    return Section(VectorField(chart, (ZERO,) * chart.dim), KForm(chart, 1, {}))


def pairing_plus(a: Section, b: Section) -> Expr:
    """Symmetric pairing ((xi(Y) + eta(X)) / 2)."""
    _require_same_chart(a, b)
    half = as_expr(1) / 2
    return half * (a.xi.evaluate([b.X]) + b.xi.evaluate([a.X]))


def pairing_minus(a: Section, b: Section) -> Expr:
    """Skew pairing ((xi(Y) - eta(X)) / 2); the Lambda pairing on D."""
    _require_same_chart(a, b)
    half = as_expr(1) / 2
    return half * (a.xi.evaluate([b.X]) - b.xi.evaluate([a.X]))


def courant_bracket(a: Section, b: Section) -> Section:
    """``[[ (X,xi), (Y,eta) ]] = ([X,Y], L_X eta - i_Y d xi)``."""
    _require_same_chart(a, b)
    form = lie_derivative_form(a.X, b.xi) - interior_product(
        b.X, exterior_derivative(a.xi))
    return Section(a.X.lie_bracket(b.X), form)


# ---------------------------------------------------------------------------
# Dirac structures


@dataclass(frozen=True)
class MembershipCertificate:
    """Coefficients expressing a section in the frame span, or an
    inconsistency witness (residual expression plus a rational point where
    it is nonzero) when the linear system has no generic solution."""

    ok: bool
    coefficients: tuple[Expr, ...] | None = None
    witness: Expr | None = None
    witness_point: "Point | None" = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass
class DiracReport:
    d1_ok: bool
    d1_witness: str | None
    d2_rank: int
    d2_ok: bool
    d3_ok: bool
    d3_witness: str | None
    lemma_ok: bool
    lemma_witness: str | None
    kernel_ok: bool
    annihilator_ok: bool
    dim_characteristic: int
    dim_cotangent_kernel: int
    dim_admissible_covectors: int
    dim_tangent_kernel: int
    degeneracy_locus: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return (self.d1_ok and self.d2_ok and self.d3_ok and self.lemma_ok
                and self.kernel_ok and self.annihilator_ok)


class DiracStructure:
    """A frame of n sections presented as spanning D, plus cached
    verification state (computed once, idempotently)."""

    def __init__(self, chart: Chart, frame: Sequence[Section]):
        if len(frame) != chart.dim:
            raise DiracConstructionError(
                f"a Dirac frame on {chart.name} needs {chart.dim} sections")
        for section in frame:
            if section.chart != chart:
                raise DiracConstructionError("frame sections must share the chart")
        self.chart = chart
        self.frame = tuple(frame)
        self._report: DiracReport | None = None
        self._tangent_kernel: tuple[tuple[Expr, ...], ...] | None = None
        self._cotangent_kernel: tuple[tuple[Expr, ...], ...] | None = None

    @property
    def dim(self) -> int:
        return self.chart.dim

    # -- linear data --------------------------------------------------------

    def vector_matrix(self) -> list[list[Expr]]:
        """n x n matrix, rows = coordinates, columns = frame X-parts."""
        n = self.dim
        return [[self.frame[j].X.components[row] for j in range(n)]
                for row in range(n)]

    def form_matrix(self) -> list[list[Expr]]:
        n = self.dim
        return [[self.frame[j].xi.coeff((row,)) for j in range(n)]
                for row in range(n)]

    def stacked_matrix(self) -> list[list[Expr]]:
        return self.vector_matrix() + self.form_matrix()

    def section_from_coefficients(self, coeffs: Sequence) -> Section:
        out = zero_section(self.chart)
        for c, e in zip(coeffs, self.frame):
            out = out + e.scale(c)
        return out

    def tangent_kernel(self) -> tuple[tuple[Expr, ...], ...]:
        """Frame coefficient combinations spanning D with zero form part,
        i.e. the kernel V = D n TM."""
        if self._tangent_kernel is None:
            basis = linalg.nullspace(self.form_matrix())
            self._tangent_kernel = tuple(tuple(v) for v in basis)
        return self._tangent_kernel

    def cotangent_kernel(self) -> tuple[tuple[Expr, ...], ...]:
        """Combinations with zero vector part, spanning D n T*M."""
        if self._cotangent_kernel is None:
            basis = linalg.nullspace(self.vector_matrix())
            self._cotangent_kernel = tuple(tuple(v) for v in basis)
        return self._cotangent_kernel

    def tangent_kernel_fields(self) -> list[VectorField]:
        return [self.section_from_coefficients(z).X for z in self.tangent_kernel()]

    # -- verification -------------------------------------------------------

    def verify(self) -> DiracReport:
        if self._report is None:
            self._report = verify_dirac(self)
        return self._report

    def require_verified(self) -> None:
        report = self.verify()
        if not report.passed:
            raise VerificationError("the frame does not present a Dirac structure")

    def __str__(self) -> str:
        return "{" + ", ".join(str(e) for e in self.frame) + "}"


def _nonvanishing_point(dirac: DiracStructure, value: Expr):
    """A rational point where an expression is nonzero, searched
    deterministically from the equality seed; None when not found."""
    from .expr import Point, evaluate, get_equality_config, random_rational
    import random

    chart = dirac.chart
    rng = random.Random(get_equality_config().seed ^ 0x11)
    names = chart.coord_names + chart.param_names
    for _ in range(24):
        point = Point(chart.name, {n: random_rational(rng, 50) for n in names})
        try:
            if evaluate(value, point) != 0:
                return point
        except ExprError:
            continue
    return None


def membership(dirac: DiracStructure, section: Section) -> MembershipCertificate:
    """Solve the 2n x n linear system over the expression field expressing
    ``section`` in the frame span."""
    _require_same_chart(dirac.frame[0], section)
    matrix = dirac.stacked_matrix()
    n = dirac.dim
    rhs = [section.X.components[i] for i in range(n)] + \
          [section.xi.coeff((i,)) for i in range(n)]
    result = linalg.solve(matrix, rhs)
    if result.rank < n:
        raise VerificationError(
            f"frame is generically rank-deficient (rank {result.rank} < {n})")
    if not result.ok:
        witness = as_expr(result.witness)
        return MembershipCertificate(False, witness=witness,
                                     witness_point=_nonvanishing_point(dirac,
                                                                       witness))
    return MembershipCertificate(True, coefficients=tuple(result.solution))


def verify_dirac(dirac: DiracStructure) -> DiracReport:
    """Check (D1) isotropy, (D2) generic rank, (D3) bracket closure, and the
    integrability identity on frame triples, plus the kernel equations and
    the annihilator duality of the two projections."""
    frame = dirac.frame
    n = dirac.dim

    d1_ok, d1_witness = True, None
    for i in range(n):
        for j in range(i, n):
            value = pairing_plus(frame[i], frame[j])
            if not is_zero(value):
                d1_ok, d1_witness = False, f"<e{i+1},e{j+1}>+ = {value}"
                break
        if not d1_ok:
            break

    ech = linalg.echelon(dirac.stacked_matrix())
    d2_rank = ech.rank
    d2_ok = d2_rank == n
    degeneracy = tuple(sorted({str(p) for p in ech.degeneracy
                               if as_expr(p).free_symbols}))

    d3_ok, d3_witness = True, None
    if d2_ok:
        for i in range(n):
            for j in range(i + 1, n):
                bracket = courant_bracket(frame[i], frame[j])
                cert = membership(dirac, bracket)
                if not cert.ok:
                    d3_ok = False
                    d3_witness = f"[[e{i+1},e{j+1}]] not in span: residual {cert.witness}"
                    break
            if not d3_ok:
                break
    else:
        d3_ok, d3_witness = False, "rank deficient frame"

    lemma_ok, lemma_witness = True, None
    for i, j, k in itertools.product(range(n), repeat=3):
        total = (lie_derivative_form(frame[i].X, frame[j].xi).evaluate([frame[k].X])
                 + lie_derivative_form(frame[j].X, frame[k].xi).evaluate([frame[i].X])
                 + lie_derivative_form(frame[k].X, frame[i].xi).evaluate([frame[j].X]))
        if not is_zero(total):
            lemma_ok = False
            lemma_witness = f"triple (e{i+1},e{j+1},e{k+1}) residual {total}"
            break

    rho_tm_rank = linalg.rank(dirac.vector_matrix())
    rho_cotm_rank = linalg.rank(dirac.form_matrix())
    dim_cot_kernel = len(dirac.cotangent_kernel())
    dim_tan_kernel = len(dirac.tangent_kernel())
    kernel_ok = (rho_tm_rank + dim_cot_kernel == n
                 and rho_cotm_rank + dim_tan_kernel == n)

    annihilator_ok = True
    for combo in dirac.cotangent_kernel():
        eta = dirac.section_from_coefficients(combo).xi
        for e in frame:
            if not is_zero(eta.evaluate([e.X])):
                annihilator_ok = False

    return DiracReport(
        d1_ok=d1_ok, d1_witness=d1_witness,
        d2_rank=d2_rank, d2_ok=d2_ok,
        d3_ok=d3_ok, d3_witness=d3_witness,
        lemma_ok=lemma_ok, lemma_witness=lemma_witness,
        kernel_ok=kernel_ok,
        annihilator_ok=annihilator_ok,
        dim_characteristic=rho_tm_rank,
        dim_cotangent_kernel=dim_cot_kernel,
        dim_admissible_covectors=rho_cotm_rank,
        dim_tangent_kernel=dim_tan_kernel,
        degeneracy_locus=degeneracy,
    )


# ---------------------------------------------------------------------------
# constructors


def graph_presymplectic(omega: KForm) -> DiracStructure:
    """The graph of ``X -> i_X omega`` for a closed 2-form."""
    if omega.degree != 2:
        raise DiracConstructionError("a presymplectic form must have degree 2")
    if not exterior_derivative(omega).is_zero_tensor():
        raise DiracConstructionError("not presymplectic: d(omega) != 0")
    chart = omega.chart
    frame = [Section(chart.basis_vector(i),
                     interior_product(chart.basis_vector(i), omega))
             for i in range(chart.dim)]
    return DiracStructure(chart, frame)


def graph_poisson(pi: KVector) -> DiracStructure:
    """The graph of ``alpha -> pi#(alpha)`` for a Poisson bivector; the
    Jacobi condition is probed through the contravariant derivative squaring
    to zero on coordinate functions."""
    if pi.degree != 2:
        raise DiracConstructionError("a Poisson bivector must have degree 2")
    from .chart import contravariant_derivative
    chart = pi.chart
    for i in range(chart.dim):
        f = KVector(chart, 0, {(): Expr(chart.coordinate(i))})
        probe = contravariant_derivative(pi, contravariant_derivative(pi, f))
        if not probe.is_zero_tensor():
            raise DiracConstructionError(
                f"not Poisson: Jacobi probe fails on {chart.coord_names[i]}")
    frame = [Section(pi.sharp(chart.basis_covector(i)), chart.basis_covector(i))
             for i in range(chart.dim)]
    return DiracStructure(chart, frame)


def regular_distribution(fields: Sequence[VectorField]) -> DiracStructure:
    """``F + F°`` for a generically independent, involutive distribution."""
    if not fields:
        raise DiracConstructionError("the distribution needs at least one field")
    chart = fields[0].chart
    for f in fields:
        _require_same_chart(fields[0], f)
    n = chart.dim
    matrix = [[f.components[row] for f in fields] for row in range(n)]
    if linalg.rank(matrix) != len(fields):
        raise DiracConstructionError("the fields are generically dependent")
    span_rows = [[f.components[c] for c in range(n)] for f in fields]
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            bracket = fields[i].lie_bracket(fields[j])
            result = linalg.solve(matrix, list(bracket.components))
            if not result.ok:
                raise DiracConstructionError(
                    f"F not involutive: [F{i+1},F{j+1}] leaves the span")
    annihilator = linalg.nullspace(span_rows)
    if len(annihilator) != n - len(fields):
        raise DiracConstructionError("annihilator has unexpected generic rank")
    frame = [Section(f, KForm(chart, 1, {})) for f in fields]
    frame += [Section(VectorField(chart, (ZERO,) * n),
                      KForm(chart, 1, {(i,): c for i, c in enumerate(eta)}))
              for eta in annihilator]
    return DiracStructure(chart, frame)


# ---------------------------------------------------------------------------
# the induced 2-form and bivector pairings


def omega_on_frame(dirac: DiracStructure) -> dict[tuple[int, int], Expr]:
    """The presymplectic 2-cocycle on the characteristic distribution,
    tabulated on frame images: ``Omega(X_i, X_j) = xi_i(X_j)``.

    Antisymmetry and the 2-cocycle identity on frame triples are checked.
    """
    dirac.require_verified()
    frame = dirac.frame
    n = dirac.dim
    table = {(i, j): frame[i].xi.evaluate([frame[j].X])
             for i in range(n) for j in range(n)}
    for i in range(n):
        for j in range(n):
            if not is_zero(table[(i, j)] + table[(j, i)]):
                raise VerificationError("Omega fails antisymmetry on the frame")
    for i, j, k in itertools.combinations(range(n), 3):
        xi, xj, xk = (frame[m].X for m in (i, j, k))
        residual = (xi.apply(table[(j, k)]) - xj.apply(table[(i, k)])
                    + xk.apply(table[(i, j)])
                    + frame[k].xi.evaluate([xi.lie_bracket(xj)])
                    + frame[i].xi.evaluate([xj.lie_bracket(xk)])
                    + frame[j].xi.evaluate([xk.lie_bracket(xi)]))
        if not is_zero(residual):
            raise VerificationError(
                f"Omega fails the 2-cocycle identity on ({i+1},{j+1},{k+1})")
    return table


class PiSharp:
    """The bivector-type map from admissible 1-forms to vector fields
    induced by a verified Dirac structure."""

    def __init__(self, dirac: DiracStructure):
        dirac.require_verified()
        self.dirac = dirac

    def coefficients(self, eta: KForm) -> tuple[Expr, ...]:
        if eta.degree != 1:
            raise ExprError("expected a 1-form")
        result = linalg.solve(self.dirac.form_matrix(),
                              [eta.coeff((i,)) for i in range(self.dirac.dim)])
        if not result.ok:
            raise AdmissibleRangeError("not in admissible covector range")
        return tuple(result.solution)

    def __call__(self, eta: KForm) -> VectorField:
        coeffs = self.coefficients(eta)
        return self.dirac.section_from_coefficients(coeffs).X

    def covector_bracket(self, i: int, j: int) -> KForm:
        """``{xi_i, xi_j} = L_{X_i} xi_j - i_{X_j} d xi_i`` on frame forms."""
        frame = self.dirac.frame
        return (lie_derivative_form(frame[i].X, frame[j].xi)
                - interior_product(frame[j].X,
                                   exterior_derivative(frame[i].xi)))

    def morphism_residual(self, i: int, j: int) -> VectorField:
        """``Pi#({xi_i, xi_j}) - [X_i, X_j]``; lands in the tangent kernel
        (exactly zero when D n TM = 0)."""
        frame = self.dirac.frame
        lhs = self(self.covector_bracket(i, j))
        return lhs - frame[i].X.lie_bracket(frame[j].X)

    def verify_morphism(self) -> bool:
        """Bracket morphism law on all frame covectors, modulo D n TM."""
        kernel = [self.dirac.section_from_coefficients(z).X
                  for z in self.dirac.tangent_kernel()]
        n = self.dirac.dim
        for i in range(n):
            for j in range(n):
                residual = self.morphism_residual(i, j)
                if not kernel:
                    if not residual.is_zero_field():
                        return False
                    continue
                matrix = [[v.components[row] for v in kernel] for row in range(n)]
                if not linalg.solve(matrix, list(residual.components)).ok:
                    return False
        return True


def pi_sharp_on_frame(dirac: DiracStructure) -> PiSharp:
    return PiSharp(dirac)
