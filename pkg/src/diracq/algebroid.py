"""Lie algebroid presentations on a chart and their exterior calculus.

A presentation holds a frame of abstract sections through their anchors and
structure functions; A-differential forms store one coefficient per strictly
increasing frame-index tuple.  The Dirac presentation of a verified structure
is built once by solving the frame brackets back into the frame, and the
pull-back presentation over ``M x R`` carries the homotopy operator used for
the chart-level Poincare lemma.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import sympy as sp

from .chart import (
    Chart,
    KForm,
    KVector,
    VectorField,
    exterior_derivative,
    interior_product,
    lie_derivative_form,
)
from .dirac import DiracStructure, Section, courant_bracket, membership
from .expr import (
    ComplexExpr,
    Expr,
    ExprError,
    ZERO,
    as_expr,
    complex_is_zero,
    is_zero,
    symbol,
)

__all__ = [
    "AlgebroidPresentation",
    "AForm",
    "AConnection",
    "AlgebroidError",
    "tangent_algebroid",
    "cotangent_algebroid",
    "dirac_presentation",
    "d_A",
    "wedge",
    "d_D_pair",
    "curvature",
    "pullback_over_line",
    "homotopy_S",
    "pr_pullback",
    "iota_restrict",
    "rho_pullback_form",
    "aform_equal",
    "scalar_is_zero",
]


class AlgebroidError(ExprError):
    pass


def scalar_is_zero(value) -> bool:
    if isinstance(value, ComplexExpr):
        return complex_is_zero(value)
    return is_zero(value)


def _scalar_nonzero_node(value) -> bool:
    if isinstance(value, ComplexExpr):
        return value.re.node != 0 or value.im.node != 0
    return as_expr(value).node != 0


@dataclass(frozen=True)
class AlgebroidPresentation:
    """Frame, anchor fields and structure functions of a Lie algebroid.

    ``structure[(i, j)]`` (i < j) holds the coefficients of ``[[e_i, e_j]]``
    in the frame; antisymmetry is implied by storage.
    """

    chart: Chart
    anchors: tuple[VectorField, ...]
    structure: Mapping[tuple[int, int], tuple[Expr, ...]]
    labels: tuple[str, ...]
    sections: tuple[Section, ...] | None = None
    pullback_base: "AlgebroidPresentation | None" = None
    t_index: int | None = None

    @property
    def rank(self) -> int:
        return len(self.anchors)

    def bracket_coefficients(self, i: int, j: int) -> tuple[Expr, ...]:
        if i == j:
            return (ZERO,) * self.rank
        if i < j:
            return self.structure.get((i, j), (ZERO,) * self.rank)
        return tuple(-c for c in self.structure.get((j, i), (ZERO,) * self.rank))

    def validate(self) -> None:
        """Anchor compatibility and the Jacobi identity on frame triples."""
        r = self.rank
        for i in range(r):
            for j in range(i + 1, r):
                coeffs = self.bracket_coefficients(i, j)
                anchored = VectorField(self.chart, (ZERO,) * self.chart.dim)
                for c, a in zip(coeffs, self.anchors):
                    anchored = anchored + a.scale(c)
                direct = self.anchors[i].lie_bracket(self.anchors[j])
                for comp_a, comp_b in zip(anchored.components, direct.components):
                    if not is_zero(comp_a - comp_b):
                        raise AlgebroidError(
                            f"anchor incompatible with the bracket on "
                            f"({self.labels[i]},{self.labels[j]})")
        for i, j, k in itertools.combinations(range(r), 3):
            residual = [ZERO] * r
            for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
                inner = self.bracket_coefficients(b, c)
                for m in range(r):
                    residual[m] = residual[m] + self.anchors[a].apply(inner[m])
                    outer = self.bracket_coefficients(a, m)
                    for l in range(r):
                        residual[l] = residual[l] + inner[m] * outer[l]
            if any(not is_zero(x) for x in residual):
                raise AlgebroidError(
                    f"Jacobi identity fails on frame triple ({i+1},{j+1},{k+1})")

    def __str__(self) -> str:
        return f"<algebroid rank {self.rank} on {self.chart.name}>"


@dataclass(frozen=True)
class AForm:
    """A-differential form: coefficients over increasing frame-index tuples."""

    algebroid: AlgebroidPresentation
    degree: int
    coeffs: Mapping[tuple[int, ...], object]

    def __post_init__(self):
        clean = {}
        for key, value in self.coeffs.items():
            key = tuple(key)
            if len(key) != self.degree or list(key) != sorted(set(key)):
                raise AlgebroidError(f"bad index tuple {key}")
            if any(i < 0 or i >= self.algebroid.rank for i in key):
                raise AlgebroidError(f"index tuple {key} out of range")
            if not isinstance(value, ComplexExpr):
                value = as_expr(value)
            if _scalar_nonzero_node(value):
                clean[key] = value
        object.__setattr__(self, "coeffs", clean)

    def coeff(self, key) -> object:
        return self.coeffs.get(tuple(key), ZERO)

    def coeff_signed(self, seq: Sequence[int]):
        """Value on a possibly unsorted frame tuple, with alternation."""
        seq = tuple(seq)
        if len(set(seq)) != len(seq):
            return ZERO
        inversions = sum(1 for a, b in itertools.combinations(seq, 2) if a > b)
        value = self.coeff(tuple(sorted(seq)))
        return value if inversions % 2 == 0 else -value

    def __add__(self, other: "AForm") -> "AForm":
        self._check_compatible(other)
        keys = set(self.coeffs) | set(other.coeffs)
        return AForm(self.algebroid, self.degree,
                     {k: self.coeff(k) + other.coeff(k) for k in keys})

    def __sub__(self, other: "AForm") -> "AForm":
        self._check_compatible(other)
        keys = set(self.coeffs) | set(other.coeffs)
        return AForm(self.algebroid, self.degree,
                     {k: self.coeff(k) - other.coeff(k) for k in keys})

    def __neg__(self) -> "AForm":
        return AForm(self.algebroid, self.degree,
                     {k: -v for k, v in self.coeffs.items()})

    def scale(self, factor) -> "AForm":
        return AForm(self.algebroid, self.degree,
                     {k: factor * v for k, v in self.coeffs.items()})

    def _check_compatible(self, other: "AForm") -> None:
        if self.algebroid is not other.algebroid or self.degree != other.degree:
            raise AlgebroidError("forms live over different presentations/degrees")

    def evaluate_coefficients(self, coeffs: Sequence) -> object:
        """Value on a section given by frame coefficients (degree 1 only)."""
        if self.degree != 1:
            raise AlgebroidError("coefficient evaluation needs degree 1")
        out = ZERO
        for i, c in enumerate(coeffs):
            if _scalar_nonzero_node(c):
                out = out + c * self.coeff((i,))
        return out

    def is_zero_form(self) -> bool:
        return all(scalar_is_zero(v) for v in self.coeffs.values())

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        labels = self.algebroid.labels
        parts = []
        for key in sorted(self.coeffs):
            basis = "/\\".join(labels[i] + "*" for i in key) or "1"
            parts.append(f"({self.coeffs[key]})*{basis}")
        return " + ".join(parts)


def aform_zero(algebroid: AlgebroidPresentation, degree: int) -> AForm:
    return AForm(algebroid, degree, {})


def aform_from_scalar(algebroid: AlgebroidPresentation, value) -> AForm:
    return AForm(algebroid, 0, {(): value})


def aform_equal(a: AForm, b: AForm) -> bool:
    if a.degree != b.degree:
        return False
    keys = set(a.coeffs) | set(b.coeffs)
    return all(scalar_is_zero(a.coeff(k) - b.coeff(k)) for k in keys)


def d_A(theta: AForm | object, algebroid: AlgebroidPresentation | None = None) -> AForm:
    """The A-exterior derivative: the alternating anchor/bracket sum
    evaluated on frame tuples."""
    if not isinstance(theta, AForm):
        if algebroid is None:
            raise AlgebroidError("need a presentation for scalar input")
        theta = aform_from_scalar(algebroid, theta)
    A = theta.algebroid
    r = A.rank
    ell = theta.degree
    if ell >= r:
        return aform_zero(A, ell + 1)
    out: dict[tuple[int, ...], object] = {}
    for key in itertools.combinations(range(r), ell + 1):
        total = ZERO
        for pos, idx in enumerate(key):
            rest = key[:pos] + key[pos + 1:]
            term = A.anchors[idx].apply(theta.coeff(rest))
            total = total + term if pos % 2 == 0 else total - term
        for pa in range(len(key)):
            for pb in range(pa + 1, len(key)):
                rest = tuple(key[p] for p in range(len(key))
                             if p not in (pa, pb))
                coeffs = A.bracket_coefficients(key[pa], key[pb])
                term = ZERO
                for m in range(r):
                    if coeffs[m].node == 0:
                        continue
                    term = term + coeffs[m] * theta.coeff_signed((m,) + rest)
                total = total + term if (pa + pb) % 2 == 0 else total - term
        if _scalar_nonzero_node(total):
            out[key] = total
    return AForm(A, ell + 1, out)


def wedge(a: AForm, b: AForm) -> AForm:
    if a.algebroid is not b.algebroid:
        raise AlgebroidError("wedge over different presentations")
    out: dict[tuple[int, ...], object] = {}
    for k1, c1 in a.coeffs.items():
        for k2, c2 in b.coeffs.items():
            combined = k1 + k2
            if len(set(combined)) != len(combined):
                continue
            inversions = sum(1 for x, y in itertools.combinations(combined, 2)
                             if x > y)
            term = c1 * c2
            if inversions % 2 == 1:
                term = -term
            key = tuple(sorted(combined))
            out[key] = out.get(key, ZERO) + term
    return AForm(a.algebroid, a.degree + b.degree, out)


# ---------------------------------------------------------------------------
# stock presentations


def tangent_algebroid(chart: Chart) -> AlgebroidPresentation:
    """Anchor the identity, vanishing structure functions."""
    anchors = tuple(chart.basis_vector(i) for i in range(chart.dim))
    return AlgebroidPresentation(chart, anchors, {},
                                 labels=tuple("d_" + n for n in chart.coord_names))


def cotangent_algebroid(chart: Chart, pi: KVector) -> AlgebroidPresentation:
    """Frame dx_i, anchor pi#, bracket ``{a,b} = L_{pi#a} b - i_{pi#b} da``."""
    if pi.degree != 2 or pi.chart != chart:
        raise AlgebroidError("expected a bivector on the same chart")
    n = chart.dim
    anchors = tuple(pi.sharp(chart.basis_covector(i)) for i in range(n))
    structure = {}
    for i in range(n):
        for j in range(i + 1, n):
            bracket_form = lie_derivative_form(anchors[i], chart.basis_covector(j)) \
                - interior_product(anchors[j],
                                   exterior_derivative(chart.basis_covector(i)))
            structure[(i, j)] = tuple(bracket_form.coeff((k,)) for k in range(n))
    pres = AlgebroidPresentation(chart, anchors, structure,
                                 labels=tuple("d" + n_ for n_ in chart.coord_names))
    pres.validate()
    return pres


def dirac_presentation(dirac: DiracStructure) -> AlgebroidPresentation:
    """The Lie algebroid of a verified Dirac structure, with structure
    functions precomputed by solving the frame brackets back into the frame.
    Cached on the structure; construction aborts with the witness if a
    bracket leaves the span."""
    cached = getattr(dirac, "_presentation", None)
    if cached is not None:
        return cached
    dirac.require_verified()
    n = dirac.dim
    frame = dirac.frame
    structure = {}
    for i in range(n):
        for j in range(i + 1, n):
            cert = membership(dirac, courant_bracket(frame[i], frame[j]))
            if not cert.ok:
                raise AlgebroidError(
                    f"bracket of frame sections ({i+1},{j+1}) leaves the span: "
                    f"residual {cert.witness}")
            structure[(i, j)] = cert.coefficients
    pres = AlgebroidPresentation(
        dirac.chart,
        tuple(e.X for e in frame),
        structure,
        labels=tuple(f"e{i+1}" for i in range(n)),
        sections=frame,
    )
    pres.validate()
    dirac._presentation = pres
    return pres


# ---------------------------------------------------------------------------
# the Dirac differential through pairs (phi, Q)


def d_D_pair(phi: KForm, q: KVector, dirac: DiracStructure,
             cross_check: bool = False) -> AForm:
    """Evaluate ``d_D`` of the D-form represented by a pair of an ordinary
    form and a multivector; optionally cross-check against the direct
    alternating-sum formula on the Dirac presentation."""
    if phi.degree != q.degree:
        raise AlgebroidError("degree mismatch between the form and multivector")
    pres = dirac_presentation(dirac)
    frame = dirac.frame
    n = dirac.dim
    ell = phi.degree
    out: dict[tuple[int, ...], object] = {}
    for key in itertools.combinations(range(n), ell + 1):
        secs = [frame[i] for i in key]
        total = ZERO
        for pos in range(len(key)):
            rest = [secs[p] for p in range(len(key)) if p != pos]
            inner = phi.evaluate([s.X for s in rest]) + _wedge_eval(
                [s.xi for s in rest], q)
            term = secs[pos].X.apply(inner)
            total = total + term if pos % 2 == 0 else total - term
        for pa in range(len(key)):
            for pb in range(pa + 1, len(key)):
                rest = [secs[p] for p in range(len(key)) if p not in (pa, pb)]
                bracket_vec = secs[pa].X.lie_bracket(secs[pb].X)
                term = phi.evaluate([bracket_vec] + [s.X for s in rest])
                bracket_form = (lie_derivative_form(secs[pa].X, secs[pb].xi)
                                - interior_product(secs[pb].X,
                                                   exterior_derivative(secs[pa].xi)))
                term = term + _wedge_eval([bracket_form] + [s.xi for s in rest], q)
                total = total + term if (pa + pb) % 2 == 0 else total - term
        if total.node != 0:
            out[key] = total
    result = AForm(pres, ell + 1, out)
    if cross_check:
        direct = d_A(_pair_as_aform(phi, q, dirac))
        if not aform_equal(result, direct):
            raise AlgebroidError("pair differential disagrees with d_A")
    return result


def _wedge_eval(forms: Sequence[KForm], q: KVector):
    """(xi_1 ^ ... ^ xi_l)(Q), the determinant pairing."""
    if q.degree == 0:
        return q.coeff(())
    return q.evaluate(list(forms))


def _pair_as_aform(phi: KForm, q: KVector, dirac: DiracStructure) -> AForm:
    pres = dirac_presentation(dirac)
    frame = dirac.frame
    out = {}
    for key in itertools.combinations(range(dirac.dim), phi.degree):
        secs = [frame[i] for i in key]
        value = phi.evaluate([s.X for s in secs]) + _wedge_eval(
            [s.xi for s in secs], q)
        if value.node != 0:
            out[key] = value
    return AForm(pres, phi.degree, out)


def rho_pullback_form(sigma: KForm, dirac: DiracStructure) -> AForm:
    """Pull an ordinary form back through the tangent projection of D:
    evaluate it on the anchor images of frame tuples."""
    pres = dirac_presentation(dirac)
    out = {}
    for key in itertools.combinations(range(dirac.dim), sigma.degree):
        value = sigma.evaluate([dirac.frame[i].X for i in key])
        if value.node != 0:
            out[key] = value
    return AForm(pres, sigma.degree, out)


# ---------------------------------------------------------------------------
# connections


@dataclass(frozen=True)
class AConnection:
    """Connection 1-section: an m x m matrix of A-1-forms."""

    algebroid: AlgebroidPresentation
    theta: tuple[tuple[AForm, ...], ...]

    def __post_init__(self):
        m = len(self.theta)
        for row in self.theta:
            if len(row) != m:
                raise AlgebroidError("the connection 1-section must be square")
            for entry in row:
                if entry.degree != 1 or entry.algebroid is not self.algebroid:
                    raise AlgebroidError("entries must be A-1-forms")

    @property
    def bundle_rank(self) -> int:
        return len(self.theta)


def curvature(conn: AConnection, check_operator: bool = True):
    """Curvature 2-section ``d_A theta + theta ^ theta``; optionally verified
    against the covariant-derivative commutator on frame pairs applied to
    basis sections."""
    A = conn.algebroid
    m = conn.bundle_rank
    kappa = [[d_A(conn.theta[j][k]) for k in range(m)] for j in range(m)]
    for j in range(m):
        for k in range(m):
            for l in range(m):
                kappa[j][k] = kappa[j][k] + wedge(conn.theta[j][l],
                                                  conn.theta[l][k])
    if check_operator:
        r = A.rank
        for a in range(r):
            for b in range(a + 1, r):
                op = _operator_curvature(conn, a, b)
                for j in range(m):
                    for k in range(m):
                        expected = kappa[j][k].coeff_signed((a, b))
                        if not scalar_is_zero(op[j][k] - expected):
                            raise AlgebroidError(
                                "curvature 2-section disagrees with the "
                                f"operator definition on (e{a+1},e{b+1})")
    return tuple(tuple(row) for row in kappa)


def _covariant(conn: AConnection, index: int, comps: list) -> list:
    """Covariant derivative along frame element ``index`` of a section given
    by scalar components."""
    A = conn.algebroid
    m = conn.bundle_rank
    out = []
    for j in range(m):
        value = A.anchors[index].apply(comps[j])
        for k in range(m):
            theta_val = conn.theta[j][k].coeff((index,))
            if _scalar_nonzero_node(theta_val) and _scalar_nonzero_node(comps[k]):
                value = value + theta_val * comps[k]
        out.append(value)
    return out


def _operator_curvature(conn: AConnection, a: int, b: int):
    A = conn.algebroid
    m = conn.bundle_rank
    coeffs_ab = A.bracket_coefficients(a, b)
    columns = []
    for k in range(m):
        basis = [ZERO] * m
        basis[k] = as_expr(1)
        first = _covariant(conn, a, _covariant(conn, b, basis))
        second = _covariant(conn, b, _covariant(conn, a, basis))
        third = [ZERO] * m
        for mm in range(A.rank):
            if coeffs_ab[mm].node == 0:
                continue
            step = _covariant(conn, mm, basis)
            third = [t + coeffs_ab[mm] * s for t, s in zip(third, step)]
        columns.append([f - s - t for f, s, t in zip(first, second, third)])
    return [[columns[k][j] for k in range(m)] for j in range(m)]


# ---------------------------------------------------------------------------
# pull-back over the line and the homotopy operator


def pullback_over_line(dirac: DiracStructure, t_name: str = "t") -> AlgebroidPresentation:
    """The pull-back algebroid of D along the projection ``M x R -> M``:
    rank n+1, lifted frame plus the pure d/dt element."""
    base = dirac_presentation(dirac)
    ext = dirac.chart.extend(t_name)
    n = dirac.dim

    def lift(v: VectorField) -> VectorField:
        return VectorField(ext, v.components + (ZERO,))

    anchors = tuple(lift(a) for a in base.anchors) + (ext.basis_vector(n),)
    structure = {}
    for (i, j), coeffs in base.structure.items():
        structure[(i, j)] = tuple(coeffs) + (ZERO,)
    pres = AlgebroidPresentation(
        ext, anchors, structure,
        labels=base.labels + ("dt",),
        pullback_base=base,
        t_index=n,
    )
    pres.validate()
    return pres


def pr_pullback(theta: AForm, line: AlgebroidPresentation) -> AForm:
    """pr* of a D-form: the same coefficients, no dt components."""
    if line.pullback_base is not theta.algebroid:
        raise AlgebroidError("the presentation is not the pull-back of this base")
    return AForm(line, theta.degree, dict(theta.coeffs))


def iota_restrict(omega: AForm) -> AForm:
    """iota* along ``p -> (p, 0)``: drop dt components, evaluate at t = 0."""
    line = omega.algebroid
    if line.pullback_base is None:
        raise AlgebroidError("not a pull-back presentation")
    t_sym = symbol(line.chart.coord_names[line.t_index])
    out = {}
    for key, value in omega.coeffs.items():
        if line.t_index in key:
            continue
        out[key] = value.subs({t_sym: sp.Integer(0)}) if isinstance(value, Expr) \
            else ComplexExpr(value.re.subs({t_sym: sp.Integer(0)}),
                             value.im.subs({t_sym: sp.Integer(0)}))
    return AForm(line.pullback_base, omega.degree, out)


def homotopy_S(omega: AForm) -> AForm:
    """The degree-lowering operator integrating dt-components from 0 to t.

    Coefficients must be polynomial in t so the integral stays in the
    expression class.
    """
    line = omega.algebroid
    if line.pullback_base is None or line.t_index is None:
        raise AlgebroidError("not a pull-back presentation")
    t_sym = symbol(line.chart.coord_names[line.t_index])
    out: dict[tuple[int, ...], Expr] = {}
    for key, value in omega.coeffs.items():
        if line.t_index not in key:
            continue
        if isinstance(value, ComplexExpr):
            raise AlgebroidError("homotopy integration expects real coefficients")
        rest = tuple(i for i in key if i != line.t_index)
        try:
            sp.Poly(value.node, t_sym)
        except sp.PolynomialError as err:
            raise AlgebroidError(
                f"unsupported integrand (not polynomial in {t_sym}): {value}"
            ) from err
        anti = sp.integrate(value.node, t_sym)
        integral = Expr(anti - anti.subs(t_sym, sp.Integer(0)))
        # moving the dt slot from its sorted position to the front
        sign = (-1) ** len(rest)
        out[rest] = integral if sign > 0 else -integral
    return AForm(line, omega.degree - 1, out)
