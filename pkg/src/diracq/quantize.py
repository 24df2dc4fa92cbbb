"""Complexified sections, polarizations, the half-density connection, the
extended operator of an admissible function, and the self-adjointness
integrand, all at chart level.

The model Hilbert space is never constructed; its defining invariances are
probed on explicit candidate sections.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath
import sympy as sp

from . import linalg
from .chart import AlphaDensity, lie_derivative_density
from .dirac import (
    DiracStructure,
    Section,
    courant_bracket,
    membership,
    pairing_minus,
    zero_section,
)
from .expr import (
    ComplexExpr,
    ExprError,
    Point,
    SingularPointError,
    as_expr,
    complex_is_zero,
    evaluate,
    symbol,
)
from .hamiltonian import ComplementH, differential, hamiltonian_H
from .prequant import (
    BundleAtlas,
    LineSection,
    TWO_PI_I,
    line_section_from_patch,
    prequant_condition,
    prequant_operator,
)

__all__ = [
    "ComplexSection",
    "Polarization",
    "PolarizationReport",
    "HalfDensitySection",
    "QuantizeError",
    "complex_courant",
    "complex_lambda",
    "complex_membership",
    "polarization_check",
    "sp_membership",
    "delta_connection",
    "fhat_halfdensity",
    "lemma51_residual",
    "selfadjoint_integrand",
    "q_bundle",
    "projectability_probe",
    "hzero_invariance_probe",
    "integrate_density",
]


class QuantizeError(ExprError):
    pass


@dataclass(frozen=True)
class ComplexSection:
    """Section of the complexified bundle, stored as (re, im) sections."""

    re: Section
    im: Section

    def __post_init__(self):
        if self.re.chart != self.im.chart:
            raise QuantizeError("chart mismatch in complex section")

    @staticmethod
    def from_real(section: Section) -> "ComplexSection":
        return ComplexSection(section, zero_section(section.chart))

    @property
    def chart(self):
        return self.re.chart

    def conj(self) -> "ComplexSection":
        return ComplexSection(self.re, -self.im)

    def __add__(self, other: "ComplexSection") -> "ComplexSection":
        return ComplexSection(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexSection") -> "ComplexSection":
        return ComplexSection(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "ComplexSection":
        return ComplexSection(-self.re, -self.im)

    def scale(self, factor) -> "ComplexSection":
        z = ComplexExpr.of(factor)
        return ComplexSection(self.re.scale(z.re) - self.im.scale(z.im),
                              self.re.scale(z.im) + self.im.scale(z.re))

    def component(self, slot: int, index: int) -> ComplexExpr:
        """Complex coefficient: slot 0 the vector part, slot 1 the form part."""
        if slot == 0:
            return ComplexExpr(self.re.X.components[index],
                               self.im.X.components[index])
        return ComplexExpr(self.re.xi.coeff((index,)), self.im.xi.coeff((index,)))

    def apply_vector(self, f) -> ComplexExpr:
        """The complex vector part applied to a scalar."""
        out = ComplexExpr.of(self.re.X.apply(f))
        im_part = ComplexExpr.of(self.im.X.apply(f))
        return out + ComplexExpr(-im_part.im, im_part.re)

    def vector_divergence(self) -> ComplexExpr:
        return ComplexExpr(self.re.X.divergence(), self.im.X.divergence())

    def is_zero_csection(self) -> bool:
        return self.re.is_zero_section() and self.im.is_zero_section()

    def __str__(self) -> str:
        return f"({self.re}) + i*({self.im})"


def _bilinear(op, a: ComplexSection, b: ComplexSection):
    """Complex-bilinear extension of a real bilinear operation."""
    real = op(a.re, b.re) - op(a.im, b.im)
    imag = op(a.im, b.re) + op(a.re, b.im)
    return real, imag


def complex_courant(a: ComplexSection, b: ComplexSection) -> ComplexSection:
    re, im = _bilinear(courant_bracket, a, b)
    return ComplexSection(re, im)


def complex_lambda(a: ComplexSection, b: ComplexSection) -> ComplexExpr:
    re, im = _bilinear(pairing_minus, a, b)
    return ComplexExpr(re, im)


def complex_membership(frame: Sequence[ComplexSection],
                       target: ComplexSection):
    """Solve for complex coefficients expressing ``target`` in the span of a
    complex frame; returns (coefficients | None, witness)."""
    if not frame:
        return (None, ComplexExpr.of(1)) if not target.is_zero_csection() \
            else ([], None)
    chart = frame[0].chart
    n = chart.dim
    matrix = [[f.component(slot, idx) for f in frame]
              for slot in (0, 1) for idx in range(n)]
    rhs = [target.component(slot, idx) for slot in (0, 1) for idx in range(n)]
    result = linalg.solve(matrix, rhs, field_ops=linalg.COMPLEX_FIELD)
    if not result.ok:
        return None, result.witness
    return list(result.solution), None


def dirac_complex_coefficients(dirac: DiracStructure,
                               psi: ComplexSection) -> tuple[ComplexExpr, ...]:
    """Frame coefficients of a section of the complexified structure; the
    real frame splits the solve into the two real membership problems."""
    cert_re = membership(dirac, psi.re)
    cert_im = membership(dirac, psi.im)
    if not cert_re.ok or not cert_im.ok:
        bad = cert_re.witness if not cert_re.ok else cert_im.witness
        raise QuantizeError(f"section does not lie in the complexified "
                            f"structure: residual {bad}")
    return tuple(ComplexExpr(a, b)
                 for a, b in zip(cert_re.coefficients, cert_im.coefficients))


# ---------------------------------------------------------------------------
# polarizations


@dataclass
class PolarizationReport:
    isotropy_ok: bool
    isotropy_witness: str | None
    involutive_ok: bool
    involutive_witness: str | None
    containment_ok: bool
    containment_witness: str | None
    q_rank: int | None = None

    @property
    def passed(self) -> bool:
        return self.isotropy_ok and self.involutive_ok and self.containment_ok


@dataclass
class Polarization:
    """Complex subbundle of the complexified complement, presented by a
    frame of complex sections."""

    dirac: DiracStructure
    complement: ComplementH
    frame: tuple[ComplexSection, ...]
    _report: PolarizationReport | None = None

    def check(self) -> PolarizationReport:
        if self._report is None:
            self._report = polarization_check(self)
        return self._report


def polarization_check(pol: Polarization) -> PolarizationReport:
    """Isotropy of the complex skew pairing, bracket closure through complex
    membership certificates, and containment in the complexified complement."""
    frame = pol.frame
    iso_ok, iso_witness = True, None
    for i in range(len(frame)):
        for j in range(i, len(frame)):
            value = complex_lambda(frame[i], frame[j])
            if not complex_is_zero(value):
                iso_ok, iso_witness = False, f"Lambda(psi{i+1},psi{j+1}) = {value}"
                break
        if not iso_ok:
            break
    inv_ok, inv_witness = True, None
    for i in range(len(frame)):
        for j in range(i, len(frame)):
            bracket = complex_courant(frame[i], frame[j])
            coeffs, witness = complex_membership(frame, bracket)
            if coeffs is None:
                inv_ok = False
                inv_witness = f"[[psi{i+1},psi{j+1}]] leaves the span: {witness}"
                break
        if not inv_ok:
            break
    cont_ok, cont_witness = True, None
    h_frame = [ComplexSection.from_real(h) for h in pol.complement.sections]
    for i, psi in enumerate(frame):
        coeffs, witness = complex_membership(h_frame, psi)
        if coeffs is None:
            cont_ok = False
            cont_witness = f"psi{i+1} leaves the complexified complement"
            break
    q_rank = len(q_bundle(pol, probe=False)) if iso_ok and inv_ok else None
    return PolarizationReport(iso_ok, iso_witness, inv_ok, inv_witness,
                              cont_ok, cont_witness, q_rank)


def sp_membership(f, pol: Polarization) -> tuple[bool, str | None]:
    """Does ``[[(H_f, df), psi]]`` stay in the polarization for every frame
    element?  The defining test for the represented subalgebra."""
    dirac = pol.dirac
    f = as_expr(f)
    h_f, _ = hamiltonian_H(dirac, pol.complement, f)
    section = ComplexSection.from_real(Section(h_f, differential(dirac, f)))
    for i, psi in enumerate(pol.frame):
        bracket = complex_courant(section, psi)
        coeffs, witness = complex_membership(pol.frame, bracket)
        if coeffs is None:
            return False, f"[[(H_f,df), psi{i+1}]] leaves the span: {witness}"
    return True, None


def q_bundle(pol: Polarization, probe: bool = True,
             probe_functions: Sequence | None = None) -> list[Section]:
    """Real frame of the subbundle whose complexification is the
    intersection of the polarization with its conjugate."""
    frame = pol.frame
    if not frame:
        return []
    chart = frame[0].chart
    n = chart.dim
    k = len(frame)
    conj_frame = [psi.conj() for psi in frame]
    matrix = [[frame[a].component(slot, idx) for a in range(k)]
              + [-conj_frame[b].component(slot, idx) for b in range(k)]
              for slot in (0, 1) for idx in range(n)]
    kernel = linalg.nullspace(matrix, field_ops=linalg.COMPLEX_FIELD)
    candidates: list[Section] = []
    for vec in kernel:
        combo = None
        for a in range(k):
            term = frame[a].scale(vec[a])
            combo = term if combo is None else combo + term
        if combo is None:
            continue
        for part in (combo.re, combo.im):
            if not part.is_zero_section():
                candidates.append(part)
    if not candidates:
        return []
    cand_matrix = [[c.X.components[i] for c in candidates] for i in range(n)] + \
                  [[c.xi.coeff((i,)) for c in candidates] for i in range(n)]
    ech = linalg.echelon(cand_matrix)
    picked = [candidates[col] for _, col in ech.pivots]
    if probe and probe_functions:
        ok, witness = projectability_probe(pol, picked, probe_functions)
        if not ok:
            raise QuantizeError(f"projectability probe failed: {witness}")
    return picked


def projectability_probe(pol: Polarization, q_sections: Sequence[Section],
                         functions: Sequence) -> tuple[bool, str | None]:
    """For sample functions in the represented subalgebra, brackets against
    the real subbundle stay inside it (fiber tangency at chart level)."""
    dirac = pol.dirac
    if not q_sections:
        return True, None
    n = dirac.chart.dim
    matrix = [[s.X.components[i] for s in q_sections] for i in range(n)] + \
             [[s.xi.coeff((i,)) for s in q_sections] for i in range(n)]
    for f in functions:
        f = as_expr(f)
        h_f, _ = hamiltonian_H(dirac, pol.complement, f)
        section = Section(h_f, differential(dirac, f))
        for idx, q_sec in enumerate(q_sections):
            bracket = courant_bracket(section, q_sec)
            rhs = [bracket.X.components[i] for i in range(n)] + \
                  [bracket.xi.coeff((i,)) for i in range(n)]
            result = linalg.solve(matrix, rhs)
            if not result.ok:
                return False, f"bracket with Q-section {idx+1} leaves Q"
    return True, None


# ---------------------------------------------------------------------------
# half-density sections and the delta connection


@dataclass(frozen=True)
class HalfDensitySection:
    """``s (x) kappa`` with a line section and a half-density factor."""

    line: LineSection
    kappa: AlphaDensity

    def __post_init__(self):
        if self.kappa.alpha != Fraction(1, 2):
            raise QuantizeError("the density factor must have exponent 1/2")

    @property
    def atlas(self) -> BundleAtlas:
        return self.line.atlas

    def combined(self, patch: str) -> ComplexExpr:
        """Coefficient against the reference half-density on one patch."""
        return self.line[patch] * self.kappa.coeff

    def is_zero_hsection(self) -> bool:
        return all(complex_is_zero(self.combined(p))
                   for p in self.atlas.patches)


def half_density_section(atlas: BundleAtlas, patch_coeff, patch: str | None = None,
                         kappa_coeff=1) -> HalfDensitySection:
    chart = atlas.dirac.chart
    base = patch or atlas.patches[0]
    line = line_section_from_patch(atlas, base, patch_coeff)
    kappa = AlphaDensity(chart, Fraction(1, 2), ComplexExpr.of(kappa_coeff))
    return HalfDensitySection(line, kappa)


def _from_combined(atlas: BundleAtlas, coeffs: Mapping[str, ComplexExpr]) -> HalfDensitySection:
    chart = atlas.dirac.chart
    line = LineSection(atlas, dict(coeffs))
    kappa = AlphaDensity(chart, Fraction(1, 2), ComplexExpr.of(1))
    return HalfDensitySection(line, kappa)


def hsection_sub(a: HalfDensitySection, b: HalfDensitySection) -> HalfDensitySection:
    return _from_combined(a.atlas, {p: a.combined(p) - b.combined(p)
                                    for p in a.atlas.patches})


def delta_connection(psi: ComplexSection, v: HalfDensitySection,
                     atlas: BundleAtlas) -> HalfDensitySection:
    """``delta_psi (s (x) kappa) = (nabla_psi s) (x) kappa
    + s (x) L_{rho(psi)} kappa`` on each patch."""
    coeffs = dirac_complex_coefficients(atlas.dirac, psi)
    half = as_expr(1) / 2
    out = {}
    for patch in atlas.patches:
        w = v.combined(patch)
        sigma_val = atlas.sigma[patch].evaluate_coefficients(coeffs)
        value = psi.apply_vector(w) + TWO_PI_I * (ComplexExpr.of(sigma_val) * w) \
            + ComplexExpr.of(half) * (psi.vector_divergence() * w)
        out[patch] = value
    return _from_combined(atlas, out)


def fhat_halfdensity(f, atlas: BundleAtlas, complement: ComplementH,
                     v: HalfDensitySection) -> HalfDensitySection:
    """``fhat (s (x) kappa) = (fhat s) (x) kappa - s (x) L_{H_f} kappa``,
    verified against ``-delta_{(H_f, df)} - 2 pi i f``."""
    f = as_expr(f)
    dirac = atlas.dirac
    h_f, _ = hamiltonian_H(dirac, complement, f)
    fhat_line = prequant_operator(f, atlas, complement, v.line)
    l_kappa = lie_derivative_density(h_f, v.kappa)
    route_a = {p: fhat_line[p] * v.kappa.coeff - v.line[p] * l_kappa.coeff
               for p in atlas.patches}
    psi = ComplexSection.from_real(Section(h_f, differential(dirac, f)))
    delta = delta_connection(psi, v, atlas)
    for p in atlas.patches:
        route_b = -delta.combined(p) - TWO_PI_I * (ComplexExpr.of(f) * v.combined(p))
        if not complex_is_zero(route_a[p] - route_b):
            raise QuantizeError(
                "tensor-split operator disagrees with the delta-connection form")
    return _from_combined(atlas, route_a)


def lemma51_residual(psi: ComplexSection, f, v: HalfDensitySection,
                     atlas: BundleAtlas, complement: ComplementH) -> HalfDensitySection:
    """``delta_psi(fhat v) - fhat(delta_psi v) + delta_{[[psi,(H_f,df)]]} v``;
    requires the prequantization condition (the hypothesis of the identity)."""
    if not prequant_condition(atlas).ok:
        raise QuantizeError(
            "prequantization condition fails; the commutation identity "
            "is not applicable")
    f = as_expr(f)
    dirac = atlas.dirac
    h_f, _ = hamiltonian_H(dirac, complement, f)
    section_f = ComplexSection.from_real(Section(h_f, differential(dirac, f)))
    lhs = delta_connection(psi, fhat_halfdensity(f, atlas, complement, v), atlas)
    rhs = fhat_halfdensity(f, atlas, complement, delta_connection(psi, v, atlas))
    correction = delta_connection(complex_courant(psi, section_f), v, atlas)
    total = {p: lhs.combined(p) - rhs.combined(p) + correction.combined(p)
             for p in atlas.patches}
    return _from_combined(atlas, total)


def selfadjoint_integrand(f, v1: HalfDensitySection, v2: HalfDensitySection,
                          atlas: BundleAtlas, complement: ComplementH,
                          patch: str | None = None) -> AlphaDensity:
    """The pointwise 1-density behind formal self-adjointness:
    ``<fhat v1, v2> + <v1, fhat v2> + L_{H_f}(h(s1,s2) conj(k1) k2)``."""
    if not atlas.hermitian:
        raise QuantizeError("Hermitian data required")
    atlas.validate()
    f = as_expr(f)
    dirac = atlas.dirac
    chart = dirac.chart
    patch = patch or atlas.patches[0]
    h_f, _ = hamiltonian_H(dirac, complement, f)
    w1, w2 = v1.combined(patch), v2.combined(patch)
    f1 = fhat_halfdensity(f, atlas, complement, v1).combined(patch)
    f2 = fhat_halfdensity(f, atlas, complement, v2).combined(patch)
    pairing_density = AlphaDensity(chart, Fraction(1), w1.conj() * w2)
    transport = lie_derivative_density(h_f, pairing_density)
    coeff = f1.conj() * w2 + w1.conj() * f2 + transport.coeff
    return AlphaDensity(chart, Fraction(1), coeff)


def hzero_invariance_probe(pol: Polarization, atlas: BundleAtlas,
                           complement: ComplementH, f,
                           v: HalfDensitySection) -> tuple[bool, bool]:
    """(candidate is flat along the polarization, image stays flat)."""
    flat = all(delta_connection(psi, v, atlas).is_zero_hsection()
               for psi in pol.frame)
    if not flat:
        return False, False
    image = fhat_halfdensity(as_expr(f), atlas, complement, v)
    invariant = all(delta_connection(psi, image, atlas).is_zero_hsection()
                    for psi in pol.frame)
    return True, invariant


# ---------------------------------------------------------------------------
# quadrature


def integrate_density(kappa: AlphaDensity,
                      box: Mapping[str, tuple[Fraction, Fraction]],
                      rel_tol: float = 1e-8):
    """Numerically integrate a 1-density over a rational coordinate box.

    The coefficient is scanned for poles on a coarse exact grid first; the
    quadrature itself is adaptive high-precision.  Identities are expected to
    be certified symbolically before integration; this is a smoke check.
    """
    if kappa.alpha != 1:
        raise QuantizeError("only 1-densities integrate over the chart")
    chart = kappa.chart
    if set(box) != set(chart.coord_names):
        raise QuantizeError("the box must cover exactly the chart coordinates")
    free = {str(s) for s in (kappa.coeff.re.free_symbols
                             | kappa.coeff.im.free_symbols)}
    extra = free - set(chart.coord_names)
    if extra:
        raise QuantizeError(f"unbound parameters in the integrand: {sorted(extra)}")
    grid_steps = 4
    axes = [box[name] for name in chart.coord_names]
    for corner in itertools.product(range(grid_steps + 1), repeat=chart.dim):
        values = {}
        for (lo, hi), step, name in zip(axes, corner, chart.coord_names):
            lo, hi = Fraction(lo), Fraction(hi)
            values[name] = lo + (hi - lo) * Fraction(step, grid_steps)
        point = Point(chart.name, values)
        try:
            evaluate(kappa.coeff.re, point)
            evaluate(kappa.coeff.im, point)
        except SingularPointError as err:
            raise SingularPointError(
                f"singularity inside the integration box at {values}") from err
    syms = [symbol(n) for n in chart.coord_names]
    f_re = sp.lambdify(syms, kappa.coeff.re.node, "mpmath")
    f_im = sp.lambdify(syms, kappa.coeff.im.node, "mpmath")
    intervals = [[_frac_to_mpf(lo), _frac_to_mpf(hi)] for lo, hi in axes]
    with mpmath.workdps(30):
        real = mpmath.quad(f_re, *intervals)
        imag = mpmath.quad(f_im, *intervals)
    if abs(imag) > rel_tol * max(1.0, abs(real)):
        return mpmath.mpc(real, imag)
    return real


def _frac_to_mpf(value) -> mpmath.mpf:
    value = Fraction(value)
    return mpmath.mpf(value.numerator) / mpmath.mpf(value.denominator)
