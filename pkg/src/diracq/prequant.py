"""Line-bundle atlases over a Dirac chart, D-connections through their
connection 1-sections, curvature 2-sections, the skew pairing as a D-form,
the prequantization condition, the operator assigned to an admissible
function, and the Cech cocycle construction from local primitives.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import sympy as sp

from .algebroid import AForm, aform_equal, d_A, dirac_presentation
from .dirac import DiracStructure, pairing_minus, omega_on_frame, VerificationError
from .expr import (
    ComplexExpr,
    Expr,
    ExprError,
    I,
    PI,
    Point,
    ZERO,
    as_expr,
    complex_equal,
    complex_is_zero,
    evaluate,
    get_equality_config,
    is_zero,
    random_rational,
)
from .hamiltonian import ComplementH, hamiltonian_H

__all__ = [
    "AtlasError",
    "IntegralityError",
    "BundleAtlas",
    "LineSection",
    "TWO_PI_I",
    "transition_exp",
    "curvature_2section",
    "dirac_chern_check",
    "lambda_Dform",
    "prequant_condition",
    "prequant_operator",
    "build_prequantization",
    "hermitian_check",
    "line_section_from_patch",
]

TWO_PI_I = ComplexExpr(ZERO, 2 * PI)


class AtlasError(ExprError):
    pass


class IntegralityError(AtlasError):
    def __init__(self, message: str, witness):
        super().__init__(message)
        self.witness = witness


def transition_exp(w: Expr) -> ComplexExpr:
    """``exp(-2 pi i w)`` as an exact (cos, -sin) pair."""
    angle = (2 * PI * as_expr(w)).node
    return ComplexExpr(Expr(sp.cos(angle)), Expr(-sp.sin(angle)))


def _as_complex_coeff(value) -> ComplexExpr:
    return value if isinstance(value, ComplexExpr) else ComplexExpr.of(value)


@dataclass
class BundleAtlas:
    """Named patches with transition functions and per-patch connection
    1-sections over the Dirac presentation.

    Overlaps exist exactly where a transition is declared; the user asserts
    the cover geometry.  Validation checks the cocycle identity on declared
    triples and the logarithmic-derivative compatibility of the connection
    1-sections on declared overlaps.
    """

    dirac: DiracStructure
    patches: tuple[str, ...]
    transitions: Mapping[tuple[str, str], ComplexExpr]
    sigma: Mapping[str, AForm]
    hermitian: bool = False
    cochain: Mapping[tuple[str, str], Expr] | None = None
    _validated: bool = field(default=False, repr=False)

    def __post_init__(self):
        if not self.patches:
            raise AtlasError("an atlas needs at least one patch")
        if set(self.sigma) != set(self.patches):
            raise AtlasError("each patch needs a connection 1-section")
        pres = dirac_presentation(self.dirac)
        for name, form in self.sigma.items():
            if form.algebroid is not pres or form.degree != 1:
                raise AtlasError(f"sigma[{name}] must be a D-1-form")
        for (j, k) in self.transitions:
            if j not in self.patches or k not in self.patches:
                raise AtlasError(f"transition ({j},{k}) names unknown patches")

    def transition(self, j: str, k: str) -> ComplexExpr:
        if j == k:
            return ComplexExpr.of(1)
        if (j, k) in self.transitions:
            return self.transitions[(j, k)]
        if (k, j) in self.transitions:
            return ComplexExpr.of(1) / self.transitions[(k, j)]
        raise AtlasError(f"no declared overlap between {j} and {k}")

    def overlaps(self) -> list[tuple[str, str]]:
        seen = set()
        out = []
        for (j, k) in self.transitions:
            if (k, j) not in seen:
                seen.add((j, k))
                out.append((j, k))
        return out

    def validate(self) -> None:
        if self._validated:
            return
        for (j, k), g in self.transitions.items():
            if complex_is_zero(g):
                raise AtlasError(f"transition g[{j},{k}] is the zero expression")
        for a, b, c in itertools.permutations(self.patches, 3):
            declared = all(key in self.transitions or key[::-1] in self.transitions
                           for key in ((a, b), (b, c), (a, c)))
            if not declared:
                continue
            product = self.transition(a, b) * self.transition(b, c)
            if not complex_equal(product, self.transition(a, c)):
                raise AtlasError(f"cocycle fails on triple ({a},{b},{c})")
        for (j, k) in self.overlaps():
            lhs = self.sigma[j] - self.sigma[k]
            g = self.transition(j, k)
            dg = d_A(g, dirac_presentation(self.dirac))
            rhs = dg.scale(I / (ComplexExpr.of(2 * PI) * g))
            if not aform_equal(lhs, rhs):
                raise AtlasError(
                    f"connection 1-sections incompatible on overlap ({j},{k})")
        self._validated = True

    def hermitian_product(self, z1: ComplexExpr, z2: ComplexExpr) -> ComplexExpr:
        if not self.hermitian:
            raise AtlasError("no Hermitian metric attached")
        return _as_complex_coeff(z1).conj() * _as_complex_coeff(z2)


@dataclass(frozen=True)
class LineSection:
    """Per-patch coefficients with the gluing ``s_k = g_jk s_j``."""

    atlas: BundleAtlas
    coeffs: Mapping[str, ComplexExpr]

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           {p: _as_complex_coeff(z) for p, z in self.coeffs.items()})
        if set(self.coeffs) != set(self.atlas.patches):
            raise AtlasError("a line section needs one coefficient per patch")

    def check_gluing(self) -> None:
        for (j, k) in self.atlas.overlaps():
            expected = self.atlas.transition(j, k) * self.coeffs[j]
            if not complex_equal(self.coeffs[k], expected):
                raise AtlasError(f"gluing fails on overlap ({j},{k})")

    def __getitem__(self, patch: str) -> ComplexExpr:
        return self.coeffs[patch]

    def map_coeffs(self, fn) -> "LineSection":
        return LineSection(self.atlas, {p: fn(p, z) for p, z in self.coeffs.items()})

    def __add__(self, other: "LineSection") -> "LineSection":
        return LineSection(self.atlas, {p: self.coeffs[p] + other.coeffs[p]
                                        for p in self.coeffs})

    def __sub__(self, other: "LineSection") -> "LineSection":
        return LineSection(self.atlas, {p: self.coeffs[p] - other.coeffs[p]
                                        for p in self.coeffs})

    def is_zero_section(self) -> bool:
        return all(complex_is_zero(z) for z in self.coeffs.values())


def line_section_from_patch(atlas: BundleAtlas, patch: str, z) -> LineSection:
    """Propagate one patch coefficient through the declared transitions."""
    z = _as_complex_coeff(z)
    coeffs = {patch: z}
    frontier = [patch]
    while frontier:
        current = frontier.pop()
        for (j, k) in atlas.transitions:
            for src, dst in ((j, k), (k, j)):
                if src == current and dst not in coeffs:
                    coeffs[dst] = atlas.transition(src, dst) * coeffs[src]
                    frontier.append(dst)
    for name in atlas.patches:
        coeffs.setdefault(name, z)
    return LineSection(atlas, coeffs)


# ---------------------------------------------------------------------------
# curvature and the prequantization condition


def curvature_2section(atlas: BundleAtlas) -> AForm:
    """``tau = d_D sigma_j``, checked patch-independent (and real when the
    atlas is Hermitian)."""
    atlas.validate()
    taus = {name: d_A(form) for name, form in atlas.sigma.items()}
    names = list(atlas.patches)
    first = taus[names[0]]
    for name in names[1:]:
        if not aform_equal(first, taus[name]):
            raise AtlasError(
                f"curvature differs between patches {names[0]} and {name}")
    if atlas.hermitian:
        for value in first.coeffs.values():
            if isinstance(value, ComplexExpr) and not is_zero(value.im):
                raise AtlasError("Hermitian atlas produced a non-real curvature")
    return first


def dirac_chern_check(first: BundleAtlas, second: BundleAtlas) -> AForm:
    """The global 1-section relating the curvatures of two connections on
    the same bundle: ``tau' - tau = d_D sigma_hat``."""
    if first.dirac is not second.dirac:
        raise AtlasError("atlases live over different Dirac structures")
    if first.patches != second.patches:
        raise AtlasError("atlases use different covers")
    for key in set(first.transitions) | set(second.transitions):
        if not complex_equal(first.transition(*key), second.transition(*key)):
            raise AtlasError("atlases have different transition functions")
    first.validate()
    second.validate()
    hats = {p: second.sigma[p] - first.sigma[p] for p in first.patches}
    names = list(first.patches)
    sigma_hat = hats[names[0]]
    for name in names[1:]:
        if not aform_equal(sigma_hat, hats[name]):
            raise AtlasError(
                f"sigma'-sigma disagrees on overlap ({names[0]},{name})")
    difference = curvature_2section(second) - curvature_2section(first)
    if not aform_equal(difference, d_A(sigma_hat)):
        raise AtlasError("tau' - tau is not the differential of sigma_hat")
    return sigma_hat


def lambda_Dform(dirac: DiracStructure) -> AForm:
    """The skew pairing restricted to D as a D-2-form; closed under d_D and
    equal to the pull-back of the presymplectic 2-cocycle on frame pairs."""
    pres = dirac_presentation(dirac)
    n = dirac.dim
    coeffs = {}
    for i, j in itertools.combinations(range(n), 2):
        value = pairing_minus(dirac.frame[i], dirac.frame[j])
        if value.node != 0:
            coeffs[(i, j)] = value
    lam = AForm(pres, 2, coeffs)
    if not d_A(lam).is_zero_form():
        raise VerificationError("the skew pairing is not d_D-closed")
    omega = omega_on_frame(dirac)
    for i, j in itertools.combinations(range(n), 2):
        if not is_zero(lam.coeff((i, j)) - omega[(i, j)]):
            raise VerificationError(
                "skew pairing disagrees with the presymplectic 2-cocycle")
    return lam


@dataclass(frozen=True)
class PrequantResult:
    ok: bool
    residual: AForm

    def __bool__(self) -> bool:
        return self.ok


def prequant_condition(atlas: BundleAtlas) -> PrequantResult:
    """Rank-1 prequantization test ``tau = Lambda`` on frame pairs; the
    residual D-2-form is returned when it fails."""
    tau = curvature_2section(atlas)
    lam = lambda_Dform(atlas.dirac)
    residual = tau - lam
    return PrequantResult(residual.is_zero_form(), residual)


# ---------------------------------------------------------------------------
# the operator assigned to an admissible function


def covariant_scalar(atlas: BundleAtlas, patch: str, rho, frame_coeffs,
                     z: ComplexExpr) -> ComplexExpr:
    """``nabla_psi`` on a patch coefficient, for a section psi of D given by
    its anchor image and frame coefficients."""
    z = _as_complex_coeff(z)
    sigma_val = atlas.sigma[patch].evaluate_coefficients(frame_coeffs)
    return _as_complex_coeff(rho.apply(z)) + TWO_PI_I * (sigma_val * z)


def prequant_operator(f, atlas: BundleAtlas, complement: ComplementH,
                      section: LineSection) -> LineSection:
    """``fhat s = -nabla_{(H_f, df)} s - 2 pi i f s`` patch by patch."""
    atlas.validate()
    f = as_expr(f)
    h_f, coeffs = hamiltonian_H(atlas.dirac, complement, f)

    def act(patch: str, z: ComplexExpr) -> ComplexExpr:
        nabla = covariant_scalar(atlas, patch, h_f, coeffs, z)
        return -nabla - TWO_PI_I * (ComplexExpr.of(f) * z)

    return section.map_coeffs(act)


def hermitian_check(atlas: BundleAtlas, complement: ComplementH, f,
                    s1: LineSection, s2: LineSection) -> dict[str, ComplexExpr]:
    """Residual of the Hermitian-connection identity per patch; zero for a
    Hermitian atlas with real connection 1-sections."""
    atlas.validate()
    if not atlas.hermitian:
        raise AtlasError("no Hermitian metric attached")
    f = as_expr(f)
    h_f, coeffs = hamiltonian_H(atlas.dirac, complement, f)
    out = {}
    for patch in atlas.patches:
        z1, z2 = s1[patch], s2[patch]
        lhs = h_f.apply(atlas.hermitian_product(z1, z2))
        rhs = atlas.hermitian_product(covariant_scalar(atlas, patch, h_f, coeffs, z1), z2) \
            + atlas.hermitian_product(z1, covariant_scalar(atlas, patch, h_f, coeffs, z2))
        out[patch] = _as_complex_coeff(lhs) - rhs
    return out


# ---------------------------------------------------------------------------
# the cocycle construction


def _sample_point(dirac: DiracStructure) -> Point:
    cfg = get_equality_config()
    rng = random.Random(cfg.seed ^ 0x5EED)
    chart = dirac.chart
    values = {name: random_rational(rng, 100)
              for name in chart.coord_names + chart.param_names}
    return Point(chart.name, values)


def build_prequantization(dirac: DiracStructure, patches: Sequence[str],
                          sigma: Mapping[str, AForm],
                          cochain: Mapping[tuple[str, str], Expr]) -> BundleAtlas:
    """Assemble the Hermitian prequantization atlas from local primitives.

    Requires ``d_D w_jk = sigma_j - sigma_k`` on declared overlaps; the
    alternating sums ``w_jk + w_kl - w_jl`` must be constant along D and take
    exact integer values, otherwise the integrality obstruction is reported
    with its witness.  Transitions are ``exp(-2 pi i w_jk)``.
    """
    dirac.require_verified()
    pres = dirac_presentation(dirac)
    lam = lambda_Dform(dirac)
    for name in patches:
        if name not in sigma:
            raise AtlasError(f"patch {name} has no connection 1-section")
        if not aform_equal(d_A(sigma[name]), lam):
            raise AtlasError(
                f"sigma[{name}] is not a local primitive of the skew pairing")
    cochain = {key: as_expr(w) for key, w in cochain.items()}
    for (j, k), w in cochain.items():
        if not aform_equal(d_A(w, pres), sigma[j] - sigma[k]):
            raise AtlasError(
                f"d_D w[{j},{k}] does not match sigma_{j} - sigma_{k}")
    point = _sample_point(dirac)
    for a, b, c in itertools.combinations(patches, 3):
        keys = ((a, b), (b, c), (a, c))
        if not all(key in cochain for key in keys):
            continue
        f_abc = cochain[(a, b)] + cochain[(b, c)] - cochain[(a, c)]
        if not d_A(f_abc, pres).is_zero_form():
            raise IntegralityError(
                f"integrality obstruction: w[{a},{b}]+w[{b},{c}]-w[{a},{c}] "
                "is not constant along D", str(f_abc))
        if not f_abc.is_rational_fragment():
            raise IntegralityError(
                "integrality obstruction: non-rational cochain sum", str(f_abc))
        value = evaluate(f_abc, point)
        if not isinstance(value, Fraction) or value.denominator != 1:
            raise IntegralityError(
                f"integrality obstruction on ({a},{b},{c}): value {value} "
                "is not an integer", value)
    transitions = {}
    for (j, k), w in cochain.items():
        transitions[(j, k)] = transition_exp(w)
    atlas = BundleAtlas(dirac, tuple(patches), transitions, dict(sigma),
                        hermitian=True, cochain=dict(cochain))
    atlas.validate()
    return atlas
