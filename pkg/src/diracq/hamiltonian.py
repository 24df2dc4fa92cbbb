"""Admissible functions, their Hamiltonian-type vector fields, and the two
Poisson brackets on a Dirac chart.

``X_f`` is any particular solution of ``(X, df) in D`` (free variables zeroed,
lowest-index pivoting); ``H_f`` is the unique solution whose vector part lies
in a fixed complement of the tangent kernel ``V = D n TM`` inside the
characteristic distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import linalg
from .chart import KForm, VectorField, exterior_derivative
from .dirac import DiracStructure, Section, membership
from .expr import Expr, ExprError, ZERO, as_expr, is_zero

__all__ = [
    "NotAdmissibleError",
    "ComplementError",
    "AdmissibleResult",
    "ComplementH",
    "default_complement",
    "admissible_vector_field",
    "hamiltonian_H",
    "bracket_prime",
    "bracket_omega",
    "jacobi_suite",
]


class NotAdmissibleError(ExprError):
    pass


class ComplementError(ExprError):
    pass


def differential(dirac: DiracStructure, f: Expr) -> KForm:
    return exterior_derivative(dirac.chart.scalar_form(as_expr(f)))


@dataclass(frozen=True)
class AdmissibleResult:
    """Particular vector field with ``(X_f, df)`` in the frame span, or an
    inconsistency witness."""

    ok: bool
    vector_field: VectorField | None = None
    coefficients: tuple[Expr, ...] | None = None
    witness: Expr | None = None


def admissible_vector_field(dirac: DiracStructure, f) -> AdmissibleResult:
    """Solve the linear system expressing ``df`` in the frame form parts;
    the negative outcome is data, not an error."""
    dirac.require_verified()
    f = as_expr(f)
    df = differential(dirac, f)
    result = linalg.solve(dirac.form_matrix(),
                          [df.coeff((i,)) for i in range(dirac.dim)])
    if not result.ok:
        return AdmissibleResult(False, witness=result.witness)
    coeffs = tuple(result.solution)
    return AdmissibleResult(True,
                            vector_field=dirac.section_from_coefficients(coeffs).X,
                            coefficients=coeffs)


class ComplementH:
    """Sections of D whose vector parts complement V = D n TM inside the
    characteristic distribution; fixed once and reused by every bracket."""

    def __init__(self, dirac: DiracStructure, sections: Sequence[Section]):
        dirac.require_verified()
        self.dirac = dirac
        self.sections = tuple(sections)
        self._frame_coefficients = []
        for h in self.sections:
            cert = membership(dirac, h)
            if not cert.ok:
                raise ComplementError(
                    f"complement section {h} does not lie in D: {cert.witness}")
            self._frame_coefficients.append(cert.coefficients)
        n = dirac.dim
        kernel_fields = dirac.tangent_kernel_fields()
        columns = [list(v.components) for v in kernel_fields] + \
                  [list(h.X.components) for h in self.sections]
        if columns:
            matrix = [[col[row] for col in columns] for row in range(n)]
            got = linalg.rank(matrix)
        else:
            got = 0
        want = len(kernel_fields) + len(self.sections)
        if got != want:
            raise ComplementError(
                "complement overlaps the tangent kernel generically")
        if want != dirac.verify().dim_characteristic:
            raise ComplementError(
                "complement does not span the characteristic distribution")

    def frame_coefficients(self, index: int) -> tuple[Expr, ...]:
        return self._frame_coefficients[index]

    def __len__(self) -> int:
        return len(self.sections)


def default_complement(dirac: DiracStructure) -> ComplementH:
    """Greedy complement: frame sections whose vector parts extend the
    tangent kernel span, in frame order."""
    dirac.require_verified()
    n = dirac.dim
    picked: list[Section] = []
    span = [list(v.components) for v in dirac.tangent_kernel_fields()]
    rank = linalg.rank([[col[row] for col in span] for row in range(n)]) if span else 0
    for section in dirac.frame:
        candidate = span + [list(section.X.components)]
        matrix = [[col[row] for col in candidate] for row in range(n)]
        new_rank = linalg.rank(matrix)
        if new_rank > rank:
            picked.append(section)
            span = candidate
            rank = new_rank
    return ComplementH(dirac, picked)


def hamiltonian_H(dirac: DiracStructure, complement: ComplementH, f):
    """The unique vector field in the fixed complement with ``(H_f, df)`` a
    section of D.  Returns the field and the frame coefficients of the
    section ``(H_f, df)``."""
    if complement.dirac is not dirac:
        raise ComplementError("the complement belongs to a different structure")
    f = as_expr(f)
    n = dirac.dim
    df = differential(dirac, f)
    chi = [h.xi for h in complement.sections]
    kernel_combos = dirac.cotangent_kernel()
    tau = [dirac.section_from_coefficients(z).xi for z in kernel_combos]
    columns = [[form.coeff((row,)) for row in range(n)] for form in chi + tau]
    matrix = [[col[row] for col in columns] for row in range(n)] if columns \
        else [[] for _ in range(n)]
    rhs = [df.coeff((i,)) for i in range(n)]
    if columns:
        result = linalg.solve(matrix, rhs)
        if not result.ok:
            raise NotAdmissibleError(f"{f} is not admissible: {result.witness}")
        solution = result.solution
    else:
        if any(not is_zero(v) for v in rhs):
            raise NotAdmissibleError(f"{f} is not admissible: df != 0")
        solution = []
    h_count = len(complement.sections)
    u = solution[:h_count]
    w = solution[h_count:]
    field = VectorField(dirac.chart, (ZERO,) * n)
    frame_coeffs = [ZERO] * n
    for a, coeff in enumerate(u):
        field = field + complement.sections[a].X.scale(coeff)
        for i, c in enumerate(complement.frame_coefficients(a)):
            frame_coeffs[i] = frame_coeffs[i] + coeff * c
    for b, coeff in enumerate(w):
        for i, c in enumerate(kernel_combos[b]):
            frame_coeffs[i] = frame_coeffs[i] + coeff * c
    return field, tuple(frame_coeffs)


def _assert_well_defined(dirac: DiracStructure, f: Expr) -> None:
    """Shifting the particular solution by any tangent-kernel field leaves
    the bracket unchanged; assert that on the kernel basis."""
    df = differential(dirac, f)
    for v in dirac.tangent_kernel_fields():
        if not is_zero(df.evaluate([v])):
            raise NotAdmissibleError(
                "bracket not well-defined: df does not annihilate D n TM")


def bracket_prime(dirac: DiracStructure, f, g) -> Expr:
    """``{f, g}' = X_g f`` with the particular solution; independence from
    the representative is asserted against the tangent kernel."""
    f, g = as_expr(f), as_expr(g)
    sol = admissible_vector_field(dirac, g)
    if not sol.ok:
        raise NotAdmissibleError(f"{g} is not admissible: {sol.witness}")
    _assert_well_defined(dirac, f)
    return sol.vector_field.apply(f)


def bracket_omega(dirac: DiracStructure, complement: ComplementH, f, g) -> Expr:
    """``{f, g} = H_g f``, cross-checked against the presymplectic pairing of
    the two Hamiltonian fields through the frame expansion."""
    f, g = as_expr(f), as_expr(g)
    h_g, _ = hamiltonian_H(dirac, complement, g)
    value = h_g.apply(f)
    _, coeffs_f = hamiltonian_H(dirac, complement, f)
    omega_val = ZERO
    for i, c in enumerate(coeffs_f):
        omega_val = omega_val + c * dirac.frame[i].xi.evaluate([h_g])
    if not is_zero(value - omega_val):
        raise NotAdmissibleError("bracket disagrees with Omega(H_f, H_g)")
    return value


def jacobi_suite(dirac: DiracStructure, complement: ComplementH, f, g, h):
    """The Jacobiator of the Omega-compatible bracket and the field residual
    ``[H_f, H_g] + H_{{f,g}}``; both vanish for a Dirac structure."""
    f, g, h = as_expr(f), as_expr(g), as_expr(h)

    def br(a, b):
        return bracket_omega(dirac, complement, a, b)

    jacobiator = br(br(f, g), h) + br(br(g, h), f) + br(br(h, f), g)
    h_f, _ = hamiltonian_H(dirac, complement, f)
    h_g, _ = hamiltonian_H(dirac, complement, g)
    h_fg, _ = hamiltonian_H(dirac, complement, br(f, g))
    residual = h_f.lie_bracket(h_g) + h_fg
    return jacobiator, residual
