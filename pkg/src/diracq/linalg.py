"""Linear algebra over the exact expression field.

Systems are solved by fraction-free (Bareiss) forward elimination after
clearing row denominators, followed by back substitution over the field.
Rank and membership statements are generic-point: the recorded pivot entries
(leading minors) vanish exactly on the degeneracy locus where the generic
answer can fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import sympy as sp

from .expr import (
    ComplexExpr,
    Expr,
    ZERO,
    ONE,
    complex_is_zero,
    is_zero,
    normalize,
)

__all__ = ["FieldOps", "EXPR_FIELD", "COMPLEX_FIELD", "Echelon", "echelon",
           "SolveResult", "solve", "nullspace", "rank"]


@dataclass(frozen=True)
class FieldOps:
    zero: object
    one: object
    is_zero: Callable
    normalize: Callable


def _normalize_complex(z: ComplexExpr) -> ComplexExpr:
    return ComplexExpr(normalize(z.re), normalize(z.im))


EXPR_FIELD = FieldOps(ZERO, ONE, is_zero, normalize)
COMPLEX_FIELD = FieldOps(ComplexExpr(ZERO, ZERO), ComplexExpr(ONE, ZERO),
                         complex_is_zero, _normalize_complex)


def _clear_row(row: list) -> list:
    """Scale a row of Exprs by the product of its entry denominators."""
    dens = []
    cleaned = []
    for entry in row:
        node = sp.cancel(entry.node)
        cleaned.append(node)
        den = sp.fraction(node)[1]
        if den != 1:
            dens.append(den)
    if not dens:
        return [Expr(n) for n in cleaned]
    scale = sp.Mul(*dens)
    return [Expr(sp.cancel(n * scale)) for n in cleaned]


@dataclass
class Echelon:
    rows: list
    pivots: list[tuple[int, int]]
    ncols: int                      # width of the coefficient block
    degeneracy: list = field(default_factory=list)  # pivot entries

    @property
    def rank(self) -> int:
        return len(self.pivots)


def echelon(matrix: Sequence[Sequence], rhs: Sequence[Sequence] | None = None,
            field_ops: FieldOps = EXPR_FIELD) -> Echelon:
    """Fraction-free forward elimination of ``[matrix | rhs]``.

    Pivots are chosen left-to-right by column, topmost eligible row first.
    """
    nrows = len(matrix)
    ncols = len(matrix[0]) if nrows else 0
    rows = [list(matrix[i]) + (list(rhs[i]) if rhs is not None else [])
            for i in range(nrows)]
    if rows and all(isinstance(e, Expr) for row in rows for e in row):
        rows = [_clear_row(row) for row in rows]
    width = len(rows[0]) if rows else 0
    pivots: list[tuple[int, int]] = []
    degeneracy = []
    prev = field_ops.one
    r = 0
    for col in range(ncols):
        pivot_row = None
        for i in range(r, nrows):
            if not field_ops.is_zero(rows[i][col]):
                pivot_row = i
                break
        if pivot_row is None:
            continue
        if pivot_row != r:
            rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        piv = rows[r][col]
        degeneracy.append(piv)
        for i in range(r + 1, nrows):
            head = rows[i][col]
            for j in range(col, width):
                rows[i][j] = field_ops.normalize(
                    (piv * rows[i][j] - head * rows[r][j]) / prev)
            rows[i][col] = field_ops.zero
        pivots.append((r, col))
        prev = piv
        r += 1
    return Echelon(rows=rows, pivots=pivots, ncols=ncols, degeneracy=degeneracy)


@dataclass
class SolveResult:
    solution: list | None
    witness: object | None          # nonzero residual on an inconsistent row
    rank: int
    free_columns: list[int]
    degeneracy: list

    @property
    def ok(self) -> bool:
        return self.solution is not None


def solve(matrix: Sequence[Sequence], rhs_col: Sequence,
          field_ops: FieldOps = EXPR_FIELD) -> SolveResult:
    """Particular solution of ``matrix @ x = rhs_col`` with free variables
    set to zero; an inconsistency witness otherwise."""
    ech = echelon(matrix, rhs=[[v] for v in rhs_col], field_ops=field_ops)
    nrows = len(ech.rows)
    ncols = ech.ncols
    pivot_cols = [c for _, c in ech.pivots]
    free_cols = [c for c in range(ncols) if c not in pivot_cols]
    for i in range(ech.rank, nrows):
        residual = ech.rows[i][ncols]
        if not field_ops.is_zero(residual):
            return SolveResult(None, residual, ech.rank, free_cols,
                               ech.degeneracy)
    x = [field_ops.zero] * ncols
    for row, col in reversed(ech.pivots):
        acc = ech.rows[row][ncols]
        for j in range(col + 1, ncols):
            if not field_ops.is_zero(x[j]):
                acc = acc - ech.rows[row][j] * x[j]
        x[col] = field_ops.normalize(acc / ech.rows[row][col])
    return SolveResult(x, None, ech.rank, free_cols, ech.degeneracy)


def nullspace(matrix: Sequence[Sequence],
              field_ops: FieldOps = EXPR_FIELD) -> list[list]:
    """Basis of the generic kernel, one vector per free column."""
    ech = echelon(matrix, field_ops=field_ops)
    ncols = ech.ncols
    pivot_cols = [c for _, c in ech.pivots]
    free_cols = [c for c in range(ncols) if c not in pivot_cols]
    basis = []
    for free in free_cols:
        x = [field_ops.zero] * ncols
        x[free] = field_ops.one
        for row, col in reversed(ech.pivots):
            acc = field_ops.zero
            for j in range(col + 1, ncols):
                if not field_ops.is_zero(x[j]):
                    acc = acc + ech.rows[row][j] * x[j]
            x[col] = field_ops.normalize((-acc) / ech.rows[row][col])
        basis.append(x)
    return basis


def rank(matrix: Sequence[Sequence], field_ops: FieldOps = EXPR_FIELD) -> int:
    return echelon(matrix, field_ops=field_ops).rank
