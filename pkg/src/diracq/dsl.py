"""Text DSL for chart models.

One statement per line; ``#`` starts a comment.  Scalars use ``+ - * / ^``
with integer exponents and the atoms ``exp sin cos``, plus the constants
``pi`` and the imaginary unit ``i``.  For a coordinate ``q``, the 1-form is
spelled ``dq`` and the coordinate vector field ``d_q``; the wedge is ``/\``
and binds looser than ``*``.

    chart M dim 2 coords q p [params k ...]
    scalar f = q^2 + p
    form omega = dq /\\ dp
    vector X = d_q + q*d_p
    bivector W = d_q /\\ d_p
    section s = (d_q, dp)
    dirac D = graph_presymplectic(omega) | graph_poisson(W)
            | regular_distribution(X, ...) | frame(s1, ..., sn)
    complement H = auto | sections(s1, ...)
    patch U1
    transition U1 U2 = <scalar>
    sigma U1 = pull(<1-form>) | dcoeffs(<scalar>, ...)
    cochain U1 U2 = <scalar>
    hermitian
    polarization P = span((d_q, dp), ...)
    halfdensity v = <scalar>
    check dirac poisson prequant polarize quantize poincare | all
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import sympy as sp

from .chart import Chart, KForm, KVector, VectorField
from .expr import ComplexExpr, Expr, ZERO, as_expr, symbol

__all__ = ["DslError", "Model", "parse_model", "format_model", "SUITES"]

SUITES = ("dirac", "poisson", "prequant", "polarize", "quantize", "poincare")


class DslError(Exception):
    def __init__(self, message: str, line: int, column: int = 0):
        super().__init__(f"line {line}:{column}: {message}")
        self.line = line
        self.column = column
        self.message = message


# ---------------------------------------------------------------------------
# values


@dataclass(frozen=True)
class CForm:
    re: KForm
    im: KForm


@dataclass(frozen=True)
class CVector:
    re: VectorField
    im: VectorField


@dataclass(frozen=True)
class CMulti:
    re: KVector
    im: KVector


@dataclass(frozen=True)
class Pair:
    vector: CVector
    form: CForm


def _zero_vector(chart: Chart) -> VectorField:
    return VectorField(chart, (ZERO,) * chart.dim)


def _scalar(value) -> ComplexExpr:
    return ComplexExpr.of(value)


def _vector_to_multi(v: CVector) -> CMulti:
    chart = v.re.chart
    return CMulti(
        KVector(chart, 1, {(i,): c for i, c in enumerate(v.re.components)}),
        KVector(chart, 1, {(i,): c for i, c in enumerate(v.im.components)}),
    )


class _Ops:
    """Type-dispatched arithmetic on parser values."""

    @staticmethod
    def add(a, b, err):
        if isinstance(a, ComplexExpr) and isinstance(b, ComplexExpr):
            return a + b
        if isinstance(a, CForm) and isinstance(b, CForm):
            return CForm(a.re + b.re, a.im + b.im)
        if isinstance(a, CVector) and isinstance(b, CVector):
            return CVector(a.re + b.re, a.im + b.im)
        if isinstance(a, CMulti) and isinstance(b, CMulti):
            return CMulti(a.re + b.re, a.im + b.im)
        raise err(f"cannot add {_kind(a)} and {_kind(b)}")

    @staticmethod
    def neg(a, err):
        if isinstance(a, ComplexExpr):
            return -a
        if isinstance(a, CForm):
            return CForm(-a.re, -a.im)
        if isinstance(a, CVector):
            return CVector(-a.re, -a.im)
        if isinstance(a, CMulti):
            return CMulti(-a.re, -a.im)
        raise err(f"cannot negate {_kind(a)}")

    @staticmethod
    def mul(a, b, err):
        if isinstance(a, ComplexExpr) and isinstance(b, ComplexExpr):
            return a * b
        if isinstance(b, ComplexExpr) and not isinstance(a, ComplexExpr):
            return _Ops.mul(b, a, err)
        if isinstance(a, ComplexExpr):
            if isinstance(b, CForm):
                return CForm(b.re.scale(a.re) - b.im.scale(a.im),
                             b.re.scale(a.im) + b.im.scale(a.re))
            if isinstance(b, CVector):
                return CVector(b.re.scale(a.re) - b.im.scale(a.im),
                               b.re.scale(a.im) + b.im.scale(a.re))
            if isinstance(b, CMulti):
                return CMulti(b.re.scale(a.re) - b.im.scale(a.im),
                              b.re.scale(a.im) + b.im.scale(a.re))
        raise err(f"cannot multiply {_kind(a)} and {_kind(b)}")

    @staticmethod
    def div(a, b, err):
        if not isinstance(b, ComplexExpr):
            raise err(f"cannot divide by {_kind(b)}")
        inverse = ComplexExpr.of(1) / b
        return _Ops.mul(inverse, a, err)

    @staticmethod
    def wedge(a, b, err):
        if isinstance(a, CVector):
            a = _vector_to_multi(a)
        if isinstance(b, CVector):
            b = _vector_to_multi(b)
        if isinstance(a, CForm) and isinstance(b, CForm):
            return CForm(a.re.wedge(b.re) - a.im.wedge(b.im),
                         a.re.wedge(b.im) + a.im.wedge(b.re))
        if isinstance(a, CMulti) and isinstance(b, CMulti):
            return CMulti(a.re.wedge(b.re) - a.im.wedge(b.im),
                          a.re.wedge(b.im) + a.im.wedge(b.re))
        raise err(f"cannot wedge {_kind(a)} and {_kind(b)}")

    @staticmethod
    def power(a, n: int, err):
        if not isinstance(a, ComplexExpr):
            raise err(f"cannot raise {_kind(a)} to a power")
        if n < 0:
            return _Ops.div(_scalar(1), _Ops.power(a, -n, err), err)
        out = _scalar(1)
        for _ in range(n):
            out = out * a
        return out


def _kind(value) -> str:
    return {ComplexExpr: "scalar", CForm: "form", CVector: "vector",
            CMulti: "multivector", Pair: "section"}.get(type(value),
                                                        type(value).__name__)


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<wedge>/\\)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),=])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int


def _tokenize(text: str, line_no: int) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise DslError(f"unexpected character {text[pos]!r}", line_no, pos + 1)
        pos = match.end()
        kind = match.lastgroup
        if kind == "ws":
            continue
        out.append(Token(kind, match.group(), match.start() + 1))
    return out


class _Stream:
    def __init__(self, tokens: list[Token], line_no: int):
        self.tokens = tokens
        self.index = 0
        self.line = line_no

    def error(self, message: str) -> DslError:
        column = self.tokens[self.index].column if self.index < len(self.tokens) \
            else (self.tokens[-1].column + 1 if self.tokens else 1)
        return DslError(message, self.line, column)

    def peek(self) -> Token | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def next(self) -> Token:
        token = self.peek()
        if token is None:
            raise self.error("unexpected end of statement")
        self.index += 1
        return token

    def accept(self, text: str) -> bool:
        token = self.peek()
        if token is not None and token.text == text:
            self.index += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        token = self.peek()
        if token is None or token.text != text:
            raise self.error(f"expected {text!r}")
        return self.next()

    def expect_ident(self) -> str:
        token = self.peek()
        if token is None or token.kind != "ident":
            raise self.error("expected an identifier")
        return self.next().text

    def at_end(self) -> bool:
        return self.index >= len(self.tokens)


# ---------------------------------------------------------------------------
# the model


@dataclass
class Model:
    name: str
    chart: Chart
    scalars: dict[str, ComplexExpr] = field(default_factory=dict)
    forms: dict[str, CForm] = field(default_factory=dict)
    vectors: dict[str, CVector] = field(default_factory=dict)
    bivectors: dict[str, CMulti] = field(default_factory=dict)
    sections: dict[str, Pair] = field(default_factory=dict)
    dirac_decl: tuple[str, str, tuple[str, ...]] | None = None  # (name, kind, args)
    complement_decl: tuple[str, str, tuple[str, ...]] | None = None
    patches: list[str] = field(default_factory=list)
    transitions: dict[tuple[str, str], ComplexExpr] = field(default_factory=dict)
    sigmas: dict[str, tuple[str, tuple]] = field(default_factory=dict)
    cochain: dict[tuple[str, str], Expr] = field(default_factory=dict)
    hermitian: bool = False
    polarization_decl: tuple[str, tuple[Pair, ...]] | None = None
    halfdensities: dict[str, ComplexExpr] = field(default_factory=dict)
    checks: list[str] = field(default_factory=list)


class _ExpressionParser:
    """Recursive descent over one statement's token stream."""

    def __init__(self, stream: _Stream, model: Model):
        self.stream = stream
        self.model = model
        self.chart = model.chart

    def err(self, message: str) -> DslError:
        return self.stream.error(message)

    # precedence: + -  <  /\  <  * /  <  unary -  <  ^
    def expression(self):
        value = self.wedge_term()
        while True:
            if self.stream.accept("+"):
                value = _Ops.add(value, self.wedge_term(), self.err)
            elif self.stream.accept("-"):
                value = _Ops.add(value, _Ops.neg(self.wedge_term(), self.err),
                                 self.err)
            else:
                return value

    def wedge_term(self):
        value = self.term()
        while True:
            token = self.stream.peek()
            if token is not None and token.kind == "wedge":
                self.stream.next()
                value = _Ops.wedge(value, self.term(), self.err)
            else:
                return value

    def term(self):
        value = self.factor()
        while True:
            if self.stream.accept("*"):
                value = _Ops.mul(value, self.factor(), self.err)
            elif self.stream.accept("/"):
                value = _Ops.div(value, self.factor(), self.err)
            else:
                return value

    def factor(self):
        if self.stream.accept("-"):
            return _Ops.neg(self.factor(), self.err)
        return self.power()

    def power(self):
        base = self.atom()
        if self.stream.accept("^"):
            negative = self.stream.accept("-")
            token = self.stream.next()
            if token.kind != "int":
                raise self.err("exponents must be integer literals")
            exponent = int(token.text)
            if negative:
                exponent = -exponent
            return _Ops.power(base, exponent, self.err)
        return base

    def atom(self):
        token = self.stream.next()
        if token.kind == "int":
            return _scalar(int(token.text))
        if token.text == "(":
            value = self.expression()
            self.stream.expect(")")
            return value
        if token.kind != "ident":
            raise self.err(f"unexpected token {token.text!r}")
        return self.resolve(token)

    def resolve(self, token: Token):
        name = token.text
        if name in ("exp", "sin", "cos") and self.stream.accept("("):
            inner = self.expression()
            self.stream.expect(")")
            if not isinstance(inner, ComplexExpr):
                raise self.err(f"{name} expects a scalar argument")
            if inner.im.node != 0:
                raise self.err(f"{name} of a complex argument is not supported")
            head = {"exp": sp.exp, "sin": sp.sin, "cos": sp.cos}[name]
            return _scalar(Expr(head(inner.re.node)))
        model = self.model
        if name in model.scalars:
            return model.scalars[name]
        if name in model.forms:
            return model.forms[name]
        if name in model.vectors:
            return model.vectors[name]
        if name in model.bivectors:
            return model.bivectors[name]
        chart = self.chart
        if name in chart.coord_names or name in chart.param_names:
            return _scalar(Expr(symbol(name)))
        if name == "i":
            return ComplexExpr(ZERO, as_expr(1))
        if name == "pi":
            return _scalar(Expr(sp.pi))
        if name.startswith("d_") and name[2:] in chart.coord_names:
            index = chart.coord_names.index(name[2:])
            return CVector(chart.basis_vector(index), _zero_vector(chart))
        if name.startswith("d") and name[1:] in chart.coord_names:
            index = chart.coord_names.index(name[1:])
            return CForm(chart.basis_covector(index), KForm(chart, 1, {}))
        raise DslError(f"unknown symbol {name!r}", self.stream.line, token.column)

    def pair(self) -> Pair:
        self.stream.expect("(")
        vector = self.expression()
        self.stream.expect(",")
        form = self.expression()
        self.stream.expect(")")
        if not isinstance(vector, CVector):
            raise self.err("the first slot of a section must be a vector field")
        if not isinstance(form, CForm) or form.re.degree != 1:
            raise self.err("the second slot of a section must be a 1-form")
        return Pair(vector, form)


def _require_scalar(value, stream) -> ComplexExpr:
    if not isinstance(value, ComplexExpr):
        raise stream.error(f"expected a scalar, got {_kind(value)}")
    return value


def _require_real(z: ComplexExpr, stream) -> Expr:
    if z.im.node != 0:
        raise stream.error("expected a real expression")
    return z.re


def parse_model(text: str, name: str = "model") -> Model:
    """Parse a model file; diagnostics carry line and column."""
    model: Model | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = _tokenize(line, line_no)
        stream = _Stream(tokens, line_no)
        keyword = stream.expect_ident()
        if keyword == "chart":
            if model is not None:
                raise stream.error("only one chart per model")
            model = _parse_chart(stream, name)
            continue
        if model is None:
            raise stream.error("the chart must be declared first")
        _parse_statement(keyword, stream, model)
    if model is None:
        raise DslError("empty model: no chart declared", 1, 1)
    return model


def _parse_chart(stream: _Stream, default_name: str) -> Model:
    chart_name = stream.expect_ident()
    stream.expect("dim")
    dim_token = stream.next()
    if dim_token.kind != "int":
        raise stream.error("expected the dimension")
    dim = int(dim_token.text)
    stream.expect("coords")
    coords = []
    while not stream.at_end():
        token = stream.peek()
        if token.text == "params":
            break
        coords.append(stream.expect_ident())
    params = []
    if stream.accept("params"):
        while not stream.at_end():
            params.append(stream.expect_ident())
    if len(coords) != dim:
        raise stream.error(
            f"dimension mismatch: dim {dim} but {len(coords)} coordinates")
    return Model(name=chart_name, chart=Chart(chart_name, tuple(coords),
                                              tuple(params)))


def _parse_statement(keyword: str, stream: _Stream, model: Model) -> None:
    parser = _ExpressionParser(stream, model)
    if keyword == "scalar":
        name = stream.expect_ident()
        stream.expect("=")
        model.scalars[name] = _require_scalar(parser.expression(), stream)
    elif keyword == "form":
        name = stream.expect_ident()
        stream.expect("=")
        value = parser.expression()
        if not isinstance(value, CForm):
            raise stream.error(f"expected a form, got {_kind(value)}")
        model.forms[name] = value
    elif keyword == "vector":
        name = stream.expect_ident()
        stream.expect("=")
        value = parser.expression()
        if not isinstance(value, CVector):
            raise stream.error(f"expected a vector field, got {_kind(value)}")
        model.vectors[name] = value
    elif keyword == "bivector":
        name = stream.expect_ident()
        stream.expect("=")
        value = parser.expression()
        if isinstance(value, CVector):
            value = _vector_to_multi(value)
        if not isinstance(value, CMulti) or value.re.degree != 2:
            raise stream.error(f"expected a bivector, got {_kind(value)}")
        model.bivectors[name] = value
    elif keyword == "section":
        name = stream.expect_ident()
        stream.expect("=")
        model.sections[name] = parser.pair()
    elif keyword == "dirac":
        name = stream.expect_ident()
        stream.expect("=")
        kind = stream.expect_ident()
        if kind not in ("graph_presymplectic", "graph_poisson",
                        "regular_distribution", "frame"):
            raise stream.error(f"unknown Dirac constructor {kind!r}")
        stream.expect("(")
        args = []
        if not stream.accept(")"):
            args.append(stream.expect_ident())
            while stream.accept(","):
                args.append(stream.expect_ident())
            stream.expect(")")
        model.dirac_decl = (name, kind, tuple(args))
    elif keyword == "complement":
        name = stream.expect_ident()
        stream.expect("=")
        kind = stream.expect_ident()
        if kind == "auto":
            model.complement_decl = (name, "auto", ())
        elif kind == "sections":
            stream.expect("(")
            args = [stream.expect_ident()]
            while stream.accept(","):
                args.append(stream.expect_ident())
            stream.expect(")")
            model.complement_decl = (name, "sections", tuple(args))
        else:
            raise stream.error("complement must be 'auto' or 'sections(...)'")
    elif keyword == "patch":
        model.patches.append(stream.expect_ident())
    elif keyword == "transition":
        j = stream.expect_ident()
        k = stream.expect_ident()
        stream.expect("=")
        model.transitions[(j, k)] = _require_scalar(parser.expression(), stream)
    elif keyword == "sigma":
        patch = stream.expect_ident()
        stream.expect("=")
        kind = stream.expect_ident()
        stream.expect("(")
        if kind == "pull":
            value = parser.expression()
            stream.expect(")")
            if not isinstance(value, CForm) or value.re.degree != 1:
                raise stream.error("pull(...) expects a 1-form")
            model.sigmas[patch] = ("pull", (value,))
        elif kind == "dcoeffs":
            values = [_require_scalar(parser.expression(), stream)]
            while stream.accept(","):
                values.append(_require_scalar(parser.expression(), stream))
            stream.expect(")")
            model.sigmas[patch] = ("dcoeffs", tuple(values))
        else:
            raise stream.error("sigma must be pull(...) or dcoeffs(...)")
    elif keyword == "cochain":
        j = stream.expect_ident()
        k = stream.expect_ident()
        stream.expect("=")
        model.cochain[(j, k)] = _require_real(
            _require_scalar(parser.expression(), stream), stream)
    elif keyword == "hermitian":
        model.hermitian = True
    elif keyword == "polarization":
        name = stream.expect_ident()
        stream.expect("=")
        stream.expect("span")
        stream.expect("(")
        pairs = [parser.pair()]
        while stream.accept(","):
            pairs.append(parser.pair())
        stream.expect(")")
        model.polarization_decl = (name, tuple(pairs))
    elif keyword == "halfdensity":
        name = stream.expect_ident()
        stream.expect("=")
        model.halfdensities[name] = _require_scalar(parser.expression(), stream)
    elif keyword == "check":
        while not stream.at_end():
            suite = stream.expect_ident()
            if suite == "all":
                model.checks.extend(s for s in SUITES if s not in model.checks)
                continue
            if suite not in SUITES:
                raise stream.error(f"unknown check suite {suite!r}")
            if suite not in model.checks:
                model.checks.append(suite)
    else:
        raise stream.error(f"unknown statement {keyword!r}")
    if not stream.at_end():
        raise stream.error("trailing tokens after statement")


# ---------------------------------------------------------------------------
# pretty printer


def _expr_text(e: Expr) -> str:
    return sp.sstr(e.node).replace("**", "^")


def _scalar_text(z: ComplexExpr) -> str:
    if z.im.node == 0:
        return _expr_text(z.re)
    return f"({_expr_text(z.re)}) + i*({_expr_text(z.im)})"


def _form_part_text(form: KForm, chart: Chart) -> str:
    if not form.coeffs:
        return f"0*d{chart.coord_names[0]}"
    parts = []
    for key in sorted(form.coeffs):
        basis = "/\\".join(f"d{chart.coord_names[i]}" for i in key)
        parts.append(f"({_expr_text(form.coeffs[key])})*{basis}")
    return " + ".join(parts)


def _form_text(value: CForm, chart: Chart) -> str:
    if value.im.is_zero_tensor() and not value.im.coeffs:
        return _form_part_text(value.re, chart)
    return (f"{_form_part_text(value.re, chart)}"
            f" + (i)*({_form_part_text(value.im, chart)})")


def _vector_part_text(v: VectorField, chart: Chart) -> str:
    parts = [f"({_expr_text(c)})*d_{n}"
             for c, n in zip(v.components, chart.coord_names) if c.node != 0]
    return " + ".join(parts) if parts else f"0*d_{chart.coord_names[0]}"


def _vector_text(value: CVector, chart: Chart) -> str:
    if all(c.node == 0 for c in value.im.components):
        return _vector_part_text(value.re, chart)
    return (f"{_vector_part_text(value.re, chart)}"
            f" + (i)*({_vector_part_text(value.im, chart)})")


def _multi_text(value: CMulti, chart: Chart) -> str:
    def part(kv: KVector) -> str:
        if not kv.coeffs:
            return f"0*d_{chart.coord_names[0]}/\\d_{chart.coord_names[1]}"
        parts = []
        for key in sorted(kv.coeffs):
            basis = "/\\".join(f"d_{chart.coord_names[i]}" for i in key)
            parts.append(f"({_expr_text(kv.coeffs[key])})*{basis}")
        return " + ".join(parts)

    if not value.im.coeffs:
        return part(value.re)
    return f"{part(value.re)} + (i)*({part(value.im)})"


def _pair_text(pair: Pair, chart: Chart) -> str:
    return f"({_vector_text(pair.vector, chart)}, {_form_text(pair.form, chart)})"


def format_model(model: Model) -> str:
    """Canonical text rendering; reparses to a structurally equal model."""
    chart = model.chart
    lines = [f"chart {chart.name} dim {chart.dim} coords "
             + " ".join(chart.coord_names)
             + (" params " + " ".join(chart.param_names)
                if chart.param_names else "")]
    for name, value in model.scalars.items():
        lines.append(f"scalar {name} = {_scalar_text(value)}")
    for name, value in model.forms.items():
        lines.append(f"form {name} = {_form_text(value, chart)}")
    for name, value in model.vectors.items():
        lines.append(f"vector {name} = {_vector_text(value, chart)}")
    for name, value in model.bivectors.items():
        lines.append(f"bivector {name} = {_multi_text(value, chart)}")
    for name, value in model.sections.items():
        lines.append(f"section {name} = {_pair_text(value, chart)}")
    if model.dirac_decl:
        name, kind, args = model.dirac_decl
        lines.append(f"dirac {name} = {kind}({', '.join(args)})")
    if model.complement_decl:
        name, kind, args = model.complement_decl
        if kind == "auto":
            lines.append(f"complement {name} = auto")
        else:
            lines.append(f"complement {name} = sections({', '.join(args)})")
    for patch in model.patches:
        lines.append(f"patch {patch}")
    for (j, k), value in model.transitions.items():
        lines.append(f"transition {j} {k} = {_scalar_text(value)}")
    for patch, (kind, payload) in model.sigmas.items():
        if kind == "pull":
            lines.append(f"sigma {patch} = pull({_form_text(payload[0], chart)})")
        else:
            inner = ", ".join(_scalar_text(z) for z in payload)
            lines.append(f"sigma {patch} = dcoeffs({inner})")
    for (j, k), value in model.cochain.items():
        lines.append(f"cochain {j} {k} = {_expr_text(value)}")
    if model.hermitian:
        lines.append("hermitian")
    if model.polarization_decl:
        name, pairs = model.polarization_decl
        inner = ", ".join(_pair_text(p, chart) for p in pairs)
        lines.append(f"polarization {name} = span({inner})")
    for name, value in model.halfdensities.items():
        lines.append(f"halfdensity {name} = {_scalar_text(value)}")
    if model.checks:
        lines.append("check " + " ".join(model.checks))
    return "\n".join(lines) + "\n"
