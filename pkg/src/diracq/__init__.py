"""diracq: exact symbolic calculus for Dirac structures on coordinate charts."""

from .expr import (
    ComplexExpr,
    Expr,
    ExprError,
    Point,
    SingularPointError,
    UnknownSymbolError,
    equal,
    evaluate,
    differentiate,
    normalize,
)
from .chart import (
    AlphaDensity,
    Chart,
    KForm,
    KVector,
    VectorField,
    contravariant_derivative,
    exterior_derivative,
    interior_product,
    lie_derivative_density,
    lie_derivative_form,
)

__version__ = "0.1.0"
