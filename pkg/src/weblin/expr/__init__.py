"""Symbolic expressions: parsing, canonical form, calculus, evaluation."""
from .core import (
    COORDINATES,
    FUNCTIONS,
    EvaluationError,
    Expr,
    Generator,
    Node,
    SingularEvaluation,
    apply_function,
    as_expr,
    cos,
    exp,
    log,
    sin,
    symbols,
)
from .parser import ParseError, parse, tokenize
from .taylor import InsufficientOrder, Taylor, eval_taylor


def diff(e: Expr, var: str) -> Expr:
    return e.diff(var)


def evaluate(e: Expr, point, exact=None):
    return e.evaluate(point, exact=exact)


def substitute(e: Expr, bindings) -> Expr:
    return e.substitute(bindings)


def to_string(e: Expr) -> str:
    return str(e)


__all__ = [
    "COORDINATES", "FUNCTIONS", "EvaluationError", "Expr", "Generator", "Node",
    "ParseError", "SingularEvaluation", "InsufficientOrder", "Taylor",
    "apply_function", "as_expr", "cos", "diff", "eval_taylor", "evaluate", "exp",
    "log", "parse", "sin", "substitute", "symbols", "to_string", "tokenize",
]
