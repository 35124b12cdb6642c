import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crforge.errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError
from crforge.jet import Jet
from crforge.expr import (
    FUNCTIONS,
    Add,
    CompiledExpr,
    Mul,
    Num,
    Var,
    eval_jet,
    eval_scalar,
    parse_expr,
    to_string,
)
from conftest import maxabs
from oracles import builtin_expressions, expression_fd_error, fd_gradient


def test_parse_simple_sum():
    node = parse_expr("x + 2*y")
    assert isinstance(node, Add)
    assert isinstance(node.left, Var) and node.left.name == "x"
    assert isinstance(node.right, Mul) and isinstance(node.right.left, Num) and node.right.left.value == 2


def test_nested_round_trip():
    text = "exp(-(x^2+y^2))"
    node = parse_expr(text)
    assert to_string(parse_expr(to_string(node))) == to_string(node)
    p = [0.3, -0.4]
    assert eval_scalar(node, p, ["x", "y"]) == pytest.approx(np.exp(-0.25))


def test_syntax_error_column():
    with pytest.raises(ExprSyntaxError) as exc:
        parse_expr("x + * y")
    assert exc.value.column == 5


def test_unknown_identifier_reports_column():
    with pytest.raises(UnknownIdentifierError) as exc:
        parse_expr("x + zz", ["x", "y"])
    assert exc.value.column == 5


def test_precedence_of_power_over_negation():
    assert eval_scalar(parse_expr("-x^2"), [3.0], ["x"]) == pytest.approx(-9)
    assert eval_scalar(parse_expr("2^3^2"), [], []) == pytest.approx(512)
    assert eval_scalar(parse_expr("x^-1"), [4.0], ["x"]) == pytest.approx(0.25)


def test_imaginary_unit_and_conj():
    assert eval_scalar(parse_expr("conj(x + 2*i)"), [1.0], ["x"]) == pytest.approx(1 - 2j)
    assert eval_scalar(parse_expr("re(i*x) + im(i*x)"), [2.0], ["x"]) == pytest.approx(2)


def test_eval_jet_product():
    j = eval_jet("x*y", [1.0, 2.0], 2, ["x", "y"])
    assert j.as_dict(tol=1e-15) == {(0, 0): 2, (1, 0): 2, (0, 1): 1, (1, 1): 1}


@pytest.mark.parametrize("text", ["1/x", "log(x)", "sqrt(x)", "x^-2"])
def test_domain_errors_at_zero(text):
    with pytest.raises(ExprDomainError):
        eval_jet(text, [0.0], 2, ["x"])


def test_sine_coefficients_match_finite_differences():
    e = CompiledExpr("sin(x)", ["x"])
    assert expression_fd_error(e, [0.3]) < 1e-6
    g = fd_gradient(e.scalar, [0.3])
    assert g[0].real == pytest.approx(np.cos(0.3), rel=1e-9)


def test_builtin_expressions_match_finite_differences(registry):
    cases = builtin_expressions(registry)
    assert len(cases) > 50
    worst = max(expression_fd_error(e, p) for _, e, p in cases)
    assert worst < 1e-6


# properties -----------------------------------------------------------
def _ast_text():
    leaf = st.sampled_from(["x", "y", "1", "2.5", "i", "pi", "0.5"])

    def extend(children):
        binop = st.tuples(children, st.sampled_from(["+", "-", "*", "/"]), children).map(
            lambda t: f"({t[0]} {t[1]} {t[2]})"
        )
        func = st.tuples(st.sampled_from(["exp", "sin", "cos", "sinh", "cosh", "conj", "re", "im"]), children).map(
            lambda t: f"{t[0]}({t[1]})"
        )
        power = st.tuples(children, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}")
        neg = children.map(lambda c: f"-{c}")
        return binop | func | power | neg

    return st.recursive(leaf, extend, max_leaves=8)


@given(_ast_text())
def test_print_parse_round_trip(text):
    node = parse_expr(text, ["x", "y"])
    printed = to_string(node)
    assert to_string(parse_expr(printed, ["x", "y"])) == printed
    p = [0.37, -0.21]
    try:
        a = eval_scalar(node, p, ["x", "y"])
    except (ExprDomainError, ZeroDivisionError, OverflowError):
        return
    b = eval_scalar(parse_expr(printed, ["x", "y"]), p, ["x", "y"])
    if np.isfinite(a) and abs(a) < 1e12:
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


@given(_ast_text())
def test_jet_value_matches_scalar(text):
    node = parse_expr(text, ["x", "y"])
    p = [0.37, -0.21]
    try:
        s = eval_scalar(node, p, ["x", "y"])
        j = eval_jet(node, p, 2, ["x", "y"])
    except (ExprDomainError, ZeroDivisionError, OverflowError):
        return
    if np.isfinite(s) and abs(s) < 1e12:
        assert abs(complex(j.value) - s) <= 1e-9 * max(1.0, abs(s))


@given(st.text(alphabet="xy0123456789.+-*/^() ,ie" + "".join(FUNCTIONS), max_size=30))
def test_parser_totality(text):
    try:
        parse_expr(text, ["x", "y"])
    except (ExprSyntaxError, UnknownIdentifierError) as exc:
        assert exc.column >= 1


def test_compiled_expression_on_jets():
    e = CompiledExpr("x*y + sin(x)", ["x", "y"])
    j = e(Jet.variables([0.1, 0.2], 2))
    assert maxabs(j.value - (0.02 + np.sin(0.1))) < 1e-15
