import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from foliagraph.expr import (
    BinOp,
    EvalError,
    ExprSyntaxError,
    Num,
    Var,
    evaluate_at,
    parse_expr,
    print_expr,
)


def test_polynomial_profile_matches_direct_formula():
    tree = parse_expr("4*(rho-0.5)^2*(rho-1)")
    x = np.linspace(0.1, 1.9, 7)
    y = np.full_like(x, 0.3)
    rho = np.hypot(x, y)
    assert np.allclose(evaluate_at(tree, x, y), 4 * (rho - 0.5) ** 2 * (rho - 1), atol=1e-14)


def test_variable_node():
    assert parse_expr("x") == Var("x")


def test_unbalanced_parenthesis_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("sin(x")
    assert err.value.offset == 6
    assert ")" in err.value.expected


def test_left_associativity():
    assert parse_expr("1 - 2 - 3") == BinOp("-", BinOp("-", Num(Fraction(1)), Num(Fraction(2))),
                                              Num(Fraction(3)))
    assert float(evaluate_at(parse_expr("8 / 4 / 2"), 0.0, 0.0)) == 1.0


def test_literals_are_exact():
    assert parse_expr("0.1") == Num(Fraction(1, 10))


def test_division_by_zero_reports_offset():
    with pytest.raises(EvalError) as err:
        evaluate_at(parse_expr("1 + 1/x"), np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    assert err.value.offset == 6


def test_sqrt_of_negative():
    with pytest.raises(EvalError):
        evaluate_at(parse_expr("sqrt(x)"), -1.0, 0.0)


def test_piecewise_selects_branches():
    tree = parse_expr("piecewise(rho < 0.5, 0, rho - 1)")
    vals = evaluate_at(tree, np.array([0.1, 2.0]), np.array([0.0, 0.0]))
    assert vals.tolist() == [0.0, 1.0]


def test_piecewise_only_evaluates_selected_points():
    # the 1/x branch is never evaluated at x = 0
    tree = parse_expr("piecewise(x > 0.5, 1/x, 0)")
    assert evaluate_at(tree, np.array([0.0, 1.0]), np.array([0.0, 0.0])).tolist() == [0.0, 1.0]


def test_unknown_name():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("tan(x)")
    assert err.value.offset == 1


def test_phi_and_negative_powers():
    val = float(evaluate_at(parse_expr("phi + x^-2"), 1.0, 1.0))
    assert math.isclose(val, math.pi / 4 + 1.0, rel_tol=1e-15)


_atoms = st.sampled_from(["x", "y", "rho", "2", "0.25", "(1/3)"])


def _exprs():
    return st.recursive(
        _atoms,
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from(["+", "-", "*"]), inner).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
            inner.map(lambda s: f"-{s}"),
            st.tuples(inner, st.integers(0, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
            st.tuples(st.sampled_from(["sin", "cos", "abs"]), inner).map(lambda t: f"{t[0]}({t[1]})"),
            st.tuples(inner, inner).map(lambda t: f"piecewise(x < 0.5, {t[0]}, {t[1]})"),
        ),
        max_leaves=8,
    )


@settings(max_examples=200, deadline=None)
@given(_exprs())
def test_print_parse_round_trip(src):
    tree = parse_expr(src)
    again = parse_expr(print_expr(tree))
    assert again == tree
    pts = np.array([-0.7, 0.2, 1.3])
    assert np.allclose(evaluate_at(tree, pts, pts[::-1]), evaluate_at(again, pts, pts[::-1]),
                       rtol=1e-12, atol=1e-12, equal_nan=True)
