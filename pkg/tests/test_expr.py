import cmath
import math

import numpy as np
import pytest

from segretool import expr
from segretool.errors import (
    ExprError,
    ExprSyntaxError,
    SegreToolError,
    SingularEvaluationError,
    UnboundVariableError,
    UnknownIdentifierError,
)


def test_parse_precedence():
    e = expr.parse("1 + 2*w^2")
    assert expr.evaluate(e, {"w": 3}) == 19


def test_unary_minus_binds_looser_than_power():
    assert expr.evaluate(expr.parse("-w^2"), {"w": 2}) == -4


def test_constants():
    assert abs(expr.evaluate(expr.parse("exp(i*pi)"), {}) + 1) < 1e-15


def test_syntax_error_offset():
    with pytest.raises(ExprSyntaxError) as info:
        expr.parse("z1 + @")
    assert info.value.offset == 5


def test_syntax_error_at_end_of_input():
    with pytest.raises(ExprSyntaxError) as info:
        expr.parse("z1 +")
    assert info.value.offset == 4
    assert isinstance(info.value, SegreToolError)


def test_unbalanced_parenthesis():
    with pytest.raises(ExprSyntaxError) as info:
        expr.parse("(w + 1")
    assert ")" in info.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        expr.parse("w + foo")
    assert info.value.name == "foo"
    assert info.value.offset == 4


def test_variable_beyond_dimension():
    expr.parse("z2", n=3)
    with pytest.raises(UnknownIdentifierError):
        expr.parse("z3", n=3)


def test_conj_rewrites_variables():
    e = expr.parse("conj(w*z1)")
    assert e.variables == frozenset({"cw", "cz1"})
    assert e == expr.parse("conj(w)*conj(z1)")


def test_conjugate_of_constant():
    e = expr.conjugate(expr.parse("(2 + 3*i)*w"))
    assert expr.evaluate(e, {"cw": 1}) == complex(2, -3)


def test_tracked_log_has_no_conjugate():
    with pytest.raises(ExprError):
        expr.conjugate_name(expr.LOG_W)
    with pytest.raises(ExprSyntaxError):
        expr.parse("conj(Lw)")


def test_to_source_parses_back():
    sources = [
        "w - conj(w)*exp(2*i*z1*conj(z1))",
        "-z1^2/(1 - w) + sqrt(cos(z2))",
        "(1/0.3)*(-i)*log(1 + z1*conj(z1))",
    ]
    for source in sources:
        e = expr.parse(source)
        assert expr.parse(expr.to_source(e)) == e


def test_log_winding():
    e = expr.parse("log(w)")
    assert abs(expr.evaluate(e, {"w": 1}, winding=1) - 2j * math.pi) < 1e-15


def test_sqrt_winding_flips_sign():
    e = expr.parse("sqrt(w)")
    assert expr.evaluate(e, {"w": 4}) == 2
    assert expr.evaluate(e, {"w": 4}, winding=1) == -2


def test_principal_branch_on_negative_axis():
    assert abs(expr.principal_log(-1) - 1j * math.pi) < 1e-15
    assert expr.principal_sqrt(-4) == 2j


def test_constant_real_power():
    assert abs(expr.evaluate(expr.parse("w^(1/2)"), {"w": 4}) - 2) < 1e-15


def test_general_power():
    value = expr.evaluate(expr.parse("w^z1"), {"w": 2, "z1": 3})
    assert abs(value - 8) < 1e-12


def test_singular_points():
    with pytest.raises(SingularEvaluationError):
        expr.evaluate(expr.parse("1/w"), {"w": 0})
    with pytest.raises(SingularEvaluationError):
        expr.evaluate(expr.parse("log(w)"), {"w": 0})
    with pytest.raises(SingularEvaluationError):
        expr.evaluate(expr.parse("w^(-2)"), {"w": 0})


def test_unbound_variable():
    with pytest.raises(UnboundVariableError) as info:
        expr.evaluate(expr.parse("z1 + w"), {"w": 1})
    assert info.value.name == "z1"


def test_jet_first_and_second_order():
    jet = expr.eval_jet(expr.parse("z1^2*w"), {"z1": 2, "w": 3}, order=2)
    assert jet.variables == ("w", "z1")
    assert jet.value == 12
    np.testing.assert_allclose(jet.gradient, [4, 12])
    np.testing.assert_allclose(jet.hessian, [[0, 4], [4, 6]])
    assert jet.partials == {"w": 4, "z1": 12}


def test_jet_through_library_functions():
    point = {"z1": 0.3 + 0.1j}
    e = expr.parse("exp(sin(z1))")
    expected = cmath.cos(point["z1"]) * cmath.exp(cmath.sin(point["z1"]))
    assert abs(expr.derivative(e, point, "z1") - expected) < 1e-14


def test_jet_of_constant_expression():
    jet = expr.eval_jet(expr.parse("2 + i"), {"w": 1}, variables=("w",))
    assert jet.value == 2 + 1j
    np.testing.assert_array_equal(jet.gradient, [0])


def test_jet_order_is_checked():
    with pytest.raises(ExprError):
        expr.eval_jet(expr.parse("w"), {"w": 1}, order=3)


def test_substitute():
    e = expr.substitute(expr.parse("z1*w"), {"w": expr.parse("z1 + 1")})
    assert expr.evaluate(e, {"z1": 2}) == 6
    assert expr.evaluate(expr.substitute(e, {"z1": 3}), {}) == 12


@pytest.mark.parametrize("value", [-2, 1 - 2j, -0.5j, 3.25])
def test_to_source_keeps_substituted_constants(value):
    e = expr.substitute(expr.parse("w^2 + z1*w"), {"w": value})
    reparsed = expr.parse(expr.to_source(e))
    assert expr.evaluate(reparsed, {"z1": 0.5}) == pytest.approx(expr.evaluate(e, {"z1": 0.5}), abs=1e-12)
    assert expr.evaluate(expr.parse(expr.to_source(expr.substitute(expr.parse("w^2"), {"w": -2}))), {}) == pytest.approx(4)


def _random_source(rng, depth: int) -> str:
    if depth == 0 or rng.uniform() < 0.2:
        leaves = ["z1", "w", "cz1", f"{rng.uniform(0.1, 2):.3f}", "i"]
        return leaves[rng.integers(len(leaves))]
    kind = rng.integers(6)
    if kind < 3:
        op = "+-*"[kind]
        return f"({_random_source(rng, depth - 1)} {op} {_random_source(rng, depth - 1)})"
    if kind == 3:
        return f"({_random_source(rng, depth - 1)})^2"
    func = ("exp", "sin", "cos")[rng.integers(3)]
    return f"{func}(0.5*{_random_source(rng, depth - 1)})"


def test_jet_agrees_with_finite_differences(rng):
    point = {"z1": 0.3 - 0.2j, "w": 0.4 + 0.1j, "cz1": 0.3 + 0.2j}
    h = 1e-6
    for _ in range(40):
        e = expr.parse(_random_source(rng, 4))
        jet = expr.eval_jet(e, point, order=2, variables=("z1", "w", "cz1"))
        for index, name in enumerate(jet.variables):
            up, down = dict(point), dict(point)
            up[name] += h
            down[name] -= h
            slope = (expr.evaluate(e, up) - expr.evaluate(e, down)) / (2 * h)
            assert abs(jet.gradient[index] - slope) < 1e-6 * max(1.0, abs(slope))
            grad_up = expr.eval_jet(e, up, variables=jet.variables).gradient
            grad_down = expr.eval_jet(e, down, variables=jet.variables).gradient
            np.testing.assert_allclose(jet.hessian[index], (grad_up - grad_down) / (2 * h),
                                       atol=1e-5 * max(1.0, float(np.max(np.abs(jet.hessian)))))


def test_evaluation_is_pure():
    e = expr.parse("exp(2*i*z1*conj(z1)) * log(w) + sqrt(w)")
    point = {"z1": 0.2 + 0.1j, "cz1": 0.2 - 0.1j, "w": -1.0 + 1e-3j}
    before = dict(point)
    first = expr.evaluate(e, point, winding=1)
    expr.eval_jet(e, point, order=2)
    expr.evaluate(e, {"z1": 5, "cz1": 5, "w": 3})
    assert expr.evaluate(e, point, winding=1) == first
    assert point == before


def test_assignment_and_dimension():
    point = expr.assignment([1, 2], 3, [4, 5], 6, log_w=0.5)
    assert point == {"z1": 1, "z2": 2, "cz1": 4, "cz2": 5, "w": 3, "cw": 6, "Lw": 0.5}
    assert expr.dimension_of(expr.parse("z2 + conj(z1)")) == 3
    assert expr.dimension_of(expr.parse("w")) == 1
