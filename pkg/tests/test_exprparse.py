import numpy as np
import pytest

from glmeissner.errors import ParseError
from glmeissner.exprparse import compile_expression


def ev(text, x=0.0, y=0.0, z=0.0):
    return compile_expression(text)(np.asarray(x), np.asarray(y), np.asarray(z))


def test_numbers_and_arithmetic():
    assert ev("1 + 2*3") == 7
    assert ev("2^3^2") == 512           # right associative
    assert ev("-2^2") == -4             # unary binds looser than power
    assert ev("(1+2)*(3-5)/4") == pytest.approx(-1.5)
    assert ev("1e-3 + 2.5E2") == pytest.approx(250.001)
    assert ev("6/4") == 1.5


def test_unicode_operators():
    assert ev("3×4") == 12
    assert ev("8÷2") == 4


def test_variables_and_functions():
    assert ev("x + 2*y + 3*z", 1.0, 2.0, 3.0) == 14
    assert ev("sin(x)^2 + cos(x)^2", 0.7) == pytest.approx(1.0)
    assert ev("sinh(z) - (exp(z) - exp(-z))/2", z=1.3) == pytest.approx(0.0)
    assert ev("cosh(0)") == 1.0
    assert ev("sqrt(x^2)", -3.0) == 3.0


def test_vectorized_evaluation():
    f = compile_expression("x*y - z")
    x = np.linspace(0, 1, 5)
    out = f(x, 2 * x, x**2)
    assert np.allclose(out, x * 2 * x - x**2)
    # constants broadcast to the input shape
    g = compile_expression("1.5")
    assert g(x, x, x).shape == x.shape


def test_parse_errors():
    for bad in ("1 +", "foo(2)", "q + 1", "sin 3", "(1+2", "1 2", "3 @ 4"):
        with pytest.raises(ParseError):
            compile_expression(bad)
