import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levykit.errors import ConfigError
from levykit.expressions import compile_expression


def test_arithmetic_and_caret_power():
    e = compile_expression("2^3 + 1/4 - pi", ("x",))
    assert float(e()) == pytest.approx(8.25 - math.pi)


def test_scalar_variable_broadcasts():
    e = compile_expression("1 + 0.25*cos(2*pi*x)", ("x",))
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(e(x=x), 1 + 0.25 * np.cos(2 * np.pi * x))


def test_bars_are_absolute_value_and_vector_norm():
    assert float(compile_expression("|x - 3|", ("x",))(x=1.0)) == 2.0
    e = compile_expression("exp(-|y|)", ("y",), {"y": 2})
    y = np.array([[3.0, 4.0], [0.0, 0.0]])
    np.testing.assert_allclose(e(y=y), [math.exp(-5.0), 1.0])
    assert float(compile_expression("||x| - 2|", ("x",))(x=-5.0)) == 3.0


def test_vector_components():
    e = compile_expression("x1 * x2 + t", ("x", "t"), {"x": 2})
    assert e.uses("x") and e.uses("t")
    np.testing.assert_allclose(e(x=np.array([[2.0, 3.0]]), t=1.0), [7.0])


def test_uses_reports_free_variables():
    e = compile_expression("sin(x)", ("x", "y", "t"))
    assert e.uses("x") and not e.uses("y") and not e.uses("t")


@pytest.mark.parametrize("text", ["__import__('os')", "x.real", "[1, 2]", "lambda: 1", "open('f')",
                                  "z + 1", "|x", "sin(x, base=2)", "x if x else 1", "1 +"])
def test_rejects_unsafe_or_malformed(text):
    with pytest.raises(ConfigError):
        compile_expression(text, ("x",))


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_agrees_with_python(a, b):
    e = compile_expression("max(x, y) - min(x, y) - |x - y|", ("x", "y"))
    assert float(e(x=a, y=b)) == pytest.approx(0.0, abs=1e-12)
