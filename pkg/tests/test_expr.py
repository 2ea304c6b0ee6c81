"""Parser, evaluator, and symbolic derivative tests."""

import math

import numpy as np
import pytest

from weakgal import expr
from weakgal.expr import EvalError, ParseError, diff, evaluate_many, parse


def test_numeric_literals_and_pi():
    assert parse("2", 1)((0.0,)) == 2.0
    assert parse("2.5e-1", 1)((0.0,)) == 0.25
    assert parse("pi", 1)((0.0,)) == math.pi


def test_variables_are_one_based():
    e = parse("x1 + 2*x3", 3)
    assert e((1.0, 10.0, 100.0)) == 201.0
    with pytest.raises(ParseError):
        parse("x4", 3)
    with pytest.raises(ParseError):
        parse("x0", 3)


def test_precedence_and_associativity():
    assert parse("1 + 2*3", 1)((0.0,)) == 7.0
    assert parse("2*3 ^ 2", 1)((0.0,)) == 18.0
    assert parse("-x1^2", 1)((3.0,)) == -9.0
    assert parse("2 - 3 - 4", 1)((0.0,)) == -5.0
    assert parse("(1+1)^3", 1)((0.0,)) == 8.0


def test_functions():
    x = 0.37
    e = parse("sin(x1) + cos(x1) + exp(x1) + tanh(x1)", 1)
    want = math.sin(x) + math.cos(x) + math.exp(x) + math.tanh(x)
    assert e((x,)) == pytest.approx(want, rel=1e-15)


def test_parse_error_reports_offset():
    with pytest.raises(ParseError) as err:
        parse("sin(x1", 1)
    assert "offset" in str(err.value) or err.value.offset >= 0
    with pytest.raises(ParseError):
        parse("1 +", 1)
    with pytest.raises(ParseError):
        parse("x1 $ 2", 1)


def test_non_integer_exponent_rejected():
    with pytest.raises(ParseError):
        parse("x1^2.5", 1)
    with pytest.raises(ParseError):
        parse("x1^x1", 1)
    assert parse("x1^-2", 1)((2.0,)) == 0.25


def test_batch_evaluation_shape():
    e = parse("x1*x2", 2)
    pts = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    out = evaluate_many(e, pts)
    assert out.shape == (3,)
    np.testing.assert_allclose(out, [2.0, 12.0, 30.0])
    with pytest.raises(expr.ExprError):
        evaluate_many(e, np.zeros((3, 3)))


def test_call_dispatches_on_shape():
    e = parse("x1^2", 1)
    assert e((3.0,)) == 9.0
    out = e(np.array([[1.0], [2.0]]))
    np.testing.assert_allclose(out, [1.0, 4.0])


def test_division_by_zero_raises():
    e = parse("1/x1", 1)
    with pytest.raises(EvalError):
        evaluate_many(e, np.array([[0.0]]))


def test_zero_to_negative_power_raises():
    e = parse("x1^-1", 1)
    with pytest.raises(EvalError):
        evaluate_many(e, np.array([[0.0]]))


def test_exp_overflow_raises():
    e = parse("exp(x1)", 1)
    with pytest.raises(EvalError):
        evaluate_many(e, np.array([[1000.0]]))


def test_intermediate_overflow_not_masked():
    # 1/exp(1000) would be 0.0 if the overflow were silently accepted
    e = parse("1/exp(x1)", 1)
    with pytest.raises(EvalError):
        evaluate_many(e, np.array([[1000.0]]))


def test_diff_basic_rules():
    pts = np.linspace(0.05, 0.95, 7).reshape(-1, 1)
    cases = [
        ("x1^3", lambda x: 3 * x**2),
        ("sin(pi*x1)", lambda x: math.pi * np.cos(math.pi * x)),
        ("exp(-2*x1)", lambda x: -2 * np.exp(-2 * x)),
        ("tanh(x1)", lambda x: 1 - np.tanh(x) ** 2),
        ("1/(1+x1)", lambda x: -1 / (1 + x) ** 2),
        ("x1*cos(x1)", lambda x: np.cos(x) - x * np.sin(x)),
    ]
    for text, dref in cases:
        d = diff(parse(text, 1), 1)
        np.testing.assert_allclose(
            evaluate_many(d, pts), dref(pts[:, 0]), rtol=1e-12, atol=1e-12
        )


def test_diff_wrt_absent_variable_is_zero():
    d = diff(parse("sin(x1)", 2), 2)
    pts = np.array([[0.3, 0.9], [0.1, 0.5]])
    np.testing.assert_array_equal(evaluate_many(d, pts), [0.0, 0.0])


def test_diff_matches_finite_differences_property():
    rng = np.random.default_rng(20240817)
    texts = [
        "sin(pi*x1)*cos(x2)",
        "exp(-x1*x2) + x2^3",
        "tanh(2*x1 - x2) / (2 + x1)",
        "(x1 + x2)^4 - x1*x2",
        "cos(x1)^2 * sin(x2)",
    ]
    h = 1e-5
    for text in texts:
        e = parse(text, 2)
        for i in (1, 2):
            d = diff(e, i)
            for _ in range(10):
                p = rng.uniform(0.1, 0.9, size=2)
                pp = p.copy()
                pm = p.copy()
                pp[i - 1] += h
                pm[i - 1] -= h
                fd = (e(tuple(pp)) - e(tuple(pm))) / (2 * h)
                got = d(tuple(p))
                assert abs(got - fd) <= 1e-6 * (1.0 + abs(fd)), (text, i, p)


def test_to_string_round_trip_property():
    rng = np.random.default_rng(7)
    pool = [
        "x1", "x2", "pi", "1.5", "-0.25", "sin(x1)", "cos(x2)", "exp(x1)",
        "tanh(x2)", "x1^2", "x2^-1",
    ]
    ops = [" + ", " - ", " * ", " / "]
    pts = rng.uniform(0.2, 0.8, size=(20, 2))
    for _ in range(60):
        k = int(rng.integers(2, 5))
        text = pool[int(rng.integers(len(pool)))]
        for _ in range(k):
            text = f"({text}){ops[int(rng.integers(4))]}({pool[int(rng.integers(len(pool)))]})"
        e = parse(text, 2)
        e2 = parse(str(e), 2)
        np.testing.assert_allclose(
            evaluate_many(e, pts), evaluate_many(e2, pts), rtol=1e-15, atol=0
        )


def test_repr_round_trip_of_constants():
    e = parse("0.1 + 0.2", 1)
    e2 = parse(str(e), 1)
    assert e((0.0,)) == e2((0.0,))


def test_nested_diff_then_string_round_trip():
    e = parse("sin(pi*x1) * exp(-x2)", 2)
    d12 = diff(diff(e, 1), 2)
    pts = np.array([[0.3, 0.5]])
    again = parse(str(d12), 2)
    np.testing.assert_allclose(evaluate_many(d12, pts), evaluate_many(again, pts), rtol=0)


def test_constant_folding_neutral_elements():
    # smart constructors drop additive/multiplicative identities
    e = diff(parse("x1 + 0*x2", 2), 1)
    assert str(e) == "1.0"
