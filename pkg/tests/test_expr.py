import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from moyal_m3 import expr as ex
from oracles import central_difference


def pt(names, rng):
    return {n: rng.uniform(-2, 2) for n in names}


class TestParse:
    def test_sum_of_product(self):
        e = ex.parse("s1*t2 + 3")
        assert isinstance(e, ex.Sum)
        assert ex.evaluate(e, {"s1": 2, "t2": 5}) == 13

    def test_nested_exponential_phase(self):
        e = ex.parse("exp(i*2*(s2*(t1-c1))/a)")
        v = ex.evaluate(e, {"s2": 0.3, "t1": 0.7, "c1": 0.2, "a": 1.5})
        expected = np.exp(2j * 0.3 * (0.7 - 0.2) / 1.5)
        assert abs(v - expected) < 1e-14

    def test_division_by_zero_literal(self):
        with pytest.raises(ex.ParseError):
            ex.parse("1/0")

    def test_unknown_function(self):
        with pytest.raises(ex.ParseError) as err:
            ex.parse("tan(s1)")
        assert "unknown function" in str(err.value)

    def test_syntax_error_carries_position(self):
        with pytest.raises(ex.ParseError) as err:
            ex.parse("s1 + ")
        assert err.value.position == 5

    def test_unexpected_character(self):
        with pytest.raises(ex.ParseError):
            ex.parse("s1 $ s2")

    def test_scientific_and_decimal_literals(self):
        assert ex.evaluate(ex.parse("1e-3"), {}) == 1e-3
        assert ex.evaluate(ex.parse("2.5"), {}) == 2.5
        assert ex.evaluate(ex.parse("1/3"), {}).real == pytest.approx(1 / 3)

    def test_power_requires_integer_exponent(self):
        assert ex.evaluate(ex.parse("x^-2"), {"x": 2.0}) == 0.25
        with pytest.raises(ex.ParseError):
            ex.parse("x^(1/2)")

    def test_imaginary_unit(self):
        assert ex.evaluate(ex.parse("i*i"), {}) == -1


class TestPrintRoundTrip:
    @settings(max_examples=60, deadline=None, derandomize=True)
    @given(st.integers(0, 10 ** 6))
    def test_random_trees_roundtrip(self, seed):
        rng = random.Random(seed)
        e = _random_expr(rng, depth=3)
        text = ex.to_string(e)
        back = ex.parse(text)
        point = {n: rng.uniform(-1.5, 1.5) for n in ex.variables(e)}
        a, b = _finite_eval(e, point), _finite_eval(back, point)
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))

    def test_simplified_form_roundtrips(self):
        e = ex.simplify(ex.parse("(s1 + i*t2)^3 - exp(2*s1)*exp(-s1)"))
        back = ex.parse(ex.to_string(e))
        rng = random.Random(5)
        for _ in range(5):
            point = pt(("s1", "t2"), rng)
            assert abs(ex.evaluate(e, point) - ex.evaluate(back, point)) < 1e-12


def _finite_eval(e, point):
    """Evaluate, discarding hypothesis samples that overflow doubles."""
    try:
        v = ex.evaluate(e, point)
    except OverflowError:
        assume(False)
    assume(abs(v) < 1e12)
    return v


def _random_expr(rng, depth):
    if depth == 0:
        kind = rng.randrange(3)
        if kind == 0:
            return ex.const(rng.randint(-4, 4))
        if kind == 1:
            return ex.Var(rng.choice(["x", "y", "z"]))
        return ex.const(complex(0, rng.randint(1, 3)))
    kind = rng.randrange(5)
    if kind == 0:
        return ex.Sum(tuple(_random_expr(rng, depth - 1)
                            for _ in range(rng.randint(2, 3))))
    if kind == 1:
        return ex.Product(tuple(_random_expr(rng, depth - 1)
                                for _ in range(2)))
    if kind == 2:
        return ex.Power(_random_expr(rng, depth - 1), rng.randint(0, 3))
    return ex.Func(rng.choice(["exp", "sin", "cos"]),
                   _random_expr(rng, depth - 1))


class TestDifferentiate:
    def test_product_rule_simple(self):
        d = ex.simplify(ex.differentiate(ex.parse("s1*t2"), "s1"))
        assert d == ex.parse("t2")

    def test_absent_variable(self):
        assert ex.simplify(ex.differentiate(ex.parse("s1 + t2"), "s3")) == ex.ZERO

    def test_exponential_phase_numerically(self):
        f = ex.parse("exp(2*i*s2*t1)")
        d = ex.differentiate(f, "t1")
        rng = random.Random(11)
        for _ in range(10):
            point = pt(("s2", "t1"), rng)
            assert abs(ex.evaluate(d, point) -
                       central_difference(f, "t1", point)) < 1e-7

    def test_matches_expected_closed_form(self):
        f = ex.parse("exp(2*i*s2*t1)")
        d = ex.simplify(ex.differentiate(f, "t1"))
        expected = ex.simplify(ex.parse("2*i*s2*exp(2*i*s2*t1)"))
        assert ex.is_zero(ex.simplify(d - expected)).value

    def test_linearity(self):
        rng = random.Random(3)
        f, g = ex.parse("s1^2*exp(s1*t1)"), ex.parse("cos(s1)*t1")
        lin = ex.differentiate(ex.simplify(2 * f + 3 * g), "s1")
        split = ex.simplify(2 * ex.differentiate(f, "s1") +
                            3 * ex.differentiate(g, "s1"))
        for _ in range(8):
            point = pt(("s1", "t1"), rng)
            assert abs(ex.evaluate(lin, point) -
                       ex.evaluate(split, point)) < 1e-12

    def test_leibniz(self):
        rng = random.Random(4)
        f, g = ex.parse("exp(s1*t1)"), ex.parse("s1^3 + t1")
        d_prod = ex.differentiate(ex.Product((f, g)), "s1")
        split = ex.Sum((ex.Product((ex.differentiate(f, "s1"), g)),
                        ex.Product((f, ex.differentiate(g, "s1")))))
        for _ in range(8):
            point = pt(("s1", "t1"), rng)
            assert abs(ex.evaluate(d_prod, point) -
                       ex.evaluate(split, point)) < 1e-12

    def test_mixed_partials_commute(self):
        rng = random.Random(6)
        f = ex.parse("exp(s1*t1)*sin(s1) + s1^2*t1^3")
        ab = ex.differentiate(ex.differentiate(f, "s1"), "t1")
        ba = ex.differentiate(ex.differentiate(f, "t1"), "s1")
        for _ in range(8):
            point = pt(("s1", "t1"), rng)
            assert abs(ex.evaluate(ab, point) -
                       ex.evaluate(ba, point)) < 1e-12

    def test_power_and_trig_rules(self):
        rng = random.Random(8)
        for text, name in (("(s1+t1)^-1", "s1"), ("sin(s1^2)", "s1"),
                           ("cos(s1*t1)^3", "t1")):
            f = ex.parse(text)
            d = ex.differentiate(f, name)
            for _ in range(6):
                point = {"s1": rng.uniform(0.5, 1.5), "t1": rng.uniform(0.5, 1.5)}
                assert abs(ex.evaluate(d, point) -
                           central_difference(f, name, point, h=1e-6)) < 1e-6


class TestEvaluate:
    def test_square(self):
        assert ex.evaluate(ex.parse("s1^2"), {"s1": 3}) == 9

    def test_euler_identity(self):
        v = ex.evaluate(ex.parse("exp(i*x)"), {"x": math.pi})
        assert abs(v - (-1 + 0j)) < 1e-15

    def test_unbound_variable(self):
        with pytest.raises(ex.EvalError):
            ex.evaluate(ex.parse("s1 + s2"), {"s1": 1})

    def test_exact_rational_subtrees(self):
        v = ex.evaluate(ex.parse("(1/3)*3"), {})
        assert v == 1 + 0j

    def test_evaluate_exact(self):
        from fractions import Fraction
        v = ex.evaluate_exact(ex.parse("(1/3)*s1 + i*s2"),
                              {"s1": Fraction(3, 2), "s2": Fraction(2)})
        assert v == ex.QC(Fraction(1, 2), Fraction(2))
        assert ex.evaluate_exact(ex.parse("exp(s1)"), {"s1": 0}).re == 1
        with pytest.raises(ex.EvalError):
            ex.evaluate_exact(ex.parse("exp(s1)"), {"s1": 1})


class TestIsZero:
    def test_cancellation(self):
        v = ex.is_zero(ex.parse("s1 - s1"))
        assert v.value and v.decided_by == "symbolic"

    def test_commutativity(self):
        v = ex.is_zero(ex.parse("s1*t2 - t2*s1"))
        assert v.value and v.decided_by == "symbolic"

    def test_small_constant_is_not_zero(self):
        v = ex.is_zero(ex.parse("s1 + 1e-3"))
        assert not v.value

    def test_exponential_class_decided_symbolically(self):
        v = ex.is_zero(ex.parse("exp(s1+t1) - exp(s1)*exp(t1)"))
        assert v.value and v.decided_by == "symbolic"
        v = ex.is_zero(ex.parse("exp(s1) - exp(t1)"))
        assert not v.value and v.decided_by == "symbolic"

    def test_trig_identity_falls_back_to_numeric(self):
        v = ex.is_zero(ex.parse("sin(x)^2 + cos(x)^2 - 1"))
        assert v.value and v.decided_by == "numeric"
        assert v.seed == ex.DEFAULT_ZERO_SEED

    def test_numeric_failure_reports_magnitude(self):
        v = ex.is_zero(ex.parse("sin(x)^2 + cos(x)^2 - 1/2"))
        assert not v.value and v.decided_by == "numeric"
        assert v.max_abs > 0.4


class TestSimplify:
    @settings(max_examples=40, deadline=None, derandomize=True)
    @given(st.integers(0, 10 ** 6))
    def test_value_preserving(self, seed):
        rng = random.Random(seed)
        e = _random_expr(rng, depth=3)
        s = ex.simplify(e)
        point = {n: rng.uniform(-1.2, 1.2) for n in ex.variables(e)}
        a, b = _finite_eval(e, point), _finite_eval(s, point)
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))

    def test_exponential_merge(self):
        assert ex.simplify(ex.parse("exp(x)*exp(-x)")) == ex.ONE

    def test_binomial_expansion(self):
        s = ex.simplify(ex.parse("(x+y)^2 - x^2 - 2*x*y - y^2"))
        assert s == ex.ZERO


class TestVectorizedEvaluation:
    def test_matches_scalar_evaluation(self):
        f = ex.parse("exp(-(s1^2+s2^2)/2)*(1 + i*s1*s2)")
        fn = ex.compile_evaluator(f, ("s1", "s2"))
        xs = np.linspace(-1, 1, 7)
        grid = fn(xs[:, None], xs[None, :])
        for a in (0, 3, 6):
            for b in (1, 5):
                direct = ex.evaluate(f, {"s1": xs[a], "s2": xs[b]})
                assert abs(grid[a, b] - direct) < 1e-14

    def test_unbound_variable_rejected(self):
        with pytest.raises(ex.EvalError):
            ex.compile_evaluator(ex.parse("s1 + s3"), ("s1",))
