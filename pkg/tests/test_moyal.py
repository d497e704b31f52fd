import itertools
from fractions import Fraction

import numpy as np
import pytest

from moyal_m3 import expr as ex
from moyal_m3 import lie, moyal, orbit
from oracles import dense_bidiff, star_integral_plane


def rational_poly(rng, degree=2, terms=4):
    names = orbit.CHART_VARS
    monos = [()]
    for d in range(1, degree + 1):
        monos.extend(itertools.combinations_with_replacement(names, d))
    parts = []
    for _ in range(terms):
        mono = monos[int(rng.integers(0, len(monos)))]
        c = Fraction(int(rng.integers(-4, 5)), int(rng.integers(1, 4)))
        factors = [ex.const(c if c else 1)] + [ex.Var(n) for n in mono]
        parts.append(ex.Product(tuple(factors)))
    return ex.simplify(ex.Sum(tuple(parts)))


UNIT = [list(r) for r in moyal.UNIT_COUPLING]


class TestBidiff:
    def test_first_order_example(self):
        assert moyal.bidiff(ex.parse("s1"), ex.parse("t2"), 1, UNIT) == \
            ex.const(-1)

    def test_matches_dense_enumeration(self):
        rng = np.random.default_rng(31)
        W = moyal.solve_bivector(Fraction(3, 2)).matrix()
        for _ in range(6):
            f, g = rational_poly(rng), rational_poly(rng)
            for r in (1, 2):
                sparse = moyal.bidiff(f, g, r, W)
                dense = dense_bidiff(f, g, r, W)
                assert ex.is_zero(ex.simplify(sparse - dense)).value, r

    def test_higher_orders_vanish_on_linear(self):
        lam = Fraction(2)
        W = moyal.solve_bivector(lam).matrix()
        for i in range(1, 7):
            for j in range(1, 7):
                fU = orbit.energy(lie.basis(i), lam).expression
                fT = orbit.energy(lie.basis(j), lam).expression
                for r in (2, 3):
                    assert moyal.bidiff(fU, fT, r, W) == ex.ZERO

    def test_parity(self):
        rng = np.random.default_rng(37)
        for _ in range(5):
            f, g = rational_poly(rng), rational_poly(rng)
            for r in (1, 2, 3):
                lhs = moyal.bidiff(f, g, r, UNIT)
                rhs = moyal.bidiff(g, f, r, UNIT)
                sign = -1 if r % 2 else 1
                assert ex.is_zero(ex.simplify(lhs - sign * rhs)).value

    def test_rejects_nonpositive_order(self):
        with pytest.raises(moyal.StarError):
            moyal.bidiff(ex.parse("s1"), ex.parse("t1"), 0, UNIT)


class TestStar:
    def test_unit_law(self):
        cfg = moyal.StarConfig.covariant(Fraction(1))
        g = ex.parse("s1^2*t1 - t2")
        assert ex.is_zero(ex.simplify(
            moyal.star(ex.ONE, g, cfg).expression - g)).value
        assert ex.is_zero(ex.simplify(
            moyal.star(g, ex.ONE, cfg).expression - g)).value

    def test_energy_commutator_two_term_form(self):
        """U~ * T~ - T~ * U~ = (hbar/i) P^1(U~, T~) for linear energies."""
        lam = Fraction(1, 2)
        cfg = moyal.StarConfig.covariant(lam)
        hbar_over_i = ex.Const(ex.QC(Fraction(0), -cfg.hbar))
        for i in range(1, 7):
            for j in range(1, 7):
                fU = orbit.energy(lie.basis(i), lam, cfg.energy_pairing)
                fT = orbit.energy(lie.basis(j), lam, cfg.energy_pairing)
                lhs = ex.simplify(
                    moyal.star(fU.expression, fT.expression, cfg).expression -
                    moyal.star(fT.expression, fU.expression, cfg).expression)
                p1 = moyal.bidiff(fU.expression, fT.expression, 1, cfg.matrix())
                rhs = ex.simplify(ex.Product((hbar_over_i, p1)))
                assert ex.is_zero(ex.simplify(lhs - rhs)).value

    def test_associativity_exact_on_random_triples(self):
        rng = np.random.default_rng(41)
        cfg = moyal.StarConfig.covariant(Fraction(1))
        for _ in range(25):
            f, g, h = (rational_poly(rng) for _ in range(3))
            left = moyal.star(moyal.star(f, g, cfg).expression, h, cfg)
            right = moyal.star(f, moyal.star(g, h, cfg).expression, cfg)
            assert left.exact and right.exact
            assert ex.is_zero(ex.simplify(
                left.expression - right.expression)).value

    def test_linear_factor_truncates_exactly(self):
        cfg = moyal.StarConfig.covariant(Fraction(2))
        a = ex.parse("2*t1 - s2/3 + 1")
        f = ex.parse("exp(2*i*(s1*t2 + s2*t1))*(1 + s1^2)")
        result = moyal.star(f, a, cfg)
        assert result.exact and result.order == 1
        nu = ex.Const(cfg.nu)
        expected = ex.simplify(
            ex.Product((f, a)) +
            ex.Product((nu, moyal.bidiff(f, a, 1, cfg.matrix()))))
        assert ex.is_zero(ex.simplify(result.expression - expected)).value

    def test_truncation_flagging(self):
        cfg = moyal.StarConfig.covariant(Fraction(1), max_order=3)
        f = ex.parse("exp(-(s1^2+t2^2)/2)")
        result = moyal.star(f, f, cfg)
        assert not result.exact and result.order == 3
        strict = moyal.StarConfig.with_matrix(
            cfg.matrix(), max_order=moyal.EXACT_BY_DEGREE)
        with pytest.raises(moyal.StarError):
            moyal.star(f, f, strict)

    def test_matches_integral_form_on_gaussian_pairs(self):
        """Derivative series vs integral form, on one coupled plane.

        Functions of (s1, t2) only see the single coupling entry, so the
        product reduces to a two-variable twisted product with a known
        integral kernel; rectangle quadrature of that kernel is the
        independent oracle.
        """
        w = Fraction(1, 2)
        W = [[Fraction(0)] * 4 for _ in range(4)]
        W[0][3], W[3][0] = w, -w
        # geometric convergence ratio ~1/4 per order: 14 orders leave
        # ~1e-8 truncation, two decades inside the 1e-6 oracle tolerance
        cfg = moyal.StarConfig.with_matrix(W, max_order=14)
        f = ex.parse("(1 + s1^2)*exp(-(s1^2+t2^2)/2)")
        g = ex.parse("(s1*t2 - 1/2)*exp(-(s1^2+t2^2)/2)")
        prod = moyal.star(f, g, cfg)
        fn = ex.compile_evaluator(prod.expression, ("s1", "t2"))
        f2 = ex.compile_evaluator(f, ("s1", "t2"))
        g2 = ex.compile_evaluator(g, ("s1", "t2"))
        rng = np.random.default_rng(1)
        for _ in range(4):
            z = rng.uniform(-0.8, 0.8, 2)
            series = fn(np.array([z[0]]), np.array([z[1]]))[0]
            integral = star_integral_plane(f2, g2, z, float(w))
            assert abs(series - integral) < 1e-6


class TestMoyalBracket:
    def test_self_bracket_vanishes(self):
        cfg = moyal.StarConfig.covariant(Fraction(1))
        f = ex.parse("s1^2*t2 + s2")
        assert ex.is_zero(moyal.moyal_bracket(f, f, cfg)).value

    def test_energies_reduce_to_first_contraction(self):
        lam = Fraction(3)
        cfg = moyal.StarConfig.covariant(lam)
        for i in range(1, 7):
            for j in range(1, 7):
                fU = orbit.energy(lie.basis(i), lam, cfg.energy_pairing)
                fT = orbit.energy(lie.basis(j), lam, cfg.energy_pairing)
                br = moyal.moyal_bracket(fU.expression, fT.expression, cfg)
                p1 = moyal.bidiff(fU.expression, fT.expression, 1, cfg.matrix())
                assert ex.is_zero(ex.simplify(br - p1)).value

    def test_bilinearity_numeric_spot_check(self):
        rng = np.random.default_rng(43)
        cfg = moyal.StarConfig.covariant(Fraction(1))
        f, g, h = (rational_poly(rng) for _ in range(3))
        lhs = moyal.moyal_bracket(ex.simplify(2 * f + 3 * g), h, cfg)
        rhs = ex.simplify(
            2 * moyal.moyal_bracket(f, h, cfg) +
            3 * moyal.moyal_bracket(g, h, cfg))
        for _ in range(5):
            point = {v: rng.uniform(-1, 1) for v in orbit.CHART_VARS}
            assert abs(ex.evaluate(lhs, point) -
                       ex.evaluate(rhs, point)) < 1e-10

    def test_jacobi_exact_on_quadratics(self):
        rng = np.random.default_rng(47)
        cfg = moyal.StarConfig.covariant(Fraction(1))
        for _ in range(5):
            f, g, h = (rational_poly(rng) for _ in range(3))
            total = ex.simplify(
                moyal.moyal_bracket(f, moyal.moyal_bracket(g, h, cfg), cfg) +
                moyal.moyal_bracket(g, moyal.moyal_bracket(h, f, cfg), cfg) +
                moyal.moyal_bracket(h, moyal.moyal_bracket(f, g, cfg), cfg))
            assert ex.is_zero(total).value


class TestSolveBivector:
    def test_output_is_antisymmetric_and_nondegenerate(self):
        solve = moyal.solve_bivector(Fraction(1, 2))
        assert orbit.is_antisymmetric(solve.matrix())
        assert orbit.mat_rank(solve.matrix()) == 4

    def test_chart_pairing_reported_inconsistent(self):
        solve = moyal.solve_bivector(Fraction(1))
        by_pairing = {o.pairing: o for o in solve.outcomes}
        assert not by_pairing[orbit.PAIRING_CHART].consistent
        assert by_pairing[orbit.PAIRING_COVARIANT].consistent
        assert by_pairing[orbit.PAIRING_COVARIANT].unique

    @pytest.mark.parametrize("lam", [Fraction(1, 2), Fraction(1), Fraction(3)])
    def test_solution_is_negative_radius_times_unit(self, lam):
        solve = moyal.solve_bivector(lam)
        assert solve.pairing == orbit.PAIRING_COVARIANT
        assert solve.scale == -lam
        assert solve.permutation == "identity"
        expected = orbit.mat_scale(orbit.UNIT_COUPLING, -lam)
        assert orbit.mat_eq(solve.matrix(), expected)

    @pytest.mark.parametrize("lam", [Fraction(1, 2), Fraction(1), Fraction(3)])
    def test_origin_residual_vanishes_for_all_pairs(self, lam):
        cfg = moyal.StarConfig.covariant(lam)
        for pair in moyal.covariance_table(lam, cfg):
            assert pair.origin_residual.is_zero, pair.pair

    def test_consistent_form_is_scaled_unit(self):
        lam = Fraction(3, 2)
        solve = moyal.solve_bivector(lam)
        omega = moyal.consistent_form(solve.matrix())
        assert orbit.mat_eq(omega, orbit.form_coupling(lam))


class TestCovarianceReport:
    def test_equal_arguments_give_zero_residuals(self):
        lam = Fraction(1)
        cfg = moyal.StarConfig.covariant(lam)
        pair = moyal.covariance_pair(2, 2, lam, cfg)
        assert pair.bracket_minus_p1.value
        assert pair.p1_minus_energy.value
        assert pair.origin_residual.is_zero

    def test_bracket_equals_first_contraction_everywhere(self):
        lam = Fraction(1, 2)
        cfg = moyal.StarConfig.covariant(lam)
        for pair in moyal.covariance_table(lam, cfg):
            assert pair.bracket_minus_p1.value, pair.pair
            assert pair.p1_minus_form.value, pair.pair

    def test_function_level_holds_on_24_ordered_pairs(self):
        """Global (function-level) covariance cannot hold on every pair.

        The flat chart maps the two stabilizer directions to constants,
        so brackets landing on moving directions fail as functions while
        still vanishing at the origin; the count and the exceptional
        pairs are pinned here.
        """
        lam = Fraction(1)
        cfg = moyal.StarConfig.covariant(lam)
        table = moyal.covariance_table(lam, cfg)
        good = [p.pair for p in table if p.p1_minus_energy.value]
        assert len(good) == 24
        failing = {p.pair for p in table if not p.p1_minus_energy.value}
        expected_unordered = {(1, 3), (2, 3), (1, 4), (2, 4), (3, 5), (3, 6)}
        assert failing == expected_unordered | \
            {(b, a) for a, b in expected_unordered}

    def test_verbatim_unit_matrix_shows_scale_gap(self):
        lam = Fraction(3)
        cfg = moyal.StarConfig.with_matrix(
            UNIT, energy_pairing=orbit.PAIRING_CHART)
        table = moyal.covariance_table(lam, cfg)
        worst = max(p.origin_abs for p in table)
        assert worst > 1.0  # the unit-entry matrix is off by the -lam scale
