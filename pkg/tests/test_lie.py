import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from moyal_m3 import lie
from oracles import commutator_oracle

X1, X2, X3, E1, E2, E3 = [lie.basis(i) for i in range(1, 7)]


class TestBasis:
    def test_rotation_block_entries(self):
        m = X1.to_matrix()
        assert m[0][1] == -1 and m[1][0] == 1
        m = X2.to_matrix()
        assert m[0][2] == 1 and m[2][0] == -1
        m = X3.to_matrix()
        assert m[1][2] == -1 and m[2][1] == 1

    def test_translation_column(self):
        m = E1.to_matrix()
        assert m[0][3] == 1
        assert all(m[i][j] == 0 for i in range(4) for j in range(3))

    def test_linear_independence(self):
        flat = [sum(([float(v) for v in row] for row in lie.basis(i).to_matrix()),
                    []) for i in range(1, 7)]
        assert np.linalg.matrix_rank(np.array(flat)) == 6

    def test_index_out_of_range(self):
        with pytest.raises(lie.LieError):
            lie.basis(0)
        with pytest.raises(lie.LieError):
            lie.basis(7)

    def test_matrix_roundtrip(self):
        U = lie.AlgebraElement(Fraction(1, 3), -2, 5, Fraction(-7, 2), 0, 1)
        assert lie.from_matrix(U.to_matrix()) == U


class TestBracket:
    def test_rotation_pair(self):
        assert lie.bracket(X1, X2) == -X3

    def test_mixed_pair(self):
        assert lie.bracket(X1, E1) == E2

    def test_translations_commute(self):
        assert lie.bracket(E1, E2).is_zero

    def test_all_pairs_against_matrix_commutator(self):
        for i in range(1, 7):
            for j in range(1, 7):
                via_constants = lie.bracket(lie.basis(i), lie.basis(j))
                raw = commutator_oracle(lie.basis(i), lie.basis(j))
                assert via_constants.to_matrix() == raw, (i, j)
                assert via_constants == lie.bracket_via_matrices(
                    lie.basis(i), lie.basis(j))

    def test_antisymmetry_exact(self):
        for i in range(1, 7):
            for j in range(1, 7):
                assert lie.bracket(lie.basis(i), lie.basis(j)) == \
                    -lie.bracket(lie.basis(j), lie.basis(i))

    def test_jacobi_all_triples_exact(self):
        for a, b, c in itertools.combinations(range(1, 7), 3):
            U, T, V = lie.basis(a), lie.basis(b), lie.basis(c)
            total = lie.bracket(U, lie.bracket(T, V)) + \
                lie.bracket(T, lie.bracket(V, U)) + \
                lie.bracket(V, lie.bracket(U, T))
            assert total.is_zero, (a, b, c)

    def test_bilinear_on_random_rationals(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            coeffs = [Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 4)))
                      for _ in range(12)]
            U = lie.AlgebraElement(*coeffs[:6])
            T = lie.AlgebraElement(*coeffs[6:])
            assert lie.bracket(U, T) == lie.bracket_via_matrices(U, T)


class TestExponential:
    def test_rotation_plane(self):
        theta = 0.8
        g = lie.exp_algebra(Fraction(theta) * X1)
        expected = np.array([[np.cos(theta), -np.sin(theta), 0],
                             [np.sin(theta), np.cos(theta), 0],
                             [0, 0, 1]])
        assert np.max(np.abs(g.R - expected)) < 1e-15
        assert np.max(np.abs(g.r)) == 0

    def test_pure_translation(self):
        g = lie.exp_algebra(Fraction(5, 2) * E1)
        assert np.max(np.abs(g.R - np.eye(3))) == 0
        assert np.allclose(g.r, [2.5, 0, 0])

    def test_zero_element(self):
        g = lie.exp_algebra(lie.AlgebraElement())
        assert np.max(np.abs(g.to_matrix4() - np.eye(4))) == 0

    def test_against_scaling_and_squaring(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            coeffs = [Fraction(int(rng.integers(-8, 9)), 4) for _ in range(6)]
            U = lie.AlgebraElement(*coeffs)
            ours = lie.exp_algebra(U).to_matrix4()
            a4 = np.array([[float(v) for v in row] for row in U.to_matrix()])
            assert np.max(np.abs(ours - expm(a4))) < 1e-13

    def test_one_parameter_subgroups(self):
        for i in range(1, 7):
            for t in (0.3, -1.1):
                a = lie.exp_algebra(Fraction(t) * lie.basis(i))
                b = lie.exp_algebra(Fraction(t / 2) * lie.basis(i))
                ab = lie.mul(b, b)
                assert np.max(np.abs(a.to_matrix4() - ab.to_matrix4())) < 1e-14


class TestFactoredForm:
    def test_identity(self):
        g = lie.from_factors([0, 0, 0], 0, 0, 0)
        assert np.max(np.abs(g.to_matrix4() - np.eye(4))) == 0

    def test_pure_translation(self):
        g = lie.from_factors([1, 2, 3], 0, 0, 0)
        assert np.allclose(g.r, [1, 2, 3]) and np.allclose(g.R, np.eye(3))

    def test_first_angle_maps_e1_to_e2(self):
        g = lie.from_factors([0, 0, 0], np.pi / 2, 0, 0)
        assert np.max(np.abs(g.R @ np.array([1.0, 0, 0]) -
                             np.array([0, 1.0, 0]))) < 1e-15

    def test_matches_four_factor_product(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            r = rng.uniform(-2, 2, 3)
            th = rng.uniform(-3, 3, 3)
            g = lie.from_factors(r, *th)
            m = np.eye(4)
            m[:3, 3] = r
            for j, a in enumerate(th, start=1):
                m = m @ expm(float(a) * np.array(
                    [[float(v) for v in row]
                     for row in lie.basis(j).to_matrix()]))
            assert np.max(np.abs(g.to_matrix4() - m)) < 1e-13


class TestGroupLaw:
    def test_inverse(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            g = lie.from_factors(rng.uniform(-2, 2, 3), *rng.uniform(-3, 3, 3))
            assert np.max(np.abs(lie.mul(g, lie.inv(g)).to_matrix4() -
                                 np.eye(4))) < 1e-14

    def test_translations_add(self):
        a = lie.GroupElement(np.eye(3), [1, 2, 3])
        b = lie.GroupElement(np.eye(3), [-4, 1, 0])
        assert np.allclose(lie.mul(a, b).r, [-3, 3, 3])

    def test_associativity_vs_matrix_product(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            gs = [lie.from_factors(rng.uniform(-2, 2, 3),
                                   *rng.uniform(-3, 3, 3)) for _ in range(3)]
            lhs = lie.mul(lie.mul(gs[0], gs[1]), gs[2]).to_matrix4()
            rhs = lie.mul(gs[0], lie.mul(gs[1], gs[2])).to_matrix4()
            oracle = gs[0].to_matrix4() @ gs[1].to_matrix4() @ gs[2].to_matrix4()
            assert np.max(np.abs(lhs - rhs)) < 1e-12
            assert np.max(np.abs(lhs - oracle)) < 1e-12

    def test_drift_reprojection_after_long_product(self):
        rng = np.random.default_rng(11)
        g = lie.identity()
        for _ in range(4000):
            g = lie.mul(g, lie.from_factors(rng.uniform(-0.1, 0.1, 3),
                                            *rng.uniform(-0.2, 0.2, 3)))
        assert np.linalg.norm(g.R.T @ g.R - np.eye(3)) < 1e-10

    def test_rejects_non_rotation(self):
        with pytest.raises(lie.LieError):
            lie.GroupElement(np.diag([2.0, 1.0, 1.0]), [0, 0, 0])
        with pytest.raises(lie.LieError):
            lie.GroupElement(np.diag([-1.0, 1.0, 1.0]), [0, 0, 0])


class TestCoadjoint:
    def test_identity_fixes_functional(self):
        F = lie.DualFunctional([1, 2, 3], [4, 5, 6])
        out = lie.coadjoint(lie.identity(), F)
        assert np.allclose(out.mu, F.mu) and np.allclose(out.alpha, F.alpha)

    def test_pure_rotation_on_vanishing_mu(self):
        g = lie.from_factors([0, 0, 0], 0.9, 0, 0)
        F = lie.DualFunctional([0, 0, 0], [1, 0, 0])
        out = lie.coadjoint(g, F)
        assert np.allclose(out.mu, 0)
        assert np.allclose(out.alpha, g.R @ np.array([1.0, 0, 0]))

    def test_left_action_property(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            g = lie.from_factors(rng.uniform(-2, 2, 3), *rng.uniform(-3, 3, 3))
            h = lie.from_factors(rng.uniform(-2, 2, 3), *rng.uniform(-3, 3, 3))
            F = lie.DualFunctional(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3))
            lhs = lie.coadjoint(lie.mul(g, h), F)
            rhs = lie.coadjoint(g, lie.coadjoint(h, F))
            assert np.max(np.abs(lhs.mu - rhs.mu)) < 1e-12
            assert np.max(np.abs(lhs.alpha - rhs.alpha)) < 1e-12

    def test_radius_invariance(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            g = lie.from_factors(rng.uniform(-2, 2, 3), *rng.uniform(-3, 3, 3))
            F = lie.DualFunctional(rng.uniform(-2, 2, 3), rng.uniform(-2, 2, 3))
            out = lie.coadjoint(g, F)
            assert abs(np.linalg.norm(out.alpha) -
                       np.linalg.norm(F.alpha)) < 1e-12

    def test_pairing(self):
        F = lie.DualFunctional([1, 0, 2], [0, 3, 0])
        U = lie.AlgebraElement(2, 0, 1, 0, Fraction(1, 3), 0)
        assert F.pair(U) == pytest.approx(2 + 2 + 1.0)


class TestJson:
    def test_algebra_roundtrip(self):
        U = lie.AlgebraElement(Fraction(1, 3), 0, -2, 5, Fraction(7, 2), 0)
        assert lie.algebra_from_json(lie.algebra_to_json(U)) == U

    def test_group_and_dual_encodings(self):
        g = lie.from_factors([1, 0, 0], 0.5, 0, 0)
        d = lie.group_to_json(g)
        assert len(d["R"]) == 3 and len(d["r"]) == 3
        F = lie.DualFunctional([1, 2, 3], [0, 0, 1])
        assert lie.dual_to_json(F)["alpha"] == [0.0, 0.0, 1.0]
