import numpy as np
import pytest

from moyal_m3 import expr as ex
from moyal_m3 import repn


@pytest.fixture(scope="module")
def grid():
    return repn.FourierGrid(12.0, 256)


GAUSSIAN_S = ex.parse("exp(-(s1^2+s2^2)/2)")
GAUSSIAN_ETA = ex.parse("exp(-(eta1^2+eta2^2)/2)")


class TestGrid:
    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            repn.FourierGrid(12.0, 100)
        with pytest.raises(ValueError):
            repn.FourierGrid(12.0, 8)

    def test_symmetric_about_zero(self, grid):
        assert grid.s_axis[0] == -grid.extent
        assert abs(grid.s_axis[grid.n // 2]) == 0
        assert abs(grid.eta_axis[grid.n // 2]) == 0

    def test_dual_spacing(self, grid):
        assert grid.eta_axis[1] - grid.eta_axis[0] == \
            pytest.approx(np.pi / grid.extent)


class TestTransform:
    def test_gaussian_self_dual(self, grid):
        out = repn.partial_fourier(grid.sample_s(GAUSSIAN_S), grid)
        target = grid.sample_eta(GAUSSIAN_ETA)
        assert np.max(np.abs(out - target)) < 1e-8

    def test_round_trip(self, grid):
        vals = grid.sample_s(ex.parse("(s1 - i*s2^2)*exp(-(s1^2+s2^2)/3)"))
        back = repn.inverse_partial_fourier(
            repn.partial_fourier(vals, grid), grid)
        assert np.max(np.abs(back - vals)) < 1e-10

    def test_linearity(self, grid):
        a = grid.sample_s(GAUSSIAN_S)
        b = grid.sample_s(ex.parse("s1*s2*exp(-(s1^2+s2^2)/2)"))
        lhs = repn.partial_fourier(2.0 * a + 3j * b, grid)
        rhs = 2.0 * repn.partial_fourier(a, grid) + \
            3j * repn.partial_fourier(b, grid)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_coordinate_multiplication_rule(self, grid):
        """Transform of s1*f equals i d/deta1 of the transform, on Gaussians.

        The right side uses the closed-form derivative of the Gaussian's
        transform, not numerical differentiation.
        """
        lhs = repn.partial_fourier(
            grid.sample_s(ex.parse("s1*exp(-(s1^2+s2^2)/2)")), grid)
        eta1, _ = grid.eta_mesh()
        rhs = -1j * eta1 * grid.sample_eta(GAUSSIAN_ETA)
        assert np.max(np.abs(lhs - rhs)) < 1e-6

    def test_parseval(self, grid):
        vals = grid.sample_s(ex.parse("(1 + s1^2)*exp(-(s1^2+s2^2)/2)"))
        out = repn.partial_fourier(vals, grid)
        assert abs(repn.grid_norm(out, np.pi / grid.extent) -
                   repn.grid_norm(vals, grid.h)) < 1e-10

    def test_aliasing_guard(self, grid):
        with pytest.raises(repn.AliasingError):
            repn.partial_fourier(np.ones((grid.n, grid.n)), grid)
        with pytest.raises(repn.AliasingError):
            repn.inverse_partial_fourier(np.ones((grid.n, grid.n)), grid)

    def test_small_grid_still_accurate_for_wide_gaussian(self):
        grid = repn.FourierGrid(10.0, 64)
        out = repn.partial_fourier(grid.sample_s(GAUSSIAN_S), grid)
        target = grid.sample_eta(GAUSSIAN_ETA)
        assert np.max(np.abs(out - target)) < 1e-8
