import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplab.dynamics import RadialState
from plaplab.geometry import (
    EUCLIDEAN,
    HYPERBOLIC,
    GeometryError,
    ManifoldSpec,
    RadialGrid,
    ball_volume,
    lq_norm,
    poincare_rayleigh,
    quadrature_weights,
    sobolev_ratio,
    sobolev_ratio_floor,
    warping,
)

E3 = ManifoldSpec(EUCLIDEAN, 3)
H3 = ManifoldSpec(HYPERBOLIC, 3)


def state_of(grid, fn):
    values = fn(grid.nodes)
    values[-1] = 0.0
    return RadialState(grid, values)


def smooth_bump(r, R=4.0):
    x = r / R
    return np.where(x < 1, (1 - x * x) ** 4, 0.0)


class TestManifoldSpec:
    def test_rejects_low_dimension(self):
        with pytest.raises(GeometryError):
            ManifoldSpec(EUCLIDEAN, 2)

    def test_rejects_unknown_kind(self):
        with pytest.raises(GeometryError):
            ManifoldSpec("spherical", 3)

    def test_grid_spacing_and_nodes(self):
        grid = RadialGrid(10.0, 99)
        assert grid.dr == pytest.approx(0.1)
        assert grid.nodes[0] == 0.0 and grid.nodes[-1] == pytest.approx(10.0)
        assert len(grid.nodes) == 101

    def test_grid_needs_sixteen_nodes(self):
        with pytest.raises(GeometryError):
            RadialGrid(1.0, 15)


class TestWarping:
    def test_euclidean_identity(self):
        assert warping(E3, 2.0) == (2.0, 1.0)

    def test_hyperbolic_origin(self):
        assert warping(H3, 0.0) == (0.0, 1.0)

    def test_hyperbolic_unit(self):
        psi, dpsi = warping(H3, 1.0)
        # (e - 1/e)/2 and (e + 1/e)/2 evaluated independently
        e = math.e
        assert psi == pytest.approx((e - 1 / e) / 2, rel=1e-14)
        assert dpsi == pytest.approx((e + 1 / e) / 2, rel=1e-14)
        assert psi == pytest.approx(1.17520, abs=1e-5)
        assert dpsi == pytest.approx(1.54308, abs=1e-5)

    def test_negative_radius_rejected(self):
        with pytest.raises(GeometryError):
            warping(E3, -0.1)

    def test_array_input(self):
        psi, dpsi = warping(H3, np.array([0.0, 1.0]))
        assert psi.shape == (2,) and dpsi[0] == 1.0


class TestLqNorm:
    def test_zero_state(self):
        grid = RadialGrid(2.0, 64)
        s = RadialState(grid, np.zeros(grid.nr + 2))
        for q in (1, 2, 7.5, math.inf):
            assert lq_norm(s, E3, q) == 0.0

    def test_indicator_unit_ball_euclidean(self):
        grid = RadialGrid(2.0, 3999)
        s = state_of(grid, lambda r: (r <= 1.0).astype(float))
        assert lq_norm(s, E3, 1) == pytest.approx(4 * math.pi / 3, rel=2e-3)

    def test_indicator_unit_ball_hyperbolic(self):
        grid = RadialGrid(2.0, 3999)
        s = state_of(grid, lambda r: (r <= 1.0).astype(float))
        assert lq_norm(s, H3, 1) == pytest.approx(math.pi * (math.sinh(2) - 2), rel=2e-3)

    def test_q_below_one_rejected(self):
        grid = RadialGrid(2.0, 64)
        s = state_of(grid, smooth_bump)
        with pytest.raises(GeometryError):
            lq_norm(s, E3, 0.5)

    def test_trend_towards_sup_norm(self):
        """Distance to the sup norm shrinks along q = 1, 2, 4, 8, 16 (5% slack)."""
        grid = RadialGrid(4.0, 800)
        s = state_of(grid, lambda r: smooth_bump(r, 1.0))
        sup = lq_norm(s, E3, math.inf)
        gaps = [abs(lq_norm(s, E3, q) - sup) for q in (1, 2, 4, 8, 16)]
        assert all(b <= 1.05 * a for a, b in zip(gaps, gaps[1:]))
        assert lq_norm(s, E3, 2000) == pytest.approx(sup, rel=0.05)

    def test_second_order_quadrature(self):
        """Halving dr shrinks successive changes about fourfold.

        The profile 1 - (r/R)^2 has a nonzero slope at R, so the trapezoid
        rule is genuinely second order here (the quartic bump is integrated
        exactly and would make the check vacuous).
        """
        norms = []
        for nr in (99, 199, 399, 799):
            grid = RadialGrid(4.0, nr)
            norms.append(lq_norm(state_of(grid, lambda r: 1 - (r / 4.0) ** 2), E3, 1))
        diffs = np.abs(np.diff(norms))
        assert np.all(diffs > 0)
        assert np.all(diffs[1:] <= 4.0 * (1 + 1e-6) * diffs[:-1])
        assert np.all(3.0 * diffs[1:] <= diffs[:-1])
        exact = 4 * math.pi * (64 / 3 - 1024 / 80)
        assert norms[-1] == pytest.approx(exact, rel=1e-5)

    def test_weights_zero_at_origin(self):
        w = quadrature_weights(H3, RadialGrid(1.0, 32))
        assert w[0] == 0.0


class TestBallVolume:
    @pytest.mark.parametrize("dim,expected", [(3, 4 * math.pi / 3), (4, math.pi ** 2 / 2)])
    def test_euclidean_unit_ball(self, dim, expected):
        assert ball_volume(ManifoldSpec(EUCLIDEAN, dim), 1.0) == pytest.approx(expected, rel=1e-12)

    def test_hyperbolic_unit_ball(self):
        assert ball_volume(H3, 1.0) == pytest.approx(math.pi * (math.sinh(2) - 2), rel=1e-12)
        assert ball_volume(H3, 1.0) == pytest.approx(5.11092, abs=2e-5)

    def test_nonpositive_radius_rejected(self):
        with pytest.raises(GeometryError):
            ball_volume(E3, 0.0)

    @settings(max_examples=40, deadline=None)
    @given(dim=st.integers(3, 8), radii=st.lists(st.floats(0.05, 6.0), min_size=2, max_size=6))
    def test_increasing_in_radius(self, dim, radii):
        m = ManifoldSpec(HYPERBOLIC, dim)
        rs = sorted(set(radii))
        vols = [ball_volume(m, r) for r in rs]
        assert all(b > a for a, b in zip(vols, vols[1:]))

    @settings(max_examples=40, deadline=None)
    @given(dim=st.integers(3, 8), R=st.floats(0.01, 6.0))
    def test_hyperbolic_dominates_euclidean(self, dim, R):
        assert ball_volume(ManifoldSpec(HYPERBOLIC, dim), R) >= ball_volume(
            ManifoldSpec(EUCLIDEAN, dim), R)


class TestFunctionalInequalities:
    def test_poincare_h3(self):
        val = poincare_rayleigh(H3, 2.0, RadialGrid(20.0, 2000), trials=200)
        assert val >= 0.95

    def test_poincare_h4(self):
        val = poincare_rayleigh(ManifoldSpec(HYPERBOLIC, 4), 2.0, RadialGrid(20.0, 2000),
                                trials=200)
        assert val >= 0.95 * 1.5

    def test_poincare_rejects_euclidean(self):
        with pytest.raises(GeometryError):
            poincare_rayleigh(E3, 2.0, RadialGrid(20.0, 200))

    def test_poincare_non_quadratic_p(self):
        """For p != 2 the Nelder-Mead route still stays above (N-1)/p."""
        val = poincare_rayleigh(H3, 1.5, RadialGrid(20.0, 800), trials=10)
        assert val >= 0.95 * 2 / 1.5

    def test_single_bump_sobolev_ratio_positive(self):
        grid = RadialGrid(4.0, 400)
        ratio = sobolev_ratio(E3, 2.0, grid, smooth_bump)
        assert 0 < ratio < math.inf

    def test_sobolev_floor_above_talenti(self):
        """Radial floor stays above the sharp constant sqrt(3) (pi/2)^(2/3) in 3D."""
        floor = sobolev_ratio_floor(E3, 2.0, RadialGrid(20.0, 1000), trials=20)
        talenti = math.sqrt(3) * (math.pi / 2) ** (2 / 3)
        assert floor >= 0.9 * talenti

    def test_sobolev_rejects_p_equal_n(self):
        with pytest.raises(GeometryError):
            sobolev_ratio_floor(E3, 3.0, RadialGrid(4.0, 64))
