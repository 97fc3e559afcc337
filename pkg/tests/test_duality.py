import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsgraph import geometry
from dsgraph.duality import (
    dualize_solution,
    gauss_map,
    gauss_map_inverse,
    hyperbolic_curvatures,
    legendre_pair,
)
from dsgraph.errors import InadmissibleError, OutOfHalfspaceError
from dsgraph.exactsol import Hyperboloid, cap_jet
from dsgraph.geometry import PointJet
from dsgraph.solver import Solution

from runs import HARMONIC, disk_run

UNIT_CAP = Hyperboloid((0.0, 0.0), 1.0, 2.0)


def dual_cap(y):
    """Image of the unit cap with sigma = 2: v = sqrt(4 - |y|^2) - 1, with derivatives."""
    y = np.atleast_2d(y)
    s = np.sqrt(4.0 - np.sum(y**2, axis=1))
    grad = -y / s[:, None]
    hess = -np.eye(y.shape[1]) / s[:, None, None] - y[:, :, None] * y[:, None, :] / s[:, None, None] ** 3
    return s - 1.0, grad, hess


@st.composite
def jets(draw):
    n = draw(st.integers(1, 3))
    x = np.array(draw(st.lists(st.floats(-3, 3), min_size=n, max_size=n)))
    u = draw(st.floats(0.01, 5.0))
    d = np.array(draw(st.lists(st.floats(-1, 1), min_size=n, max_size=n)))
    scale = draw(st.floats(0.0, 0.99))
    norm = np.linalg.norm(d)
    p = d / norm * scale if norm > 1e-6 else np.zeros(n)
    return PointJet(x, u, p, np.zeros((n, n)))


class TestGaussMap:
    def test_apex(self):
        y, v, grad_v = gauss_map(cap_jet(UNIT_CAP, np.zeros(2)))
        np.testing.assert_allclose(y, 0.0, atol=1e-15)
        assert v == pytest.approx(1.0) and np.all(grad_v == 0)

    def test_horizontal_point_is_fixed(self):
        y, v, _ = gauss_map(PointJet([0.4, -1.0], 0.7, [0.0, 0.0], np.zeros((2, 2))))
        np.testing.assert_array_equal(y, [0.4, -1.0])
        assert v == 0.7

    def test_one_dimensional_cap_point(self):
        y, v, _ = gauss_map(cap_jet(Hyperboloid((0.0,), 1.0, 2.0), [0.6]))
        assert y[0] == pytest.approx(1.0289915, abs=5e-8)
        assert v == pytest.approx(0.7149859, abs=5e-8)
        assert v == pytest.approx(math.sqrt(4.0 - y[0] ** 2) - 1.0, rel=1e-13)

    @settings(max_examples=200)
    @given(jets())
    def test_round_trip_and_weights(self, jet):
        y, v, grad_v = gauss_map(jet)
        x, u = gauss_map_inverse(y, v, grad_v)
        np.testing.assert_allclose(x, jet.x, atol=1e-12 * (1 + np.max(np.abs(jet.x))) + 1e-12 * jet.u)
        assert u == pytest.approx(jet.u, rel=1e-12)
        w = geometry.gradient_weight(jet.Du)
        assert math.sqrt(1 + grad_v @ grad_v) * w == pytest.approx(1.0, rel=1e-12)
        # u Du and v grad v agree
        np.testing.assert_allclose(jet.u * jet.Du, v * grad_v, rtol=1e-12, atol=1e-14)

    def test_inverse_rejects_nonpositive_height(self):
        with pytest.raises(OutOfHalfspaceError):
            gauss_map_inverse(np.zeros(2), 0.0, np.zeros(2))


class TestLegendre:
    def test_apex(self):
        pair = legendre_pair(cap_jet(UNIT_CAP, np.zeros(2)))
        assert pair.p == pytest.approx(-0.5) and pair.q == pytest.approx(0.5)

    @settings(max_examples=200)
    @given(jets())
    def test_identity(self, jet):
        pair = legendre_pair(jet)
        y, _, _ = gauss_map(jet)
        assert abs(pair.defect) <= 1e-12 * (1 + abs(jet.x @ y) + jet.u**2)


class TestHyperbolicCurvatures:
    def test_horosphere_like_plane(self):
        # horizontal plane v = c is umbilic with curvature 1
        ks = hyperbolic_curvatures(0.7, np.zeros(2), np.zeros((2, 2)))
        np.testing.assert_allclose(ks, 1.0, rtol=1e-14)

    @pytest.mark.parametrize("n", [1, 2])
    def test_dual_of_cap_is_reciprocal(self, n):
        pts = np.linspace(-1.2, 1.2, 7)[:, None] * np.ones(n) / math.sqrt(n)
        v, g, H = dual_cap(pts)
        ks = hyperbolic_curvatures(v, g, H)
        np.testing.assert_allclose(ks, 0.5, rtol=1e-12)

    def test_mapped_cap_lies_on_dual_sphere(self):
        hyp = Hyperboloid((0.0, 0.0), 1.3, 2.5)
        jets = cap_jet(hyp, np.array([[0.2, 0.1], [-0.4, 0.3], [0.9, -0.2]]))
        y, v, gv = gauss_map(jets)
        rs = hyp.r * hyp.sigma
        s = np.sqrt(rs**2 - np.sum(y**2, axis=1))
        np.testing.assert_allclose(v, s - hyp.r, rtol=1e-13)
        np.testing.assert_allclose(gv, -y / s[:, None], rtol=1e-12, atol=1e-14)
        hess = -np.eye(2) / s[:, None, None] - y[:, :, None] * y[:, None, :] / s[:, None, None] ** 3
        np.testing.assert_allclose(hyperbolic_curvatures(v, gv, hess), 1 / hyp.sigma, rtol=1e-12)


class TestDualizeSolution:
    def test_disk_run(self):
        sol = disk_run(32)
        dual, rep = dualize_solution(sol, HARMONIC, 2.0)
        assert rep.passed, rep.checks
        assert rep.target == 0.5
        assert rep.interpolated_points > 50
        assert rep.reciprocal_f_star_max_dev <= 5e-3
        assert rep.injective and rep.p_hessian_min_eig > 0
        assert len(dual.y) == len(sol.grid.interior)
        assert np.all(np.diff(dual.kappa_star, axis=1) >= 0)
        rows = list(dual.to_rows())
        assert rows[0][0] == int(sol.grid.interior[0]) and len(rows[0][1]) == 2

    def test_hull_contains_points(self):
        dual, _ = dualize_solution(disk_run(16), HARMONIC, 2.0)
        r = np.hypot(*dual.y.T)
        assert np.max(np.hypot(*dual.hull.T)) == pytest.approx(np.max(r))

    def test_inadmissible_field(self):
        sol = disk_run(16)
        # spacelike everywhere but u D2u > I, so no node is admissible
        u = 2.5 + 0.25 * np.sum(sol.grid.coords**2, axis=1)
        bad = Solution(sol.problem, sol.grid, u, sol.kappa_min, sol.kappa_max, sol.w, [], True, 0.0)
        with pytest.raises(InadmissibleError):
            dualize_solution(bad, HARMONIC, 2.0)
