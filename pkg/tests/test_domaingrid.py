import math

import numpy as np
import pytest

from dsgraph.domaingrid import (
    DomainSpec,
    build_grid,
    corner_zone,
    fd_jet,
    field_from_csv,
    field_to_csv,
    sphere_radii,
)
from dsgraph.errors import ConfigError

SQUARE = DomainSpec.rectangle(-1, 1, -1, 1)
DISK = DomainSpec.disk(math.sqrt(3))
ANNULUS = DomainSpec.annulus(0.5, 1.5)


def quadratic(c):
    x = c[:, 0]
    y = c[:, 1] if c.shape[1] > 1 else 0.0 * x
    return 0.3 + 0.5 * x - 0.2 * y + 0.7 * x * x - 0.4 * x * y + 1.1 * y * y


def smooth(c):
    x, y = c[:, 0], c[:, 1]
    return np.exp(0.5 * x) * np.cos(0.7 * y) + 0.2 * x * y


def smooth_derivatives(c):
    x, y = c[:, 0], c[:, 1]
    e, co, si = np.exp(0.5 * x), np.cos(0.7 * y), np.sin(0.7 * y)
    Du = np.stack([0.5 * e * co + 0.2 * y, -0.7 * e * si + 0.2 * x], -1)
    D2u = np.empty((len(x), 2, 2))
    D2u[:, 0, 0] = 0.25 * e * co
    D2u[:, 1, 1] = -0.49 * e * co
    D2u[:, 0, 1] = D2u[:, 1, 0] = -0.35 * e * si + 0.2
    return Du, D2u


def derivative_error(domain, N):
    g = build_grid(domain, N)
    jets = g.interior_jets(g.sample(smooth))
    Du, D2u = smooth_derivatives(jets.x)
    return g.h, max(np.max(np.abs(jets.Du - Du)), np.max(np.abs(jets.D2u - D2u)))


class TestDomainSpec:
    @pytest.mark.parametrize(
        "kind,params",
        [("interval", (1, 0)), ("rectangle", (0, 1, 1, 1)), ("disk", (0, 0, -1)), ("annulus", (0, 0, 2, 1)),
         ("triangle", (0, 1)), ("disk", (0, 1))],
    )
    def test_rejects(self, kind, params):
        with pytest.raises(ConfigError):
            DomainSpec(kind, params)

    def test_distance_to_boundary(self):
        assert ANNULUS.distance_to_boundary([1.0, 0.0])[0] == pytest.approx(0.5)
        assert SQUARE.distance_to_boundary([0.5, -0.25])[0] == pytest.approx(0.5)


class TestLayout:
    def test_interval_spacing(self):
        g = build_grid(DomainSpec.interval(-1, 1), 9)
        assert g.h == pytest.approx(0.25)
        assert g.n_nodes == 9 and list(g.boundary) == [0, 8]

    def test_rectangle_counts(self):
        g = build_grid(SQUARE, 17)
        assert len(g.interior) == 225 and len(g.boundary) == 64
        assert g.is_corner.sum() == 4
        # one-sided normal derivative rows skip the corners
        assert len(g.boundary_rows) == 60

    def test_disk_half_cell_offset(self):
        N = 16
        g = build_grid(DISK, N)
        rho = np.hypot(*g.coords.T)
        assert g.h == pytest.approx(math.sqrt(3) / (N - 0.5))
        assert np.min(rho) == pytest.approx(0.5 * g.h)
        assert g.n_nodes == N * N

    def test_polar_needs_even_resolution(self):
        with pytest.raises(ConfigError):
            build_grid(DISK, 17)

    @pytest.mark.parametrize("N", [4, 8.5])
    def test_bad_resolution(self, N):
        with pytest.raises(ConfigError):
            build_grid(SQUARE, N)

    @pytest.mark.parametrize("domain", [DomainSpec.interval(0, 2), SQUARE, DISK, ANNULUS], ids=lambda d: d.kind)
    def test_boundary_nodes_on_boundary(self, domain):
        g = build_grid(domain, 16)
        d = domain.distance_to_boundary(g.coords)
        assert np.max(np.abs(d[g.boundary])) <= 1e-12
        assert np.min(d[g.interior]) > 0


class TestDerivatives:
    @pytest.mark.parametrize("domain", [DomainSpec.interval(-1, 2), SQUARE, DomainSpec.rectangle(0, 1, -2, 2)],
                             ids=["interval", "square", "rectangle"])
    def test_quadratics_exact_on_cartesian_grids(self, domain):
        g = build_grid(domain, 12)
        jets = g.interior_jets(g.sample(quadratic))
        x = jets.x[:, 0]
        y = jets.x[:, 1] if g.dim > 1 else 0.0 * x
        assert np.max(np.abs(jets.Du[:, 0] - (0.5 + 1.4 * x - 0.4 * y))) <= 1e-12
        assert np.max(np.abs(jets.D2u[:, 0, 0] - 1.4)) <= 1e-11
        if g.dim > 1:
            assert np.max(np.abs(jets.Du[:, 1] - (-0.2 - 0.4 * x + 2.2 * y))) <= 1e-12
            assert np.max(np.abs(jets.D2u[:, 0, 1] + 0.4)) <= 1e-11
            assert np.max(np.abs(jets.D2u[:, 1, 1] - 2.2)) <= 1e-11

    @pytest.mark.parametrize("domain", [SQUARE, DISK, ANNULUS], ids=lambda d: d.kind)
    def test_constants_have_zero_derivatives(self, domain):
        g = build_grid(domain, 16)
        jets = g.interior_jets(np.full(g.n_nodes, 2.5))
        assert np.max(np.abs(jets.Du)) <= 1e-10 and np.max(np.abs(jets.D2u)) <= 1e-8

    @pytest.mark.parametrize("domain", [SQUARE, ANNULUS], ids=lambda d: d.kind)
    def test_second_order_convergence(self, domain):
        # angular spacing is 2 pi / N, so measure the order against N
        _, e1 = derivative_error(domain, 24)
        _, e2 = derivative_error(domain, 48)
        assert math.log(e1 / e2) / math.log(2) >= 1.9

    def test_disk_radial_field_second_order(self):
        errs = []
        for N in (24, 48):
            g = build_grid(DISK, N)
            jets = g.interior_jets(g.sample(lambda c: np.cos(np.hypot(*c.T))))
            r = np.hypot(*jets.x.T)
            lap = jets.D2u[:, 0, 0] + jets.D2u[:, 1, 1]
            errs.append((g.h, np.max(np.abs(lap - (-np.cos(r) - np.sin(r) / r)))))
        (h1, e1), (h2, e2) = errs
        assert math.log(e1 / e2) / math.log(h1 / h2) >= 1.9

    def test_fd_jet_matches_batch(self):
        g = build_grid(DISK, 16)
        f = g.sample(smooth)
        node = int(g.interior[37])
        jet = fd_jet(g, f, node)
        batch = g.interior_jets(f)
        np.testing.assert_allclose(jet.D2u, batch.D2u[37], rtol=1e-13, atol=1e-13)
        with pytest.raises(ValueError):
            fd_jet(g, f, int(g.boundary[0]))

    def test_normal_derivative_of_linear_field(self):
        g = build_grid(SQUARE, 12)
        dn = g.dn @ g.sample(lambda c: 2.0 * c[:, 0] + 3.0 * c[:, 1])
        normals = np.sign(g.coords[g.boundary_rows])
        normals[np.abs(g.coords[g.boundary_rows]) < 1 - 1e-12] = 0.0
        np.testing.assert_allclose(dn, normals @ np.array([2.0, 3.0]), atol=1e-12)


class TestCornerZone:
    def test_block_size(self):
        g = build_grid(SQUARE, 12)
        assert corner_zone(g, 1).sum() == 16
        assert corner_zone(g, 2).sum() == 36
        assert not corner_zone(g, 0).any()

    def test_empty_without_corners(self):
        assert not corner_zone(build_grid(DISK, 16)).any()


class TestSphereRadii:
    def test_disk(self):
        assert sphere_radii(DISK) == {"r1": pytest.approx(math.sqrt(3)), "r2": math.inf}

    def test_rectangle_short_side(self):
        assert sphere_radii(DomainSpec.rectangle(-1, 1, -2, 2))["r1"] == pytest.approx(1.0)

    def test_annulus(self):
        assert sphere_radii(DomainSpec.annulus(1.0, 2.0)) == {"r1": 0.5, "r2": 1.0}


class TestCSV:
    @pytest.mark.parametrize("domain", [DomainSpec.interval(0, 1), SQUARE], ids=lambda d: d.kind)
    def test_round_trip(self, domain):
        g = build_grid(domain, 10)
        f = g.sample(lambda c: np.sin(3 * c[:, 0]) / 7)
        coords, is_b, vals = field_from_csv(field_to_csv(g, f))
        assert np.array_equal(coords, g.coords) and np.array_equal(is_b, g.is_boundary)
        assert np.array_equal(vals, f)

    @pytest.mark.parametrize("text", ["", "a,b\n1,2\n", "node_id,x1,x2,is_boundary,value\n"])
    def test_malformed(self, text):
        with pytest.raises(ValueError):
            field_from_csv(text)
