import numpy as np
import pytest

from deftemp.edges import EdgeMap
from deftemp.errors import InvalidConfig, NoEdges
from deftemp.potential import build_epf, sample_nearest_tangent, sample_phi


def edge_map_from_pixels(pixels, tangents=None, sigma=1.0):
    is_edge = np.zeros((16, 16), dtype=bool)
    tan = np.zeros((16, 16))
    for i, (x, y) in enumerate(pixels):
        is_edge[y, x] = True
        if tangents is not None:
            tan[y, x] = tangents[i]
    return EdgeMap(is_edge=is_edge, tangent=tan, sigma=sigma)


class TestBuildEpf:
    def test_phi_is_minus_one_on_edges(self):
        em = edge_map_from_pixels([(3, 4), (10, 2), (7, 12)])
        field = build_epf(em)
        assert field.phi[4, 3] == pytest.approx(-1.0, abs=1e-12)
        assert field.phi[2, 10] == pytest.approx(-1.0, abs=1e-12)
        assert field.phi[12, 7] == pytest.approx(-1.0, abs=1e-12)

    def test_phi_at_three_four_displacement(self):
        # single edge at (2, 3); the pixel at (+3, +4) sits at distance 5
        em = edge_map_from_pixels([(2, 3)])
        field = build_epf(em)
        assert field.phi[3 + 4, 2 + 3] == pytest.approx(-np.exp(-5.0),
                                                        abs=1e-9)

    def test_distance_scale_stretches_falloff(self):
        em = edge_map_from_pixels([(2, 3)])
        field = build_epf(em, distance_scale=5.0)
        assert field.phi[7, 5] == pytest.approx(-np.exp(-1.0), abs=1e-9)

    def test_distances_match_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            is_edge = rng.random((12, 12)) < 0.08
            if not is_edge.any():
                is_edge[5, 5] = True
            em = EdgeMap(is_edge=is_edge, tangent=np.zeros((12, 12)),
                         sigma=1.0)
            field = build_epf(em)
            ey, ex = np.nonzero(is_edge)
            for y in range(12):
                for x in range(12):
                    d = np.sqrt((ex - x) ** 2 + (ey - y) ** 2).min()
                    assert field.phi[y, x] == pytest.approx(-np.exp(-d),
                                                            rel=1e-12)

    def test_nearest_tangent_propagates(self):
        em = edge_map_from_pixels([(2, 2), (13, 13)], tangents=[0.3, 1.2])
        field = build_epf(em)
        tan, ok = sample_nearest_tangent(field, (3.0, 2.0))
        assert ok and tan == pytest.approx(0.3)
        tan, ok = sample_nearest_tangent(field, (12.0, 13.0))
        assert ok and tan == pytest.approx(1.2)
        _, ok = sample_nearest_tangent(field, (-1.0, 0.0))
        assert not ok

    def test_no_edges_raises(self):
        em = EdgeMap(is_edge=np.zeros((8, 8), dtype=bool),
                     tangent=np.zeros((8, 8)), sigma=1.0)
        with pytest.raises(NoEdges):
            build_epf(em)

    def test_bad_scale_rejected(self):
        em = edge_map_from_pixels([(2, 3)])
        with pytest.raises(InvalidConfig):
            build_epf(em, distance_scale=0.0)


class TestSamplePhi:
    def test_bilinear_between_pixels(self):
        em = edge_map_from_pixels([(4, 4)])
        field = build_epf(em)
        v = sample_phi(field, (4.5, 4.0))
        expected = 0.5 * (field.phi[4, 4] + field.phi[4, 5])
        assert v == pytest.approx(expected, rel=1e-12)

    def test_outside_is_zero_attraction(self):
        em = edge_map_from_pixels([(4, 4)])
        field = build_epf(em)
        assert sample_phi(field, (-3.0, 4.0)) == 0.0
