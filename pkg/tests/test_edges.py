import numpy as np
import pytest

from deftemp.edges import detect_edges
from deftemp.errors import SigmaTooSmall
from deftemp.raster import GrayImage


def step_image(width=64, height=64, col=32, lo=0.2, hi=0.8):
    px = np.full((height, width), lo)
    px[:, col:] = hi
    return GrayImage(px)


class TestDetectEdges:
    def test_vertical_step_found_near_column(self):
        em = detect_edges(step_image(col=32), sigma=1.0)
        ys, xs = np.nonzero(em.is_edge)
        assert em.count > 30
        # edge locus hugs the intensity step
        assert np.all(np.abs(xs - 31.5) <= 1.5)

    def test_vertical_step_tangent_is_vertical(self):
        em = detect_edges(step_image(), sigma=1.0)
        tans = em.tangent[em.is_edge]
        # tangent runs along the edge: pi/2 in [0, pi)
        assert np.all(np.abs(tans - np.pi / 2) < 0.1)

    def test_horizontal_step_tangent_is_horizontal(self):
        img = GrayImage(step_image().pixels.T.copy())
        em = detect_edges(img, sigma=1.0)
        tans = em.tangent[em.is_edge]
        dist = np.minimum(tans, np.pi - tans)  # circular distance to 0
        assert np.all(dist < 0.1)

    def test_nonmax_suppression_thins_to_single_pixel(self):
        em = detect_edges(step_image(), sigma=1.0)
        # no row carries a horizontal run of adjacent edge pixels
        run = em.is_edge[:, :-1] & em.is_edge[:, 1:]
        assert not run.any()

    def test_blank_image_has_no_edges(self):
        em = detect_edges(GrayImage(np.full((32, 32), 0.5)), sigma=1.0)
        assert em.count == 0

    def test_higher_sigma_smooths_noise_edges_away(self):
        rng = np.random.default_rng(0)
        px = np.clip(step_image().pixels + rng.normal(0, 0.05, (64, 64)), 0, 1)
        img = GrayImage(px)
        fine = detect_edges(img, sigma=1.0)
        coarse = detect_edges(img, sigma=4.0)
        assert coarse.count <= fine.count

    def test_sigma_validation(self):
        with pytest.raises(SigmaTooSmall):
            detect_edges(step_image(), sigma=0.0)

    def test_percentile_raises_threshold(self):
        rng = np.random.default_rng(1)
        px = np.clip(step_image().pixels + rng.normal(0, 0.03, (64, 64)), 0, 1)
        img = GrayImage(px)
        loose = detect_edges(img, sigma=1.0, percentile=50.0)
        strict = detect_edges(img, sigma=1.0, percentile=99.0)
        assert strict.count <= loose.count

    def test_sigma_recorded(self):
        em = detect_edges(step_image(), sigma=2.0)
        assert em.sigma == 2.0
