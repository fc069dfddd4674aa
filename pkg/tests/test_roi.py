import numpy as np
import pytest

from deftemp.edges import detect_edges
from deftemp.errors import NoEdges
from deftemp.fixtures import FixtureSpec, make_fixture
from deftemp.matching import default_rotations
from deftemp.roi import RoiConfig, RoiSet, find_rois


@pytest.fixture(scope="module")
def ellipse_scene():
    fx = make_fixture(FixtureSpec(shape="ellipse", noise=0.03, seed=7))
    edges = detect_edges(fx.image, sigma=4.0)
    return fx, edges


class TestFindRois:
    def test_windows_cover_the_object(self, ellipse_scene):
        fx, edges = ellipse_scene
        rois = find_rois(fx.template, edges, default_rotations(),
                         RoiConfig())
        assert len(rois.windows) >= 1
        # the true object center falls inside some window
        cx = fx.pose.dx + fx.template.center[0]
        cy = fx.pose.dy + fx.template.center[1]
        assert rois.contains((cx, cy))

    def test_coverage_is_a_small_fraction(self, ellipse_scene):
        fx, edges = ellipse_scene
        rois = find_rois(fx.template, edges, default_rotations(),
                         RoiConfig())
        assert 0.0 < rois.coverage_fraction < 0.5

    def test_max_windows_caps_output(self, ellipse_scene):
        fx, edges = ellipse_scene
        rois = find_rois(fx.template, edges, default_rotations(),
                         RoiConfig(max_windows=2, percentile=50.0))
        assert len(rois.windows) <= 2

    def test_min_response_ratio_filters_weak_peaks(self, ellipse_scene):
        fx, edges = ellipse_scene
        loose = find_rois(fx.template, edges, default_rotations(),
                          RoiConfig(percentile=50.0, min_response_ratio=0.0,
                                    max_windows=32))
        strict = find_rois(fx.template, edges, default_rotations(),
                           RoiConfig(percentile=50.0, min_response_ratio=0.9,
                                     max_windows=32))
        assert len(strict.windows) <= len(loose.windows)

    def test_no_edges_raises(self, ellipse_scene):
        fx, _ = ellipse_scene
        blank = detect_edges(
            type(fx.image)(np.full((64, 64), 0.5)), sigma=1.0)
        with pytest.raises(NoEdges):
            find_rois(fx.template, blank, default_rotations(), RoiConfig())


class TestRoiSet:
    def test_contains_and_union_mask(self):
        rois = RoiSet(windows=[(2, 3, 4, 5)], coverage_fraction=0.1)
        assert rois.contains((3.0, 4.0))
        assert not rois.contains((10.0, 10.0))
        mask = rois.union_mask(10, 10)
        assert mask[3, 2] and not mask[0, 0]
        assert mask.sum() == 4 * 5
