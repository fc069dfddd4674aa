import numpy as np
import pytest

from deftemp.errors import (
    ControlPointOutsideBbox,
    ParseError,
    TooFewContourPoints,
    ZeroDimension,
)
from deftemp.raster import (
    GrayImage,
    MatchCandidate,
    Pose,
    invert_points,
    load_image,
    load_template,
    make_template,
    polyline_tangents,
    rasterize_contour,
    save_image,
    save_template,
    transform_points,
    transform_tangents,
)


def square_contour(x0=0.0, y0=0.0, side=10.0):
    """Square boundary with side midpoints: 8 points, counterclockwise."""
    s, h = side, side / 2.0
    local = np.array([[0.0, 0.0], [h, 0.0], [s, 0.0], [s, h],
                      [s, s], [h, s], [0.0, s], [0.0, h]])
    return local + [x0, y0]


def square_template():
    contour = square_contour()
    cps = contour[::2].copy()
    return make_template(contour, control_points=cps, closed=True)


class TestPose:
    def test_rotation_scale_about_center(self):
        # (1, 0) scaled by 2 and rotated a quarter turn about the origin
        # lands at (0, 2): rotation is counterclockwise in x-right/y-down
        # coordinates when viewed with y flipped, i.e. screen-clockwise
        pose = Pose(scale=2.0, rotation=np.pi / 2, dx=0.0, dy=0.0)
        out = transform_points(np.array([[1.0, 0.0]]), pose, (0.0, 0.0))
        assert np.allclose(out, [[0.0, 2.0]], atol=1e-12)

    def test_displacement_is_absolute(self):
        pose = Pose(scale=1.0, rotation=0.0, dx=7.0, dy=-3.0)
        out = transform_points(np.array([[2.0, 5.0]]), pose, (0.0, 0.0))
        assert np.allclose(out, [[9.0, 2.0]])

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(-20, 20, (40, 2))
        pose = Pose(scale=1.3, rotation=0.7, dx=12.0, dy=-4.0)
        back = invert_points(transform_points(pts, pose, (3.0, 2.0)),
                             pose, (3.0, 2.0))
        assert np.allclose(back, pts, atol=1e-9)

    def test_tangent_transform_ignores_translation_and_scale(self):
        tans = np.array([0.0, np.pi / 4])
        pose = Pose(scale=3.0, rotation=0.5, dx=100.0, dy=-50.0)
        out = transform_tangents(tans, pose)
        assert np.allclose(out, (tans + 0.5) % np.pi)

    def test_scale_must_be_positive(self):
        with pytest.raises(Exception):
            Pose(scale=0.0, rotation=0.0, dx=0.0, dy=0.0)


class TestTemplate:
    def test_contour_shifted_to_origin(self):
        contour = square_contour(5.0, 7.0)
        tpl = make_template(contour, control_points=contour[::2], closed=True)
        assert tpl.contour.min(axis=0) == pytest.approx([0.0, 0.0])
        assert tpl.center == pytest.approx([5.0, 5.0])
        # control points shift with the contour
        assert tpl.control_points.min(axis=0) == pytest.approx([0.0, 0.0])

    def test_too_few_points(self):
        with pytest.raises(TooFewContourPoints):
            make_template(np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))

    def test_control_point_outside_bbox(self):
        cps = np.array([[20.0, 0.0], [5.0, 5.0], [0.0, 0.0]])
        with pytest.raises(ControlPointOutsideBbox):
            make_template(square_contour(), control_points=cps)

    def test_save_load_round_trip(self, tmp_path):
        tpl = square_template()
        path = tmp_path / "tpl.txt"
        save_template(tpl, path)
        back = load_template(path)
        assert np.allclose(back.contour, tpl.contour, atol=1e-6)
        assert np.allclose(back.control_points, tpl.control_points, atol=1e-6)
        assert back.closed == tpl.closed

    def test_load_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a template\n")
        with pytest.raises(ParseError):
            load_template(path)


class TestPolylineTangents:
    def test_closed_square_midpoints_follow_sides(self):
        pts = square_contour()
        tans = polyline_tangents(pts, closed=True)
        assert tans.shape == (8,)
        assert np.all((tans >= 0.0) & (tans < np.pi))
        # side midpoints: top/bottom horizontal, left/right vertical
        assert tans[1] == pytest.approx(0.0, abs=1e-12)
        assert tans[5] == pytest.approx(0.0, abs=1e-12)
        assert tans[3] == pytest.approx(np.pi / 2, abs=1e-12)
        assert tans[7] == pytest.approx(np.pi / 2, abs=1e-12)

    def test_open_endpoints_use_one_sided(self):
        pts = np.array([[0.0, 0.0], [10.0, 0.0], [20.0, 0.0]])
        tans = polyline_tangents(pts, closed=False)
        assert np.allclose(tans, 0.0)


class TestImages:
    def test_gray_image_validation(self):
        with pytest.raises(ZeroDimension):
            GrayImage(np.zeros((0, 5)))

    def test_pgm_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        img = GrayImage(np.round(rng.random((12, 17)) * 255) / 255.0)
        path = tmp_path / "img.pgm"
        save_image(img, path)
        back = load_image(path)
        assert back.pixels.shape == (12, 17)
        assert np.abs(back.pixels - img.pixels).max() <= 1.0 / 255.0

    def test_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        img = GrayImage(rng.random((9, 9)))
        path = tmp_path / "img.png"
        save_image(img, path)
        back = load_image(path)
        assert np.abs(back.pixels - img.pixels).max() <= 1.0 / 255.0


class TestRasterizeContour:
    def test_marks_square_perimeter(self):
        pts = np.array([[2.0, 2.0], [8.0, 2.0], [8.0, 8.0], [2.0, 8.0]])
        grid = rasterize_contour(pts, 12, 12, closed=True)
        assert grid[2, 2] == 1 and grid[2, 8] == 1
        assert grid[2, 5] == 1 and grid[5, 8] == 1
        assert grid[5, 5] == 0

    def test_out_of_bounds_clipped(self):
        pts = np.array([[-5.0, -5.0], [20.0, -5.0], [20.0, 20.0]])
        grid = rasterize_contour(pts, 8, 8, closed=True)
        assert grid.shape == (8, 8)

    def test_empty_contour(self):
        grid = rasterize_contour(np.zeros((0, 2)), 4, 4, closed=True)
        assert grid.sum() == 0


def test_match_candidate_sort_key_orders_by_energy_first():
    a = MatchCandidate(Pose(1.0, 0.0, 0.0, 0.0), 0.2, 0)
    b = MatchCandidate(Pose(1.0, 1.0, 0.0, 0.0), 0.1, 0)
    assert sorted([a, b], key=lambda c: c.sort_key())[0] is b
