import numpy as np
import pytest

from deftemp.fixtures import FixtureSpec, centered_pose, make_fixture
from deftemp.raster import Pose


def offset_pose(template, width, height, scale=1.0, rotation=0.0,
                dx=0.0, dy=0.0) -> Pose:
    """Centered pose shifted by (dx, dy); keeps the shape inside the frame."""
    base = centered_pose(template, width, height, scale=scale,
                         rotation=rotation)
    return Pose(base.scale, base.rotation, base.dx + dx, base.dy + dy)


@pytest.fixture(scope="session")
def ellipse_fixture():
    """Rigid noisy ellipse, rotated off-axis, centered."""
    spec = FixtureSpec(shape="ellipse", noise=0.03, seed=3)
    fx = make_fixture(spec)
    rotated = FixtureSpec(
        shape="ellipse", noise=0.03, seed=3,
        pose=Pose(1.0, 0.5235987755982988, fx.pose.dx, fx.pose.dy))
    return make_fixture(rotated)


@pytest.fixture(scope="session")
def deformed_ellipse_fixture():
    """Sinusoidal-boundary ellipse (3 px amplitude), rotated, noisy."""
    base = make_fixture(FixtureSpec(shape="ellipse", seed=3))
    spec = FixtureSpec(
        shape="ellipse", deform_amplitude=3.0, deform_cycles=3, noise=0.03,
        seed=3, pose=Pose(1.0, 0.5235987755982988, base.pose.dx, base.pose.dy))
    return make_fixture(spec)


def scattered_points(rng, n, lo=0.0, hi=100.0):
    """Random points with pairwise separation, for warp fitting tests."""
    pts = []
    while len(pts) < n:
        p = rng.uniform(lo, hi, 2)
        if all(np.hypot(*(p - q)) > 3.0 for q in pts):
            pts.append(p)
    return np.array(pts)
