import numpy as np
import pytest

from deftemp.errors import InvalidConfig, LengthMismatch
from deftemp.fixtures import (
    FixtureSpec,
    digital_template,
    make_fixture,
    rasterized_scene,
)
from deftemp.potential import build_epf
from deftemp.raster import Pose, transform_points
from deftemp.swarm import SwarmConfig, cost, minimize, optimize, penalty


def sphere(x):
    return float(np.sum((x - 3.0) ** 2))


class TestConfig:
    def test_defaults_valid(self):
        cfg = SwarmConfig()
        assert cfg.particles >= 2 and cfg.iterations >= 0

    def test_rejects_bad_values(self):
        with pytest.raises(InvalidConfig):
            SwarmConfig(particles=1)
        with pytest.raises(InvalidConfig):
            SwarmConfig(iterations=-1)
        with pytest.raises(InvalidConfig):
            SwarmConfig(radius=0.0)
        with pytest.raises(InvalidConfig):
            SwarmConfig(inertia=-0.1)
        with pytest.raises(InvalidConfig):
            SwarmConfig(penalty_mode="median")


class TestPenalty:
    def test_pinned_value(self):
        a = np.array([[0.0, 0.0]])
        b = np.array([[3.0, 4.0]])
        assert penalty(a, b, alpha=1.0) == pytest.approx(25.0, abs=1e-12)

    def test_scales_with_alpha(self):
        a = np.zeros((4, 2))
        b = np.ones((4, 2))
        assert penalty(a, b, alpha=0.5) == pytest.approx(0.5 * 8.0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            penalty(np.zeros((3, 2)), np.zeros((4, 2)), alpha=1.0)


class TestMinimize:
    def test_converges_on_sphere(self):
        cfg = SwarmConfig(particles=20, iterations=60, seed=0, radius=10.0)
        anchor = np.full(4, 8.0)
        best, best_cost, trace = minimize(sphere, anchor, cfg.radius, cfg)
        assert best_cost < 1e-2
        assert np.abs(best - 3.0).max() < 0.15

    def test_trace_monotone_and_sized(self):
        cfg = SwarmConfig(particles=12, iterations=25, seed=1)
        _, _, trace = minimize(sphere, np.full(3, 9.0), cfg.radius, cfg)
        assert len(trace) == cfg.iterations + 1
        assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))

    def test_zero_iterations_reports_initial_best(self):
        cfg = SwarmConfig(particles=8, iterations=0, seed=2)
        anchor = np.full(2, 3.0)  # anchor is the global optimum
        best, best_cost, trace = minimize(sphere, anchor, cfg.radius, cfg)
        assert len(trace) == 1
        assert best_cost == pytest.approx(sphere(anchor))
        assert np.allclose(best, anchor)

    def test_stop_energy_cuts_iterations_short(self):
        full = SwarmConfig(particles=15, iterations=80, seed=3)
        early = SwarmConfig(particles=15, iterations=80, seed=3,
                            stop_energy=1.0)
        _, _, trace_full = minimize(sphere, np.full(3, 8.0), 10.0, full)
        _, cost_early, trace_early = minimize(sphere, np.full(3, 8.0), 10.0,
                                              early)
        assert len(trace_early) < len(trace_full)
        assert cost_early <= 1.0

    def test_same_seed_reproduces_exactly(self):
        cfg = SwarmConfig(particles=10, iterations=30, seed=7)
        r1 = minimize(sphere, np.full(3, 6.0), 10.0, cfg)
        r2 = minimize(sphere, np.full(3, 6.0), 10.0, cfg)
        assert r1[2] == r2[2]
        assert np.array_equal(r1[0], r2[0])

    def test_different_seed_differs(self):
        a = minimize(sphere, np.full(3, 6.0), 10.0,
                     SwarmConfig(particles=10, iterations=30, seed=7))
        b = minimize(sphere, np.full(3, 6.0), 10.0,
                     SwarmConfig(particles=10, iterations=30, seed=8))
        assert a[2] != b[2]

    def test_positions_stay_in_box(self):
        seen = []

        def probe(x):
            seen.append(x.copy())
            return sphere(x)

        anchor = np.full(2, 5.0)
        minimize(probe, anchor, 2.0, SwarmConfig(particles=6, iterations=10,
                                                 seed=4))
        pts = np.array(seen)
        assert pts.min() >= 3.0 - 1e-12 and pts.max() <= 7.0 + 1e-12


@pytest.fixture(scope="module")
def digital_scene():
    fx = make_fixture(FixtureSpec(shape="ellipse"))
    dt = digital_template(fx.template)
    pose = Pose(1.0, 0.0, 40.0, 60.0)
    em = rasterized_scene(dt, pose, 256, 256)
    return dt, pose, build_epf(em)


class TestCostAndOptimize:
    def test_cost_zero_on_perfect_overlay(self, digital_scene):
        dt, pose, field = digital_scene
        posed = transform_points(dt.control_points, pose, dt.center)
        c = cost(dt, pose, posed, field, alpha=0.01)
        assert c == pytest.approx(0.0, abs=1e-6)

    def test_cost_adds_normalized_penalty(self, digital_scene):
        dt, pose, field = digital_scene
        posed = transform_points(dt.control_points, pose, dt.center)
        n = posed.shape[0]
        moved = posed + [2.0, 0.0]
        base = cost(dt, pose, moved, field, alpha=0.0)
        with_pen = cost(dt, pose, moved, field, alpha=1.0)
        # mean mode: alpha * sum(4 px^2) / n on top of the energy
        assert with_pen - base == pytest.approx(4.0, abs=1e-9)
        summed = cost(dt, pose, moved, field, alpha=1.0, penalty_mode="sum")
        assert summed - base == pytest.approx(4.0 * n, abs=1e-6)

    def test_optimize_keeps_perfect_seed(self, digital_scene):
        dt, pose, field = digital_scene
        cfg = SwarmConfig(particles=8, iterations=5, seed=0)
        cps, c, trace = optimize(dt, pose, field, cfg)
        posed = transform_points(dt.control_points, pose, dt.center)
        assert c <= trace[0] + 1e-15
        assert c == pytest.approx(0.0, abs=1e-6)
        assert np.abs(cps - posed).max() < 1e-9

    def test_optimize_trace_monotone(self, digital_scene):
        dt, pose, field = digital_scene
        off = Pose(pose.scale, pose.rotation, pose.dx + 2.0, pose.dy - 1.0)
        cfg = SwarmConfig(particles=12, iterations=20, seed=1)
        _, c, trace = optimize(dt, off, field, cfg)
        assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))
        assert c < trace[0]
