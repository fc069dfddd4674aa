"""Particle swarm refinement of control-point positions.

A swarm explores per-control-point boxes around the posed control points,
minimizing the warped contour's directional energy plus a rigidity penalty
on control-point displacement. Particle 0 starts exactly at the posed
control points, so the rigid Stage-2 solution is always a candidate and the
final cost can never exceed it.
"""

import math
from dataclasses import dataclass

import numpy as np

from deftemp.errors import InvalidConfig, LengthMismatch, TooFewPoints
from deftemp.lwm import WarpOperator, warp_template
from deftemp.matching import contour_energy
from deftemp.potential import PotentialField
from deftemp.raster import Pose, Template, polyline_tangents, transform_points

PENALTY_MODES = ("mean", "sum")


@dataclass(frozen=True)
class SwarmConfig:
    particles: int = 30
    iterations: int = 100
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    radius: float = 10.0         # per-coordinate search box half-width, px
    alpha: float = 0.01          # rigidity weight
    seed: int = 0
    stop_energy: float = None    # early stop when global best reaches this
    penalty_mode: str = "mean"   # per-CP mean (alpha is CP-count independent)

    def __post_init__(self):
        if self.particles < 2:
            raise InvalidConfig("swarm needs at least 2 particles")
        if self.iterations < 0:
            raise InvalidConfig("iterations must be >= 0")
        for name in ("inertia", "cognitive", "social", "alpha"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise InvalidConfig(f"{name} must be finite and >= 0")
        if not self.radius > 0.0:
            raise InvalidConfig("search radius must be > 0")
        if self.penalty_mode not in PENALTY_MODES:
            raise InvalidConfig(f"penalty_mode must be one of {PENALTY_MODES}")


def penalty(original_cps, moved_cps, alpha: float) -> float:
    """Rigidity penalty: alpha times the summed squared CP displacement."""
    a = np.asarray(original_cps, dtype=np.float64).reshape(-1, 2)
    b = np.asarray(moved_cps, dtype=np.float64).reshape(-1, 2)
    if a.shape != b.shape:
        raise LengthMismatch("original and moved control point counts differ")
    return float(alpha * ((a - b) ** 2).sum())


def _penalty_term(originals, moved, alpha, mode) -> float:
    p = penalty(originals, moved, alpha)
    return p / originals.shape[0] if mode == "mean" else p


def cost(template: Template, pose: Pose, cp_positions, field: PotentialField,
         alpha: float, penalty_mode: str = "mean") -> float:
    """Energy of the warped contour plus the rigidity penalty.

    ``cp_positions`` are candidate base-frame control points; originals are
    the pose-transformed template control points. Degenerate warp fits score
    the worst-case energy 1 plus the penalty instead of raising, so an
    optimizer treats them as bad positions rather than fatal ones.
    """
    moved = np.asarray(cp_positions, dtype=np.float64).reshape(-1, 2)
    originals = transform_points(template.control_points, pose, template.center)
    pen = _penalty_term(originals, moved, alpha, penalty_mode)
    try:
        warped, tans = warp_template(template, moved, pose)
    except (TooFewPoints, LengthMismatch):
        return 1.0 + pen
    return contour_energy(field, warped[:, 0], warped[:, 1], tans) + pen


def minimize(cost_fn, anchor, radius: float, cfg: SwarmConfig):
    """Generic swarm minimization over a box around ``anchor``.

    Particle 0 starts at the anchor, the rest uniformly inside the box;
    velocities start at zero and positions are clamped to the box. One RNG
    substream per particle keeps results independent of evaluation order.
    Returns (best position, best cost, per-iteration best-cost trace); the
    trace has one entry for the initial swarm plus one per iteration run.
    """
    anchor = np.asarray(anchor, dtype=np.float64).ravel()
    dim = anchor.size
    lo = anchor - radius
    hi = anchor + radius
    gens = [np.random.default_rng(s)
            for s in np.random.SeedSequence(cfg.seed).spawn(cfg.particles)]

    pos = np.empty((cfg.particles, dim))
    pos[0] = anchor
    for i in range(1, cfg.particles):
        pos[i] = anchor + gens[i].uniform(-radius, radius, dim)
    vel = np.zeros((cfg.particles, dim))

    costs = np.array([cost_fn(pos[i]) for i in range(cfg.particles)])
    pbest = pos.copy()
    pbest_cost = costs.copy()
    g = int(np.argmin(pbest_cost))
    gbest = pbest[g].copy()
    gbest_cost = float(pbest_cost[g])
    trace = [gbest_cost]

    for _ in range(cfg.iterations):
        if cfg.stop_energy is not None and gbest_cost <= cfg.stop_energy:
            break
        for i in range(cfg.particles):
            r1 = gens[i].random(dim)
            r2 = gens[i].random(dim)
            vel[i] = (cfg.inertia * vel[i]
                      + cfg.cognitive * r1 * (pbest[i] - pos[i])
                      + cfg.social * r2 * (gbest - pos[i]))
            pos[i] = np.clip(pos[i] + vel[i], lo, hi)
        for i in range(cfg.particles):
            c = cost_fn(pos[i])
            if c < pbest_cost[i]:
                pbest_cost[i] = c
                pbest[i] = pos[i].copy()
        g = int(np.argmin(pbest_cost))
        if pbest_cost[g] < gbest_cost:
            gbest_cost = float(pbest_cost[g])
            gbest = pbest[g].copy()
        trace.append(gbest_cost)

    return gbest, gbest_cost, trace


def optimize(template: Template, seed_pose: Pose, field: PotentialField,
             cfg: SwarmConfig):
    """Refine control points around a Stage-2 pose.

    Returns (final CP positions (N, 2), final cost, cost trace). The warp
    from CP targets to contour points is linear for fixed sources, so it is
    precomputed once as a matrix; each cost evaluation is then two small
    mat-vecs plus the energy kernel. Layouts too degenerate for the
    precomputation fall back to refitting per evaluation.
    """
    originals = transform_points(template.control_points, seed_pose,
                                 template.center)
    posed_contour = transform_points(template.contour, seed_pose,
                                     template.center)
    n = originals.shape[0]
    closed = template.closed

    try:
        op = WarpOperator(originals, posed_contour)
    except (TooFewPoints, LengthMismatch):
        op = None

    def cost_fn(flat):
        moved = flat.reshape(n, 2)
        pen = _penalty_term(originals, moved, cfg.alpha, cfg.penalty_mode)
        if op is not None:
            warped = op.map_targets(moved)
            tans = polyline_tangents(warped, closed)
        else:
            try:
                warped, tans = warp_template(template, moved, seed_pose)
            except (TooFewPoints, LengthMismatch):
                return 1.0 + pen
        return contour_energy(field, warped[:, 0], warped[:, 1], tans) + pen

    best, best_cost, trace = minimize(cost_fn, originals.ravel(),
                                      cfg.radius, cfg)
    return best.reshape(n, 2), best_cost, trace
