"""Multi-resolution rigid pose search over directional edge potential fields.

The search walks a blur pyramid from coarse to fine. At the coarsest level a
full pose lattice (restricted to poses whose transformed bbox overlaps an ROI
window, when ROIs are given) is scored; at each finer level the survivors
seed a neighborhood that spans one coarser-level translation step, sampled
at the current finer stride, with rotation and scale moved by one grid index.
Candidates above a level's energy threshold are dropped and the best
``keep_top`` advance. Coarse-level potential fields use their blur sigma as
the distance falloff length so lattice quantization stays inside the
attraction basin.
"""

import math
from dataclasses import dataclass

import numpy as np

from deftemp import kernels
from deftemp.edges import detect_edges
from deftemp.errors import (
    InvalidConfig,
    LengthMismatch,
    NoCandidates,
    NoSearchSpace,
)
from deftemp.potential import PotentialField, build_epf
from deftemp.raster import (
    GrayImage,
    MatchCandidate,
    Pose,
    Template,
    transform_points,
    transform_tangents,
)

DEFAULT_SCALES = (0.8, 0.9, 1.0, 1.1, 1.25)


def default_rotations(step_deg: float = 15.0) -> tuple:
    """Uniform rotation samples covering [0, 2*pi)."""
    if not 0.0 < step_deg <= 180.0:
        raise InvalidConfig(f"rotation step must be in (0, 180], got {step_deg}")
    n = int(round(360.0 / step_deg))
    return tuple(2.0 * math.pi * i / n for i in range(n))


@dataclass(frozen=True)
class PoseGrid:
    """Rotation, scale and per-level translation samples for the search.

    Rotations should be ascending over [0, 2*pi); index neighbors (with
    wraparound) count as adjacent during refinement. Scales are ascending
    and refined by index without wraparound. Empty ``translation_strides``
    derives one stride per pyramid level from the level's blur sigma
    (roughly the potential field's capture radius), ending at 1 px.
    """
    rotations: tuple = default_rotations()
    scales: tuple = DEFAULT_SCALES
    translation_strides: tuple = ()

    def __post_init__(self):
        if len(self.rotations) == 0 or len(self.scales) == 0:
            raise InvalidConfig("pose grid needs at least one rotation and scale")
        if any(not math.isfinite(r) for r in self.rotations):
            raise InvalidConfig("rotations must be finite")
        if any(not (math.isfinite(s) and s > 0.0) for s in self.scales):
            raise InvalidConfig("scales must be finite and > 0")
        st = self.translation_strides
        if any(int(s) != s or s < 1 for s in st):
            raise InvalidConfig("translation strides must be integers >= 1")
        if any(a < b for a, b in zip(st, st[1:])):
            raise InvalidConfig("translation strides must be non-increasing")

    def strides_for(self, sigmas) -> tuple:
        if self.translation_strides:
            if len(self.translation_strides) != len(sigmas):
                raise InvalidConfig("one translation stride per level required")
            return tuple(int(s) for s in self.translation_strides)
        out = [max(1, int(round(s))) for s in sigmas]
        out[-1] = 1
        return tuple(out)


@dataclass(frozen=True)
class PyramidSchedule:
    """Per-level blur sigma, acceptance threshold and survivor count.

    Threshold defaults leave headroom for moderately deformed targets: a
    rigid pose over a boundary deformed by ~3 px scores ~0.55-0.62 at the
    finest level (measured on the bundled fixtures), and candidates must
    survive to Stage 3 for the warp to recover the deformation.
    """
    sigmas: tuple = (4.0, 2.0, 1.0)
    energy_thresholds: tuple = (0.75, 0.70, 0.70)
    keep_top: tuple = (16, 8, 4)

    def __post_init__(self):
        n = len(self.sigmas)
        if n == 0:
            raise InvalidConfig("schedule needs at least one level")
        if len(self.energy_thresholds) != n or len(self.keep_top) != n:
            raise InvalidConfig(
                "sigmas, energy_thresholds and keep_top lengths differ")
        if any(s <= 0.0 for s in self.sigmas):
            raise InvalidConfig("sigmas must be > 0")
        if any(a <= b for a, b in zip(self.sigmas, self.sigmas[1:])):
            raise InvalidConfig("sigmas must be strictly decreasing")
        if any(not 0.0 < t < 1.0 for t in self.energy_thresholds):
            raise InvalidConfig("energy thresholds must be in (0, 1)")
        if any(k < 1 for k in self.keep_top):
            raise InvalidConfig("keep_top entries must be >= 1")

    @property
    def levels(self) -> int:
        return len(self.sigmas)


def contour_energy(field: PotentialField, xs, ys, tans) -> float:
    """Mean directional potential term of a tangent-carrying point set."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    tans = np.ascontiguousarray(tans, dtype=np.float64)
    if not xs.shape == ys.shape == tans.shape or xs.ndim != 1:
        raise LengthMismatch("xs, ys and tangents must be equal-length 1D")
    if xs.size == 0:
        raise LengthMismatch("energy needs at least one point")
    return kernels.chamfer_energy(xs, ys, tans, field.phi,
                                  field.nearest_tangent)


def energy(template: Template, pose: Pose, field: PotentialField,
           warp=None) -> float:
    """Directional energy of the template under (optional warp, then pose).

    The warp, when given, maps template-frame contour points before the
    rigid pose is applied; tangents are recomputed from the warped polyline.
    Points landing outside the field contribute the worst-case term 1.
    """
    pts = template.contour
    tans = template.tangents
    if warp is not None:
        from deftemp.lwm import apply_warp
        from deftemp.raster import polyline_tangents
        pts, _ = apply_warp(warp, pts)
        tans = polyline_tangents(pts, template.closed)
    pts = transform_points(pts, pose, template.center)
    tans = transform_tangents(tans, pose)
    return contour_energy(field, pts[:, 0], pts[:, 1], tans)


class _PoseBasis:
    """Contours pre-transformed per (rotation, scale); translation is a shift."""

    def __init__(self, template: Template, grid: PoseGrid):
        self.grid = grid
        self.entries = {}
        for ri, rot in enumerate(grid.rotations):
            for si, sc in enumerate(grid.scales):
                pose = Pose(scale=sc, rotation=rot)
                pts = transform_points(template.contour, pose, template.center)
                tans = transform_tangents(template.tangents, pose)
                self.entries[(ri, si)] = (
                    np.ascontiguousarray(pts[:, 0]),
                    np.ascontiguousarray(pts[:, 1]),
                    np.ascontiguousarray(tans),
                    (pts[:, 0].min(), pts[:, 0].max(),
                     pts[:, 1].min(), pts[:, 1].max()),
                )

    def energy(self, field, ri, si, dx, dy) -> float:
        xs, ys, tans = self.entries[(ri, si)][:3]
        return kernels.chamfer_energy(xs + dx, ys + dy, tans, field.phi,
                                      field.nearest_tangent)


def _nearest_rotation_index(rotations, value) -> int:
    two_pi = 2.0 * math.pi
    diffs = [abs((r - value + math.pi) % two_pi - math.pi) for r in rotations]
    return int(np.argmin(diffs))


def _nearest_scale_index(scales, value) -> int:
    return int(np.argmin([abs(s - value) for s in scales]))


def _coarse_displacements(basis, ri, si, stride, width, height, rois):
    """Lattice displacements whose posed bbox overlaps some ROI window."""
    xmin, xmax, ymin, ymax = basis.entries[(ri, si)][3]
    pxs = np.arange(stride // 2, width, stride, dtype=np.float64)
    pys = np.arange(stride // 2, height, stride, dtype=np.float64)
    if rois is None:
        ok = np.ones((pys.size, pxs.size), dtype=bool)
    else:
        ok = np.zeros((pys.size, pxs.size), dtype=bool)
        cx = (xmin + xmax) / 2.0
        cy = (ymin + ymax) / 2.0
        for wx, wy, ww, wh in rois.windows:
            # bbox overlap in displacement space, one rectangle per window
            x_ok = (pxs >= wx - (xmax - cx)) & (pxs <= wx + ww - 1 + (cx - xmin))
            y_ok = (pys >= wy - (ymax - cy)) & (pys <= wy + wh - 1 + (cy - ymin))
            ok |= y_ok[:, None] & x_ok[None, :]
    iy, ix = np.nonzero(ok)
    cx = (xmin + xmax) / 2.0
    cy = (ymin + ymax) / 2.0
    return [(pxs[j] - cx, pys[i] - cy) for i, j in zip(iy, ix)]


def _symmetric_offsets(reach: int, stride: int):
    ks = np.arange(0.0, reach + 1e-9, stride)
    return sorted({float(k) for k in ks} | {float(-k) for k in ks})


def _dedupe_sort(grid, raw):
    seen = set()
    rows = []
    for e, ri, si, dx, dy in raw:
        key = (ri, si, round(dx, 6), round(dy, 6))
        if key in seen:
            continue
        seen.add(key)
        rows.append((e, grid.rotations[ri], grid.scales[si], dx, dy, ri, si))
    rows.sort(key=lambda r: r[:5])
    return rows


def search_level(template: Template, field: PotentialField, rois, grid: PoseGrid,
                 seeds=None, threshold: float = 0.5, keep_top: int = 8,
                 level: int = 0, strides=None, stats: dict = None) -> list:
    """One pyramid level of the pose search.

    Without seeds, scores every (rotation, scale, lattice translation) whose
    transformed template bbox intersects an ROI window (all of them when
    ``rois`` is None). With seeds, scores a refinement neighborhood around
    each: rotation and scale one grid index either way (rotation wraps) and
    translations spanning one previous-level step at this level's stride.
    Returns candidates with energy <= threshold, deduplicated, sorted by
    (energy, rotation, scale, dx, dy), truncated to ``keep_top`` — possibly
    empty. Raises NoSearchSpace when there is nothing to evaluate.
    """
    if strides is None:
        strides = grid.strides_for([field.sigma]) if not grid.translation_strides \
            else grid.translation_strides
    stride = strides[min(level, len(strides) - 1)]
    basis = _PoseBasis(template, grid)
    nrot = len(grid.rotations)
    nsc = len(grid.scales)
    h, w = field.phi.shape

    raw = []
    if not seeds:
        if rois is not None and not rois.windows:
            raise NoSearchSpace("no ROI windows to search")
        for ri in range(nrot):
            for si in range(nsc):
                for dx, dy in _coarse_displacements(basis, ri, si, stride,
                                                    w, h, rois):
                    raw.append((basis.energy(field, ri, si, dx, dy),
                                ri, si, dx, dy))
        if not raw:
            raise NoSearchSpace("ROI windows exclude every lattice pose")
    else:
        reach = strides[max(level - 1, 0)]
        offsets = _symmetric_offsets(reach, stride)
        for cand in seeds:
            ri = _nearest_rotation_index(grid.rotations, cand.pose.rotation)
            si = _nearest_scale_index(grid.scales, cand.pose.scale)
            ris = sorted({(ri - 1) % nrot, ri, (ri + 1) % nrot})
            sis = sorted({max(0, si - 1), si, min(nsc - 1, si + 1)})
            for r2 in ris:
                for s2 in sis:
                    for ox in offsets:
                        for oy in offsets:
                            dx = cand.pose.dx + ox
                            dy = cand.pose.dy + oy
                            raw.append((basis.energy(field, r2, s2, dx, dy),
                                        r2, s2, dx, dy))

    rows = _dedupe_sort(grid, raw)
    if stats is not None:
        stats["evaluated"] = len(raw)
        stats["best_energy"] = rows[0][0] if rows else float("nan")
    kept = [r for r in rows if r[0] <= threshold][:keep_top]
    return [MatchCandidate(pose=Pose(scale=sc, rotation=rot, dx=dx, dy=dy),
                           energy=e, level=level)
            for e, rot, sc, dx, dy, ri, si in kept]


def run_stage2(template: Template, base: GrayImage, rois=None,
               schedule: PyramidSchedule = None, grid: PoseGrid = None,
               fields=None, edge_percentile: float = 90.0,
               collector=None) -> list:
    """Coarse-to-fine pose search; returns the finest level's candidates.

    Builds one potential field per schedule sigma (with sigma-proportional
    falloff) unless prebuilt ``fields`` are supplied. Each level's survivors
    seed the next. ``collector``, when given, receives (level, candidates)
    tuples for every level. Raises NoCandidates as soon as a level's
    threshold filters every pose out.
    """
    grid = grid if grid is not None else PoseGrid()
    schedule = schedule if schedule is not None else PyramidSchedule()
    if fields is None:
        fields = []
        for sigma in schedule.sigmas:
            edges = detect_edges(base, sigma=sigma, percentile=edge_percentile)
            fields.append(build_epf(edges, distance_scale=sigma))
    if len(fields) != schedule.levels:
        raise InvalidConfig("one potential field per pyramid level required")
    strides = grid.strides_for(schedule.sigmas)

    seeds = None
    for level in range(schedule.levels):
        stats = {}
        cands = search_level(template, fields[level], rois if level == 0 else None,
                             grid, seeds=seeds,
                             threshold=schedule.energy_thresholds[level],
                             keep_top=schedule.keep_top[level],
                             level=level, strides=strides, stats=stats)
        if collector is not None:
            collector.append((level, cands))
        if not cands:
            raise NoCandidates(
                f"level {level} filtered every pose above energy "
                f"{schedule.energy_thresholds[level]}",
                diagnostics={"level": level,
                             "threshold": schedule.energy_thresholds[level],
                             "best_rejected_energy": stats.get("best_energy"),
                             "evaluated": stats.get("evaluated"),
                             "seeds": 0 if seeds is None else len(seeds)})
        seeds = cands
    return seeds
