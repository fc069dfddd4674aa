"""End-to-end orchestration: ROI discovery, pose search, swarm refinement.

Also houses the run artifacts: overlay rendering, the line-oriented run
report, candidate CSVs and the optional debug dumps. Wall-clock timings go
to a separate timings file so the report and candidate files are
byte-identical across runs of the same configuration and seed.
"""

import dataclasses
import math
import time
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np

from deftemp.edges import detect_edges
from deftemp.errors import (
    InvalidConfig,
    IoError,
    NoCandidates,
    NoEdges,
    NoSearchSpace,
)
from deftemp.lwm import Correspondences, apply_warp, fit_lwm, warp_template
from deftemp.matching import PoseGrid, PyramidSchedule, run_stage2
from deftemp.potential import build_epf
from deftemp.raster import (
    GrayImage,
    Pose,
    Template,
    load_image,
    load_template,
    make_template,
    rasterize_contour,
    save_image,
    transform_points,
)
from deftemp.roi import RoiConfig, find_rois
from deftemp.swarm import SwarmConfig, optimize


@dataclass
class PipelineConfig:
    image: str = None                 # single-image mode
    images: tuple = ()                # ordered frame paths, track mode
    template: str = None
    out_dir: str = None
    mode: str = "run"                 # run | track
    roi: RoiConfig = dfield(default_factory=RoiConfig)
    grid: PoseGrid = dfield(default_factory=PoseGrid)
    schedule: PyramidSchedule = dfield(default_factory=PyramidSchedule)
    swarm: SwarmConfig = dfield(default_factory=SwarmConfig)
    edge_percentile: float = 90.0
    skip_roi: bool = False
    relocalize_threshold: float = 0.7
    dump_epf: bool = False
    dump_candidates: bool = False
    dump_trace: bool = False
    dump_warp: bool = False

    def validate(self):
        if self.mode not in ("run", "track"):
            raise InvalidConfig(f"mode must be run or track, got {self.mode!r}")
        if self.template is None:
            raise InvalidConfig("a template path is required")
        if self.mode == "run" and not self.image:
            raise InvalidConfig("run mode needs exactly one --image")
        if self.mode == "track" and len(self.images) < 2:
            raise InvalidConfig("track mode needs at least 2 ordered images")
        if not self.relocalize_threshold > 0.0:
            raise InvalidConfig("relocalize threshold must be positive")


@dataclass(eq=False)
class SegmentationResult:
    pose: Pose
    control_points: np.ndarray     # (N, 2) final, base frame
    seed_control_points: np.ndarray  # (N, 2) posed template CPs before refinement
    contour: np.ndarray            # (M, 2) final warped contour, base frame
    closed: bool
    stage2_energy: float           # best rigid energy (seed energy in track)
    final_cost: float
    candidate_counts: dict
    timings_ms: dict
    trace: list                    # winning swarm cost trace
    candidates: list               # finest-level match candidates
    level_candidates: list         # (level, candidates) for all levels
    relocalized: bool = False
    frame_index: int = 0


@dataclass(eq=False)
class FrameFailure:
    frame_index: int
    error: str
    diagnostics: dict


def _swarm_seed(base_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def segment(image: GrayImage, template: Template, cfg: PipelineConfig,
            frame_index: int = 0) -> SegmentationResult:
    """Run the three stages on one loaded image."""
    timings = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    fields = []
    edge_maps = []
    try:
        for sigma in cfg.schedule.sigmas:
            em = detect_edges(image, sigma=sigma, percentile=cfg.edge_percentile)
            edge_maps.append(em)
            fields.append(build_epf(em, distance_scale=sigma))
    except NoEdges:
        raise NoCandidates("no edges detected in the image",
                           diagnostics={"edge_count": 0})
    timings["fields"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    rois = None
    if not cfg.skip_roi:
        rois = find_rois(template, edge_maps[0], cfg.grid.rotations, cfg.roi)
    timings["stage1"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    level_candidates = []
    try:
        candidates = run_stage2(template, image, rois=rois,
                                schedule=cfg.schedule, grid=cfg.grid,
                                fields=fields,
                                edge_percentile=cfg.edge_percentile,
                                collector=level_candidates)
    except (NoCandidates, NoSearchSpace) as exc:
        diag = dict(getattr(exc, "diagnostics", {}) or {})
        diag.setdefault("edge_count", int(edge_maps[0].count))
        if rois is not None:
            diag.setdefault("roi_coverage", rois.coverage_fraction)
        raise NoCandidates(str(exc), diagnostics=diag) from exc
    timings["stage2"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fine_field = fields[-1]
    best = None
    for i, cand in enumerate(candidates):
        swarm_cfg = dataclasses.replace(cfg.swarm,
                                        seed=_swarm_seed(cfg.swarm.seed, i))
        cps, cost_i, trace = optimize(template, cand.pose, fine_field, swarm_cfg)
        if best is None or cost_i < best[0]:
            best = (cost_i, i, cps, trace, cand)
    final_cost, _, final_cps, final_trace, final_cand = best
    contour, _ = warp_template(template, final_cps, final_cand.pose)
    seed_cps = transform_points(template.control_points, final_cand.pose,
                                template.center)
    timings["stage3"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start

    return SegmentationResult(
        pose=final_cand.pose,
        control_points=final_cps,
        seed_control_points=seed_cps,
        contour=contour,
        closed=template.closed,
        stage2_energy=candidates[0].energy,
        final_cost=final_cost,
        candidate_counts={
            "roi_windows": 0 if rois is None else len(rois.windows),
            "stage2": len(candidates),
            "pso_runs": len(candidates),
        },
        timings_ms={k: v * 1000.0 for k, v in timings.items()},
        trace=final_trace,
        candidates=candidates,
        level_candidates=level_candidates,
        frame_index=frame_index,
    )


def template_from_result(result: SegmentationResult):
    """Rebuild a template from a frame's final contour for seeding the next.

    Returns (template, pose) where the pose places the rebuilt template back
    onto its base-frame position. Control points are clamped into the
    contour bbox (swarm exploration can push one marginally outside).
    """
    contour = result.contour
    lo = contour.min(axis=0)
    hi = contour.max(axis=0)
    cps = np.clip(result.control_points, lo, hi)
    tpl = make_template(contour, control_points=cps, closed=result.closed)
    return tpl, Pose(scale=1.0, rotation=0.0, dx=float(lo[0]), dy=float(lo[1]))


def track_frame(image: GrayImage, prev: SegmentationResult,
                cfg: PipelineConfig, frame_index: int) -> SegmentationResult:
    """Swarm-only refinement seeded by the previous frame's segmentation."""
    timings = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    sigma = cfg.schedule.sigmas[-1]
    em = detect_edges(image, sigma=sigma, percentile=cfg.edge_percentile)
    try:
        field = build_epf(em)
    except NoEdges:
        raise NoCandidates("no edges detected in the frame",
                           diagnostics={"edge_count": 0})
    timings["fields"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tpl, pose = template_from_result(prev)
    swarm_cfg = dataclasses.replace(
        cfg.swarm, seed=_swarm_seed(cfg.swarm.seed, 1000 + frame_index))
    cps, cost, trace = optimize(tpl, pose, field, swarm_cfg)
    contour, _ = warp_template(tpl, cps, pose)
    seed_cps = transform_points(tpl.control_points, pose, tpl.center)
    timings["stage3"] = time.perf_counter() - t0
    timings["stage1"] = 0.0
    timings["stage2"] = 0.0
    timings["total"] = time.perf_counter() - t_start

    return SegmentationResult(
        pose=pose,
        control_points=cps,
        seed_control_points=seed_cps,
        contour=contour,
        closed=prev.closed,
        stage2_energy=trace[0],
        final_cost=cost,
        candidate_counts={"roi_windows": 0, "stage2": 0, "pso_runs": 1},
        timings_ms={k: v * 1000.0 for k, v in timings.items()},
        trace=trace,
        candidates=[],
        level_candidates=[],
        frame_index=frame_index,
    )


def run_pipeline(cfg: PipelineConfig) -> SegmentationResult:
    """Single-image mode: load inputs, segment, write artifacts."""
    cfg.validate()
    image = load_image(cfg.image)
    template = load_template(cfg.template)
    result = segment(image, template, cfg)
    if cfg.out_dir:
        write_artifacts(image, result, cfg)
    return result


def run_track(cfg: PipelineConfig) -> list:
    """Track mode: full pipeline on frame 0, seeded refinement afterwards.

    A seeded frame whose final cost exceeds the relocalization threshold is
    re-run through the full pipeline; a frame that still fails is recorded
    as a FrameFailure and the next frame falls back to the last good result
    (relocalizing). Returns one entry per frame.
    """
    cfg.validate()
    template = load_template(cfg.template)
    results = []
    prev = None
    for k, path in enumerate(cfg.images):
        image = load_image(path)
        entry = None
        if prev is not None:
            try:
                seeded = track_frame(image, prev, cfg, k)
            except NoCandidates:
                seeded = None
            if (seeded is not None
                    and seeded.final_cost <= cfg.relocalize_threshold):
                entry = seeded
        if entry is None:
            try:
                entry = segment(image, template, cfg, frame_index=k)
                entry.relocalized = prev is not None
            except NoCandidates as exc:
                entry = FrameFailure(frame_index=k, error=str(exc),
                                     diagnostics=exc.diagnostics)
        results.append(entry)
        if isinstance(entry, SegmentationResult):
            prev = entry
    if cfg.out_dir:
        write_track_artifacts(results, cfg)
    return results


def render_overlay(base: GrayImage, result: SegmentationResult,
                   path=None) -> GrayImage:
    """Burn the final contour and CP markers into a copy of the base image.

    Out-of-image geometry is clipped. When ``path`` is given the overlay is
    also written there.
    """
    px = base.pixels.copy()
    h, w = px.shape
    contour = result.contour
    if contour.shape[0] >= 2:
        mask = rasterize_contour(contour, w, h, result.closed)
        px[mask > 0] = 1.0
    for x, y in result.control_points:
        xi = int(math.floor(x + 0.5))
        yi = int(math.floor(y + 0.5))
        for ox, oy in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1),
                       (-2, 0), (2, 0), (0, -2), (0, 2)):
            xx, yy = xi + ox, yi + oy
            if 0 <= xx < w and 0 <= yy < h:
                px[yy, xx] = 1.0
    out = GrayImage(px)
    if path is not None:
        save_image(out, path)
    return out


def _fmt(v: float, digits: int = 6) -> str:
    return f"{v:.{digits}f}"


def report_lines(result: SegmentationResult, cfg: PipelineConfig,
                 label: str = None) -> list:
    prefix = f"{label}." if label else ""
    lines = [
        f"{prefix}status = ok",
        f"{prefix}relocalized = {str(result.relocalized).lower()}",
        f"{prefix}stage2_best_energy = {_fmt(result.stage2_energy, 9)}",
        f"{prefix}final_cost = {_fmt(result.final_cost, 9)}",
        f"{prefix}pose.scale = {_fmt(result.pose.scale)}",
        f"{prefix}pose.rotation = {_fmt(result.pose.rotation)}",
        f"{prefix}pose.dx = {_fmt(result.pose.dx)}",
        f"{prefix}pose.dy = {_fmt(result.pose.dy)}",
        f"{prefix}roi_windows = {result.candidate_counts['roi_windows']}",
        f"{prefix}stage2_candidates = {result.candidate_counts['stage2']}",
        f"{prefix}pso_runs = {result.candidate_counts['pso_runs']}",
        f"{prefix}contour_points = {result.contour.shape[0]}",
        f"{prefix}control_points = {result.control_points.shape[0]}",
    ]
    for i, (x, y) in enumerate(result.control_points):
        lines.append(f"{prefix}cp{i}.x = {_fmt(float(x))}")
        lines.append(f"{prefix}cp{i}.y = {_fmt(float(y))}")
    return lines


def candidate_rows(result: SegmentationResult, all_levels: bool) -> list:
    rows = ["level,scale,rotation,dx,dy,energy"]
    if all_levels and result.level_candidates:
        cands = [c for _, level_cands in result.level_candidates
                 for c in level_cands]
    else:
        cands = result.candidates
    for c in cands:
        rows.append(",".join([
            str(c.level), _fmt(c.pose.scale), _fmt(c.pose.rotation),
            _fmt(c.pose.dx), _fmt(c.pose.dy), _fmt(c.energy, 9)]))
    return rows


def write_artifacts(image: GrayImage, result: SegmentationResult,
                    cfg: PipelineConfig):
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output dir {out}: {exc}") from exc
    render_overlay(image, result, out / "overlay.png")
    header = [
        f"image = {Path(cfg.image).name if cfg.image else ''}",
        f"template = {Path(cfg.template).name if cfg.template else ''}",
        f"mode = {cfg.mode}",
        f"image_width = {image.width}",
        f"image_height = {image.height}",
    ]
    _write_text(out / "report.txt", header + report_lines(result, cfg))
    _write_text(out / "candidates.csv",
                candidate_rows(result, cfg.dump_candidates))
    _write_text(out / "timings.txt",
                [f"{k} = {v:.1f} ms" for k, v in result.timings_ms.items()])
    if cfg.dump_epf:
        _dump_epf(image, cfg, out / "epf.pgm")
    if cfg.dump_trace:
        _write_text(out / "trace.csv", ["iteration,cost"] + [
            f"{i},{_fmt(c, 9)}" for i, c in enumerate(result.trace)])
    if cfg.dump_warp:
        _dump_warp(result, cfg, out / "warp.csv")


def write_track_artifacts(results: list, cfg: PipelineConfig):
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output dir {out}: {exc}") from exc
    lines = ["mode = track", f"frames = {len(results)}"]
    for k, entry in enumerate(results):
        if isinstance(entry, FrameFailure):
            lines.append(f"frame{k}.status = failed")
            lines.append(f"frame{k}.error = {entry.error}")
            continue
        lines.extend(report_lines(entry, cfg, label=f"frame{k}"))
        image = load_image(cfg.images[k])
        render_overlay(image, entry, out / f"overlay_{k:03d}.png")
    _write_text(out / "report.txt", lines)
    first = next((r for r in results if isinstance(r, SegmentationResult)
                  and r.candidates), None)
    if first is not None:
        _write_text(out / "candidates.csv",
                    candidate_rows(first, cfg.dump_candidates))
    tl = []
    for k, entry in enumerate(results):
        if isinstance(entry, SegmentationResult):
            for key, v in entry.timings_ms.items():
                tl.append(f"frame{k}.{key} = {v:.1f} ms")
    _write_text(out / "timings.txt", tl)


def _write_text(path, lines):
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _dump_epf(image: GrayImage, cfg: PipelineConfig, path):
    sigma = cfg.schedule.sigmas[-1]
    em = detect_edges(image, sigma=sigma, percentile=cfg.edge_percentile)
    field = build_epf(em)
    # phi in [-1, 0] mapped to [0, 1] so edges render black
    save_image(GrayImage(field.phi + 1.0), path)


def _dump_warp(result: SegmentationResult, cfg: PipelineConfig, path):
    """Sample the final warp (posed seed CPs -> final CPs) on a coarse grid.

    The display fit uses affine local models: quadratic ones interpolate the
    control points exactly but are unbounded away from them when the points
    sit near a conic, which makes a dense field dump unreadable.
    """
    contour = result.contour
    lo = contour.min(axis=0)
    hi = contour.max(axis=0)
    xs = np.linspace(lo[0], hi[0], 9)
    ys = np.linspace(lo[1], hi[1], 9)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    model = fit_lwm(Correspondences(result.seed_control_points,
                                    result.control_points), degree=1)
    mapped, _ = apply_warp(model, grid)
    rows = ["source_x,source_y,target_x,target_y"]
    for (sx, sy), (tx, ty) in zip(grid, mapped):
        rows.append(f"{_fmt(sx)},{_fmt(sy)},{_fmt(tx)},{_fmt(ty)}")
    _write_text(path, rows)
