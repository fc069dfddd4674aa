"""Config file parsing and assembly into a PipelineConfig.

Files are line oriented ``key = value`` with ``#`` comments. Keys are
namespaced by stage (``stage1.percentile``, ``stage2.sigmas``,
``pso.iterations``, ``pipeline.skip_roi``). Precedence is built-in defaults,
then file values, then explicit CLI overrides.
"""

import math

from deftemp.errors import InvalidConfig, IoError
from deftemp.matching import PoseGrid, PyramidSchedule, default_rotations
from deftemp.pipeline import PipelineConfig
from deftemp.raster import Pose
from deftemp.roi import RoiConfig
from deftemp.swarm import SwarmConfig


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise InvalidConfig(f"expected a boolean, got {text!r}")


def _parse_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError as exc:
        raise InvalidConfig(f"expected a number, got {text!r}") from exc
    if not math.isfinite(v):
        raise InvalidConfig(f"expected a finite number, got {text!r}")
    return v


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise InvalidConfig(f"expected an integer, got {text!r}") from exc


def _parse_floats(text: str) -> tuple:
    items = [tok.strip() for tok in text.split(",")]
    items = [tok for tok in items if tok]
    if not items:
        raise InvalidConfig(f"expected a comma list of numbers, got {text!r}")
    return tuple(_parse_float(tok) for tok in items)


def _parse_ints(text: str) -> tuple:
    items = [tok.strip() for tok in text.split(",")]
    items = [tok for tok in items if tok]
    if not items:
        raise InvalidConfig(f"expected a comma list of integers, got {text!r}")
    return tuple(_parse_int(tok) for tok in items)


def _parse_opt_float(text: str):
    if text.strip().lower() in ("none", ""):
        return None
    return _parse_float(text)


def _parse_str(text: str) -> str:
    return text.strip()


SCHEMA = {
    "stage1.percentile": _parse_float,
    "stage1.max_windows": _parse_int,
    "stage1.min_response_ratio": _parse_float,
    "stage2.rotation_step_deg": _parse_float,
    "stage2.scales": _parse_floats,
    "stage2.sigmas": _parse_floats,
    "stage2.energy_thresholds": _parse_floats,
    "stage2.keep_top": _parse_ints,
    "stage2.translation_strides": _parse_ints,
    "stage2.edge_percentile": _parse_float,
    "pso.particles": _parse_int,
    "pso.iterations": _parse_int,
    "pso.inertia": _parse_float,
    "pso.cognitive": _parse_float,
    "pso.social": _parse_float,
    "pso.radius": _parse_float,
    "pso.alpha": _parse_float,
    "pso.seed": _parse_int,
    "pso.stop_energy": _parse_opt_float,
    "pso.penalty_mode": _parse_str,
    "pipeline.skip_roi": _parse_bool,
    "pipeline.relocalize_threshold": _parse_float,
    "pipeline.dump_epf": _parse_bool,
    "pipeline.dump_candidates": _parse_bool,
    "pipeline.dump_trace": _parse_bool,
    "pipeline.dump_warp": _parse_bool,
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines into a typed value dict.

    Raises InvalidConfig on unknown keys, malformed lines or bad values.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"line {lineno}: expected key = value, "
                                f"got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in SCHEMA:
            raise InvalidConfig(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = SCHEMA[key](val)
        except InvalidConfig as exc:
            raise InvalidConfig(f"line {lineno}: {key}: {exc}") from exc
    return values


def load_config(path) -> dict:
    try:
        with open(str(path), "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text)


def build_pipeline_config(file_values: dict = None, overrides: dict = None,
                          **fields) -> PipelineConfig:
    """Assemble a PipelineConfig from layered key/value maps.

    ``fields`` go straight onto the PipelineConfig (paths, mode, dump flags
    set by CLI positionals); ``file_values`` and ``overrides`` use the
    namespaced schema keys, overrides winning.
    """
    merged = {}
    merged.update(file_values or {})
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in SCHEMA:
            raise InvalidConfig(f"unknown config key {key!r}")
        merged[key] = val

    def take(key, default):
        return merged.pop(key, default)

    roi_defaults = RoiConfig()
    roi = RoiConfig(
        percentile=take("stage1.percentile", roi_defaults.percentile),
        max_windows=take("stage1.max_windows", roi_defaults.max_windows),
        min_response_ratio=take("stage1.min_response_ratio",
                                roi_defaults.min_response_ratio),
    )

    grid_defaults = PoseGrid()
    step = take("stage2.rotation_step_deg", None)
    rotations = (default_rotations(step) if step is not None
                 else grid_defaults.rotations)
    grid = PoseGrid(
        rotations=rotations,
        scales=take("stage2.scales", grid_defaults.scales),
        translation_strides=take("stage2.translation_strides",
                                 grid_defaults.translation_strides),
    )

    sched_defaults = PyramidSchedule()
    schedule = PyramidSchedule(
        sigmas=take("stage2.sigmas", sched_defaults.sigmas),
        energy_thresholds=take("stage2.energy_thresholds",
                               sched_defaults.energy_thresholds),
        keep_top=take("stage2.keep_top", sched_defaults.keep_top),
    )

    swarm_defaults = SwarmConfig()
    swarm = SwarmConfig(
        particles=take("pso.particles", swarm_defaults.particles),
        iterations=take("pso.iterations", swarm_defaults.iterations),
        inertia=take("pso.inertia", swarm_defaults.inertia),
        cognitive=take("pso.cognitive", swarm_defaults.cognitive),
        social=take("pso.social", swarm_defaults.social),
        radius=take("pso.radius", swarm_defaults.radius),
        alpha=take("pso.alpha", swarm_defaults.alpha),
        seed=take("pso.seed", swarm_defaults.seed),
        stop_energy=take("pso.stop_energy", swarm_defaults.stop_energy),
        penalty_mode=take("pso.penalty_mode", swarm_defaults.penalty_mode),
    )

    cfg = PipelineConfig(roi=roi, grid=grid, schedule=schedule, swarm=swarm,
                         **fields)
    cfg.edge_percentile = take("stage2.edge_percentile", cfg.edge_percentile)
    cfg.skip_roi = take("pipeline.skip_roi", cfg.skip_roi)
    cfg.relocalize_threshold = take("pipeline.relocalize_threshold",
                                    cfg.relocalize_threshold)
    cfg.dump_epf = take("pipeline.dump_epf", cfg.dump_epf)
    cfg.dump_candidates = take("pipeline.dump_candidates", cfg.dump_candidates)
    cfg.dump_trace = take("pipeline.dump_trace", cfg.dump_trace)
    cfg.dump_warp = take("pipeline.dump_warp", cfg.dump_warp)
    if merged:
        raise InvalidConfig(f"unhandled config keys: {sorted(merged)}")
    return cfg


POSE_KEYS = {"s": "scale", "scale": "scale", "theta": "rotation",
             "rotation": "rotation", "dx": "dx", "dy": "dy"}


def parse_pose(text: str) -> Pose:
    """Parse ``s=1,theta=0.52,dx=40,dy=20`` into a Pose.

    All fields are optional (identity defaults). Displacement is the
    absolute base-frame offset applied after rotation and scaling about the
    template bbox center.
    """
    fields = {"scale": 1.0, "rotation": 0.0, "dx": 0.0, "dy": 0.0}
    text = text.strip()
    if text:
        for part in text.split(","):
            if "=" not in part:
                raise InvalidConfig(f"pose needs key=value parts, got {part!r}")
            key, _, val = part.partition("=")
            key = key.strip().lower()
            if key not in POSE_KEYS:
                raise InvalidConfig(f"unknown pose field {key!r}")
            fields[POSE_KEYS[key]] = _parse_float(val.strip())
    return Pose(scale=fields["scale"], rotation=fields["rotation"],
                dx=fields["dx"], dy=fields["dy"])
