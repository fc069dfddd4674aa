"""Deformable template localization and segmentation for grayscale images.

Three stages: convolution-based ROI discovery, multi-resolution pose search
over a directional edge potential field, and particle-swarm refinement of
control points driving a local weighted mean warp.
"""

from deftemp.edges import EdgeMap, detect_edges
from deftemp.errors import (
    DeftempError,
    InvalidConfig,
    InvalidSpec,
    IoError,
    LengthMismatch,
    NoCandidates,
    NoEdges,
    NoSearchSpace,
    TooFewPoints,
)
from deftemp.fixtures import FixtureSpec, centered_pose, make_fixture
from deftemp.lwm import (
    Correspondences,
    WarpModel,
    WarpOperator,
    apply_warp,
    fit_lwm,
    warp_template,
    weight_fn,
)
from deftemp.matching import (
    PoseGrid,
    PyramidSchedule,
    contour_energy,
    default_rotations,
    energy,
    run_stage2,
    search_level,
)
from deftemp.pipeline import (
    FrameFailure,
    PipelineConfig,
    SegmentationResult,
    render_overlay,
    run_pipeline,
    run_track,
    segment,
)
from deftemp.potential import PotentialField, build_epf
from deftemp.raster import (
    GrayImage,
    MatchCandidate,
    Pose,
    Template,
    load_image,
    load_template,
    make_template,
    polyline_tangents,
    save_image,
    save_template,
    transform_points,
)
from deftemp.roi import RoiConfig, RoiSet, find_rois
from deftemp.swarm import SwarmConfig, cost, minimize, optimize, penalty

__version__ = "0.1.0"

__all__ = [
    "EdgeMap", "detect_edges",
    "DeftempError", "InvalidConfig", "InvalidSpec", "IoError",
    "LengthMismatch", "NoCandidates", "NoEdges", "NoSearchSpace",
    "TooFewPoints",
    "FixtureSpec", "centered_pose", "make_fixture",
    "Correspondences", "WarpModel", "WarpOperator", "apply_warp", "fit_lwm",
    "warp_template", "weight_fn",
    "PoseGrid", "PyramidSchedule", "contour_energy", "default_rotations",
    "energy", "run_stage2", "search_level",
    "FrameFailure", "PipelineConfig", "SegmentationResult", "render_overlay",
    "run_pipeline", "run_track", "segment",
    "PotentialField", "build_epf",
    "GrayImage", "MatchCandidate", "Pose", "Template", "load_image",
    "load_template", "make_template", "polyline_tangents", "save_image",
    "save_template", "transform_points",
    "RoiConfig", "RoiSet", "find_rois",
    "SwarmConfig", "cost", "minimize", "optimize", "penalty",
    "__version__",
]
