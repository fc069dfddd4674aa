"""Synthetic fixtures with exact ground truth.

Each fixture renders a filled silhouette (interior 0.8, background 0.2) of a
known shape at a known pose, optionally with a sinusoidal radial boundary
deformation and additive Gaussian noise, and returns the undeformed prototype
template plus the ground-truth pose, control-point targets, and a dense
boundary sampler for error metrics.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from deftemp.edges import EdgeMap
from deftemp.errors import InvalidSpec
from deftemp.raster import (
    GrayImage,
    Pose,
    Template,
    invert_points,
    make_template,
    transform_points,
    transform_tangents,
)

SHAPES = ("ellipse", "rectangle", "cshape")

MIN_SIZE = 64


@dataclass(frozen=True)
class FixtureSpec:
    shape: str
    size: tuple = (256, 256)        # (width, height)
    pose: Pose = None               # None centers the shape, s=1, theta=0
    deform_amplitude: float = 0.0   # radial amplitude, template-local px
    deform_cycles: int = 3
    deform_phase: float = 0.0
    noise: float = 0.0              # additive Gaussian sigma in intensity units
    seed: int = 0
    contour_points: int = 48
    control_points: int = 8


@dataclass(eq=False)
class Fixture:
    image: GrayImage
    template: Template
    pose: Pose                 # ground truth
    cp_targets: np.ndarray     # (K, 2) deformed control points, base frame
    spec: FixtureSpec
    symmetry: float            # rotation symmetry period of the shape
    _shape_center: tuple = (0.0, 0.0)   # shape center in template-local frame

    def boundary_points(self, n: int = 720) -> np.ndarray:
        """Dense samples of the deformed ground-truth boundary, base frame."""
        pts = _boundary_samples(self.spec, n)
        return transform_points(pts + self._shape_center, self.pose,
                                self.template.center)


def _radius_fn(spec: FixtureSpec):
    """Boundary radius r(phi) about the shape center, per shape kind."""
    s = min(spec.size)
    if spec.shape == "ellipse":
        a, b = 0.22 * s, 0.13 * s
        def r(phi):
            return a * b / np.sqrt((b * np.cos(phi)) ** 2
                                   + (a * np.sin(phi)) ** 2)
        return r, min(a, b)
    if spec.shape == "rectangle":
        hw, hh = 0.155 * s, 0.10 * s
        def r(phi):
            c = np.abs(np.cos(phi))
            sn = np.abs(np.sin(phi))
            rx = np.where(c > 1e-12, hw / np.maximum(c, 1e-12), np.inf)
            ry = np.where(sn > 1e-12, hh / np.maximum(sn, 1e-12), np.inf)
            return np.minimum(rx, ry)
        return r, min(hw, hh)
    raise InvalidSpec(f"shape {spec.shape!r} has no radius function")


def _cshape_params(spec: FixtureSpec):
    s = min(spec.size)
    r_out = 0.18 * s
    r_in = 0.105 * s
    gap_half = math.radians(35.0)
    return r_out, r_in, gap_half


def _deform(spec: FixtureSpec, phi):
    return spec.deform_amplitude * np.sin(spec.deform_cycles * phi
                                          + spec.deform_phase)


def _contour_angles(spec: FixtureSpec):
    """Per-point polar angles for the prototype contour (shape frame)."""
    m = spec.contour_points
    if spec.shape == "ellipse":
        return np.linspace(0.0, 2.0 * math.pi, m, endpoint=False)
    if spec.shape == "rectangle":
        # equal point count per side, converted to polar angles
        s = min(spec.size)
        hw, hh = 0.155 * s, 0.10 * s
        corners = np.array([(hw, hh), (-hw, hh), (-hw, -hh), (hw, -hh)])
        t = np.linspace(0.0, 1.0, m, endpoint=False)
        pts = []
        for ti in t:
            d = ti * 4.0
            side = int(d)
            f = d - side
            p = corners[side] + f * (corners[(side + 1) % 4] - corners[side])
            pts.append(p)
        pts = np.array(pts)
        return np.arctan2(pts[:, 1], pts[:, 0])
    raise InvalidSpec(f"shape {spec.shape!r} has no angle sampling")


def _cshape_contour(spec: FixtureSpec) -> np.ndarray:
    r_out, r_in, gap_half = _cshape_params(spec)
    m = spec.contour_points
    arc = 2.0 * math.pi - 2.0 * gap_half
    n_out = max(4, int(round(m * r_out / (r_out + r_in))))
    n_in = max(4, m - n_out)
    phi_out = np.linspace(gap_half, 2.0 * math.pi - gap_half, n_out)
    phi_in = phi_out[::-1][:n_in] if n_in == n_out else \
        np.linspace(2.0 * math.pi - gap_half, gap_half, n_in)
    outer = np.column_stack([r_out * np.cos(phi_out), r_out * np.sin(phi_out)])
    inner = np.column_stack([r_in * np.cos(phi_in), r_in * np.sin(phi_in)])
    return np.vstack([outer, inner])


def _prototype_points(spec: FixtureSpec) -> np.ndarray:
    """Undeformed contour points in the shape frame (centered at 0)."""
    if spec.shape == "cshape":
        return _cshape_contour(spec)
    r, _ = _radius_fn(spec)
    phi = _contour_angles(spec)
    rad = r(phi)
    return np.column_stack([rad * np.cos(phi), rad * np.sin(phi)])


def _boundary_samples(spec: FixtureSpec, n: int) -> np.ndarray:
    """Deformed boundary samples in the shape frame."""
    base = replace(spec, contour_points=max(n, spec.contour_points))
    pts = _prototype_points(base)
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    rad = np.hypot(pts[:, 0], pts[:, 1]) + _deform(spec, phi)
    return np.column_stack([rad * np.cos(phi), rad * np.sin(phi)])


def _inside(spec: FixtureSpec, rho: np.ndarray, phi: np.ndarray) -> np.ndarray:
    rho_un = rho - _deform(spec, phi)
    if spec.shape == "cshape":
        r_out, r_in, gap_half = _cshape_params(spec)
        wrapped = np.abs(np.mod(phi + math.pi, 2.0 * math.pi) - math.pi)
        return (rho_un >= r_in) & (rho_un <= r_out) & (wrapped >= gap_half)
    r, _ = _radius_fn(spec)
    return rho_un <= r(phi)


def centered_pose(template: Template, width: int, height: int,
                  scale: float = 1.0, rotation: float = 0.0) -> Pose:
    """Pose placing the template bbox center at the image center."""
    cx, cy = template.center
    return Pose(scale=scale, rotation=rotation,
                dx=(width - 1) / 2.0 - cx, dy=(height - 1) / 2.0 - cy)


def make_fixture(spec: FixtureSpec) -> Fixture:
    """Render a fixture and return it with complete ground truth."""
    if spec.shape not in SHAPES:
        raise InvalidSpec(f"shape must be one of {SHAPES}, got {spec.shape!r}")
    w, h = (spec.size, spec.size) if np.isscalar(spec.size) else spec.size
    if w < MIN_SIZE or h < MIN_SIZE:
        raise InvalidSpec(f"size {w}x{h} below minimum {MIN_SIZE}")
    if spec.noise < 0.0:
        raise InvalidSpec("noise level must be >= 0")
    if spec.deform_cycles < 1:
        raise InvalidSpec("deform_cycles must be >= 1")
    if spec.shape == "cshape":
        r_out, r_in, _ = _cshape_params(spec)
        limit = (r_out - r_in) / 2.0
    else:
        _, limit = _radius_fn(spec)
        limit = 0.4 * limit
    if not 0.0 <= spec.deform_amplitude <= limit:
        raise InvalidSpec(
            f"deform amplitude {spec.deform_amplitude} outside [0, {limit:.1f}]")

    shape_pts = _prototype_points(spec)
    lo = shape_pts.min(axis=0)
    template = make_template(shape_pts - lo,
                             control_points=_control_points(spec, shape_pts) - lo,
                             closed=True)
    shape_center = tuple(-lo)

    pose = spec.pose if spec.pose is not None else centered_pose(template, w, h)

    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    pix = np.column_stack([xs.ravel(), ys.ravel()])
    local = invert_points(pix, pose, template.center)
    v = local - np.asarray(shape_center)
    rho = np.hypot(v[:, 0], v[:, 1])
    phi = np.arctan2(v[:, 1], v[:, 0])
    img = np.where(_inside(spec, rho, phi), 0.8, 0.2).reshape(h, w)
    if spec.noise > 0.0:
        rng = np.random.default_rng(spec.seed)
        img = img + spec.noise * rng.standard_normal(img.shape)
    img = np.clip(img, 0.0, 1.0)

    cps = template.control_points
    cp_v = cps - np.asarray(shape_center)
    cp_phi = np.arctan2(cp_v[:, 1], cp_v[:, 0])
    cp_rad = np.hypot(cp_v[:, 0], cp_v[:, 1]) + _deform(spec, cp_phi)
    cp_local = np.column_stack([cp_rad * np.cos(cp_phi),
                                cp_rad * np.sin(cp_phi)]) + shape_center
    cp_targets = transform_points(cp_local, pose, template.center)

    symmetry = 2.0 * math.pi if spec.shape == "cshape" else math.pi
    return Fixture(image=GrayImage(img), template=template, pose=pose,
                   cp_targets=cp_targets, spec=spec, symmetry=symmetry,
                   _shape_center=shape_center)


def _control_points(spec: FixtureSpec, shape_pts: np.ndarray) -> np.ndarray:
    k = spec.control_points
    if k < 3:
        raise InvalidSpec("fixtures need >= 3 control points")
    m = shape_pts.shape[0]
    idx = (np.arange(k) * m) // k
    return shape_pts[idx]


def rasterized_scene(template: Template, pose: Pose, width: int,
                     height: int) -> EdgeMap:
    """Edge map whose edges are exactly the rounded posed contour points.

    Each edge pixel carries the posed tangent of the contour point that
    produced it (first writer wins). With an integer-coordinate template and
    an integer translation pose this realizes a perfect zero-energy overlay.
    """
    pts = transform_points(template.contour, pose, template.center)
    tans = transform_tangents(template.tangents, pose)
    is_edge = np.zeros((height, width), dtype=bool)
    tangent = np.zeros((height, width), dtype=np.float64)
    ix = np.floor(pts[:, 0] + 0.5).astype(np.int64)
    iy = np.floor(pts[:, 1] + 0.5).astype(np.int64)
    for x, y, t in zip(ix, iy, tans):
        if 0 <= x < width and 0 <= y < height and not is_edge[y, x]:
            is_edge[y, x] = True
            tangent[y, x] = t
    return EdgeMap(is_edge, tangent, sigma=0.5)


def digital_template(template: Template) -> Template:
    """Snap a template's contour to unique integer coordinates.

    Consecutive duplicates after rounding are dropped and tangents are
    recomputed from the snapped polyline, so the result overlays its own
    rasterization exactly.
    """
    pts = np.floor(template.contour + 0.5)
    keep = np.ones(pts.shape[0], dtype=bool)
    keep[1:] = (np.abs(np.diff(pts, axis=0)).sum(axis=1)) > 0
    if keep.sum() >= 2 and (pts[0] == pts[keep][-1]).all():
        idx = np.nonzero(keep)[0]
        keep[idx[-1]] = False
    pts = pts[keep]
    cps = np.floor(template.control_points + 0.5)
    return make_template(pts, control_points=cps, labels=template.labels,
                         closed=template.closed)
