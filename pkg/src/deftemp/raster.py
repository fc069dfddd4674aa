"""Image and template data model, file I/O, and coordinate conventions.

Conventions used everywhere in the package:

* x = column (rightward), y = row (downward); the origin is the center of
  the top-left pixel.
* Angles are measured counterclockwise from +x in (x, y) coordinates, so the
  rotation matrix is the usual [[cos, -sin], [sin, cos]].
* Contour/edge tangents are undirected and stored in [0, pi).
* Template contours live in a local frame whose origin is the top-left
  corner of the tight contour bounding box; poses rotate and scale about the
  bounding-box center.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from deftemp.errors import (
    ControlPointOutsideBbox,
    CorruptFile,
    ParseError,
    TooFewContourPoints,
    TooFewControlPoints,
    UnsupportedFormat,
    ZeroDimension,
)

MIN_CONTOUR_POINTS = 8
MIN_CONTROL_POINTS = 3

TWO_PI = 2.0 * math.pi


# -- images -------------------------------------------------------------------

@dataclass(eq=False)
class GrayImage:
    """2D scalar raster with intensities in [0, 1], shape (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise ZeroDimension("image data must be 2D")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ZeroDimension("image dimensions must be >= 1")
        if not np.isfinite(px).all():
            raise CorruptFile("image contains non-finite intensities")
        if px.min() < 0.0 or px.max() > 1.0:
            raise CorruptFile("image intensities outside [0, 1]")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


_PGM_MAGIC = re.compile(rb"^P[25]\s")


def _pgm_tokens(data: bytes):
    """Yield header tokens, skipping '#' comments; returns (tokens, offset).

    The offset points just past the whitespace byte that terminates the
    maxval token, i.e. at the start of a P5 payload.
    """
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < 4:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        start = i
        while i < n and not data[i:i + 1].isspace() and data[i:i + 1] != b"#":
            i += 1
        if i == start:
            raise CorruptFile("truncated PGM header")
        tokens.append(data[start:i])
        if len(tokens) == 4:
            if i >= n or not data[i:i + 1].isspace():
                raise CorruptFile("PGM header not terminated")
            i += 1
    return tokens, i


def _load_pgm(data: bytes) -> GrayImage:
    tokens, offset = _pgm_tokens(data)
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise CorruptFile(f"bad PGM header: {exc}") from None
    if width < 1 or height < 1:
        raise ZeroDimension(f"PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise UnsupportedFormat(f"PGM maxval {maxval} not 8-bit")
    count = width * height
    if magic == b"P5":
        payload = data[offset:offset + count]
        if len(payload) < count:
            raise CorruptFile("truncated PGM payload")
        values = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        try:
            values = np.array(data[offset:].split()[:count], dtype=np.float64)
        except ValueError as exc:
            raise CorruptFile(f"bad PGM sample: {exc}") from None
        if values.size < count:
            raise CorruptFile("truncated PGM payload")
    if values.max(initial=0.0) > maxval:
        raise CorruptFile("PGM sample exceeds maxval")
    return GrayImage(values.reshape(height, width) / float(maxval))


def _load_png(path: str) -> GrayImage:
    try:
        with Image.open(path) as im:
            mode = im.mode
            if mode == "L":
                arr = np.asarray(im, dtype=np.float64) / 255.0
            elif mode == "1":
                arr = np.asarray(im, dtype=np.float64)
            elif mode in ("I", "I;16"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            else:
                raise UnsupportedFormat(f"PNG mode {mode!r} is not grayscale")
    except UnidentifiedImageError as exc:
        raise CorruptFile(str(exc)) from None
    return GrayImage(arr)


def load_image(path) -> GrayImage:
    """Load an 8-bit grayscale PGM (P2/P5) or grayscale PNG, scaled to [0,1]."""
    path = str(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(8)
            fh.seek(0)
            if _PGM_MAGIC.match(head):
                return _load_pgm(fh.read())
    except OSError as exc:
        raise CorruptFile(f"cannot read {path}: {exc}") from None
    if head.startswith(b"\x89PNG"):
        return _load_png(path)
    raise UnsupportedFormat(f"{path}: not a PGM (P2/P5) or PNG file")


def save_image(img: GrayImage, path) -> None:
    """Write as binary PGM (.pgm) or grayscale PNG (.png), quantized to 8 bits."""
    path = str(path)
    q = np.clip(np.rint(img.pixels * 255.0), 0, 255).astype(np.uint8)
    if path.lower().endswith(".png"):
        Image.fromarray(q, mode="L").save(path)
        return
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(q.tobytes())


# -- poses ---------------------------------------------------------------------

@dataclass(frozen=True)
class Pose:
    """Similarity placement: scale, rotation (radians, [0, 2pi)), displacement."""

    scale: float = 1.0
    rotation: float = 0.0
    dx: float = 0.0
    dy: float = 0.0

    def __post_init__(self):
        vals = (self.scale, self.rotation, self.dx, self.dy)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite pose {vals}")
        if self.scale <= 0.0:
            raise ValueError(f"pose scale {self.scale} must be > 0")
        object.__setattr__(self, "rotation", self.rotation % TWO_PI)

    @property
    def displacement(self):
        return (self.dx, self.dy)


def transform_points(points, pose: Pose, center) -> np.ndarray:
    """Map template-local points to the base frame.

    Rotation and scaling happen about `center` (the template bbox center);
    the displacement is then added on top.
    """
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    c = np.asarray(center, dtype=np.float64)
    q = (p - c) * pose.scale
    cos_t = math.cos(pose.rotation)
    sin_t = math.sin(pose.rotation)
    out = np.empty_like(q)
    out[:, 0] = cos_t * q[:, 0] - sin_t * q[:, 1] + c[0] + pose.dx
    out[:, 1] = sin_t * q[:, 0] + cos_t * q[:, 1] + c[1] + pose.dy
    return out


def transform_point(point, pose: Pose, center=(0.0, 0.0)):
    """Single-point variant of :func:`transform_points`."""
    x, y = transform_points([point], pose, center)[0]
    return (float(x), float(y))


def invert_points(points, pose: Pose, center) -> np.ndarray:
    """Analytic inverse of :func:`transform_points` (base frame -> local)."""
    p = np.atleast_2d(np.asarray(points, dtype=np.float64))
    c = np.asarray(center, dtype=np.float64)
    q = p - c - np.array([pose.dx, pose.dy])
    cos_t = math.cos(pose.rotation)
    sin_t = math.sin(pose.rotation)
    out = np.empty_like(q)
    out[:, 0] = (cos_t * q[:, 0] + sin_t * q[:, 1]) / pose.scale + c[0]
    out[:, 1] = (-sin_t * q[:, 0] + cos_t * q[:, 1]) / pose.scale + c[1]
    return out


def transform_tangents(tangents, pose: Pose) -> np.ndarray:
    """Undirected tangents transform by adding the pose rotation, mod pi."""
    return np.mod(np.asarray(tangents, dtype=np.float64) + pose.rotation, math.pi)


# -- templates -----------------------------------------------------------------

@dataclass(eq=False)
class Template:
    """Prototype contour with undirected tangents and named control points."""

    contour: np.ndarray          # (M, 2) local-frame coordinates
    tangents: np.ndarray         # (M,) radians in [0, pi)
    control_points: np.ndarray   # (K, 2) local-frame coordinates
    labels: tuple = ()
    bbox: tuple = (0.0, 0.0)     # (width, height) of the tight contour bounds
    closed: bool = True

    @property
    def center(self):
        return (self.bbox[0] / 2.0, self.bbox[1] / 2.0)

    @property
    def num_points(self) -> int:
        return self.contour.shape[0]


def polyline_tangents(points: np.ndarray, closed: bool) -> np.ndarray:
    """Undirected tangents of a polyline via central differences.

    Closed contours wrap around; open ones use one-sided differences at the
    ends. Output in [0, pi).
    """
    p = np.asarray(points, dtype=np.float64)
    n = p.shape[0]
    if closed:
        nxt = np.roll(p, -1, axis=0)
        prv = np.roll(p, 1, axis=0)
    else:
        nxt = np.vstack([p[1:], p[-1]])
        prv = np.vstack([p[0], p[:-1]])
    d = nxt - prv
    return np.mod(np.arctan2(d[:, 1], d[:, 0]), math.pi)


def _is_closed(contour: np.ndarray) -> bool:
    seg = np.linalg.norm(np.diff(contour, axis=0), axis=1)
    if seg.size == 0:
        return True
    gap = np.linalg.norm(contour[0] - contour[-1])
    return bool(gap <= 2.0 * np.median(seg))


def make_template(contour, tangents=None, control_points=(), labels=None,
                  closed=None) -> Template:
    """Validate and normalize a template.

    The contour is translated so its tight bounding box starts at (0, 0);
    control points move with it. Tangents default to polyline tangents and
    are normalized to [0, pi).
    """
    c = np.asarray(contour, dtype=np.float64).reshape(-1, 2).copy()
    if c.shape[0] < MIN_CONTOUR_POINTS:
        raise TooFewContourPoints(
            f"{c.shape[0]} contour points, need >= {MIN_CONTOUR_POINTS}")
    cps = np.asarray(control_points, dtype=np.float64).reshape(-1, 2).copy()
    if cps.shape[0] < MIN_CONTROL_POINTS:
        raise TooFewControlPoints(
            f"{cps.shape[0]} control points, need >= {MIN_CONTROL_POINTS}")
    if not (np.isfinite(c).all() and np.isfinite(cps).all()):
        raise ParseError("non-finite template coordinates")

    origin = c.min(axis=0)
    c -= origin
    cps -= origin
    bbox = tuple(float(v) for v in c.max(axis=0))

    eps = 1e-9
    if ((cps[:, 0] < -eps).any() or (cps[:, 1] < -eps).any()
            or (cps[:, 0] > bbox[0] + eps).any()
            or (cps[:, 1] > bbox[1] + eps).any()):
        raise ControlPointOutsideBbox("control point outside contour bbox")

    if closed is None:
        closed = _is_closed(c)
    if tangents is None:
        t = polyline_tangents(c, closed)
    else:
        t = np.mod(np.asarray(tangents, dtype=np.float64), math.pi)
        if t.shape != (c.shape[0],):
            raise ParseError("tangent count does not match contour count")

    if labels is None:
        labels = tuple(f"cp{i}" for i in range(cps.shape[0]))
    return Template(contour=c, tangents=t, control_points=cps,
                    labels=tuple(labels), bbox=bbox, closed=bool(closed))


def load_template(path) -> Template:
    """Parse the line-oriented template text format (header ``DEFTEMP 1``)."""
    try:
        with open(str(path), "r", encoding="ascii") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None

    tokens = []
    for line in raw.splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(tokens):
            raise ParseError(f"unexpected end of file reading {what}")
        out = tokens[pos:pos + n]
        pos += n
        return out

    magic = take(2, "header")
    if magic != ["DEFTEMP", "1"]:
        raise ParseError(f"bad header {' '.join(magic)!r}, expected 'DEFTEMP 1'")

    kw, count = take(2, "contour header")
    if kw != "CONTOUR":
        raise ParseError(f"expected CONTOUR, got {kw!r}")
    try:
        n = int(count)
    except ValueError:
        raise ParseError(f"bad contour count {count!r}") from None
    try:
        rows = np.array(take(3 * n, "contour points"), dtype=np.float64)
    except ValueError as exc:
        raise ParseError(f"bad contour value: {exc}") from None
    rows = rows.reshape(n, 3) if n else rows.reshape(0, 3)

    kw, count = take(2, "control point header")
    if kw != "CPS":
        raise ParseError(f"expected CPS, got {kw!r}")
    try:
        m = int(count)
    except ValueError:
        raise ParseError(f"bad control point count {count!r}") from None
    cps = np.empty((m, 2), dtype=np.float64)
    labels = []
    for i in range(m):
        x, y, label = take(3, "control point")
        try:
            cps[i] = (float(x), float(y))
        except ValueError as exc:
            raise ParseError(f"bad control point value: {exc}") from None
        labels.append(label)
    if pos != len(tokens):
        raise ParseError(f"{len(tokens) - pos} trailing tokens")

    return make_template(rows[:, :2], rows[:, 2] if n else None,
                         cps, labels)


def save_template(template: Template, path) -> None:
    lines = ["DEFTEMP 1", f"CONTOUR {template.num_points}"]
    for (x, y), t in zip(template.contour, template.tangents):
        lines.append(f"{x:.6f} {y:.6f} {t:.6f}")
    lines.append(f"CPS {template.control_points.shape[0]}")
    for (x, y), label in zip(template.control_points, template.labels):
        lines.append(f"{x:.6f} {y:.6f} {label}")
    with open(str(path), "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


# -- match candidates ------------------------------------------------------------

@dataclass(frozen=True)
class MatchCandidate:
    """A pose with its directional chamfer energy at one pyramid level."""

    pose: Pose
    energy: float
    level: int

    def sort_key(self):
        p = self.pose
        return (self.energy, p.rotation, p.scale, p.dx, p.dy)


def rasterize_contour(points: np.ndarray, width: int, height: int,
                      closed: bool = True) -> np.ndarray:
    """Burn a polyline into a (height, width) uint8 grid with Bresenham lines.

    Points outside the grid are clipped away segment by segment; the grid can
    therefore be smaller than the polyline extent.
    """
    grid = np.zeros((height, width), dtype=np.uint8)
    p = np.asarray(points, dtype=np.float64)
    n = p.shape[0]
    if n == 0:
        return grid
    ix = np.floor(p[:, 0] + 0.5).astype(np.int64)
    iy = np.floor(p[:, 1] + 0.5).astype(np.int64)
    last = n if closed else n - 1
    for i in range(last):
        j = (i + 1) % n
        x0, y0, x1, y1 = ix[i], iy[i], ix[j], iy[j]
        dx = abs(x1 - x0)
        dy = -abs(y1 - y0)
        sx = 1 if x0 < x1 else -1
        sy = 1 if y0 < y1 else -1
        err = dx + dy
        while True:
            if 0 <= x0 < width and 0 <= y0 < height:
                grid[y0, x0] = 1
            if x0 == x1 and y0 == y1:
                break
            e2 = 2 * err
            if e2 >= dy:
                err += dy
                x0 += sx
            if e2 <= dx:
                err += dx
                y0 += sy
    return grid
