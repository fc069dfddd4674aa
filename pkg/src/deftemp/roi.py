"""Stage 1: restrict the search to template-sized regions of interest.

The rotated template contour is rasterized to a sparse binary kernel and
convolved with the binary edge image; the per-pixel maximum response over
orientations is thresholded and its local maxima become ROI windows.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from deftemp import kernels
from deftemp.edges import EdgeMap
from deftemp.errors import EmptyInput, NoEdges
from deftemp.raster import Pose, Template, rasterize_contour, transform_points


@dataclass(frozen=True)
class RoiConfig:
    percentile: float = 90.0     # response percentile a local maximum must clear
    max_windows: int = 8
    # local maxima must also reach this fraction of the global peak response;
    # keeps autocorrelation sidelobes and noise bumps from emitting windows
    min_response_ratio: float = 0.5


@dataclass(eq=False)
class RoiSet:
    windows: list                 # (x, y, w, h) int tuples, clipped to image
    coverage_fraction: float
    response_peak: float = 0.0

    def union_mask(self, width: int, height: int) -> np.ndarray:
        mask = np.zeros((height, width), dtype=bool)
        for x, y, w, h in self.windows:
            mask[y:y + h, x:x + w] = True
        return mask

    def contains(self, point) -> bool:
        x, y = point
        return any(wx <= x < wx + ww and wy <= y < wy + wh
                   for wx, wy, ww, wh in self.windows)


def conv2_full(kernel: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Full 2D convolution (zero padded), output (Hk+Hb-1, Wk+Wb-1)."""
    k = np.asarray(kernel, dtype=np.float64)
    b = np.asarray(base, dtype=np.float64)
    if k.ndim != 2 or b.ndim != 2 or k.size == 0 or b.size == 0:
        raise EmptyInput("convolution inputs must be non-empty 2D arrays")
    return kernels.conv2_full(np.ascontiguousarray(k), np.ascontiguousarray(b))


def _contour_kernel(template: Template, orientation: float):
    """Rasterized contour of the template rotated by `orientation`.

    Returns (kernel, centroid) where centroid is the rounded mean of the
    kernel's nonzero pixels, used to align responses across orientations.
    """
    pose = Pose(scale=1.0, rotation=orientation)
    pts = transform_points(template.contour, pose, template.center)
    lo = pts.min(axis=0)
    pts = pts - lo
    w = int(np.floor(pts[:, 0].max() + 0.5)) + 1
    h = int(np.floor(pts[:, 1].max() + 0.5)) + 1
    grid = rasterize_contour(pts, w, h, template.closed)
    ys, xs = np.nonzero(grid)
    cx = int(np.floor(xs.mean() + 0.5))
    cy = int(np.floor(ys.mean() + 0.5))
    return grid, (cx, cy)


def find_rois(template: Template, edges: EdgeMap, orientations,
              config: RoiConfig = RoiConfig()) -> RoiSet:
    """Accumulate contour/edge convolution responses and emit ROI windows.

    One window per selected local maximum, sized to the rotated-template
    bounds of the orientation that produced the maximum, capped at
    ``config.max_windows`` keeping the highest responses. The global maximum
    always produces a window, so the result is never empty.
    """
    if not edges.is_edge.any():
        raise NoEdges("ROI search needs at least one edge pixel")
    base = edges.is_edge.astype(np.float64)
    hb, wb = base.shape

    response = np.zeros((hb, wb), dtype=np.float64)
    best_orient = np.zeros((hb, wb), dtype=np.int64)
    kernel_sizes = []
    for oi, theta in enumerate(orientations):
        grid, (cx, cy) = _contour_kernel(template, float(theta))
        kernel_sizes.append((grid.shape[1], grid.shape[0]))
        conv = conv2_full(grid.astype(np.float64), base)
        # full-conv index = window-center index + kernel centroid
        aligned = conv[cy:cy + hb, cx:cx + wb]
        better = aligned > response
        response[better] = aligned[better]
        best_orient[better] = oi

    peak = float(response.max())
    positive = response[response > 0.0]
    threshold = max(float(np.percentile(positive, config.percentile)),
                    config.min_response_ratio * peak)

    local_max = response == ndimage.maximum_filter(response, size=3)
    candidates = local_max & (response >= threshold) & (response > 0.0)
    ys, xs = np.nonzero(candidates)
    order = np.lexsort((xs, ys, -response[ys, xs]))
    ys, xs = ys[order], xs[order]

    windows = []
    for y, x in zip(ys[:config.max_windows], xs[:config.max_windows]):
        kw, kh = kernel_sizes[best_orient[y, x]]
        x0 = max(0, int(x) - kw // 2)
        y0 = max(0, int(y) - kh // 2)
        x1 = min(wb, x0 + kw)
        y1 = min(hb, y0 + kh)
        if x1 > x0 and y1 > y0:
            windows.append((x0, y0, x1 - x0, y1 - y0))
    if not windows:  # pathological clipping; keep the global max window
        y, x = np.unravel_index(int(response.argmax()), response.shape)
        kw, kh = kernel_sizes[best_orient[y, x]]
        x0 = max(0, min(int(x) - kw // 2, wb - 1))
        y0 = max(0, min(int(y) - kh // 2, hb - 1))
        windows.append((x0, y0, min(wb - x0, kw), min(hb - y0, kh)))

    mask = np.zeros((hb, wb), dtype=bool)
    for x0, y0, w, h in windows:
        mask[y0:y0 + h, x0:x0 + w] = True
    coverage = float(mask.sum()) / float(hb * wb)
    return RoiSet(windows=windows, coverage_fraction=coverage,
                  response_peak=peak)
