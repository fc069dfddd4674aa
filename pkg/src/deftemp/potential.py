"""Edge Potential Field: exact distance transform and the attraction field.

phi(p) = -exp(-distance to nearest edge pixel), so phi is -1 exactly on
edges and decays toward 0 away from them. Each pixel also remembers the
undirected tangent of its nearest edge pixel, which the directional energy
term compares template tangents against.
"""

from dataclasses import dataclass

import numpy as np

from deftemp import kernels
from deftemp.edges import EdgeMap
from deftemp.errors import InvalidConfig, NoEdges


@dataclass(eq=False)
class PotentialField:
    phi: np.ndarray             # (H, W) float64 in [-1, 0]
    nearest_tangent: np.ndarray  # (H, W) float64 in [0, pi)
    sigma: float

    @property
    def width(self) -> int:
        return self.phi.shape[1]

    @property
    def height(self) -> int:
        return self.phi.shape[0]


def distance_transform(edges: EdgeMap):
    """Exact Euclidean distance to the nearest edge pixel, plus its identity.

    Returns ``(dist, nearest)`` where ``dist`` is float64 distance in px and
    ``nearest`` holds flat row-major indices of the chosen edge pixel. Ties
    are broken by the smallest row-major index.
    """
    if not edges.is_edge.any():
        raise NoEdges("distance transform needs at least one edge pixel")
    d2, nearest = kernels.edt(edges.is_edge)
    return np.sqrt(d2.astype(np.float64)), nearest


def build_epf(edges: EdgeMap, distance_scale: float = 1.0) -> PotentialField:
    """Construct the potential field phi = -exp(-dist / distance_scale).

    ``distance_scale`` sets the falloff length in pixels. The default 1.0 is
    the literal definition; the coarse levels of the pose search pass their
    blur sigma so the attraction basin widens with the level's resolution
    (otherwise a coarse translation lattice could never see the target).
    """
    if not distance_scale > 0.0:
        raise InvalidConfig("distance_scale must be > 0")
    dist, nearest = distance_transform(edges)
    phi = -np.exp(-dist / distance_scale)
    nearest_tangent = edges.tangent.reshape(-1)[nearest.reshape(-1)]
    return PotentialField(phi, nearest_tangent.reshape(edges.is_edge.shape),
                          edges.sigma)


def sample_phi(field: PotentialField, point) -> float:
    """Bilinear phi at a continuous point; 0 (the worst case) outside."""
    x, y = float(point[0]), float(point[1])
    w, h = field.width, field.height
    if not (0.0 <= x <= w - 1.0 and 0.0 <= y <= h - 1.0):
        return 0.0
    x0 = min(int(np.floor(x)), w - 1)
    y0 = min(int(np.floor(y)), h - 1)
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    phi = field.phi
    top = phi[y0, x0] * (1.0 - fx) + phi[y0, x1] * fx
    bot = phi[y1, x0] * (1.0 - fx) + phi[y1, x1] * fx
    return float(top * (1.0 - fy) + bot * fy)


def sample_nearest_tangent(field: PotentialField, point):
    """Nearest-neighbor tangent lookup; (tangent, valid) with valid=False outside."""
    x, y = float(point[0]), float(point[1])
    w, h = field.width, field.height
    if not (0.0 <= x <= w - 1.0 and 0.0 <= y <= h - 1.0):
        return 0.0, False
    xi = int(np.floor(x + 0.5))
    yi = int(np.floor(y + 0.5))
    return float(field.nearest_tangent[yi, xi]), True
