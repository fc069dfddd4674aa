"""Local Weighted Mean warp: blended local polynomial fits.

Each control point gets a polynomial fitted by least squares through its n
nearest correspondences; a query point is mapped by averaging the local
polynomials whose support disks reach it, weighted by a smooth rational
falloff of the distance-to-control-point over the support radius. Points no
disk reaches fall back to the nearest control point's polynomial.
"""

import math
from dataclasses import dataclass

import numpy as np

from deftemp.errors import LengthMismatch, NegativeR, TooFewPoints
from deftemp.raster import Pose, Template, polyline_tangents, transform_points

# degree -> monomial term count ({1,x,y} and {1,x,y,x^2,xy,y^2})
TERMS = {1: 3, 2: 6}

# singular values below this fraction of the largest are treated as dead
RANK_TOL = 1e-9


@dataclass(eq=False)
class Correspondences:
    """Paired source -> target points; sources must be distinct."""
    sources: np.ndarray   # (N, 2)
    targets: np.ndarray   # (N, 2)

    def __post_init__(self):
        self.sources = np.asarray(self.sources, dtype=np.float64).reshape(-1, 2)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 2)
        if self.sources.shape != self.targets.shape:
            raise LengthMismatch("source and target counts differ")
        if self.sources.shape[0] < 3:
            raise TooFewPoints("warp fitting needs at least 3 correspondences")
        if not (np.isfinite(self.sources).all() and np.isfinite(self.targets).all()):
            raise TooFewPoints("correspondences must be finite")
        d = self.sources[:, None, :] - self.sources[None, :, :]
        dist2 = (d ** 2).sum(axis=2)
        np.fill_diagonal(dist2, np.inf)
        if dist2.min() <= 0.0:
            raise TooFewPoints("source points must be pairwise distinct")

    @property
    def count(self) -> int:
        return self.sources.shape[0]


@dataclass(eq=False)
class LocalFit:
    """One control point's polynomial patch in its normalized frame."""
    center: np.ndarray      # (2,) neighborhood centroid
    inv_scale: float        # 1 / RMS radius of the neighborhood
    basis_idx: np.ndarray   # surviving monomial columns
    coef_x: np.ndarray      # per-column coefficients for the X output
    coef_y: np.ndarray
    radius: float           # support radius R_n
    degree: int             # degree actually used (after any fallback)


@dataclass(eq=False)
class WarpModel:
    sources: np.ndarray     # (N, 2) control points in the source frame
    fits: list              # LocalFit per control point
    neighbors: int
    degree: int             # requested degree
    fallbacks: tuple        # CP indices where degree 2 degraded to 1

    @property
    def count(self) -> int:
        return self.sources.shape[0]


def weight_fn(R):
    """Smooth support weight: 1 - 3R^2 + 2R^3 on [0, 1], 0 beyond.

    W(0) = 1, W(1) = 0, with zero slope at both ends. Accepts scalars or
    arrays; negative arguments are rejected.
    """
    r = np.asarray(R, dtype=np.float64)
    if (r < 0.0).any():
        raise NegativeR("weight argument must be >= 0")
    w = np.where(r <= 1.0, 1.0 - 3.0 * r * r + 2.0 * r ** 3, 0.0)
    return float(w) if np.isscalar(R) or getattr(R, "ndim", 1) == 0 else w


def _monomials(pts: np.ndarray, degree: int) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    cols = [np.ones_like(x), x, y]
    if degree == 2:
        cols += [x * x, x * y, y * y]
    return np.column_stack(cols)


def _fit_neighborhood(src: np.ndarray, tgt: np.ndarray, degree: int):
    """Least-squares polynomial through one neighborhood.

    Coordinates are centered on the neighborhood and scaled to unit RMS
    radius before the basis is orthogonalized, which keeps the triangular
    system well conditioned. Returns (fit tuple, full_rank); rank-deficient
    layouts (e.g. collinear points under degree 2) drop the dead columns and
    report full_rank False so the caller can degrade the degree.
    """
    center = src.mean(axis=0)
    local = src - center
    rms = math.sqrt(float((local ** 2).sum() / local.shape[0]))
    inv_scale = 1.0 / rms if rms > 0.0 else 1.0
    local = local * inv_scale

    h = _monomials(local, degree)
    # modified Gram-Schmidt with dead-column dropping
    q = []
    kept = []
    r_rows = {}
    for j in range(h.shape[1]):
        v = h[:, j].astype(np.float64)
        coeffs = []
        for qi in q:
            c = float(qi @ v)
            coeffs.append(c)
            v = v - c * qi
        norm = float(np.linalg.norm(v))
        if norm <= RANK_TOL * max(1.0, math.sqrt(float(h.shape[0]))):
            continue
        q.append(v / norm)
        kept.append(j)
        r_rows[j] = (coeffs, norm)
    if len(kept) < 2:
        return None, False
    qm = np.column_stack(q)                      # (n, k) orthonormal
    # back-substitute the orthogonal fit into monomial coefficients
    proj_x = qm.T @ tgt[:, 0]
    proj_y = qm.T @ tgt[:, 1]
    k = len(kept)
    r = np.zeros((k, k))
    for col, j in enumerate(kept):
        coeffs, norm = r_rows[j]
        for row in range(col):
            r[row, col] = coeffs[row]
        r[col, col] = norm
    coef_x = np.linalg.solve(r, proj_x)
    coef_y = np.linalg.solve(r, proj_y)
    fit = (center, inv_scale, np.array(kept), coef_x, coef_y)
    return fit, len(kept) == h.shape[1]


def fit_lwm(c: Correspondences, degree: int = None,
            neighbors: int = None) -> WarpModel:
    """Fit one local polynomial per control point.

    Defaults: degree 2 when at least 6 correspondences exist (else 1);
    neighborhood size min(N, max(terms, ceil(N/2))). Degree-2 neighborhoods
    that are rank-deficient (collinear layouts) fall back to degree 1 and
    the affected control-point indices are recorded on the model.
    """
    n_pts = c.count
    if degree is None:
        degree = 2 if n_pts >= TERMS[2] else 1
    if degree not in TERMS:
        raise TooFewPoints(f"degree must be 1 or 2, got {degree}")
    if neighbors is None:
        neighbors = min(n_pts, max(TERMS[degree], math.ceil(n_pts / 2)))
    if not TERMS[degree] <= neighbors <= n_pts:
        raise TooFewPoints(
            f"neighbors must be in [{TERMS[degree]}, {n_pts}], got {neighbors}")

    d = c.sources[:, None, :] - c.sources[None, :, :]
    dist = np.sqrt((d ** 2).sum(axis=2))

    fits = []
    fallbacks = []
    for i in range(n_pts):
        order = np.argsort(dist[i], kind="stable")
        near = order[:neighbors]                  # includes i itself (dist 0)
        src = c.sources[near]
        tgt = c.targets[near]
        # support radius: (n-1)th nearest other source point
        others = np.sort(dist[i][np.arange(n_pts) != i])
        radius = float(others[neighbors - 2])

        fit = None
        used = degree
        if degree == 2:
            fit, full = _fit_neighborhood(src, tgt, 2)
            if not full:
                fit = None
                used = 1
        if fit is None:
            fit, _ = _fit_neighborhood(src, tgt, used)
            if degree == 2:
                fallbacks.append(i)
        if fit is None:
            # unreachable with pairwise-distinct sources; defensive guard
            raise TooFewPoints(f"neighborhood of control point {i} is degenerate")
        center, inv_scale, kept, coef_x, coef_y = fit
        fits.append(LocalFit(center=center, inv_scale=inv_scale,
                             basis_idx=kept, coef_x=coef_x, coef_y=coef_y,
                             radius=radius, degree=used))
    return WarpModel(sources=c.sources.copy(), fits=fits, neighbors=neighbors,
                     degree=degree, fallbacks=tuple(fallbacks))


def _eval_fit(fit: LocalFit, pts: np.ndarray) -> np.ndarray:
    local = (pts - fit.center) * fit.inv_scale
    h = _monomials(local, fit.degree)[:, fit.basis_idx]
    return np.column_stack([h @ fit.coef_x, h @ fit.coef_y])


def apply_warp(model: WarpModel, points) -> tuple:
    """Map source-frame points through the warp.

    Returns (mapped (M, 2), fallback (M,) bool). A point outside every
    support disk is mapped by its nearest control point's polynomial and
    flagged in the fallback mask.

    The map is only meaningful near the control points. Quadratic local fits
    interpolate their neighborhoods exactly, so when the control points lie
    close to a conic the fits can grow without bound away from it; query far
    from the data at your own risk (or fit with degree=1, which is well
    posed everywhere).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    m = pts.shape[0]
    n = model.count
    d = np.sqrt(((pts[:, None, :] - model.sources[None, :, :]) ** 2).sum(axis=2))
    radii = np.array([f.radius for f in model.fits])
    w = weight_fn(d / radii[None, :])

    out = np.zeros((m, 2))
    wsum = w.sum(axis=1)
    covered = wsum > 0.0
    vals = np.empty((n, m, 2))
    for i, fit in enumerate(model.fits):
        vals[i] = _eval_fit(fit, pts)
    num = np.einsum("mn,nmk->mk", w, vals)
    out[covered] = num[covered] / wsum[covered, None]

    fallback = ~covered
    if fallback.any():
        nearest = np.argmin(d[fallback], axis=1)
        idx = np.nonzero(fallback)[0]
        for j, i in zip(idx, nearest):
            out[j] = vals[i, j]
    return out, fallback


def warp_template(template: Template, base_cps, pose: Pose) -> tuple:
    """Deform the posed template contour to meet new control-point targets.

    Correspondences run from the pose-transformed template control points to
    ``base_cps``; the fitted warp maps every pose-transformed contour point.
    Returns (contour (M, 2), tangents (M,)) in the base frame, with tangents
    recomputed from the warped polyline.
    """
    base_cps = np.asarray(base_cps, dtype=np.float64).reshape(-1, 2)
    if base_cps.shape[0] != template.control_points.shape[0]:
        raise LengthMismatch("one target per template control point required")
    sources = transform_points(template.control_points, pose, template.center)
    model = fit_lwm(Correspondences(sources, base_cps))
    posed = transform_points(template.contour, pose, template.center)
    warped, _ = apply_warp(model, posed)
    return warped, polyline_tangents(warped, template.closed)


class WarpOperator:
    """Precomputed linear map from CP targets to warped query points.

    For fixed sources and query points the whole pipeline (least-squares
    local fits, weight blend, gap fallback) is linear in the target
    coordinates, so it collapses to one (M, N) matrix applied to the target
    x and y columns. Stage 3 rebuilds warps thousands of times with only the
    targets changing; this turns each rebuild into two small mat-vecs.
    """

    def __init__(self, sources, query_points, degree: int = None,
                 neighbors: int = None):
        src = np.asarray(sources, dtype=np.float64).reshape(-1, 2)
        qp = np.asarray(query_points, dtype=np.float64).reshape(-1, 2)
        n = src.shape[0]
        # fitting with basis-vector targets extracts the linear operator
        # column by column: warp(e_j targets) = j-th column of the matrix
        cols = []
        eye = np.eye(n)
        self._models = []
        for j in range(n):
            c = Correspondences(src, np.column_stack([eye[j], np.zeros(n)]))
            model = fit_lwm(c, degree=degree, neighbors=neighbors)
            mapped, _ = apply_warp(model, qp)
            cols.append(mapped[:, 0])
        self.matrix = np.column_stack(cols)        # (M, N)
        self.sources = src
        self.query_points = qp

    def map_targets(self, targets) -> np.ndarray:
        t = np.asarray(targets, dtype=np.float64).reshape(-1, 2)
        return self.matrix @ t
