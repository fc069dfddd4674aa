"""Pure-numpy implementations of the hot kernels.

These are the fallback for the compiled extension in ``_native.pyx``; both
backends implement identical semantics (including tie-breaking and summation
order where it is observable) and are cross-checked by the test suite.
"""

import numpy as np

# Squared distances and row-major indices are packed into one int64 key so a
# single argmin resolves "smallest distance, then smallest row-major index".
_KEY_LIMIT = np.int64(2) ** 62


def conv2_full(kernel: np.ndarray, base: np.ndarray) -> np.ndarray:
    """Full 2D convolution with zero padding, output (Hk+Hb-1, Wk+Wb-1).

    Exactly-zero kernel entries are skipped; for the sparse binary contour
    kernels used by the ROI stage this is the dominant cost saving.
    """
    hk, wk = kernel.shape
    hb, wb = base.shape
    out = np.zeros((hk + hb - 1, wk + wb - 1), dtype=np.float64)
    for i in range(hk):
        row = kernel[i]
        for j in range(wk):
            v = row[j]
            if v != 0.0:
                out[i:i + hb, j:j + wb] += v * base
    return out


def edt(is_edge: np.ndarray):
    """Exact Euclidean distance transform with nearest-edge identity.

    Returns ``(d2, nearest)``: per-pixel squared distance (int64) to the
    nearest edge pixel and that pixel's flat row-major index. Ties are broken
    by the smallest row-major index.

    Two passes: collapse each column to its best edge row per pixel row, then
    scan candidate columns per row with a packed (distance, index) key.
    """
    e = np.ascontiguousarray(is_edge, dtype=bool)
    h, w = e.shape
    hw = np.int64(h) * np.int64(w)
    rows = np.arange(h, dtype=np.int64)[:, None]

    up = np.full(w, -1, dtype=np.int64)
    up_rows = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        up = np.where(e[y], y, up)
        up_rows[y] = up
    dn = np.full(w, -1, dtype=np.int64)
    dn_rows = np.empty((h, w), dtype=np.int64)
    for y in range(h - 1, -1, -1):
        dn = np.where(e[y], y, dn)
        dn_rows[y] = dn

    big = np.int64(1) << 30
    d_up = np.where(up_rows >= 0, rows - up_rows, big)
    d_dn = np.where(dn_rows >= 0, dn_rows - rows, big)
    # equidistant above/below: the above row has the smaller row index
    take_up = d_up <= d_dn
    col_row = np.where(take_up, up_rows, dn_rows)
    col_d = np.where(take_up, d_up, d_dn)

    cols = np.nonzero(dn_rows[0] >= 0)[0].astype(np.int64)
    if cols.size == 0:
        raise ValueError("edt requires at least one edge pixel")

    xs = np.arange(w, dtype=np.int64)
    dx = xs[None, :] - cols[:, None]
    dx2 = dx * dx
    max_d2 = np.int64((h - 1) ** 2 + (w - 1) ** 2)
    if (max_d2 + 1) * hw >= _KEY_LIMIT:
        raise ValueError("image too large for packed distance keys")

    d2 = np.empty((h, w), dtype=np.int64)
    nearest = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        cd = col_d[y, cols]
        cr = col_row[y, cols]
        key = (dx2 + (cd * cd)[:, None]) * hw + (cr * w + cols)[:, None]
        best = key[np.argmin(key, axis=0), xs]
        d2[y] = best // hw
        nearest[y] = best % hw
    return d2, nearest


def chamfer_energy(xs: np.ndarray, ys: np.ndarray, tans: np.ndarray,
                   phi: np.ndarray, near_tan: np.ndarray) -> float:
    """Directional chamfer energy of a point set against a potential field.

    Each point contributes ``1 + phi_bilinear * |cos(tan - nearest_tan)|``;
    points outside the field contribute the worst-case 1. Returns the mean.
    """
    h, w = phi.shape
    n = xs.shape[0]
    inside = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    terms = np.ones(n, dtype=np.float64)
    if inside.any():
        x = xs[inside]
        y = ys[inside]
        x0 = np.minimum(np.floor(x).astype(np.int64), w - 1)
        y0 = np.minimum(np.floor(y).astype(np.int64), h - 1)
        x1 = np.minimum(x0 + 1, w - 1)
        y1 = np.minimum(y0 + 1, h - 1)
        fx = x - x0
        fy = y - y0
        top = phi[y0, x0] * (1.0 - fx) + phi[y0, x1] * fx
        bot = phi[y1, x0] * (1.0 - fx) + phi[y1, x1] * fx
        pv = top * (1.0 - fy) + bot * fy
        xi = np.floor(x + 0.5).astype(np.int64)
        yi = np.floor(y + 0.5).astype(np.int64)
        beta = tans[inside] - near_tan[yi, xi]
        terms[inside] = 1.0 + pv * np.abs(np.cos(beta))
    return float(terms.sum() / n)
