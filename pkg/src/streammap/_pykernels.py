"""NumPy fallback implementations of the hot kernels.

Signatures mirror the compiled extension in _ckernels.pyx exactly; the
active backend is chosen in streammap.kernels.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def stress_value(x: np.ndarray, d: np.ndarray, w: np.ndarray) -> float:
    """Weighted stress: sum over i<j of w_ij * (||x_i - x_j|| - d_ij)^2."""
    diff = x[:, None, :] - x[None, :, :]
    e = np.sqrt((diff * diff).sum(axis=-1))
    r = e - d
    np.fill_diagonal(r, 0.0)
    return float(0.5 * (w * r * r).sum())


def smacof(
    d: np.ndarray,
    w: np.ndarray,
    vplus: np.ndarray,
    x0: np.ndarray,
    max_iter: int,
    rtol: float,
    atol: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Stress majorization from x0; returns (positions, stress history).

    Each Guttman step is accepted only if it does not increase stress, so
    the returned history is non-increasing; iteration stops when stress
    falls to atol (exactly realizable instances decay geometrically and
    would never pass a relative test), when the relative decrease falls
    below rtol (the sub-tolerance step is discarded, keeping converged
    inputs bit-stable), or at max_iter.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    s = stress_value(x, d, w)
    hist = [s]
    for _ in range(max_iter):
        if s <= atol:
            break
        diff = x[:, None, :] - x[None, :, :]
        e = np.sqrt((diff * diff).sum(axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(e > 0.0, d / e, 0.0) * w
        b = -ratio
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        xn = vplus @ (b @ x)
        sn = stress_value(xn, d, w)
        if sn > s:
            break
        if s - sn < rtol * s:
            break
        x, s = xn, sn
        hist.append(s)
    return x, np.asarray(hist, dtype=np.float64)


def first_free(
    grid: np.ndarray,
    org_col: int,
    org_row: int,
    cells: np.ndarray,
    cands: np.ndarray,
) -> int:
    """Index of the first candidate offset where the mask fits, else -1.

    `grid` is a uint8 occupancy raster whose (0, 0) entry is absolute cell
    (org_col, org_row); `cells` are absolute (col, row) mask cells; `cands`
    are candidate (col, row) translations. Cells outside the raster are
    free by definition (the raster covers everything occupied).
    """
    h, wdt = grid.shape
    ccol = cells[:, 0] - org_col
    crow = cells[:, 1] - org_row
    for i in range(cands.shape[0]):
        col = ccol + cands[i, 0]
        row = crow + cands[i, 1]
        inb = (col >= 0) & (col < wdt) & (row >= 0) & (row < h)
        if not inb.any():
            return i
        if not grid[row[inb], col[inb]].any():
            return i
    return -1
