"""Spherical range-image projection of a LiDAR scan."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RangeImage:
    rng: np.ndarray        # (rows, cols) meters, 0 = empty
    height: np.ndarray     # (rows, cols) sensor-frame z of the cell's point
    pid: np.ndarray        # (rows, cols) int32 source point id, -1 = empty
    fov: tuple[float, float]
    dropped: int           # points outside the vertical FOV
    in_fov: np.ndarray     # (N,) per input point, False for dropped points

    @property
    def rows(self) -> int:
        return self.rng.shape[0]

    @property
    def cols(self) -> int:
        return self.rng.shape[1]

    def filled(self) -> np.ndarray:
        return self.pid >= 0


def build_range_image(points: np.ndarray, rows: int, cols: int,
                      fov: tuple[float, float]) -> RangeImage:
    """Project sensor-frame points; on cell conflicts the nearer point wins.

    Row index grows with elevation (row 0 at fov[0]); column index grows
    with azimuth measured from +x, so a point on the +x axis lands in
    column 0.
    """
    if rows < 1 or cols < 1:
        raise ValueError("range image needs at least one row and column")
    points = np.asarray(points, dtype=np.float64)
    rng = np.zeros((rows, cols))
    height = np.zeros((rows, cols))
    pid = np.full((rows, cols), -1, dtype=np.int32)
    if len(points) == 0:
        return RangeImage(rng, height, pid, fov, 0, np.zeros(0, dtype=bool))

    depth = np.linalg.norm(points, axis=1)
    valid = depth > 0
    elev = np.zeros(len(points))
    elev[valid] = np.arcsin(np.clip(points[valid, 2] / depth[valid], -1.0, 1.0))
    lo, hi = fov
    valid &= (elev >= lo) & (elev <= hi)
    dropped = int(len(points) - valid.sum())

    ids = np.flatnonzero(valid)
    row = np.minimum((rows * (elev[ids] - lo) / (hi - lo)).astype(np.int64),
                     rows - 1)
    azim = np.arctan2(points[ids, 1], points[ids, 0])
    azim[azim < 0] += 2.0 * np.pi
    col = np.minimum((cols * azim / (2.0 * np.pi)).astype(np.int64), cols - 1)

    # write in decreasing depth so the nearest point in a cell survives
    order = np.argsort(-depth[ids], kind="stable")
    ids, row, col = ids[order], row[order], col[order]
    rng[row, col] = depth[ids]
    height[row, col] = points[ids, 2]
    pid[row, col] = ids
    return RangeImage(rng, height, pid, fov, dropped, valid)


def extract_max_ring(image: RangeImage) -> np.ndarray:
    """Point ids of the per-column farthest return (the sensor's max ring)."""
    filled = image.filled()
    rng = np.where(filled, image.rng, -np.inf)
    best = np.argmax(rng, axis=0)
    cols = np.arange(image.cols)
    has = filled[best, cols]
    return image.pid[best[has], cols[has]].astype(np.int64)


def extract_sup_inf(image: RangeImage, r1: float, r2: float,
                    max_search: int = 10, signed: bool = False):
    """Per-point occlusion bounds found across vertical range jumps.

    For each filled cell, scan upward until the range difference to a
    filled cell exceeds ``r1``; that cell's point becomes the upper bound.
    The downward scan with ``r2`` gives the lower bound.  By default the
    absolute difference is compared; ``signed=True`` uses the raw
    ``range(i, j) - range(i +/- t, j)`` difference.

    Returns ``(sup_ids, sup_bound_ids, inf_ids, inf_bound_ids)`` where the
    bound ids reference the point whose height defines the bound.
    """

    def _scan(direction: int, thresh: float):
        rows = image.rows
        filled = image.filled()
        sel_ids, bound_ids = [], []
        found = np.zeros_like(filled)
        for t in range(1, max_search + 1):
            if t >= rows:
                break
            if direction > 0:
                cur = slice(0, rows - t)
                far = slice(t, rows)
            else:
                cur = slice(t, rows)
                far = slice(0, rows - t)
            diff = image.rng[cur] - image.rng[far]
            if not signed:
                diff = np.abs(diff)
            hit = filled[cur] & filled[far] & ~found[cur] & (diff > thresh)
            if hit.any():
                sel_ids.append(image.pid[cur][hit])
                bound_ids.append(image.pid[far][hit])
                found[cur] |= hit
        if sel_ids:
            return (np.concatenate(sel_ids).astype(np.int64),
                    np.concatenate(bound_ids).astype(np.int64))
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)

    sup_ids, sup_bounds = _scan(+1, r1)
    inf_ids, inf_bounds = _scan(-1, r2)
    return sup_ids, sup_bounds, inf_ids, inf_bounds
