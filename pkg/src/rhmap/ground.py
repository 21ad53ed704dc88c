"""Region-wise ground plane estimation and ground-cube marking.

Ground handling works in cube-index space: candidate regions are elected
from scan points lying below the column ground reference, each elected
region gets a PCA plane fitted to its low cubes, and cubes within a
distance margin of the plane are marked as ground.  Marked ground cubes
survive all later dynamic-region removal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import FrontendConfig
from .indexing import pack2, pack3, unpack3
from .map_core import RHMap


class PlaneFitError(ValueError):
    """Raised when a region has too few or degenerate cubes for a plane fit."""


@dataclass
class GroundReport:
    regions_elected: int = 0
    regions_fitted: int = 0
    planes_failed: int = 0
    ground_cubes_added: int = 0


def elect_candidate_ground_regions(map_: RHMap, points_world: np.ndarray,
                                   fcfg: FrontendConfig) -> list[int]:
    """Region keys worth a ground fit, given the freshly inserted scan.

    A point votes for its region when its cube height sits below the
    column's ground reference: the running ground mean G when available,
    otherwise the minimum scan height of the whole region column plus a
    bootstrap margin (the wider footprint keeps isolated flat rooftops
    from looking like fresh ground).  Regions whose eight neighbouring
    columns are all empty are discarded as isolated noise.
    """
    if len(points_world) == 0:
        return []
    cfg = map_.config
    gidx = np.floor(np.asarray(points_world, dtype=np.float64)
                    / cfg.cube_size).astype(np.int64)
    okeys = pack2(gidx[:, 0], gidx[:, 1])
    uk, inv = np.unique(okeys, return_inverse=True)
    gmean, found = map_.ground_mean(uk)

    mm = cfg.mask
    ckeys = pack2(gidx[:, 0] & ~mm, gidx[:, 1] & ~mm)
    cuk, cinv = np.unique(ckeys, return_inverse=True)
    cminz = np.full(len(cuk), np.inf)
    np.minimum.at(cminz, cinv, points_world[:, 2])

    ref = np.where(found[inv], gmean[inv],
                   cminz[cinv] + fcfg.bootstrap_margin)
    below = gidx[:, 2] * cfg.cube_size < ref
    m = cfg.mask
    ridx = gidx[below] & np.array([~m, ~m, ~m], dtype=np.int64)
    rkeys = np.unique(pack3(ridx[:, 0], ridx[:, 1], ridx[:, 2]))

    if len(rkeys) == 0:
        return []
    step = m + 1
    occ_cols = np.sort(np.fromiter(map_._columns.keys(), dtype=np.int64,
                                   count=len(map_._columns)))
    rxy = unpack3(rkeys)
    offs = np.array([(dx, dy) for dx in (-step, 0, step)
                     for dy in (-step, 0, step) if dx or dy], dtype=np.int64)
    nkeys = pack2(rxy[:, None, 0] + offs[:, 0], rxy[:, None, 1] + offs[:, 1])
    pos = np.searchsorted(occ_cols, nkeys)
    hit = pos < len(occ_cols)
    hit[hit] &= occ_cols[pos[hit]] == nkeys[hit]
    return rkeys[hit.any(axis=1)].tolist()


def _initial_ground_set(map_: RHMap, region):
    """Low cubes of a region: centers at or below the region mean height."""
    idx, rows = map_.region_cube_indices(region)
    zc = (idx[:, 2] + 0.5) * map_.config.cube_size
    sel = zc <= region.z_mean + 1e-12
    return idx[sel], rows[sel]


def fit_region_plane(map_: RHMap, region_key: int, min_normal_z: float = 0.0):
    """PCA-fit a ground plane to a region's low cubes, in index units.

    The normal is the smallest-eigenvalue direction of the cube-index
    covariance, oriented upward; the offset is the normal dotted with the
    mean index.  Raises :class:`PlaneFitError` for fewer than three cubes,
    a rank-deficient (collinear) configuration, or a fit steeper than
    ``min_normal_z`` allows (walls are not ground).
    """
    region = map_.regions.get(int(region_key))
    if region is None:
        raise PlaneFitError(f"region {region_key} does not exist")
    idx, _ = _initial_ground_set(map_, region)
    if len(idx) < 3:
        raise PlaneFitError(f"region {region_key}: only {len(idx)} low cubes")
    pts = idx.astype(np.float64)
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / len(pts)
    evals, evecs = np.linalg.eigh(cov)
    if evals[1] <= 1e-9 * max(evals[2], 1.0):
        raise PlaneFitError(f"region {region_key}: collinear cubes")
    n = evecs[:, 0]
    if n[2] < 0 or (n[2] == 0 and (n[0] < 0 or (n[0] == 0 and n[1] < 0))):
        n = -n
    if n[2] < min_normal_z:
        raise PlaneFitError(f"region {region_key}: fit too steep "
                            f"(n_z={n[2]:.3f} < {min_normal_z})")
    d = float(n @ pts.mean(axis=0))
    region.plane_n = n
    region.plane_d = d
    region.fitted = True
    return n, d


def extract_ground_cubes(map_: RHMap, region_key: int, r_gro: float,
                         g_batch: list | None = None) -> np.ndarray:
    """Mark a fitted region's near-plane cubes as ground.

    The plane is fitted to the low cubes only, but the distance margin is
    evaluated over every live cube of the region, so staircase levels
    above the mean on sloped terrain are still recognized as ground.
    Returns the packed keys of the marked cubes.  Each marked cube's
    z-center is folded into the ground height table G, either directly or
    through ``g_batch``, a caller-owned list of (column keys, heights)
    pairs flushed in one table merge later.  A region without a valid
    plane yields an empty result.
    """
    region = map_.regions.get(int(region_key))
    if region is None or not region.fitted or region.plane_n is None:
        return np.empty(0, dtype=np.int64)
    idx, rows = map_.region_cube_indices(region)
    if len(idx) == 0:
        return np.empty(0, dtype=np.int64)
    dist = np.abs(idx.astype(np.float64) @ region.plane_n - region.plane_d)
    within = dist < r_gro
    idx, rows = idx[within], rows[within]
    map_._is_ground[rows] = True
    zc = (idx[:, 2] + 0.5) * map_.config.cube_size
    okeys = pack2(idx[:, 0], idx[:, 1])
    if g_batch is None:
        map_.update_ground_samples(okeys, zc)
    else:
        g_batch.append((okeys, zc))
    return pack3(idx[:, 0], idx[:, 1], idx[:, 2])


def _batch_fit_and_extract(map_: RHMap, regions: list, fcfg: FrontendConfig,
                           report: GroundReport):
    """Fit all pending regions with one stacked eigendecomposition.

    Matches the per-region :func:`fit_region_plane` and
    :func:`extract_ground_cubes` pair, but gathers every region's low
    cubes first so the plane fits, the validity checks and the ground
    marking all run as single array operations.
    """
    alive = map_._alive
    keys = map_._keys
    cube_size = map_.config.cube_size
    rows_per, zmean = [], []
    for region in regions:
        rows = np.asarray(region.rows, dtype=np.int64)
        rows = rows[alive[rows]]
        rows_per.append(rows)
        zmean.append(region.z_mean)
    lens = np.array([len(r) for r in rows_per])
    if lens.sum() == 0:
        for region in regions:
            region.fit_failed_at = region.occupied_count
            report.planes_failed += 1
        return
    rows_cat = np.concatenate(rows_per)
    idx_cat = unpack3(keys[rows_cat])
    gid = np.repeat(np.arange(len(regions)), lens)

    zc_all = (idx_cat[:, 2] + 0.5) * cube_size
    low = zc_all <= np.asarray(zmean)[gid] + 1e-12
    gid_all, pts_all = gid, idx_cat.astype(np.float64)
    gid, zc = gid[low], zc_all[low]

    n_reg = len(regions)
    counts = np.bincount(gid, minlength=n_reg)
    pts = pts_all[low]
    sums = np.zeros((n_reg, 3))
    np.add.at(sums, gid, pts)
    means = sums / np.maximum(counts, 1)[:, None]
    centered = pts - means[gid]
    outer = centered[:, :, None] * centered[:, None, :]
    cov = np.zeros((n_reg, 3, 3))
    np.add.at(cov, gid, outer)
    cov /= np.maximum(counts, 1)[:, None, None]

    evals, evecs = np.linalg.eigh(cov)
    normals = evecs[:, :, 0]
    flip = (normals[:, 2] < 0) | (
        (normals[:, 2] == 0) & ((normals[:, 0] < 0) |
                                ((normals[:, 0] == 0) & (normals[:, 1] < 0))))
    normals[flip] = -normals[flip]
    ok = ((counts >= 3)
          & (evals[:, 1] > 1e-9 * np.maximum(evals[:, 2], 1.0))
          & (normals[:, 2] >= fcfg.min_ground_normal_z))
    d = np.einsum("ij,ij->i", normals, means)

    for i, region in enumerate(regions):
        if ok[i]:
            region.plane_n = normals[i]
            region.plane_d = float(d[i])
            region.fitted = True
            report.regions_fitted += 1
        else:
            region.fit_failed_at = region.occupied_count
            report.planes_failed += 1

    # margin extraction runs over every live cube of the fitted regions
    good = ok[gid_all]
    gid_all, rows_cat, idx_cat, pts_all, zc_all = (
        a[good] for a in (gid_all, rows_cat, idx_cat, pts_all, zc_all))
    dist = np.abs(np.einsum("ij,ij->i", pts_all, normals[gid_all])
                  - d[gid_all])
    within = dist < fcfg.r_gro
    rows_cat, idx_cat, zc_all = (rows_cat[within], idx_cat[within],
                                 zc_all[within])
    map_._is_ground[rows_cat] = True
    map_.update_ground_samples(pack2(idx_cat[:, 0], idx_cat[:, 1]), zc_all)
    report.ground_cubes_added += int(len(rows_cat))


def r_gpe(map_: RHMap, points_world: np.ndarray,
          fcfg: FrontendConfig) -> GroundReport:
    """Run ground estimation for a freshly inserted scan.

    Only regions elected this scan and not yet fitted get a plane; fits
    on already-fitted regions are never repeated, and a failed fit is
    retried only after the region's cube population changes.
    """
    report = GroundReport()
    elected = elect_candidate_ground_regions(map_, points_world, fcfg)
    report.regions_elected = len(elected)
    pending = []
    for rkey in elected:
        region = map_.regions.get(rkey)
        if region is None or region.fitted:
            continue
        if region.fit_failed_at == region.occupied_count:
            report.planes_failed += 1
            continue
        pending.append(region)
    if pending:
        _batch_fit_and_extract(map_, pending, fcfg, report)
    return report
