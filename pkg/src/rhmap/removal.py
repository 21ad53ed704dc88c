"""Scan-to-map removal: height-band descriptors, ratio tests and deletion.

The current scan is summarised per region column (2D context) and per
region (3D context built from occlusion-bounded points).  Columns whose
scan height band shrinks well below the map's recorded band, and regions
whose band shrinks below their map region's band, are flagged dynamic
and stripped of their non-ground cubes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import FrontendConfig
from .geometry import Pose, Scan, transform_scan
from .indexing import pack2, pack3, unpack3
from .map_core import RHMap
from .range_image import (RangeImage, build_range_image, extract_max_ring,
                          extract_sup_inf)


@dataclass
class Ctx2DEntry:
    z_max: float
    z_min: float
    has_max_ring: bool
    count: int = 1


@dataclass
class ScanContext2D:
    entries: dict[int, Ctx2DEntry] = field(default_factory=dict)


@dataclass
class Ctx3DEntry:
    z_max: float
    z_min: float
    sup: float
    inf: float


@dataclass
class ScanContext3D:
    entries: dict[int, Ctx3DEntry] = field(default_factory=dict)


@dataclass
class RemovalReport:
    columns_flagged: int = 0
    regions_flagged: int = 0
    cubes_removed: int = 0
    ground_cubes_added: int = 0
    elapsed_ms: float = 0.0


def _group_extrema(keys: np.ndarray, z: np.ndarray):
    order = np.argsort(keys, kind="stable")
    ks, zs = keys[order], z[order]
    starts = np.concatenate([[0], np.flatnonzero(ks[1:] != ks[:-1]) + 1])
    uk = ks[starts]
    zmax = np.maximum.reduceat(zs, starts)
    zmin = np.minimum.reduceat(zs, starts)
    inv = np.empty(len(keys), dtype=np.int64)
    inv[order] = np.searchsorted(uk, ks)
    return uk, zmax, zmin, inv


def build_scan_context_2d(points_roi_w: np.ndarray, max_ring_w: np.ndarray,
                          cfg) -> ScanContext2D:
    """Per region-column height extrema of the scan, with max-ring flags."""
    ctx = ScanContext2D()
    if len(points_roi_w) == 0:
        return ctx
    m = cfg.mask
    gidx = np.floor(points_roi_w / cfg.cube_size).astype(np.int64)
    keys = pack2(gidx[:, 0] & ~m, gidx[:, 1] & ~m)
    uk, zmax, zmin, inv = _group_extrema(keys, points_roi_w[:, 2])
    counts = np.bincount(inv, minlength=len(uk))
    max_cols = set()
    if len(max_ring_w):
        midx = np.floor(max_ring_w / cfg.cube_size).astype(np.int64)
        max_cols = set(pack2(midx[:, 0] & ~m, midx[:, 1] & ~m).tolist())
    for i, k in enumerate(uk.tolist()):
        ctx.entries[k] = Ctx2DEntry(float(zmax[i]), float(zmin[i]),
                                    k in max_cols, int(counts[i]))
    return ctx


def compute_ratio1(ctx: ScanContext2D, map_: RHMap, col_key: int,
                   eps_div: float = 1e-6) -> float:
    """Scan-to-map height band ratio of one region column.

    Missing map columns and degenerate denominators yield 1 (no removal);
    a max-ring column compares against the scan's own top instead of the
    map's, discounting structure beyond the sensor's reach.
    """
    band = map_.column_band(col_key)
    if band is None:
        return 1.0
    entry = ctx.entries[col_key]
    dh = entry.z_max - entry.z_min
    denom = (entry.z_max - band[0]) if entry.has_max_ring else (band[1] - band[0])
    if denom < eps_div:
        return 1.0
    return dh / denom


def _flag_columns(ctx: ScanContext2D, map_: RHMap,
                  fcfg: FrontendConfig) -> list[int]:
    """Columns failing the 2D ratio test, computed in bulk.

    Equivalent to filtering :func:`compute_ratio1` per column, with the
    extra gate that a column needs at least ``min_flag_points`` scan
    points before it may flag.
    """
    if not ctx.entries:
        return []
    cols = np.fromiter(ctx.entries.keys(), dtype=np.int64,
                       count=len(ctx.entries))
    entries = list(ctx.entries.values())
    counts = np.array([e.count for e in entries])
    zmax = np.array([e.z_max for e in entries])
    zmin = np.array([e.z_min for e in entries])
    ring = np.array([e.has_max_ring for e in entries])
    bands = [map_.column_band(k) for k in cols.tolist()]
    known = np.array([b is not None for b in bands])
    bmin = np.array([b[0] if b is not None else 0.0 for b in bands])
    bmax = np.array([b[1] if b is not None else 0.0 for b in bands])

    denom = np.where(ring, zmax - bmin, bmax - bmin)
    safe = known & (denom >= fcfg.eps_div)
    ratio = np.ones(len(cols))
    ratio[safe] = (zmax - zmin)[safe] / denom[safe]
    flagged = (counts >= fcfg.min_flag_points) & (ratio < fcfg.delta1)
    return np.sort(cols[flagged]).tolist()


def build_scan_context_3d(sup_w: np.ndarray, sup_heights: np.ndarray,
                          inf_w: np.ndarray, inf_heights: np.ndarray,
                          cfg) -> ScanContext3D:
    """Per-region extrema plus occlusion bounds of the sup/inf point sets.

    ``sup`` is the minimum upper bound over the region's sup points and
    ``inf`` the maximum lower bound over its inf points; both default to
    the region's own height extrema when one side is absent.
    """
    ctx = ScanContext3D()
    pts = np.concatenate([sup_w, inf_w]) if len(sup_w) or len(inf_w) else sup_w
    if len(pts) == 0:
        return ctx
    m = cfg.mask
    gidx = np.floor(pts / cfg.cube_size).astype(np.int64)
    ridx = gidx & np.int64(~m)
    keys = pack3(ridx[:, 0], ridx[:, 1], ridx[:, 2])
    uk, zmax, zmin, inv = _group_extrema(keys, pts[:, 2])

    def _bound(gids, vals, base, reduce_min):
        out = base.copy()
        if len(gids) == 0:
            return out
        order = np.argsort(gids, kind="stable")
        g, v = gids[order], vals[order]
        starts = np.concatenate([[0], np.flatnonzero(g[1:] != g[:-1]) + 1])
        agg = (np.minimum if reduce_min else np.maximum).reduceat(v, starts)
        target = g[starts]
        if reduce_min:
            out[target] = np.minimum(out[target], agg)
        else:
            out[target] = np.maximum(out[target], agg)
        return out

    n_sup = len(sup_w)
    sup = _bound(inv[:n_sup], np.asarray(sup_heights, dtype=np.float64),
                 zmax, reduce_min=True)
    inf = _bound(inv[n_sup:], np.asarray(inf_heights, dtype=np.float64),
                 zmin, reduce_min=False)

    for i, k in enumerate(uk.tolist()):
        ctx.entries[k] = Ctx3DEntry(float(zmax[i]), float(zmin[i]),
                                    float(sup[i]), float(inf[i]))
    return ctx


def select_candidate_regions(ctx: ScanContext3D, map_: RHMap) -> list[int]:
    """Map regions whose z block intersects a context entry's [inf, sup]."""
    if not ctx.entries:
        return []
    ckeys = np.fromiter(ctx.entries.keys(), dtype=np.int64,
                        count=len(ctx.entries))
    cxy = unpack3(ckeys)
    cols = pack2(cxy[:, 0], cxy[:, 1])
    mkeys, sup, inf = [], [], []
    for i, col in enumerate(cols.tolist()):
        members = map_._columns.get(col)
        if not members:
            continue
        entry = ctx.entries[int(ckeys[i])]
        mkeys.extend(members)
        sup.extend([entry.sup] * len(members))
        inf.extend([entry.inf] * len(members))
    if not mkeys:
        return []
    mkeys = np.array(mkeys, dtype=np.int64)
    lo = unpack3(mkeys)[:, 2] * map_.config.cube_size
    hi = lo + map_.config.region_size
    keep = (lo <= np.array(sup)) & (hi >= np.array(inf))
    return np.unique(mkeys[keep]).tolist()


def compute_ratio2(ctx: ScanContext3D, map_: RHMap, region_key: int,
                   eps_div: float = 1e-6) -> float:
    """Scan-to-map band ratio of one candidate region; unobserved -> 0."""
    entry = ctx.entries.get(region_key)
    if entry is None:
        return 0.0
    region = map_.regions[region_key]
    denom = region.z_max - region.z_min
    if denom < eps_div:
        return 1.0
    return (entry.z_max - entry.z_min) / denom


def s2m_removal(map_: RHMap, scan: Scan, pose: Pose, fcfg: FrontendConfig,
                image: RangeImage | None = None) -> RemovalReport:
    """Full scan-to-map removal pass for one posed scan.

    Flags columns by the 2D ratio test and regions by the 3D one, then
    strips non-ground cubes from every flagged region and from all
    regions of flagged columns.  Ground cubes are never deleted.
    """
    t0 = time.perf_counter()
    report = RemovalReport()
    if len(scan) == 0:
        return report

    if image is None:
        image = build_range_image(scan.points, fcfg.image_rows,
                                  fcfg.image_cols, fcfg.fov)
    max_ids = extract_max_ring(image)
    sup_ids, sup_bounds, inf_ids, inf_bounds = extract_sup_inf(
        image, fcfg.r1, fcfg.r2, fcfg.max_search, fcfg.signed_jump)

    pw = transform_scan(scan, pose)
    roi = pw[image.in_fov]
    ctx2 = build_scan_context_2d(roi, pw[max_ids], map_.config)

    flagged_cols = _flag_columns(ctx2, map_, fcfg)
    report.columns_flagged = len(flagged_cols)

    ctx3 = build_scan_context_3d(pw[sup_ids], pw[sup_bounds][:, 2],
                                 pw[inf_ids], pw[inf_bounds][:, 2], map_.config)
    candidates = select_candidate_regions(ctx3, map_)
    flagged_regions = {k for k in candidates
                       if compute_ratio2(ctx3, map_, k, fcfg.eps_div) < fcfg.delta2}
    report.regions_flagged = len(flagged_regions)

    for col in flagged_cols:
        flagged_regions.update(map_.column_regions(col))
    removed = 0
    for rkey in sorted(flagged_regions):
        removed += map_.remove_region_nonground(rkey)
    report.cubes_removed = removed
    report.elapsed_ms = (time.perf_counter() - t0) * 1e3
    return report
