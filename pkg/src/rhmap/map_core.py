"""Two-layer region-wise hash map with occupancy and ground bookkeeping.

The map stores occupancy at cube resolution inside fixed-extent regions.
Cube state lives in flat parallel arrays; a sorted key array gives
vectorised batch lookup.  Per-region objects keep membership plus
min/max/mean height and an optional fitted ground plane.  Two 2D side
tables accompany the 3D table: ``H`` records per region-column height
extrema of occupied cubes and ``G`` records a running mean of ground
heights per global (cube-resolution) column.

Collisions of the paper-style modular hash are resolved by full-key
equality: region and cube keys are exact packed indexes, so two distinct
indexes can never alias each other.
"""

from __future__ import annotations

import numpy as np

from .config import MapConfig
from .indexing import (
    AXIS_MASK,
    cube_centers,
    pack2,
    pack3,
    point_to_indices,
    region_key_mask,
    unpack3,
)

_SIGN = 1 << 20


def _z_of_keys(keys: np.ndarray) -> np.ndarray:
    v = np.asarray(keys, dtype=np.int64) & AXIS_MASK
    return v - ((v & _SIGN) << 1)


class Region:
    """One (m+1)^3 block of cubes with summary statistics."""

    __slots__ = ("key", "rows", "z_min", "z_max", "z_sum", "occupied_count",
                 "plane_n", "plane_d", "fitted", "fit_failed_at")

    def __init__(self, key: int):
        self.key = key
        self.rows: list[int] = []
        self.z_min = np.inf
        self.z_max = -np.inf
        self.z_sum = 0.0
        self.occupied_count = 0
        self.plane_n: np.ndarray | None = None
        self.plane_d = 0.0
        self.fitted = False
        # occupied_count at the last failed plane fit; a retry is pointless
        # until the region gains or loses cubes
        self.fit_failed_at = -1

    @property
    def z_mean(self) -> float:
        return self.z_sum / self.occupied_count if self.occupied_count else np.nan


class RHMap:
    def __init__(self, config: MapConfig | None = None):
        self.config = (config or MapConfig()).validate()
        self._rmask = region_key_mask(self.config.mask_bits)
        self._n = 0
        cap = 1024
        self._keys = np.zeros(cap, dtype=np.int64)
        self._log_odds = np.zeros(cap, dtype=np.float64)
        self._is_ground = np.zeros(cap, dtype=bool)
        self._alive = np.zeros(cap, dtype=bool)
        self._skeys = np.empty(0, dtype=np.int64)
        self._srows = np.empty(0, dtype=np.int64)
        self.regions: dict[int, Region] = {}
        self._columns: dict[int, set[int]] = {}
        self._H: dict[int, list[float]] = {}
        self._h_dirty: set[int] = set()
        self._g_keys = np.empty(0, dtype=np.int64)
        self._g_sum = np.empty(0, dtype=np.float64)
        self._g_cnt = np.empty(0, dtype=np.int64)

    # ------------------------------------------------------------------ lookup

    def __len__(self):
        return int(self._alive[: self._n].sum())

    def lookup_rows(self, keys: np.ndarray):
        """Rows for packed cube keys; returns (rows, present, alive)."""
        keys = np.asarray(keys, dtype=np.int64)
        pos = np.searchsorted(self._skeys, keys)
        present = (pos < len(self._skeys))
        present[present] &= self._skeys[pos[present]] == keys[present]
        rows = np.full(keys.shape, -1, dtype=np.int64)
        rows[present] = self._srows[pos[present]]
        alive = np.zeros(keys.shape, dtype=bool)
        alive[present] = self._alive[rows[present]]
        return rows, present, alive

    def cube_state(self, gidx):
        """(log_odds, is_ground) of a global index, or None if absent."""
        key = pack3(gidx[0], gidx[1], gidx[2])
        rows, _, alive = self.lookup_rows(np.atleast_1d(key))
        if not alive[0]:
            return None
        row = rows[0]
        return float(self._log_odds[row]), bool(self._is_ground[row])

    # --------------------------------------------------------------- insertion

    def integrate_points(self, points_world: np.ndarray) -> int:
        """Integrate one hit per point; returns the newly occupied cube count."""
        if len(points_world) == 0:
            return 0
        gidx, _, _ = point_to_indices(points_world, self.config)
        return self.integrate_keys(pack3(gidx[:, 0], gidx[:, 1], gidx[:, 2]))

    def integrate_hit(self, gidx) -> tuple[float, bool]:
        """Single-cube hit update; returns the cube state after the update."""
        self.integrate_keys(np.atleast_1d(pack3(gidx[0], gidx[1], gidx[2])))
        return self.cube_state(gidx)

    def integrate_keys(self, keys: np.ndarray) -> int:
        cfg = self.config
        uk, counts = np.unique(keys, return_counts=True)
        rows, present, alive = self.lookup_rows(uk)

        live = present & alive
        if live.any():
            r = rows[live]
            self._log_odds[r] = np.clip(
                self._log_odds[r] + counts[live] * cfg.log_odds_hit,
                cfg.log_odds_clamp_lo, cfg.log_odds_clamp_hi)

        fresh = np.clip(counts * cfg.log_odds_hit,
                        cfg.log_odds_clamp_lo, cfg.log_odds_clamp_hi)

        # cubes removed earlier come back as fresh occupancy
        revive = present & ~alive
        if revive.any():
            r = rows[revive]
            self._log_odds[r] = fresh[revive]
            self._is_ground[r] = False
            self._alive[r] = True

        new = ~present
        n_new = int(new.sum())
        if n_new:
            self._ensure_capacity(self._n + n_new)
            new_rows = np.arange(self._n, self._n + n_new, dtype=np.int64)
            self._keys[new_rows] = uk[new]
            self._log_odds[new_rows] = fresh[new]
            self._is_ground[new_rows] = False
            self._alive[new_rows] = True
            self._n += n_new
            ins = np.searchsorted(self._skeys, uk[new])
            self._skeys = np.insert(self._skeys, ins, uk[new])
            self._srows = np.insert(self._srows, ins, new_rows)
        else:
            new_rows = np.empty(0, dtype=np.int64)

        occ_keys = np.concatenate([uk[new], uk[revive]])
        occ_rows = np.concatenate([new_rows, rows[revive]])
        self._register_occupied(occ_keys, occ_rows)
        return len(occ_keys)

    def _ensure_capacity(self, need: int):
        cap = len(self._keys)
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        for name in ("_keys", "_log_odds", "_is_ground", "_alive"):
            arr = getattr(self, name)
            grown = np.zeros(cap, dtype=arr.dtype)
            grown[: self._n] = arr[: self._n]
            setattr(self, name, grown)

    def _register_occupied(self, keys: np.ndarray, rows: np.ndarray):
        """Fold newly occupied cubes into region stats, H and the column table."""
        if len(keys) == 0:
            return
        rkeys = keys & self._rmask
        order = np.argsort(rkeys, kind="stable")
        rkeys, keys, rows = rkeys[order], keys[order], rows[order]
        zc = (_z_of_keys(keys) + 0.5) * self.config.cube_size
        starts = np.concatenate([[0], np.flatnonzero(rkeys[1:] != rkeys[:-1]) + 1,
                                 [len(rkeys)]])
        seg = starts[:-1]
        ridx = unpack3(rkeys[seg])
        col_keys = pack2(ridx[:, 0], ridx[:, 1]).tolist()
        seg_lo = np.minimum.reduceat(zc, seg).tolist()
        seg_hi = np.maximum.reduceat(zc, seg).tolist()
        seg_sum = np.add.reduceat(zc, seg).tolist()
        seg_keys = rkeys[seg].tolist()
        rows_list = rows.tolist()
        for i, rkey in enumerate(seg_keys):
            a, b = starts[i], starts[i + 1]
            col = col_keys[i]
            region = self.regions.get(rkey)
            if region is None:
                region = Region(rkey)
                self.regions[rkey] = region
                self._columns.setdefault(col, set()).add(rkey)
            region.rows.extend(rows_list[a:b])
            lo, hi = seg_lo[i], seg_hi[i]
            region.occupied_count += b - a
            region.z_sum += seg_sum[i]
            region.z_min = min(region.z_min, lo)
            region.z_max = max(region.z_max, hi)
            entry = self._H.get(col)
            if entry is None:
                self._H[col] = [lo, hi]
            else:
                entry[0] = min(entry[0], lo)
                entry[1] = max(entry[1], hi)

    # ---------------------------------------------------------------- removal

    def remove_region_nonground(self, region_key: int) -> int:
        """Delete every non-ground cube of a region; returns the removed count."""
        region = self.regions.get(region_key)
        if region is None:
            return 0
        rows = np.asarray(region.rows, dtype=np.int64)
        rows = rows[self._alive[rows]]
        ground = self._is_ground[rows]
        doomed = rows[~ground]
        if len(doomed) == 0:
            return 0
        self._alive[doomed] = False
        keep = rows[ground]
        col = int(region_key) >> 21  # drop the z axis of the packed key
        if len(keep) == 0:
            del self.regions[region_key]
            members = self._columns.get(col)
            if members is not None:
                members.discard(region_key)
                if not members:
                    del self._columns[col]
        else:
            region.rows = keep.tolist()
            zc = (_z_of_keys(self._keys[keep]) + 0.5) * self.config.cube_size
            region.occupied_count = len(keep)
            region.z_sum = float(zc.sum())
            region.z_min = float(zc.min())
            region.z_max = float(zc.max())
        self._h_dirty.add(col)
        return int(len(doomed))

    # ----------------------------------------------------------- column table

    def column_band(self, col_key: int):
        """(min, max) occupied-cube z-centers of a region column, or None."""
        col_key = int(col_key)
        if col_key in self._h_dirty:
            self._rescan_column(col_key)
        entry = self._H.get(col_key)
        return (entry[0], entry[1]) if entry is not None else None

    def column_occupied(self, col_key: int) -> bool:
        return int(col_key) in self._columns

    def column_regions(self, col_key: int) -> list[int]:
        return sorted(self._columns.get(int(col_key), ()))

    def _rescan_column(self, col_key: int):
        self._h_dirty.discard(col_key)
        zs = []
        for rkey in self._columns.get(col_key, ()):
            rows = np.asarray(self.regions[rkey].rows, dtype=np.int64)
            rows = rows[self._alive[rows]]
            rows = rows[self._log_odds[rows] > self.config.occupied_threshold]
            if len(rows):
                zs.append((_z_of_keys(self._keys[rows]) + 0.5) * self.config.cube_size)
        if zs:
            allz = np.concatenate(zs)
            self._H[col_key] = [float(allz.min()), float(allz.max())]
        else:
            self._H.pop(col_key, None)

    # ------------------------------------------------------------ ground table

    def update_ground_mean(self, oidx, z: float):
        """Fold one ground height sample into G at a 2D global index."""
        if not np.isfinite(z):
            raise ValueError("non-finite ground sample")
        self.update_ground_samples(np.atleast_1d(pack2(oidx[0], oidx[1])),
                                   np.atleast_1d(np.float64(z)))

    def update_ground_samples(self, okeys: np.ndarray, zs: np.ndarray):
        if len(okeys) == 0:
            return
        uk, inv = np.unique(np.asarray(okeys, dtype=np.int64), return_inverse=True)
        sums = np.zeros(len(uk))
        np.add.at(sums, inv, np.asarray(zs, dtype=np.float64))
        cnts = np.bincount(inv, minlength=len(uk)).astype(np.int64)
        pos = np.searchsorted(self._g_keys, uk)
        present = pos < len(self._g_keys)
        present[present] &= self._g_keys[pos[present]] == uk[present]
        self._g_sum[pos[present]] += sums[present]
        self._g_cnt[pos[present]] += cnts[present]
        if (~present).any():
            ins = np.searchsorted(self._g_keys, uk[~present])
            self._g_keys = np.insert(self._g_keys, ins, uk[~present])
            self._g_sum = np.insert(self._g_sum, ins, sums[~present])
            self._g_cnt = np.insert(self._g_cnt, ins, cnts[~present])

    def ground_mean(self, okeys: np.ndarray):
        """Per-key running ground mean; returns (mean, found) arrays."""
        okeys = np.asarray(okeys, dtype=np.int64)
        pos = np.searchsorted(self._g_keys, okeys)
        found = pos < len(self._g_keys)
        found[found] &= self._g_keys[pos[found]] == okeys[found]
        mean = np.full(okeys.shape, np.nan)
        mean[found] = self._g_sum[pos[found]] / self._g_cnt[pos[found]]
        return mean, found

    def ground_entry(self, oidx):
        mean, found = self.ground_mean(np.atleast_1d(pack2(oidx[0], oidx[1])))
        return float(mean[0]) if found[0] else None

    # ------------------------------------------------------------------ export

    def occupied_mask(self) -> np.ndarray:
        return self._alive[: self._n] & (
            self._log_odds[: self._n] > self.config.occupied_threshold)

    def occupied_keys(self) -> np.ndarray:
        """Sorted packed keys of occupied cubes."""
        return np.sort(self._keys[: self._n][self.occupied_mask()])

    def export_occupied_points(self):
        """Occupied cube centers sorted by region then cube key.

        Returns (points (N, 3), is_ground (N,)).
        """
        mask = self.occupied_mask()
        keys = self._keys[: self._n][mask]
        ground = self._is_ground[: self._n][mask]
        order = np.lexsort((keys, keys & self._rmask))
        keys, ground = keys[order], ground[order]
        return cube_centers(keys, self.config.cube_size), ground

    # ------------------------------------------------------------- region info

    def region_block_z(self, region_key: int) -> tuple[float, float]:
        """z extent (meters) of a region's cube block."""
        ridx = unpack3(np.int64(region_key))
        lo = float(ridx[2]) * self.config.cube_size
        return lo, lo + self.config.region_size

    def region_cube_indices(self, region: Region) -> tuple[np.ndarray, np.ndarray]:
        """(global indexes (N, 3), rows) of a region's live cubes."""
        rows = np.asarray(region.rows, dtype=np.int64)
        rows = rows[self._alive[rows]]
        return unpack3(self._keys[rows]), rows
