"""Signed integer cube indexing, packed 64-bit keys and the spatial hash.

A point is quantised to a global cube index ``I = floor(p / cube_size)``
per axis.  Applying the per-axis binary mask ``m = 2^mask_bits - 1`` splits
``I`` into a region index ``I_r = I & ~m`` and a cube-local index
``I_c = I & m``; the two concatenate back to ``I``.  All bit operations use
two's-complement semantics so negative coordinates group correctly
(e.g. m=7: I=-1 lives in region -8 with local offset 7).

Indexes are packed into a single int64 key with 21 bits per axis, which
keeps region extraction a single AND on the packed value.
"""

from __future__ import annotations

import numpy as np

AXIS_BITS = 21
AXIS_MASK = (1 << AXIS_BITS) - 1
_SIGN = 1 << (AXIS_BITS - 1)
_U64 = (1 << 64) - 1


def pack3(ix, iy, iz) -> np.ndarray:
    """Pack per-axis indexes into int64 keys (21 bits per axis)."""
    ix = np.asarray(ix, dtype=np.int64)
    iy = np.asarray(iy, dtype=np.int64)
    iz = np.asarray(iz, dtype=np.int64)
    return ((ix & AXIS_MASK) << 42) | ((iy & AXIS_MASK) << 21) | (iz & AXIS_MASK)


def unpack3(key) -> np.ndarray:
    """Inverse of :func:`pack3`; returns an (..., 3) int64 array."""
    key = np.asarray(key, dtype=np.int64)
    out = np.empty(key.shape + (3,), dtype=np.int64)
    for axis, shift in enumerate((42, 21, 0)):
        v = (key >> shift) & AXIS_MASK
        out[..., axis] = v - ((v & _SIGN) << 1)
    return out


def pack2(ix, iy) -> np.ndarray:
    """Pack a 2D (x, y) index into an int64 key."""
    ix = np.asarray(ix, dtype=np.int64)
    iy = np.asarray(iy, dtype=np.int64)
    return ((ix & AXIS_MASK) << 21) | (iy & AXIS_MASK)


def unpack2(key) -> np.ndarray:
    key = np.asarray(key, dtype=np.int64)
    out = np.empty(key.shape + (2,), dtype=np.int64)
    for axis, shift in enumerate((21, 0)):
        v = (key >> shift) & AXIS_MASK
        out[..., axis] = v - ((v & _SIGN) << 1)
    return out


def cube_local_key_mask(mask_bits: int) -> int:
    m = (1 << mask_bits) - 1
    return (m << 42) | (m << 21) | m


def region_key_mask(mask_bits: int) -> int:
    """AND with a packed key to obtain the packed region key."""
    return ~cube_local_key_mask(mask_bits)


def column_of_key(key, mask_bits: int) -> np.ndarray:
    """2D region-column key (x_r, y_r) of a packed 3D key."""
    idx = unpack3(key)
    m = (1 << mask_bits) - 1
    return pack2(idx[..., 0] & ~m, idx[..., 1] & ~m)


def point_to_indices(points, cfg):
    """Quantise points (meters) to (global, region, cube-local) indexes.

    ``points`` is a (3,) or (N, 3) float array; the three returned arrays
    have matching shape.  Non-finite coordinates are rejected.
    """
    p = np.asarray(points, dtype=np.float64)
    if not np.isfinite(p).all():
        raise ValueError("non-finite point coordinate")
    gidx = np.floor(p / cfg.cube_size).astype(np.int64)
    m = cfg.mask
    return gidx, gidx & ~m, gidx & m


def hash_index(idx, cfg) -> int:
    """Bucket of an index triple under the prime-xor spatial hash.

    Signed coordinates map through their two's-complement 64-bit pattern;
    products wrap mod 2^64 before the xor and the final mod table_size.
    """
    idx = np.asarray(idx, dtype=np.int64).reshape(3)
    primes = (cfg.hash_prime_x, cfg.hash_prime_y, cfg.hash_prime_z)
    acc = 0
    for v, prime in zip(idx.tolist(), primes):
        acc ^= ((v & _U64) * prime) & _U64
    return acc % cfg.table_size


def cube_centers(keys, cube_size: float) -> np.ndarray:
    """World-frame centers of packed cube keys, shape (N, 3)."""
    return (unpack3(keys) + 0.5) * cube_size
