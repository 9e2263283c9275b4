"""Enumeration helpers: simplex grids and guarded Cartesian products."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .exceptions import EnumerationCapError


def simplex_grid_size(k, resolution):
    return math.comb(resolution + k - 1, k - 1)


def simplex_grid(k, resolution):
    """All points of the ``k``-simplex whose coordinates are multiples of ``1/resolution``.

    Rows are ordered lexicographically by their first coordinate descending,
    so the vertex ``e_0`` comes first.
    """
    if k < 1 or resolution < 1:
        raise ValueError("simplex_grid needs k >= 1 and resolution >= 1")
    if k == 1:
        return np.ones((1, 1))
    rows = []
    # stars and bars: choose k-1 bar positions among resolution+k-1 slots
    for bars in itertools.combinations(range(resolution + k - 1), k - 1):
        prev = -1
        parts = []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(resolution + k - 2 - prev)
        rows.append(parts)
    return np.array(rows, dtype=float) / resolution


def guarded_product_size(sizes, what, cap):
    total = 1
    for n in sizes:
        total *= int(n)
        if total > cap:
            raise EnumerationCapError(what, _full_product(sizes), cap)
    return total


def _full_product(sizes):
    total = 1
    for n in sizes:
        total *= int(n)
    return total


def dedup_rows(points, decimals=12):
    """Drop duplicate rows (after rounding), keeping first occurrences in order."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] <= 1:
        return pts
    flat = np.round(pts.reshape(pts.shape[0], -1), decimals) + 0.0
    _, idx = np.unique(flat, axis=0, return_index=True)
    return pts[np.sort(idx)]
