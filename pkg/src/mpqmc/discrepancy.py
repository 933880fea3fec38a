"""Exact star discrepancy of small point sets.

The supremum over anchored boxes [0, b) of |fraction of points in box - volume|
is attained in the limit at upper corners drawn from the grid of point
coordinates (plus 1.0) along each axis.  At a grid corner the closed box
(coordinates <= corner) gives the largest excess count and the open box
(coordinates < corner) the largest deficit, so both are evaluated.

The sweep runs over the first axis and keeps cumulative counts over the grid
of the remaining axes, so the cost is O(n^2) in two dimensions and O(n^3) in
three.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TooLarge

# Largest point counts handled per dimension.
MAX_POINTS = {1: 1 << 22, 2: 1 << 16, 3: 1 << 10}


@dataclass(frozen=True)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("a point set needs at least one point")
        if np.any(pts < 0.0) or np.any(pts >= 1.0):
            raise ValueError("coordinates must lie in [0, 1)")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _as_points(ps) -> np.ndarray:
    return ps.points if isinstance(ps, PointSet) else PointSet(ps).points


def _grid(coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    grid = np.unique(np.append(coords, 1.0))
    return grid, np.searchsorted(grid, coords)


def _star_1d(x: np.ndarray) -> float:
    n = x.size
    grid, idx = _grid(x)
    closed = np.cumsum(np.bincount(idx, minlength=grid.size))
    opened = np.concatenate([[0], closed[:-1]])
    return max(np.max(closed / n - grid), np.max(grid - opened / n))


def _star_2d(pts: np.ndarray) -> float:
    n = pts.shape[0]
    gx, ix = _grid(pts[:, 0])
    gy, iy = _grid(pts[:, 1])
    order = np.argsort(ix, kind="stable")
    ix, iy = ix[order], iy[order]
    starts = np.searchsorted(ix, np.arange(gx.size + 1))
    # closed[b] = #points with x <= gx[a] and y <= gy[b], kept as floats
    closed = np.zeros(gy.size)
    frac = np.zeros(gy.size)
    prev = np.zeros(gy.size)
    vol = np.empty(gy.size)
    best = 0.0
    for a in range(gx.size):
        for b in iy[starts[a] : starts[a + 1]]:
            closed[b:] += 1.0
        np.multiply(gy, gx[a], out=vol)
        # open box: x < gx[a] and y < gy[b], i.e. the previous closed counts shifted
        best = max(best, vol[0], np.max(vol[1:] - prev[:-1]))
        np.multiply(closed, 1.0 / n, out=frac)
        best = max(best, np.max(frac - vol))
        prev, frac = frac, prev
    return float(best)


def _star_3d(pts: np.ndarray) -> float:
    n = pts.shape[0]
    gx, ix = _grid(pts[:, 0])
    gy, iy = _grid(pts[:, 1])
    gz, iz = _grid(pts[:, 2])
    order = np.argsort(ix, kind="stable")
    ix, iy, iz = ix[order], iy[order], iz[order]
    starts = np.searchsorted(ix, np.arange(gx.size + 1))
    closed = np.zeros((gy.size, gz.size))
    prev = np.zeros_like(closed)
    area = np.outer(gy, gz)
    best = 0.0
    for a in range(gx.size):
        for b, c in zip(iy[starts[a] : starts[a + 1]], iz[starts[a] : starts[a + 1]]):
            closed[b:, c:] += 1.0
        vol = gx[a] * area
        best = max(best, vol[0, :].max(), vol[:, 0].max(),
                   np.max(vol[1:, 1:] - prev[:-1, :-1]))
        frac = closed * (1.0 / n)
        best = max(best, np.max(frac - vol))
        prev = frac
    return float(best)


def star_discrepancy(ps) -> float:
    """Exact star discrepancy of a :class:`PointSet` (or an array of points)."""
    pts = _as_points(ps)
    n, dim = pts.shape
    if dim not in MAX_POINTS or n > MAX_POINTS[dim]:
        raise TooLarge(f"exact star discrepancy not available for n={n}, dim={dim}")
    if dim == 1:
        return float(_star_1d(pts[:, 0]))
    if dim == 2:
        return _star_2d(pts)
    return _star_3d(pts)


def overlapping_tuples(seq, d: int) -> PointSet:
    seq = np.asarray(seq, dtype=float)
    if d < 1 or seq.size < d:
        raise ValueError(f"need at least d={d} values, got {seq.size}")
    return PointSet(np.lib.stride_tricks.sliding_window_view(seq, d).copy())


def nonoverlapping_tuples(seq, d: int) -> PointSet:
    seq = np.asarray(seq, dtype=float)
    if d < 1 or seq.size < d:
        raise ValueError(f"need at least d={d} values, got {seq.size}")
    k = seq.size // d
    return PointSet(seq[: k * d].reshape(k, d))
