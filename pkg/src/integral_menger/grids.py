"""Symmetric lattice grids ``h * Z^m`` restricted to a disc or a box."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError


class LatticeGrid:
    """A finite subset of the lattice ``h * Z^m``.

    Nodes are stored as integer multi-indices; ``lookup`` is a dense array over
    the bounding box ``[-K, K]^m`` holding the node number or -1, which makes
    shifted-grid operations (differences, midpoints) plain slicing.
    """

    def __init__(self, index, h: float, shape: str = "points", extent: float | None = None):
        index = np.asarray(index, dtype=np.int64)
        if index.ndim != 2 or index.shape[0] == 0:
            raise InvalidInputError("grid needs a nonempty (N, m) integer index array")
        if not h > 0:
            raise InvalidInputError("grid spacing must be positive")
        self.index = index
        self.index.setflags(write=False)
        self.h = float(h)
        self.m = index.shape[1]
        self.shape = shape
        self.K = int(np.abs(index).max()) if index.size else 0
        self.extent = float(extent) if extent is not None else self.K * self.h
        side = 2 * self.K + 1
        self.lookup = np.full((side,) * self.m, -1, dtype=np.int64)
        pos = tuple((index + self.K).T)
        if len(np.unique(index, axis=0)) != len(index):
            raise InvalidInputError("duplicate grid nodes")
        self.lookup[pos] = np.arange(len(index))

    @classmethod
    def disc(cls, m: int, delta: float, h: float) -> "LatticeGrid":
        """Lattice nodes in the closed disc of radius ``delta``."""
        if m < 1:
            raise InvalidInputError("grid dimension must be >= 1")
        if not (delta > 0 and h > 0):
            raise InvalidInputError("disc radius and spacing must be positive")
        K = int(np.floor(delta / h + 1e-9))
        axes = [np.arange(-K, K + 1)] * m
        idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        r2 = (idx.astype(float) * h) ** 2
        keep = r2.sum(axis=1) <= delta**2 * (1 + 1e-12)
        return cls(idx[keep], h, shape="disc", extent=delta)

    @classmethod
    def box(cls, m: int, half_width: float, h: float) -> "LatticeGrid":
        """Lattice nodes in the cube ``[-half_width, half_width]^m``."""
        K = int(np.floor(half_width / h + 1e-9))
        axes = [np.arange(-K, K + 1)] * m
        idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        return cls(idx, h, shape="box", extent=half_width)

    @classmethod
    def from_coords(cls, coords, h: float, atol: float = 1e-6) -> "LatticeGrid":
        """Recover integer indices from node coordinates lying on ``h * Z^m``."""
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        idx = np.rint(coords / h)
        if np.max(np.abs(idx * h - coords), initial=0.0) > atol * max(h, 1.0):
            raise InvalidInputError("coordinates are not on the lattice h*Z^m")
        return cls(idx.astype(np.int64), h, shape="points")

    def __len__(self):
        return len(self.index)

    @property
    def coords(self) -> np.ndarray:
        return self.index * self.h

    @property
    def is_symmetric(self) -> bool:
        neg = tuple((-self.index + self.K).T)
        return bool(np.all(self.lookup[neg] >= 0))

    def contains(self, idx) -> np.ndarray:
        """Mask of rows of ``idx`` (integer multi-indices) that are grid nodes."""
        idx = np.atleast_2d(idx)
        inside = np.all(np.abs(idx) <= self.K, axis=1)
        out = np.zeros(len(idx), dtype=bool)
        pos = tuple((idx[inside] + self.K).T)
        out[inside] = self.lookup[pos] >= 0
        return out

    def node_of(self, idx) -> np.ndarray:
        """Node numbers for integer multi-indices, -1 where absent."""
        idx = np.atleast_2d(idx)
        inside = np.all(np.abs(idx) <= self.K, axis=1)
        out = np.full(len(idx), -1, dtype=np.int64)
        out[inside] = self.lookup[tuple((idx[inside] + self.K).T)]
        return out

    def dense(self, values: np.ndarray, fill=np.nan) -> np.ndarray:
        """Scatter per-node ``values`` (N, ...) onto the bounding box."""
        values = np.asarray(values, dtype=float)
        side = 2 * self.K + 1
        out = np.full((side,) * self.m + values.shape[1:], fill, dtype=float)
        out[tuple((self.index + self.K).T)] = values
        return out

    def offsets(self, max_norm: int | None = None) -> np.ndarray:
        """All nonzero integer offsets within the box ``[-2K, 2K]^m``."""
        L = 2 * self.K if max_norm is None else max_norm
        axes = [np.arange(-L, L + 1)] * self.m
        off = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.m)
        return off[np.any(off != 0, axis=1)]


def _shift_slices(offset, side):
    """Slices (src, dst) of a box axis of length ``side`` with dst = src + offset."""
    src, dst = [], []
    for d in offset:
        lo, hi = max(0, -d), min(side, side - d)
        src.append(slice(lo, hi))
        dst.append(slice(lo + d, hi + d))
    return tuple(src), tuple(dst)


def _half_offsets(grid: LatticeGrid, reach: int) -> np.ndarray:
    """Nonzero offsets in ``[-reach, reach]^m`` that are lexicographically positive."""
    off = grid.offsets(reach)
    first = np.argmax(off != 0, axis=1)
    lead = off[np.arange(len(off)), first]
    return off[lead > 0]


def first_difference_sum(grid: LatticeGrid, values, p: float, kernel) -> float:
    """``sum_{x != y} |g(y) - g(x)|^p * kernel(|y - x|)`` over ordered node pairs.

    ``values`` is ``(N,)`` or ``(N, d)``; ``|.|`` is the Euclidean norm over
    the trailing components. ``kernel`` maps an array of distances to weights.
    """
    vals = np.asarray(values, dtype=float).reshape(len(grid), -1)
    dense = grid.dense(vals)
    side = 2 * grid.K + 1
    total = 0.0
    for off in _half_offsets(grid, 2 * grid.K):
        src, dst = _shift_slices(off, side)
        diff = dense[dst] - dense[src]
        norm = np.sqrt(np.einsum("...c,...c->...", diff, diff))
        ok = ~np.isnan(norm)
        if not np.any(ok):
            continue
        # offsets d and -d visit the same unordered pairs
        total += 2.0 * float(np.sum(norm[ok] ** p)) * float(kernel(np.linalg.norm(off) * grid.h))
    return total


def second_difference_sum(grid: LatticeGrid, values, p: float, kernel) -> float:
    """``sum_{c, w != 0} |g(c + w) - 2 g(c) + g(c - w)|^p * kernel(|w|)``.

    Only centres ``c`` with both ``c + w`` and ``c - w`` on the grid contribute.
    """
    vals = np.asarray(values, dtype=float).reshape(len(grid), -1)
    dense = grid.dense(vals)
    side = 2 * grid.K + 1
    total = 0.0
    for off in _half_offsets(grid, grid.K):
        centre = tuple(slice(abs(d), side - abs(d)) for d in off)
        plus = tuple(slice(abs(d) + d, side - abs(d) + d) for d in off)
        minus = tuple(slice(abs(d) - d, side - abs(d) - d) for d in off)
        if any(s.start >= s.stop for s in centre):
            continue
        diff = dense[plus] - 2.0 * dense[centre] + dense[minus]
        norm = np.sqrt(np.einsum("...c,...c->...", diff, diff))
        ok = ~np.isnan(norm)
        if not np.any(ok):
            continue
        # w and -w give the same second difference
        total += 2.0 * float(np.sum(norm[ok] ** p)) * float(kernel(np.linalg.norm(off) * grid.h))
    return total
