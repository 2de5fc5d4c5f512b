"""Finite-dimensional geometry of point tuples.

Scalar entry points (``wedge_norm``, ``simplex_volume``, ``discrete_curvature``
and friends) accept any array-like of shape ``(k, n)``.  The ``batch_*``
variants take stacked tuples of shape ``(B, k, n)`` and are what the energy
estimators call in their inner loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalDegeneracyError

__all__ = [
    "PointTuple",
    "wedge_norm",
    "simplex_volume",
    "cayley_menger_volume",
    "diameter",
    "menger_curvature",
    "discrete_curvature",
    "unit_ball_volume",
    "batch_gram_volume",
    "batch_simplex_volume",
    "batch_diameter",
    "batch_discrete_curvature",
    "batch_menger_curvature",
    "gather_vertices",
    "sq_diameter",
    "vertex_discrete_curvature",
    "vertex_menger_curvature",
]

# relative size below which a Gram determinant is treated as an exact zero
GRAM_CLAMP = 1e-14
# diameters outside this range are rescaled to 1 before taking powers
_SAFE_LO, _SAFE_HI = 1e-60, 1e60


@dataclass(frozen=True)
class PointTuple:
    """An ordered tuple of ``k`` points in ``R^n``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise InvalidInputError(f"expected a (k, n) array of points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.k


def _as_points(tup) -> np.ndarray:
    if isinstance(tup, PointTuple):
        return tup.points
    try:
        return PointTuple(tup).points
    except ValueError as exc:
        # ragged input (points of different dimension) lands here
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"points must share one ambient dimension: {exc}") from None


def wedge_norm(vectors) -> float:
    """Length of ``w_1 ^ ... ^ w_l``, i.e. the volume of the spanned parallelotope.

    Equal to ``sqrt(det(W W^T))`` and to the root of the summed squared
    l-minors (Cauchy-Binet); evaluated by Gram-Schmidt, see ``_edge_volume``.
    """
    w = _as_points(vectors)
    l, n = w.shape
    if l > n:
        return 0.0
    return float(_edge_volume(_vertices(w[None]))[0])


def simplex_volume(tup) -> float:
    """d-dimensional volume of the convex hull of ``d + 1`` points.

    Uses the factorial normalisation ``|e_1 ^ ... ^ e_d| / d!`` with edges
    taken from vertex 0. Affinely dependent input gives 0.
    """
    pts = _as_points(tup)
    d = pts.shape[0] - 1
    if d == 0:
        return 0.0
    if d > pts.shape[1]:
        raise InvalidInputError(f"{d + 1} points cannot span a {d}-simplex in R^{pts.shape[1]}")
    return wedge_norm(pts[1:] - pts[0]) / math.factorial(d)


def cayley_menger_volume(tup, rtol: float = 1e-9) -> float:
    """Simplex volume from pairwise squared distances only.

    Independent cross-check of :func:`simplex_volume`. Distances are
    normalised by the largest one before forming the bordered determinant so
    its entries stay O(1).

    Raises
    ------
    NumericalDegeneracyError
        If the signed squared volume is negative beyond ``rtol`` (relative to
        ``diam^(2d)``).
    """
    pts = _as_points(tup)
    d = pts.shape[0] - 1
    if d == 0:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    scale = sq.max()
    if scale == 0.0:
        return 0.0
    cm = np.ones((d + 2, d + 2))
    cm[0, 0] = 0.0
    cm[1:, 1:] = sq / scale
    vol2 = (-1) ** (d + 1) * np.linalg.det(cm) / (2**d * math.factorial(d) ** 2)
    if vol2 < 0.0:
        if vol2 < -rtol:
            raise NumericalDegeneracyError(
                f"Cayley-Menger determinant gives negative squared volume {vol2:.3e}"
            )
        return 0.0
    return float(math.sqrt(vol2) * scale ** (d / 2))


def diameter(tup) -> float:
    """Largest pairwise Euclidean distance; 0 for a single point."""
    pts = _as_points(tup)
    if pts.shape[0] < 2:
        return 0.0
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max()))


def menger_curvature(x, y, z) -> float:
    """Reciprocal circumradius ``4 Area / (|x-y| |y-z| |z-x|)``.

    Zero when two points coincide or the triple is collinear.
    """
    pts = _as_points([np.ravel(x), np.ravel(y), np.ravel(z)])
    return float(batch_menger_curvature(pts[None])[0])


def discrete_curvature(tup) -> float:
    """``H^{m+1}(simplex) / diam^{m+2}`` for a tuple of ``m + 2`` points.

    Defined as 0 when the diameter vanishes.
    """
    pts = _as_points(tup)
    if pts.shape[0] < 2:
        raise InvalidInputError("discrete curvature needs at least two points")
    if pts.shape[0] - 1 > pts.shape[1]:
        raise InvalidInputError(
            f"{pts.shape[0]} points need ambient dimension >= {pts.shape[0] - 1}"
        )
    return float(batch_discrete_curvature(pts[None])[0])


def unit_ball_volume(d: int) -> float:
    """Lebesgue measure of the unit ball in ``R^d``."""
    if d < 0:
        raise InvalidInputError("dimension must be nonnegative")
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


# --- batched kernels ------------------------------------------------------


def _dot(a, b):
    # explicit loop over the few components beats a strided reduction
    s = a[0] * b[0]
    for c in range(1, a.shape[0]):
        s += a[c] * b[c]
    return s


def _edge_volume(edges) -> np.ndarray:
    """Parallelotope volume of component-major edge arrays by modified Gram-Schmidt.

    The volume is the product of the residual norms. Unlike ``sqrt(det(W W^T))``
    this keeps the error linear in the conditioning of thin simplices.
    Squared volumes below ``GRAM_CLAMP`` times the Hadamard bound read as 0.
    """
    l, n, B = len(edges), edges[0].shape[0], edges[0].shape[1]
    if l > n:
        return np.zeros(B)
    vol = np.ones(B)
    ratio = np.ones(B)  # vol^2 over the Hadamard bound, built factor by factor to avoid underflow
    basis = []
    for e in edges:
        ee = _dot(e, e)
        r = e
        for q in basis:
            r = r - _dot(r, q) * q
        rr = _dot(r, r)
        ratio = ratio * np.divide(rr, ee, out=np.zeros_like(rr), where=ee > 0)
        nr = np.sqrt(rr)
        vol = vol * nr
        basis.append(np.divide(r, nr, out=np.zeros_like(r), where=nr > 0))
    return np.where(ratio < GRAM_CLAMP, 0.0, vol)


def _vertices(pts: np.ndarray):
    """Split a ``(B, k, n)`` stack into k component-major ``(n, B)`` arrays."""
    return [np.ascontiguousarray(pts[:, i, :].T) for i in range(pts.shape[1])]


def gather_vertices(points: np.ndarray, idx: np.ndarray):
    """Vertices ``points[idx[:, i]]`` as component-major ``(n, B)`` arrays."""
    pt = np.ascontiguousarray(points.T)
    return [pt[:, idx[:, i]] for i in range(idx.shape[1])]


def sq_diameter(V, edges=None) -> np.ndarray:
    """Squared diameters of component-major vertex arrays."""
    k = len(V)
    best = np.zeros(V[0].shape[1])
    for i in range(k):
        for j in range(i + 1, k):
            d = edges[j - 1] if (i == 0 and edges is not None) else V[j] - V[i]
            np.maximum(best, _dot(d, d), out=best)
    return best


def vertex_discrete_curvature(V):
    """``(DC, diam)`` for component-major vertex arrays; DC is 0 where diam is 0."""
    k = len(V)
    edges = [V[i] - V[0] for i in range(1, k)]
    vol = _edge_volume(edges) / math.factorial(k - 1)
    diam = np.sqrt(sq_diameter(V, edges))
    out = np.zeros_like(vol)
    ok = diam > 0.0
    extreme = ok & ((diam < _SAFE_LO) | (diam > _SAFE_HI))
    ok &= ~extreme
    out[ok] = vol[ok] / diam[ok] ** k
    if extreme.any():
        # powers of diam would under/overflow: use DC(T) = DC(T / diam) / diam
        d = diam[extreme]
        out[extreme] = vertex_discrete_curvature(_rescaled(V, extreme, d))[0] / d
    return out, diam


def _rescaled(V, rows, d):
    base = V[0][:, rows]
    return [(v[:, rows] - base) / d for v in V]


def vertex_menger_curvature(V) -> np.ndarray:
    a, b, c = V[1] - V[0], V[2] - V[0], V[2] - V[1]
    aa, bb, cc = _dot(a, a), _dot(b, b), _dot(c, c)
    prod = aa * bb * cc
    mx = np.maximum(np.maximum(aa, bb), cc)
    # 4 * Area = 2 * |a ^ b|
    num = 2.0 * _edge_volume([a, b])
    den = np.sqrt(prod)
    out = np.zeros_like(num)
    d = np.sqrt(mx)
    extreme = (d > 0.0) & ((d < _SAFE_LO) | (d > _SAFE_HI))
    ok = (den > 0.0) & ~extreme
    out[ok] = num[ok] / den[ok]
    if extreme.any():
        out[extreme] = vertex_menger_curvature(_rescaled(V, extreme, d[extreme])) / d[extreme]
    return out


def batch_gram_volume(vectors: np.ndarray) -> np.ndarray:
    """Parallelotope volumes for a stack of shape ``(B, l, n)``."""
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape[1] == 0:
        return np.ones(vectors.shape[0])
    return _edge_volume(_vertices(vectors))


def batch_simplex_volume(pts: np.ndarray) -> np.ndarray:
    V = _vertices(np.asarray(pts, dtype=float))
    if len(V) < 2:
        return np.zeros(V[0].shape[1])
    edges = [V[i] - V[0] for i in range(1, len(V))]
    return _edge_volume(edges) / math.factorial(len(edges))


def batch_diameter(pts: np.ndarray) -> np.ndarray:
    return np.sqrt(sq_diameter(_vertices(np.asarray(pts, dtype=float))))


def batch_discrete_curvature(pts: np.ndarray) -> np.ndarray:
    """Discrete curvature of a stack of ``(B, m + 2, n)`` tuples."""
    return vertex_discrete_curvature(_vertices(np.asarray(pts, dtype=float)))[0]


def batch_menger_curvature(pts: np.ndarray) -> np.ndarray:
    """Menger curvature of a stack of ``(B, 3, n)`` triples."""
    return vertex_menger_curvature(_vertices(np.asarray(pts, dtype=float)))
