"""Jones beta numbers.

``beta(x, r)`` is the smallest ``sup dist(y, H) / r`` over affine m-planes
``H`` through ``x``, the sup running over sample points ``y`` with
``|y - x| <= r``.  The ball is taken closed so that the vertices of a tuple
of diameter ``r`` based at ``x`` are always seen by ``beta(x, r)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidInputError
from .manifold import GraphPatch, SampledManifold

__all__ = [
    "BetaResult",
    "BetaProfile",
    "ball_offsets",
    "beta_minmax",
    "beta_pca_bound",
    "beta_graph_bound",
    "beta_profile",
    "dyadic_radii",
    "sup_distance",
]

METHODS = ("minmax", "pca_bound", "graph_bound")


@dataclass
class BetaResult:
    """Outcome of a beta computation at ``(center, radius)``.

    ``plane_basis`` holds ``m`` orthonormal rows spanning the direction of the
    optimal plane; ``residual == beta * radius`` is the achieved sup distance.
    """

    beta: float
    plane_basis: np.ndarray
    center: np.ndarray
    radius: float
    method: str
    residual: float
    n_points: int = 0

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "plane_basis": self.plane_basis.tolist(),
            "center": self.center.tolist(),
            "radius": self.radius,
            "method": self.method,
            "residual": self.residual,
            "n_points": self.n_points,
        }


@dataclass
class BetaProfile:
    radii: np.ndarray
    results: list
    ratios: np.ndarray = field(init=False)
    tail_sup: np.ndarray = field(init=False)

    def __post_init__(self):
        self.ratios = np.array([res.beta / r for res, r in zip(self.results, self.radii)])
        # tail_sup[j] = sup over radii[i] >= radii[j] of beta(x, r_i) / r_i
        self.tail_sup = np.maximum.accumulate(self.ratios[::-1])[::-1]

    def sup_ratio(self, r_min: float, r_max: float = np.inf) -> float:
        """``sup beta(x, r) / r`` over the profile radii in ``[r_min, r_max]``."""
        sel = (self.radii >= r_min) & (self.radii <= r_max)
        return float(self.ratios[sel].max()) if np.any(sel) else 0.0


def ball_offsets(manifold: SampledManifold, x, r: float) -> np.ndarray:
    """Vectors ``y - x`` for samples in the closed ball ``|y - x| <= r``."""
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != manifold.n:
        raise InvalidInputError(f"center has dimension {x.shape[0]}, manifold lives in R^{manifold.n}")
    if manifold.N > 10_000:
        idx = np.asarray(manifold.tree.query_ball_point(x, r * (1 + 1e-12)), dtype=np.int64)
        y = manifold.points[idx] - x
    else:
        y = manifold.points - x
    d2 = np.einsum("ij,ij->i", y, y)
    # r is often itself a computed distance; keep the point that defined it
    return y[d2 <= (r * (1 + 1e-12)) ** 2]


def sup_distance(offsets: np.ndarray, complement: np.ndarray) -> float:
    """Largest distance from ``offsets`` to the plane with normal space ``complement`` (rows)."""
    if len(offsets) == 0:
        return 0.0
    d = offsets @ complement.T
    return float(np.sqrt(np.einsum("ij,ij->i", d, d).max()))


def _snap(dist: float, offsets: np.ndarray) -> float:
    # distances at rounding level of the data count as exact zeros
    if len(offsets) == 0:
        return 0.0
    scale = float(np.abs(offsets).max())
    return 0.0 if dist <= 64 * np.finfo(float).eps * scale else dist


def _canonical_frame(offsets: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal frame (rows) from the SVD of the offsets, signs fixed by the data."""
    if len(offsets) == 0:
        return np.eye(n)
    _, _, vt = np.linalg.svd(offsets, full_matrices=True)
    proj = offsets @ vt.T
    for j in range(n):
        col = proj[:, j]
        s = np.sum(col**3)
        if abs(s) <= 1e-12 * max(np.abs(col).max(), 1e-300) ** 3:
            s = col[np.argmax(np.abs(col))] if len(col) else 1.0
        if s < 0:
            vt[j] = -vt[j]
    return vt


def _empty_result(x, r, m, n, method):
    return BetaResult(0.0, np.eye(n)[:m], np.asarray(x, dtype=float).reshape(-1), float(r), method, 0.0, 0)


def beta_pca_bound(manifold: SampledManifold, x, r: float) -> BetaResult:
    """Upper bound for beta from the plane of the top-m principal directions of ``y - x``."""
    m, n = manifold.m, manifold.n
    y = ball_offsets(manifold, x, r)
    if len(y) == 0:
        return _empty_result(x, r, m, n, "pca_bound")
    frame = _canonical_frame(y, n)
    dist = _snap(sup_distance(y, frame[m:]), y)
    return BetaResult(min(dist / r, 1.0), frame[:m].copy(), np.asarray(x, dtype=float).reshape(-1),
                      float(r), "pca_bound", min(dist, r), len(y))


def _cayley(S: np.ndarray) -> np.ndarray:
    """Orthogonal matrices ``(I - S/2)^-1 (I + S/2)`` for a stack of skew ``S``."""
    n = S.shape[-1]
    eye = np.broadcast_to(np.eye(n), S.shape)
    return np.linalg.solve(eye - S / 2, eye + S / 2)


def _skew_from_blocks(A: np.ndarray, m: int, n: int) -> np.ndarray:
    S = np.zeros(A.shape[:-2] + (n, n))
    S[..., :m, m:] = -A
    S[..., m:, :m] = np.swapaxes(A, -1, -2)
    return S


def _frames_objective(z: np.ndarray, frames: np.ndarray, m: int) -> np.ndarray:
    """Sup distance for a stack of frames (rows = basis, first m span the plane)."""
    comp = frames[:, m:, :]  # (S, n-m, n)
    d = np.einsum("kn,scn->skc", z, comp)
    return np.sqrt(np.einsum("skc,skc->sk", d, d).max(axis=1))


def _scan_starts(z: np.ndarray, m: int, n: int, count: int, rng) -> np.ndarray:
    """Candidate frames (in PCA coordinates) for the multistart."""
    frames = []
    if n == 2:
        th = np.pi * np.arange(count) / count
        c, s = np.cos(th), np.sin(th)
        frames = np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], axis=1)
    elif n == 3:
        i = np.arange(count)
        zc = 1 - (2 * i + 1) / (2 * count)  # upper hemisphere only
        rho = np.sqrt(1 - zc**2)
        phi = i * np.pi * (3 - np.sqrt(5))
        v = np.stack([rho * np.cos(phi), rho * np.sin(phi), zc], -1)
        helper = np.where(np.abs(v[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
        a = np.cross(v, helper)
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b = np.cross(v, a)
        if m == 1:
            frames = np.stack([v, a, b], axis=1)
        else:
            frames = np.stack([a, b, v], axis=1)
    else:
        A = rng.standard_normal((count, m, n - m))
        frames = _cayley(_skew_from_blocks(A, m, n))
        frames = np.swapaxes(frames, -1, -2)
    return np.asarray(frames)


POLL_PHASES = 8


@lru_cache(maxsize=4096)
def _poll_rotations(m: int, n: int, step: float, phase: int) -> np.ndarray:
    """Cayley rotations for one poll: +-each coordinate generator and +-4 oblique ones.

    The oblique generators are fixed per ``phase``; cycling the phase lets the
    search leave kinks of the sup objective that no coordinate move improves.
    """
    ncoord = m * (n - m)
    A = np.zeros((2 * ncoord + 8, m, n - m))
    for j in range(ncoord):
        a, b = divmod(j, n - m)
        A[2 * j, a, b] = 1.0
        A[2 * j + 1, a, b] = -1.0
    extra = np.random.default_rng((ncoord, phase)).standard_normal((4, m, n - m))
    extra /= np.linalg.norm(extra.reshape(4, -1), axis=1)[:, None, None]
    A[2 * ncoord :: 2] = extra
    A[2 * ncoord + 1 :: 2] = -extra
    R = np.swapaxes(_cayley(_skew_from_blocks(A * step, m, n)), -1, -2)
    R.setflags(write=False)
    return R


def _pattern_search(z, frame, m, n, max_iter, tol):
    """Direct search over plane orientations by Cayley rotations of the frame."""
    best = _frames_objective(z, frame[None], m)[0]
    step = 0.25
    it = 0
    while it < max_iter and step > tol and best > 0.0:
        it += 1
        cand = _poll_rotations(m, n, step, it % POLL_PHASES) @ frame
        vals = _frames_objective(z, cand, m)
        j = int(np.argmin(vals))
        if vals[j] < best:
            best, frame = vals[j], cand[j]
            step = min(step * 2.0, 0.5)
        else:
            step *= 0.5
    # re-orthonormalise against drift from repeated solves
    q, _ = np.linalg.qr(frame.T)
    frame = q.T * np.sign(np.einsum("ij,ij->i", q.T, frame))[:, None]
    return frame, _frames_objective(z, frame[None], m)[0]


def beta_minmax(manifold: SampledManifold, x, r: float, max_iter: int = 200,
                tol: float = 1e-6, starts: int = 2) -> BetaResult:
    """Approximate min-max plane fit through ``x``.

    PCA gives the initial frame; a coarse orientation scan (``n <= 3``) or
    random frames (``n > 3``) provide extra starts; each start is refined by a
    pattern search over rotations that trade a plane direction against a normal
    direction. The step halves on failure and the search stops once it drops
    below ``tol`` radians (the beta change per radian is at most 1), or after
    ``max_iter`` polls. The PCA value is never exceeded.
    """
    m, n = manifold.m, manifold.n
    xv = np.asarray(x, dtype=float).reshape(-1)
    y = ball_offsets(manifold, xv, r)
    if len(y) == 0:
        return _empty_result(xv, r, m, n, "minmax")
    frame0 = _canonical_frame(y, n)
    z = y @ frame0.T  # work in the data's own frame so the result is rigid-motion equivariant
    rng = np.random.default_rng(0x5EED)

    ident = np.eye(n)
    pca_val = _frames_objective(z, ident[None], m)[0]
    cands = [(pca_val, ident)]
    if pca_val > 0.0:
        count = 64 if n <= 3 else 8
        scan = _scan_starts(z, m, n, count, rng)
        vals = _frames_objective(z, scan, m)
        order = np.argsort(vals, kind="stable")[:starts]
        inits = [ident] + [scan[j] for j in order]
        step_tol = min(tol, 1e-6) * 1e-3
        for f in inits:
            fr, val = _pattern_search(z, f, m, n, max_iter, step_tol)
            cands.append((val, fr))
    val, fr = min(cands, key=lambda t: t[0])
    basis = fr[:m] @ frame0
    dist = _snap(sup_distance(y, (fr[m:] @ frame0)), y)
    dist = min(dist, pca_val, r)
    return BetaResult(dist / r, basis, xv, float(r), "minmax", dist, len(y))


def beta_graph_bound(patch: GraphPatch, x, r: float) -> float:
    """Tangent-plane bound ``sup_{|z - x| <= 2r} |f(z) - f(x) - Df(x)(z - x)| / r``.

    ``x`` is a grid node, given either by its node number (int) or by its
    coordinates in ``R^m``.
    """
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    coords = patch.coords
    if np.isscalar(x) and float(x).is_integer() and not isinstance(x, float):
        i = int(x)
    else:
        xv = np.asarray(x, dtype=float).reshape(-1)
        i = int(patch.grid.node_of(np.rint(xv / patch.h).astype(np.int64)[None])[0])
        if i < 0 or np.abs(coords[i] - xv).max() > 1e-9 * max(1.0, patch.delta):
            raise InvalidInputError("x must be a node of the patch grid")
    dz = coords - coords[i]
    near = np.einsum("ij,ij->i", dz, dz) <= (2 * r) ** 2 * (1 + 1e-12)
    g = patch.values[near] - patch.values[i] - np.einsum("cm,km->kc", patch.derivative[i], dz[near])
    return float(np.sqrt(np.einsum("kc,kc->k", g, g).max()) / r)


def dyadic_radii(r_min: float, r_max: float) -> np.ndarray:
    """``r_max / 2^j`` for ``j = J, ..., 0`` with the smallest value >= ``r_min``/2."""
    if not 0 < r_min <= r_max:
        raise InvalidInputError("need 0 < r_min <= r_max")
    J = int(np.ceil(np.log2(r_max / r_min)))
    return r_max / 2.0 ** np.arange(J, -1, -1)


def beta_profile(manifold: SampledManifold, x, radii, method: str = "minmax") -> BetaProfile:
    """beta(x, r) along increasing radii with the running tail sup of beta/r."""
    radii = np.asarray(radii, dtype=float).reshape(-1)
    if len(radii) == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise InvalidInputError("radii must be positive and strictly increasing")
    fn = {"minmax": beta_minmax, "pca_bound": beta_pca_bound}.get(method)
    if fn is None:
        raise InvalidInputError(f"unknown beta method {method!r}")
    return BetaProfile(radii, [fn(manifold, x, r) for r in radii])
