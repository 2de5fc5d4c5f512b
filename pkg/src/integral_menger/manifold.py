"""Sampled manifolds, graph patches and their generators.

A :class:`SampledManifold` is a weighted point sample standing in for the
m-dimensional Hausdorff measure on a set in ``R^n``.  A :class:`GraphPatch`
is a function ``f: D_delta -> R^(n-m)`` sampled on a symmetric lattice grid,
together with its derivative; :func:`graph_embed` turns it into a manifold
sample with Jacobian weights.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidInputError, ParseError
from .grids import LatticeGrid

__all__ = [
    "SampledManifold",
    "GraphPatch",
    "bump",
    "bump_derivative",
    "make_graph_patch",
    "graph_alpha_patch",
    "graph_embed",
    "smooth_graph_patch",
    "SMOOTH_GRAPHS",
    "generate",
    "neighborhood",
    "load_point_cloud",
    "save_point_cloud",
    "finite_difference_gradient",
    "BRUTE_FORCE_LIMIT",
]

BRUTE_FORCE_LIMIT = 10_000

CUTOFF_DESCRIPTION = "eta(r) = (1 - (r/delta)^2)^4 for r < delta, else 0"


@dataclass(eq=False)
class SampledManifold:
    """Weighted sample of an m-dimensional set in ``R^n``.

    ``weights`` are quadrature weights for ``H^m`` (length for curves, area
    for surfaces). Arrays are made read-only on construction.
    """

    m: int
    points: np.ndarray
    weights: np.ndarray
    label: str = ""
    shape_params: dict = field(default_factory=dict)
    _tree: cKDTree | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or len(pts) < 1:
            raise InvalidInputError("points must be a nonempty (N, n) array")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if len(w) != len(pts):
            raise InvalidInputError(f"{len(w)} weights for {len(pts)} points")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise InvalidInputError("points and weights must be finite")
        if np.any(w <= 0):
            raise InvalidInputError("weights must be positive")
        self.m = int(self.m)
        if not 1 <= self.m < pts.shape[1]:
            raise InvalidInputError(f"need 1 <= m < n, got m={self.m}, n={pts.shape[1]}")
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def N(self) -> int:
        return self.points.shape[0]

    def __len__(self):
        return self.N

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree

    def scaled(self, lam: float) -> "SampledManifold":
        """The image under ``x -> lam * x``; weights pick up ``lam^m``."""
        return SampledManifold(
            self.m,
            self.points * lam,
            self.weights * lam**self.m,
            label=f"{self.label}*{lam:g}",
            shape_params=dict(self.shape_params, scale=lam),
        )

    def transformed(self, rotation=None, translation=None) -> "SampledManifold":
        """Rigid motion ``x -> Q x + t`` (weights unchanged)."""
        pts = self.points
        if rotation is not None:
            pts = pts @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            pts = pts + np.asarray(translation, dtype=float)
        return SampledManifold(self.m, pts, self.weights, self.label, dict(self.shape_params))

    def diameter(self) -> float:
        from scipy.spatial import ConvexHull

        pts = self.points
        if self.N > 64 and self.n <= 3:
            try:
                pts = pts[ConvexHull(pts).vertices]
            except Exception:
                pass
        best = 0.0
        for i in range(len(pts)):
            d = pts[i + 1 :] - pts[i]
            if len(d):
                best = max(best, float(np.einsum("ij,ij->i", d, d).max()))
        return math.sqrt(best)

    def nearest_neighbor_spacing(self) -> np.ndarray:
        if self.N < 2:
            return np.zeros(self.N)
        dist, _ = self.tree.query(self.points, k=2)
        return dist[:, 1]


@dataclass(eq=False)
class GraphPatch:
    """``f: D_delta subset R^m -> R^(n-m)`` sampled on a symmetric lattice grid.

    ``values`` has shape ``(N, n-m)``; ``derivative`` has shape ``(N, n-m, m)``.
    """

    m: int
    n: int
    delta: float
    grid: LatticeGrid
    values: np.ndarray
    derivative: np.ndarray
    lipschitz_bound: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.m < self.n:
            raise InvalidInputError(f"need 1 <= m < n, got m={self.m}, n={self.n}")
        c = self.n - self.m
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.grid), c)
        self.derivative = np.asarray(self.derivative, dtype=float).reshape(len(self.grid), c, self.m)
        if not self.grid.is_symmetric:
            raise InvalidInputError("graph patch grid must be symmetric about 0")
        self.values.setflags(write=False)
        self.derivative.setflags(write=False)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def coords(self) -> np.ndarray:
        return self.grid.coords

    def __len__(self):
        return len(self.grid)

    def sampled_lipschitz(self, chunk: int = 2048) -> float:
        """Max of ``|f(x) - f(y)| / |x - y|`` over all sampled pairs."""
        x, f = self.coords, self.values
        best = 0.0
        for start in range(0, len(x), chunk):
            dx = x[start : start + chunk, None, :] - x[None, :, :]
            df = f[start : start + chunk, None, :] - f[None, :, :]
            nx = np.sqrt(np.einsum("ijk,ijk->ij", dx, dx))
            nf = np.sqrt(np.einsum("ijk,ijk->ij", df, df))
            ok = nx > 0
            if np.any(ok):
                best = max(best, float((nf[ok] / nx[ok]).max()))
        return best


# --- cutoff -------------------------------------------------------------


CUTOFF_POWER = 4


def bump(r, delta: float):
    """Radial cutoff ``(1 - (r/delta)^2)^4`` on ``r < delta``, 0 beyond.

    It is C^3 across ``r = delta`` and even in ``r`` (so smooth at 0), which is
    more regularity than the ``W^{1+s,p}`` threshold can see. A polynomial
    profile keeps curvature small and spread out; steep smooth steps make the
    p-th power energies resolution-starved on coarse grids.
    """
    t = np.clip(np.asarray(r, dtype=float) / delta, 0.0, 1.0)
    return (1.0 - t * t) ** CUTOFF_POWER


def bump_derivative(r, delta: float):
    t = np.clip(np.asarray(r, dtype=float) / delta, 0.0, 1.0)
    return -2.0 * CUTOFF_POWER * t * (1.0 - t * t) ** (CUTOFF_POWER - 1) / delta


# --- graph patches ------------------------------------------------------


def finite_difference_gradient(grid: LatticeGrid, values: np.ndarray) -> np.ndarray:
    """Derivative of grid data, shape ``(N, c, m)``.

    Fourth-order central differences where both neighbours on each side exist,
    second order (central or one-sided) near the boundary.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    N, c = values.shape
    h = grid.h
    out = np.zeros((N, c, grid.m))
    dense = grid.dense(values)
    pad = [(2, 2)] * grid.m + [(0, 0)]
    dense = np.pad(dense, pad, constant_values=np.nan)
    base = tuple((grid.index + grid.K + 2).T)
    for a in range(grid.m):

        def at(shift):
            pos = list(base)
            pos[a] = pos[a] + shift
            return dense[tuple(pos)]

        f0, p1, p2, m1, m2 = at(0), at(1), at(2), at(-1), at(-2)
        have = lambda arr: ~np.isnan(arr).any(axis=1)  # noqa: E731
        hp1, hp2, hm1, hm2 = have(p1), have(p2), have(m1), have(m2)
        d = np.zeros((N, c))
        done = np.zeros(N, dtype=bool)

        def put(mask, expr):
            sel = mask & ~done
            if np.any(sel):
                d[sel] = expr(sel)
                done[sel] = True

        put(hp1 & hp2 & hm1 & hm2, lambda s: (-p2[s] + 8 * p1[s] - 8 * m1[s] + m2[s]) / (12 * h))
        put(hp1 & hm1, lambda s: (p1[s] - m1[s]) / (2 * h))
        put(hp1 & hp2, lambda s: (-3 * f0[s] + 4 * p1[s] - p2[s]) / (2 * h))
        put(hm1 & hm2, lambda s: (3 * f0[s] - 4 * m1[s] + m2[s]) / (2 * h))
        put(hp1, lambda s: (p1[s] - f0[s]) / h)
        put(hm1, lambda s: (f0[s] - m1[s]) / h)
        out[:, :, a] = d
    return out


def make_graph_patch(func, m: int, n: int, delta: float, h: float, grad=None,
                     normalize: bool = True, label: str = "graph", **meta) -> GraphPatch:
    """Sample ``func`` on the disc grid of radius ``delta`` and spacing ``h``.

    ``func`` maps an ``(N, m)`` coordinate array to ``(N, n-m)`` (or ``(N,)``
    when ``n - m == 1``); ``grad`` likewise to ``(N, n-m, m)``. Without
    ``grad`` the derivative comes from :func:`finite_difference_gradient`.
    With ``normalize`` the amplitude is divided by the sampled Lipschitz
    constant whenever that exceeds 1.
    """
    grid = LatticeGrid.disc(m, delta, h)
    x = grid.coords
    c = n - m
    vals = np.asarray(func(x), dtype=float).reshape(len(x), c)
    if grad is not None:
        der = np.asarray(grad(x), dtype=float).reshape(len(x), c, m)
        der_source = "analytic"
    else:
        der = finite_difference_gradient(grid, vals)
        der_source = "finite_difference"
    patch = GraphPatch(m, n, delta, grid, vals, der, 0.0,
                       metadata=dict(meta, label=label, derivative=der_source))
    L = patch.sampled_lipschitz()
    amp = 1.0
    if normalize and L > 1.0:
        amp = 1.0 / L
        patch = GraphPatch(m, n, delta, grid, vals * amp, der * amp, 0.0, patch.metadata)
        L = patch.sampled_lipschitz()
    patch.lipschitz_bound = L
    patch.metadata["amplitude"] = amp
    return patch


def _radial_alpha(t, alpha, delta):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(t > 0, t**alpha, 0.0) * bump(t, delta)
        dphi = np.where(t > 0, alpha * t ** (alpha - 1), 0.0) * bump(t, delta) + np.where(
            t > 0, t**alpha, 0.0
        ) * bump_derivative(t, delta)
    return phi, dphi


def graph_alpha_amplitude(alpha: float, delta: float, samples: int = 200_001) -> float:
    """Amplitude making ``A |x|^alpha eta(x)`` 1-Lipschitz (independent of h).

    For a radial C^1 profile the Lipschitz constant on a convex disc is
    ``sup |phi'|``, found here on a dense radial grid and then refined with a
    bounded scalar search around the grid maximum.
    """
    from scipy.optimize import minimize_scalar

    t = np.linspace(0.0, delta, samples)[1:]
    _, dphi = _radial_alpha(t, alpha, delta)
    i = int(np.argmax(np.abs(dphi)))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, len(t) - 1)]
    best = float(np.abs(dphi[i]))
    if lo < hi:
        res = minimize_scalar(lambda s: -abs(float(_radial_alpha(s, alpha, delta)[1])),
                              bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    if best <= 1.0:
        return 1.0
    # tiny safety margin absorbs the residual error of the sup search
    return 1.0 / (best * (1 + 1e-9))


def graph_alpha_patch(alpha: float, delta: float, m: int, n: int, h: float) -> GraphPatch:
    """Graph of ``f_alpha(x) = A |x|^alpha eta(x) e_1`` on the disc ``D_delta``.

    ``eta`` is the polynomial cutoff of :func:`bump`.  For ``alpha > 1`` the
    amplitude ``A`` depends only on ``(alpha, delta)``, so refinement studies
    compare the same function at every spacing.  For ``alpha <= 1`` the
    profile is not Lipschitz and ``A`` is taken from the sampled slopes.
    """
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    if not 1 <= m < n:
        raise InvalidInputError(f"need 1 <= m < n, got m={m}, n={n}")
    c = n - m
    grid = LatticeGrid.disc(m, delta, h)
    x = grid.coords
    r = np.sqrt((x**2).sum(axis=1))
    phi, dphi = _radial_alpha(r, alpha, delta)
    vals = np.zeros((len(x), c))
    vals[:, 0] = phi
    der = np.zeros((len(x), c, m))
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = np.where(r[:, None] > 0, x / r[:, None], 0.0)
    # Df(0) = 0 for alpha > 1; for alpha <= 1 it does not exist and 0 is stored
    der[:, 0, :] = dphi[:, None] * unit
    meta = {"alpha": alpha, "cutoff": CUTOFF_DESCRIPTION, "derivative": "analytic",
            "label": f"graph_alpha({alpha:g})"}
    if alpha > 1:
        amp = graph_alpha_amplitude(alpha, delta)
        patch = GraphPatch(m, n, delta, grid, vals * amp, der * amp, 0.0, meta)
    else:
        raw = GraphPatch(m, n, delta, grid, vals, der, 0.0, meta)
        L = raw.sampled_lipschitz()
        amp = 1.0 if L <= 1 else 1.0 / L
        patch = GraphPatch(m, n, delta, grid, vals * amp, der * amp, 0.0, meta)
    patch.metadata["amplitude"] = amp
    patch.lipschitz_bound = patch.sampled_lipschitz()
    return patch


def _sine(x):
    return 0.3 * np.sin(2.0 * x[:, 0]), np.eye(x.shape[1])[0] * (0.6 * np.cos(2.0 * x[:, :1]))


def _gaussian(x):
    e = np.exp(-np.einsum("ij,ij->i", x, x))
    return 0.5 * e, -x * e[:, None]


def _quadratic(x):
    return 0.25 * np.einsum("ij,ij->i", x, x), 0.5 * x


def _cubic(x):
    t = x[:, 0]
    return 0.2 * t**3 - 0.15 * t, np.eye(x.shape[1])[0] * (0.6 * t[:, None] ** 2 - 0.15)


def _wave(x):
    q = np.einsum("ij,ij->i", x, x)
    return 0.15 * np.cos(3.0 * q), -0.9 * x * np.sin(3.0 * q)[:, None]


def _affine(x):
    return 0.5 * x[:, 0], np.broadcast_to(np.eye(x.shape[1])[0] * 0.5, x.shape).copy()


# analytic scalar graphs with |Df| <= 1 on the unit disc
SMOOTH_GRAPHS = {
    "sine": _sine,
    "gaussian": _gaussian,
    "quadratic": _quadratic,
    "cubic": _cubic,
    "wave": _wave,
    "affine": _affine,
}


def smooth_graph_patch(name: str, m: int, n: int, delta: float = 1.0, h: float = 0.05) -> GraphPatch:
    """Patch of a named analytic graph from :data:`SMOOTH_GRAPHS` in the first normal direction."""
    if name not in SMOOTH_GRAPHS:
        raise InvalidInputError(f"unknown smooth graph {name!r}; choose from {sorted(SMOOTH_GRAPHS)}")
    if not 1 <= m < n:
        raise InvalidInputError(f"need 1 <= m < n, got m={m}, n={n}")
    fn = SMOOTH_GRAPHS[name]
    c = n - m

    def func(x):
        out = np.zeros((len(x), c))
        out[:, 0] = fn(x)[0]
        return out

    def grad(x):
        out = np.zeros((len(x), c, m))
        out[:, 0, :] = fn(x)[1]
        return out

    return make_graph_patch(func, m, n, delta, h, grad=grad, normalize=True, label=name)


def graph_embed(patch: GraphPatch) -> SampledManifold:
    """Points ``(x, f(x))`` with weights ``h^m |JF(x)|``.

    ``|JF| = sqrt(det(I + Df^T Df))``. Each node stands for its lattice cell,
    so the weight sum is a midpoint rule over the union of cells.
    """
    x = patch.coords
    df = patch.derivative
    gram = np.eye(patch.m)[None] + np.einsum("nci,ncj->nij", df, df)
    jac = np.sqrt(np.linalg.det(gram))
    opnorm = np.linalg.norm(df, ord=2, axis=(1, 2)) if df.size else np.zeros(len(x))
    if np.all(opnorm <= 1.0 + 1e-12):
        # |Df| <= 1 puts the eigenvalues of I + Df^T Df in [1, 2]
        assert np.all(jac <= 2 ** (patch.m / 2) * (1 + 1e-9)), "Jacobian bound violated"
    pts = np.concatenate([x, patch.values], axis=1)
    params = {k: v for k, v in patch.metadata.items() if k != "label"}
    params.update(delta=patch.delta, h=patch.h)
    return SampledManifold(patch.m, pts, patch.h**patch.m * jac,
                           label=patch.metadata.get("label", "graph"), shape_params=params)


# --- closed shapes ------------------------------------------------------


def _pad(points: np.ndarray, n: int, native: int, shape: str) -> np.ndarray:
    if n < native:
        raise InvalidInputError(f"{shape} needs ambient dimension >= {native}, got {n}")
    if n == native:
        return points
    return np.concatenate([points, np.zeros((len(points), n - native))], axis=1)


def _circle(resolution, R=1.0, n=2):
    N = int(resolution)
    t = 2 * np.pi * np.arange(N) / N
    pts = R * np.stack([np.cos(t), np.sin(t)], axis=1)
    return 1, _pad(pts, n, 2, "circle"), np.full(N, 2 * np.pi * R / N)


def _torus_knot(resolution, p=2, q=3, R=2.0, r=1.0, n=3):
    N = int(resolution)
    t = 2 * np.pi * np.arange(N) / N
    rad = R + r * np.cos(q * t)
    pts = np.stack([rad * np.cos(p * t), rad * np.sin(p * t), r * np.sin(q * t)], axis=1)
    dx = -r * q * np.sin(q * t) * np.cos(p * t) - rad * p * np.sin(p * t)
    dy = -r * q * np.sin(q * t) * np.sin(p * t) + rad * p * np.cos(p * t)
    dz = r * q * np.cos(q * t)
    speed = np.sqrt(dx**2 + dy**2 + dz**2)
    return 1, _pad(pts, n, 3, "torus_knot"), speed * 2 * np.pi / N


def _sphere(resolution, R=1.0, n=3):
    N = int(resolution)
    i = np.arange(N)
    z = 1 - (2 * i + 1) / N
    rho = np.sqrt(1 - z**2)
    phi = i * np.pi * (3 - math.sqrt(5))
    pts = R * np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    return 2, _pad(pts, n, 3, "sphere"), np.full(N, 4 * np.pi * R**2 / N)


def _torus(resolution, R=2.0, r=1.0, n=3):
    N = int(resolution)
    nu = max(3, int(math.ceil(math.sqrt(N * R / r))))
    nv = max(3, int(math.ceil(N / nu)))
    u = 2 * np.pi * np.arange(nu) / nu
    v = 2 * np.pi * np.arange(nv) / nv
    U, V = np.meshgrid(u, v, indexing="ij")
    U, V = U.ravel(), V.ravel()
    rad = R + r * np.cos(V)
    pts = np.stack([rad * np.cos(U), rad * np.sin(U), r * np.sin(V)], axis=1)
    w = r * rad * (2 * np.pi / nu) * (2 * np.pi / nv)
    return 2, _pad(pts, n, 3, "torus"), w


_SHAPES = {"circle": _circle, "torus_knot": _torus_knot, "sphere": _sphere, "torus": _torus}


def generate(shape: str, resolution, **params) -> SampledManifold:
    """Build a sampled manifold.

    Shapes and their parameters::

        circle(R=1, n=2)                      resolution = node count
        torus_knot(p=2, q=3, R=2, r=1, n=3)   resolution = node count
        sphere(R=1, n=3)                      resolution = node count (Fibonacci)
        torus(R=2, r=1, n=3)                  resolution = approx. node count
        graph_alpha(alpha, delta=1, m=1, n=m+1)  resolution = grid spacing h

    Closed shapes are sampled deterministically on uniform parameter grids
    (Fibonacci lattice for the sphere) with Jacobian weights.
    """
    if not (resolution > 0):
        raise InvalidInputError("resolution must be positive")
    if shape == "graph_alpha":
        if "alpha" not in params:
            raise InvalidInputError("graph_alpha needs parameter 'alpha'")
        alpha = params["alpha"]
        delta, m = params.get("delta", 1.0), int(params.get("m", 1))
        n = int(params.get("n", m + 1))
        return graph_embed(graph_alpha_patch(alpha, delta, m, n, float(resolution)))
    if shape not in _SHAPES:
        raise InvalidInputError(f"unknown shape {shape!r}; choose from {sorted(_SHAPES) + ['graph_alpha']}")
    try:
        m, pts, w = _SHAPES[shape](resolution, **params)
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for {shape}: {exc}") from None
    return SampledManifold(m, pts, w, label=shape, shape_params=dict(params))


# --- queries ------------------------------------------------------------


def neighborhood(manifold: SampledManifold, center, radius: float, method: str = "auto") -> np.ndarray:
    """Sorted indices of sample points in the open ball ``B(center, radius)``.

    ``method`` is ``"brute"``, ``"kdtree"`` or ``"auto"`` (k-d tree above
    ``BRUTE_FORCE_LIMIT`` points).
    """
    if not radius > 0:
        raise InvalidInputError("radius must be positive")
    c = np.asarray(center, dtype=float).reshape(-1)
    if method == "auto":
        method = "kdtree" if manifold.N > BRUTE_FORCE_LIMIT else "brute"
    if method == "brute":
        d = manifold.points - c
        return np.flatnonzero(np.einsum("ij,ij->i", d, d) < radius * radius)
    if method == "kdtree":
        cand = np.asarray(manifold.tree.query_ball_point(c, radius), dtype=np.int64)
        if len(cand) == 0:
            return cand
        d = manifold.points[cand] - c
        return np.sort(cand[np.einsum("ij,ij->i", d, d) < radius * radius])
    raise InvalidInputError(f"unknown neighborhood method {method!r}")


# --- file I/O -----------------------------------------------------------


def metadata_path(path) -> Path:
    """Sidecar metadata file for a point cloud: ``foo.csv -> foo.json``."""
    return Path(path).with_suffix(".json")


def save_point_cloud(manifold: SampledManifold, path) -> None:
    """Write CSV (``x0,...,x{n-1},weight``) plus the JSON metadata sidecar."""
    path = Path(path)
    header = [f"x{i}" for i in range(manifold.n)] + ["weight"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p, w in zip(manifold.points, manifold.weights):
            writer.writerow([format(v, ".17g") for v in p] + [format(w, ".17g")])
    meta = {"m": manifold.m, "n": manifold.n, "label": manifold.label,
            "shape_params": _jsonable(manifold.shape_params)}
    metadata_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def load_point_cloud(path, format: str = "csv", m: int | None = None) -> SampledManifold:
    """Read a point cloud written by :func:`save_point_cloud`.

    The intrinsic dimension comes from the sidecar JSON, or from ``m`` when no
    sidecar exists.

    Raises
    ------
    ParseError
        On a malformed header or row, a column-count mismatch, a non-finite
        value or a nonpositive weight; the message names the line.
    """
    if format != "csv":
        raise InvalidInputError(f"unsupported point cloud format {format!r}")
    path = Path(path)
    meta = {}
    mp = metadata_path(path)
    if mp.exists():
        try:
            meta = json.loads(mp.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad metadata JSON: {exc}", path=mp) from None
    if m is not None and "m" in meta and int(meta["m"]) != int(m):
        raise InvalidInputError(f"m={m} disagrees with the sidecar's intrinsic dimension {meta['m']}")
    if m is None:
        m = meta.get("m")
    if m is None:
        raise InvalidInputError(f"intrinsic dimension unknown: no sidecar {mp} and no m given")

    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", lineno=1, path=path)
    header = [c.strip() for c in rows[0]]
    n = len(header) - 1
    expected = [f"x{i}" for i in range(n)] + ["weight"]
    if n < 1 or header != expected:
        raise ParseError(f"header must be {','.join(expected) if n >= 1 else 'x0,...,weight'}",
                         lineno=1, path=path)
    if "n" in meta and meta["n"] != n:
        raise ParseError(f"metadata says n={meta['n']} but header has {n} coordinates",
                         lineno=1, path=path)
    pts, ws = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n + 1:
            raise ParseError(f"expected {n + 1} columns, got {len(row)}", lineno=lineno, path=path)
        try:
            vals = [float(v) for v in row]
        except ValueError:
            raise ParseError(f"non-numeric value in {row!r}", lineno=lineno, path=path) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", lineno=lineno, path=path)
        if vals[-1] <= 0:
            raise ParseError(f"weight must be positive, got {vals[-1]!r}", lineno=lineno, path=path)
        pts.append(vals[:-1])
        ws.append(vals[-1])
    if not pts:
        raise ParseError("no data rows", lineno=2, path=path)
    return SampledManifold(int(m), np.array(pts), np.array(ws), label=meta.get("label", path.stem),
                           shape_params=meta.get("shape_params", {}))
