"""Estimators for the intermediate Menger energies.

The discrete energy of a weighted sample is

    sum over ordered k-tuples of distinct indices of
        prod(weights) * sup_{completions} DC(tuple + completion)^p

where completions add ``m + 2 - k`` further sample points.  Tuples with a
repeated index have a degenerate simplex, so including them changes nothing;
the Monte Carlo estimator therefore samples indices independently.

Parallel evaluation is deterministic: work is cut into fixed chunks, chunk
``c`` draws from the stream ``SeedSequence(seed, spawn_key=(c,))``, and the
partial sums are reduced in chunk order whatever the worker count.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Callable

import numpy as np

from . import geometry
from .errors import BudgetExceededError, ConfigError, InvalidInputError
from .grids import second_difference_sum
from .manifold import GraphPatch, SampledManifold

__all__ = [
    "EnergySpec",
    "EstimatorConfig",
    "EnergyEstimate",
    "sup_curvature",
    "energy_exhaustive",
    "energy_monte_carlo",
    "estimate_energy",
    "curve_energy",
    "second_difference_functional",
    "omega_sampler",
    "farthest_point_subsample",
    "resolve_candidates",
    "default_lambda",
    "default_rho",
    "chunk_rng",
]

SUP_ALL_LIMIT = 2000
SUBSAMPLE_DEFAULT = 256
# target number of kernel evaluations per vectorised block
BLOCK = 1 << 17


@dataclass(frozen=True)
class EnergySpec:
    """Parameters ``(m, n, k, p)`` of ``E_p^k``; ``s = 1 - m(k-1)/p``."""

    m: int
    n: int
    k: int
    p: float

    def __post_init__(self):
        m, n, k, p = self.m, self.n, self.k, self.p
        if not 1 <= m < n:
            raise InvalidInputError(f"need 1 <= m < n, got m={m}, n={n}")
        if not 2 <= k <= m + 2:
            raise InvalidInputError(f"need 2 <= k <= m+2 = {m + 2}, got k={k}")
        if not p > m * (k - 1):
            raise InvalidInputError(f"need p > m(k-1) = {m * (k - 1)}, got p={p}")

    @property
    def s(self) -> float:
        return 1.0 - self.m * (self.k - 1) / self.p

    @property
    def scaling_exponent(self) -> float:
        """``E(lam * Sigma) = lam^(m k - p) E(Sigma)``."""
        return self.m * self.k - self.p

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "k": self.k, "p": self.p, "s": self.s}


@dataclass(frozen=True)
class EstimatorConfig:
    """How an energy is estimated.

    ``lam`` is the diameter split threshold and ``rho`` the locality radius;
    ``None`` means "use the default" (10x median nearest-neighbour spacing,
    and a quarter of the sample diameter). ``sup_candidates`` is ``"auto"``,
    ``"all"`` or ``"subsample(j)"``.
    """

    method: str = "exhaustive"
    samples: int = 100_000
    seed: int = 0
    lam: float | None = None
    rho: float | None = None
    sup_candidates: str = "auto"
    workers: int = 1
    chunk_size: int = 10_000
    max_tuples: float = 1e8

    def __post_init__(self):
        if self.method not in ("exhaustive", "monte_carlo"):
            raise ConfigError(f"method must be 'exhaustive' or 'monte_carlo', not {self.method!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.chunk_size < 1 or self.workers < 1:
            raise ConfigError("chunk_size and workers must be >= 1")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.rho is not None and not self.rho > 0:
            raise ConfigError("rho must be positive")
        if self.lam is not None and self.rho is not None and not self.lam < self.rho:
            raise ConfigError(f"need lambda < rho, got lambda={self.lam}, rho={self.rho}")
        _parse_candidates(self.sup_candidates)

    def echo(self) -> dict:
        return {"method": self.method, "samples": self.samples, "seed": self.seed,
                "lambda": self.lam, "rho": self.rho, "sup_candidates": self.sup_candidates}


@dataclass
class EnergyEstimate:
    value: float
    stderr: float
    tuple_count: int
    below_lambda: float
    above_lambda: float
    spec: dict
    config: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """The result JSON object (``extra`` is not part of it)."""
        return {"value": self.value, "stderr": self.stderr, "tuple_count": self.tuple_count,
                "below_lambda": self.below_lambda, "above_lambda": self.above_lambda,
                "spec": dict(self.spec), "config": dict(self.config)}


# --- candidate sets and defaults -----------------------------------------


def _parse_candidates(text: str):
    if text in ("auto", "all"):
        return text, None
    if text.startswith("subsample(") and text.endswith(")"):
        try:
            j = int(text[len("subsample(") : -1])
        except ValueError:
            j = 0
        if j >= 1:
            return "subsample", j
    raise ConfigError(f"sup_candidates must be 'auto', 'all' or 'subsample(j)' with j >= 1, not {text!r}")


def farthest_point_subsample(points: np.ndarray, j: int) -> np.ndarray:
    """Greedy farthest-point-first ordering from index 0; returns ``j`` indices."""
    N = len(points)
    j = min(j, N)
    chosen = np.empty(j, dtype=np.int64)
    chosen[0] = 0
    d2 = np.einsum("ij,ij->i", points - points[0], points - points[0])
    for t in range(1, j):
        nxt = int(np.argmax(d2))
        chosen[t] = nxt
        diff = points - points[nxt]
        np.minimum(d2, np.einsum("ij,ij->i", diff, diff), out=d2)
    return chosen


def resolve_candidates(manifold: SampledManifold, text: str) -> tuple[np.ndarray, str]:
    kind, j = _parse_candidates(text)
    if kind == "auto":
        if manifold.N <= SUP_ALL_LIMIT:
            kind = "all"
        else:
            kind, j = "subsample", SUBSAMPLE_DEFAULT
    if kind == "all":
        return np.arange(manifold.N), "all"
    return np.sort(farthest_point_subsample(manifold.points, j)), f"subsample({j})"


def default_lambda(manifold: SampledManifold) -> float:
    return 10.0 * float(np.median(manifold.nearest_neighbor_spacing()))


def default_rho(manifold: SampledManifold) -> float:
    return manifold.diameter() / 4.0


def _resolve_split(manifold, config):
    lam = config.lam if config.lam is not None else default_lambda(manifold)
    rho = config.rho if config.rho is not None else default_rho(manifold)
    if config.lam is None and not lam < rho:
        lam = rho / 2.0
    if config.rho is None and not lam < rho:
        rho = 2.0 * lam
    return lam, rho


# --- kernels ------------------------------------------------------------
# Kernels take component-major vertex arrays and return the integrand values
# together with the diameters when they come for free (else None).


def _dc_kernel(V):
    return geometry.vertex_discrete_curvature(V)


def _menger_kernel(V):
    return geometry.vertex_menger_curvature(V), None


@lru_cache(maxsize=32)
def _colex_combinations(M: int, r: int) -> np.ndarray:
    """All r-subsets of range(M) in colex order (so subsets of range(M') form a prefix)."""
    if r == 0:
        return np.zeros((1, 0), dtype=np.int64)
    if M < r:
        return np.zeros((0, r), dtype=np.int64)
    arr = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(M), r)),
                      dtype=np.int64, count=math.comb(M, r) * r).reshape(-1, r)
    out = arr[np.lexsort(arr.T)]
    out.setflags(write=False)
    return out


def _sup_kernel(points_t, tuples, completions, kernel, chunk=BLOCK):
    """Max of ``kernel`` over completions for each row of ``tuples``, and the tuple diameters.

    ``points_t`` is the ``(n, N)`` transposed sample and ``completions`` a
    ``(C, q)`` array of candidate indices; q may be 0.
    """
    B = len(tuples)
    out = np.zeros(B)
    diam = np.zeros(B)
    if B == 0:
        return out, diam
    q = completions.shape[1]
    rows = max(1, chunk // max(len(completions), 1))
    for start in range(0, B, rows):
        t = tuples[start : start + rows]
        sl = slice(start, start + len(t))
        base = [points_t[:, t[:, i]] for i in range(t.shape[1])]
        if q == 0:
            out[sl], d = kernel(base)
            diam[sl] = d if d is not None else np.sqrt(geometry.sq_diameter(base))
            continue
        diam[sl] = np.sqrt(geometry.sq_diameter(base))
        C = len(completions)
        V = [np.repeat(b, C, axis=1) for b in base]
        V += [np.tile(points_t[:, completions[:, j]], (1, len(t))) for j in range(q)]
        out[sl] = kernel(V)[0].reshape(len(t), C).max(axis=1)
    return out, diam


def sup_curvature(manifold: SampledManifold, tuple_indices, spec: EnergySpec,
                  config: EstimatorConfig | None = None) -> float:
    """``sup DC(x_0, ..., x_{m+1})`` over completions of the given k points.

    For ``k = m + 2`` this is DC of the tuple itself.
    """
    config = config or EstimatorConfig()
    idx = np.asarray(tuple_indices, dtype=np.int64).reshape(1, -1)
    if idx.shape[1] != spec.k:
        raise InvalidInputError(f"expected {spec.k} indices, got {idx.shape[1]}")
    if len(set(idx[0].tolist())) != spec.k:
        raise InvalidInputError("tuple indices must be distinct")
    _check_manifold(manifold, spec)
    cand, _ = resolve_candidates(manifold, config.sup_candidates)
    q = spec.m + 2 - spec.k
    comps = cand[_colex_combinations(len(cand), q)] if q else np.zeros((1, 0), dtype=np.int64)
    pt = np.ascontiguousarray(manifold.points.T)
    return float(_sup_kernel(pt, idx, comps, _dc_kernel)[0][0])


def _check_manifold(manifold, spec):
    if manifold.m != spec.m or manifold.n != spec.n:
        raise InvalidInputError(
            f"spec (m={spec.m}, n={spec.n}) does not match manifold (m={manifold.m}, n={manifold.n})"
        )


# --- engines ------------------------------------------------------------


@dataclass
class _Problem:
    points_t: np.ndarray
    weights: np.ndarray
    k: int
    q: int
    p: float
    kernel: Callable
    completions: np.ndarray
    lam: float


def _map_ordered(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _exhaustive(prob: _Problem, workers: int):
    """Sum over ordered distinct k-tuples as ``k!`` times the sum over k-subsets."""
    N, k = len(prob.weights), prob.k
    tails = _colex_combinations(N - 1, k - 1) if k > 1 else np.zeros((1, 0), dtype=np.int64)
    C = max(len(prob.completions), 1)
    rows = max(1, BLOCK // C)

    def first_index(i):
        M = N - i - 1
        count = math.comb(M, k - 1) if k > 1 else 1
        below = above = 0.0
        for start in range(0, count, rows):
            tail = tails[start : min(start + rows, count)] + (i + 1)
            tup = np.concatenate([np.full((len(tail), 1), i, dtype=np.int64), tail], axis=1)
            sup, diam = _sup_kernel(prob.points_t, tup, prob.completions, prob.kernel)
            val = np.prod(prob.weights[tup], axis=1) * sup**prob.p
            small = diam < prob.lam
            below += float(val[small].sum())
            above += float(val[~small].sum())
        return below, above

    parts = _map_ordered(first_index, range(N), workers)
    fact = math.factorial(k)
    below = fact * math.fsum(b for b, _ in parts)
    above = fact * math.fsum(a for _, a in parts)
    return below, above


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Independent generator for chunk ``chunk`` of a run seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(chunk),)))


def _monte_carlo(prob: _Problem, samples: int, seed: int, chunk_size: int, workers: int):
    N, k = len(prob.weights), prob.k
    W = float(prob.weights.sum())
    cdf = np.cumsum(prob.weights)
    nchunks = -(-samples // chunk_size)

    def run(c):
        size = min(chunk_size, samples - c * chunk_size)
        rng = chunk_rng(seed, c)
        u = rng.random((size, k)) * cdf[-1]
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), N - 1)
        sup, diam = _sup_kernel(prob.points_t, idx, prob.completions, prob.kernel)
        val = sup**prob.p * W**k
        small = diam < prob.lam
        return float(val.sum()), float((val * val).sum()), float(val[small].sum())

    parts = _map_ordered(run, range(nchunks), workers)
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    sb = math.fsum(p[2] for p in parts)
    mean = s1 / samples
    var = max(s2 / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    stderr = math.sqrt(var / samples)
    below = sb / samples
    return mean, stderr, below, mean - below


def _build_problem(manifold, k, q, p, kernel, config):
    lam, rho = _resolve_split(manifold, config)
    if q:
        cand, cand_text = resolve_candidates(manifold, config.sup_candidates)
        comps = cand[_colex_combinations(len(cand), q)]
    else:
        cand_text = config.sup_candidates
        comps = np.zeros((1, 0), dtype=np.int64)
    prob = _Problem(np.ascontiguousarray(manifold.points.T), manifold.weights, k, q, float(p), kernel, comps, lam)
    echo = replace(config, lam=lam, rho=rho, sup_candidates=cand_text).echo()
    return prob, echo


def _run(manifold, k, q, p, kernel, config, spec_dict):
    prob, echo = _build_problem(manifold, k, q, p, kernel, config)
    N = manifold.N
    if config.method == "exhaustive":
        if float(N) ** k > config.max_tuples:
            raise BudgetExceededError(
                f"N^k = {N}^{k} = {float(N) ** k:.3g} tuples exceeds the exhaustive budget "
                f"{config.max_tuples:.3g}; use method='monte_carlo'"
            )
        below, above = _exhaustive(prob, config.workers)
        count = math.perm(N, k)
        return EnergyEstimate(below + above, 0.0, count, below, above, spec_dict, echo)
    value, stderr, below, above = _monte_carlo(prob, config.samples, config.seed,
                                               config.chunk_size, config.workers)
    return EnergyEstimate(value, stderr, config.samples, below, above, spec_dict, echo)


def energy_exhaustive(manifold: SampledManifold, spec: EnergySpec,
                      config: EstimatorConfig | None = None) -> EnergyEstimate:
    """Deterministic weighted sum over all ordered k-tuples of distinct sample points.

    Raises
    ------
    BudgetExceededError
        If ``N^k`` exceeds ``config.max_tuples``.
    """
    config = replace(config or EstimatorConfig(), method="exhaustive")
    _check_manifold(manifold, spec)
    return _run(manifold, spec.k, spec.m + 2 - spec.k, spec.p, _dc_kernel, config, spec.to_dict())


def energy_monte_carlo(manifold: SampledManifold, spec: EnergySpec,
                       config: EstimatorConfig | None = None) -> EnergyEstimate:
    """Unbiased estimate from ``config.samples`` weight-proportional tuple draws."""
    config = replace(config or EstimatorConfig(), method="monte_carlo")
    _check_manifold(manifold, spec)
    return _run(manifold, spec.k, spec.m + 2 - spec.k, spec.p, _dc_kernel, config, spec.to_dict())


def estimate_energy(manifold, spec, config: EstimatorConfig | None = None) -> EnergyEstimate:
    config = config or EstimatorConfig()
    if config.method == "exhaustive":
        return energy_exhaustive(manifold, spec, config)
    return energy_monte_carlo(manifold, spec, config)


_CURVE_VARIANTS = {"U_p": 1, "I_p": 2, "M_p": 3}


def curve_energy(manifold: SampledManifold, variant: str, p: float,
                 config: EstimatorConfig | None = None) -> EnergyEstimate:
    """Discrete ``U_p``, ``I_p`` or ``M_p``: Menger curvature ``c`` integrated over 1, 2 or 3 points.

    The remaining points of each triple are maximised over, as for ``E_p^k``.
    """
    if manifold.m != 1:
        raise InvalidInputError("curve energies need a one-dimensional sample (m = 1)")
    if variant not in _CURVE_VARIANTS:
        raise InvalidInputError(f"variant must be one of {sorted(_CURVE_VARIANTS)}")
    if not p > 0:
        raise InvalidInputError("p must be positive")
    config = config or EstimatorConfig()
    k = _CURVE_VARIANTS[variant]
    spec_dict = {"m": 1, "n": manifold.n, "k": k, "p": float(p), "variant": variant}
    return _run(manifold, k, 3 - k, p, _menger_kernel, config, spec_dict)


# --- second differences and the Omega sets ------------------------------


def second_difference_functional(patch: GraphPatch, spec: EnergySpec) -> float:
    """``h^(2m) sum_{y, w != 0} |f(y+w) - 2 f(y) + f(y-w)|^p / |w|^(2p - m(k-2))``.

    Only pairs with both ``y + w`` and ``y - w`` on the patch grid contribute.
    """
    if patch.m != spec.m:
        raise InvalidInputError("patch and spec disagree on m")
    m, h = patch.m, patch.h
    expo = 2 * spec.p - m * (spec.k - 2)
    total = second_difference_sum(patch.grid, patch.values, spec.p, lambda r: r ** (-expo))
    return h ** (2 * m) * total


def _uniform_ball(rng, count, dim, radius):
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random((count, 1)) ** (1.0 / dim))


def omega_sampler(w1, k: int, count: int, seed: int = 0) -> float:
    """Monte Carlo measure of ``{(w_2..w_{k-1}) : |w_i| <= |w1|, |w_2 ^ ... ^ w_{k-1}| >= |w1|^(k-2) / 2}``.

    Samples are uniform in the product of balls ``B^m(0, |w1|)``; the disc
    constraint ``w_i in D_delta`` is taken as inactive (``delta >= |w1|``).
    For ``k = 2`` the set is empty-product and its measure is 1.
    """
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    m = w1.shape[0]
    if k < 2:
        raise InvalidInputError("k must be >= 2")
    if k == 2:
        return 1.0
    if count < 1:
        raise InvalidInputError("count must be >= 1")
    r = float(np.linalg.norm(w1))
    if r == 0.0:
        return 0.0
    l = k - 2
    if l > m:
        return 0.0  # more than m vectors in R^m are always dependent
    rng = np.random.default_rng(seed)
    vecs = np.stack([_uniform_ball(rng, count, m, r) for _ in range(l)], axis=1)
    wedge = geometry.batch_gram_volume(vecs)
    frac = float(np.mean(wedge >= 0.5 * r**l))
    return frac * (geometry.unit_ball_volume(m) * r**m) ** l
