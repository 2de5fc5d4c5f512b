"""Fractional Sobolev-Slobodeckij and Besov seminorms of grid functions.

Both seminorms are returned to the power ``p`` (no root is taken); the CLI
labels the quantity ``seminorm_p``.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ParseError
from .grids import LatticeGrid, first_difference_sum, second_difference_sum

__all__ = [
    "GridFunction",
    "gagliardo_seminorm",
    "besov_second_difference",
    "sobolev_exponent",
    "besov_exponent",
    "alpha_membership_threshold",
    "load_grid_function",
    "save_grid_function",
    "NearDegenerateExponentWarning",
]


class NearDegenerateExponentWarning(UserWarning):
    """The smoothness ``s`` is within 1e-3 of an endpoint of (0, 1)."""


@dataclass(eq=False)
class GridFunction:
    """Values of ``u`` (kind ``"function"``) or ``Du`` (kind ``"gradient"``) on a lattice grid.

    ``values`` has shape ``(N, d)``; a gradient field of an ``R^c``-valued map
    on ``R^m`` is stored flattened with ``d = c * m``.
    """

    grid: LatticeGrid
    values: np.ndarray
    kind: str = "function"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals = vals.reshape(len(self.grid), -1)
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("grid function values must be finite")
        if self.kind not in ("function", "gradient"):
            raise InvalidInputError(f"kind must be 'function' or 'gradient', not {self.kind!r}")
        if not self.grid.is_symmetric:
            raise InvalidInputError("grid must be symmetric about 0")
        self.values = vals

    @property
    def m(self) -> int:
        return self.grid.m

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def h(self) -> float:
        return self.grid.h

    @classmethod
    def from_patch(cls, patch, kind: str = "function") -> "GridFunction":
        """The graph function of a patch, or its derivative for ``kind="gradient"``."""
        if kind == "function":
            return cls(patch.grid, patch.values, "function")
        return cls(patch.grid, patch.derivative.reshape(len(patch.grid), -1), "gradient")

    @classmethod
    def sample(cls, func, m: int, delta: float, h: float, kind: str = "function") -> "GridFunction":
        grid = LatticeGrid.disc(m, delta, h)
        return cls(grid, np.asarray(func(grid.coords), dtype=float).reshape(len(grid), -1), kind)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * c, self.kind)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def _check_exponents(p, name, value, lo, hi):
    if not p >= 1:
        raise InvalidInputError(f"p must be >= 1, got {p}")
    if not lo < value < hi:
        raise InvalidInputError(f"{name} must lie in ({lo}, {hi}), got {value}")


def gagliardo_seminorm(g: GridFunction, s: float, p: float) -> float:
    """``h^(2m) * sum_{x != y} |g(x) - g(y)|^p / |x - y|^(m + s p)`` over grid pairs."""
    _check_exponents(p, "s", s, 0.0, 1.0)
    m, h = g.m, g.h
    expo = m + s * p
    return h ** (2 * m) * first_difference_sum(g.grid, g.values, p, lambda r: r ** (-expo))


def besov_second_difference(g: GridFunction, sigma: float, p: float) -> float:
    """Second-difference seminorm ``sum |g(x) - 2 g((x+y)/2) + g(y)|^p / |x - y|^(m + sigma p)``.

    Pairs are restricted to those whose midpoint is a grid node. Writing
    ``x = c - w``, ``y = c + w`` the pair sum becomes a sum over node ``c`` and
    offset ``w``, with cell weight ``2^m h^(2m)`` from ``dx dy = 2^m dc dw``.
    """
    _check_exponents(p, "sigma", sigma, 0.0, 2.0)
    m, h = g.m, g.h
    expo = m + sigma * p
    total = second_difference_sum(g.grid, g.values, p, lambda r: (2.0 * r) ** (-expo))
    return 2.0**m * h ** (2 * m) * total


def _spec_fields(spec):
    return int(spec.m), int(spec.k), float(spec.p)


def sobolev_exponent(spec) -> float:
    """``s = 1 - m (k - 1) / p``; warns when ``s`` is within 1e-3 of 0 or 1."""
    m, k, p = _spec_fields(spec)
    if not p > m * (k - 1):
        raise InvalidInputError(f"need p > m(k-1) = {m * (k - 1)}, got p={p}")
    s = 1.0 - m * (k - 1) / p
    if s < 1e-3 or s > 1 - 1e-3:
        warnings.warn(f"smoothness s={s:.3g} is nearly degenerate", NearDegenerateExponentWarning,
                      stacklevel=2)
    return s


def besov_exponent(spec) -> float:
    """``sigma = 2 - m (k - 1) / p``, the smoothness of the second-difference bound."""
    m, k, p = _spec_fields(spec)
    s = sobolev_exponent(spec)
    sigma = 2.0 - m * (k - 1) / p
    assert abs(sigma - (1.0 + s)) <= 4 * np.finfo(float).eps * 2
    # exponent bookkeeping of the lower bound: m + sigma p = 2p - m(k-2)
    assert abs((m + sigma * p) - (2 * p - m * (k - 2))) <= 1e-12 * max(1.0, p)
    return sigma


def alpha_membership_threshold(m: int, s: float, p: float) -> float:
    """Critical exponent ``1 + s - m/p`` for ``|x|^alpha`` cut off near 0.

    Above it the function is locally in ``W^{1+s,p}``; below it (alpha not an
    even integer) it is not.
    """
    if not 0 < s < 1:
        raise InvalidInputError("s must lie in (0, 1)")
    if not p > m:
        raise InvalidInputError("need p > m")
    return 1.0 + s - m / p


# --- files --------------------------------------------------------------


def save_grid_function(g: GridFunction, path, delta: float | None = None) -> None:
    """CSV ``x0..x{m-1},v0..v{d-1}`` plus sidecar ``{m, d, h, delta, kind}``."""
    path = Path(path)
    header = [f"x{i}" for i in range(g.m)] + [f"v{j}" for j in range(g.d)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for x, v in zip(g.grid.coords, g.values):
            w.writerow([format(t, ".17g") for t in x] + [format(t, ".17g") for t in v])
    meta = {"m": g.m, "d": g.d, "h": g.h, "delta": delta if delta is not None else g.grid.extent,
            "kind": g.kind}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_grid_function(path) -> GridFunction:
    path = Path(path)
    mp = path.with_suffix(".json")
    if not mp.exists():
        raise InvalidInputError(f"grid function metadata {mp} not found")
    meta = json.loads(mp.read_text(encoding="utf-8"))
    try:
        m, d, h = int(meta["m"]), int(meta["d"]), float(meta["h"])
    except KeyError as exc:
        raise ParseError(f"metadata lacks {exc}", path=mp) from None
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    expected = [f"x{i}" for i in range(m)] + [f"v{j}" for j in range(d)]
    if not rows or [c.strip() for c in rows[0]] != expected:
        raise ParseError(f"header must be {','.join(expected)}", lineno=1, path=path)
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != m + d:
            raise ParseError(f"expected {m + d} columns, got {len(row)}", lineno=lineno, path=path)
        try:
            data.append([float(v) for v in row])
        except ValueError:
            raise ParseError(f"non-numeric value in {row!r}", lineno=lineno, path=path) from None
    arr = np.array(data, dtype=float).reshape(-1, m + d)
    try:
        grid = LatticeGrid.from_coords(arr[:, :m], h)
    except InvalidInputError as exc:
        raise ParseError(str(exc), path=path) from None
    return GridFunction(grid, arr[:, m:], meta.get("kind", "function"))
