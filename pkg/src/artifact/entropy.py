"""Entropy generators, relative entropies and the functional inequalities
they satisfy (CKP, convex Sobolev, the pointwise and Hoelder-type bounds).

Spatial data lives on a :class:`SpatialGrid`, a set of nodes with fixed
quadrature weights.  Solver grids are cell centred and use the cell width
as weight, which is the same rule the solver uses for mass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "EntropyGenerator",
    "PowerBeta",
    "Logarithmic",
    "SpatialGrid",
    "Field1D",
    "SteadyState1D",
    "UsageError",
    "phi_eval",
    "relative_entropy",
    "ckp_bound",
    "convex_sobolev_residual",
    "pointwise_F",
    "g_function",
    "entropy_holder_bound",
    "l1_distance",
    "write_sweep_csv",
]

SERIES_RADIUS = 1e-6


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- generators

class EntropyGenerator:
    name: str

    def phi(self, x):
        raise NotImplementedError

    def dphi(self, x):
        raise NotImplementedError

    def d2phi(self, x):
        raise NotImplementedError

    def d3phi(self, x):
        raise NotImplementedError

    def d4phi(self, x):
        raise NotImplementedError

    def allows_signed(self) -> bool:
        return False


@dataclass(frozen=True)
class PowerBeta(EntropyGenerator):
    """phi_beta(x) = x^beta - 1 - beta (x - 1), 1 < beta <= 2."""

    beta: float

    def __post_init__(self):
        b = float(self.beta)
        if not (1.0 < b <= 2.0):
            raise ValueError(f"beta must lie in (1, 2], got {b}")
        object.__setattr__(self, "beta", b)

    @property
    def name(self) -> str:
        return f"beta{self.beta:g}"

    def allows_signed(self) -> bool:
        # phi_2 = (x - 1)^2 makes sense for signed data
        return self.beta == 2.0

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        b = self.beta
        if b == 2.0:
            return (x - 1.0) ** 2
        e = x - 1.0
        out = np.empty_like(e)
        near = np.abs(e) < SERIES_RADIUS
        en = e[near]
        c2 = b * (b - 1) / 2
        c3 = c2 * (b - 2) / 3
        c4 = c3 * (b - 3) / 4
        out[near] = en * en * (c2 + en * (c3 + en * c4))
        far = ~near
        xf = x[far]
        with np.errstate(divide="ignore"):
            val = np.expm1(b * np.log1p(e[far])) - b * e[far]
        out[far] = np.where(xf == 0.0, b - 1.0, val)
        return out

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        b = self.beta
        if b == 2.0:
            return 2.0 * (x - 1.0)
        with np.errstate(divide="ignore"):
            return b * np.expm1((b - 1.0) * np.log(x))

    def d2phi(self, x):
        b = self.beta
        x = np.asarray(x, dtype=float)
        return b * (b - 1) * x ** (b - 2)

    def d3phi(self, x):
        b = self.beta
        x = np.asarray(x, dtype=float)
        return b * (b - 1) * (b - 2) * x ** (b - 3)

    def d4phi(self, x):
        b = self.beta
        x = np.asarray(x, dtype=float)
        return b * (b - 1) * (b - 2) * (b - 3) * x ** (b - 4)


@dataclass(frozen=True)
class Logarithmic(EntropyGenerator):
    """phi(x) = x (log x - 1) + 1, with 0 log 0 = 0."""

    @property
    def name(self) -> str:
        return "log"

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        e = x - 1.0
        out = np.empty_like(e)
        near = np.abs(e) < SERIES_RADIUS
        en = e[near]
        out[near] = en * en * (0.5 + en * (-1.0 / 6 + en * (1.0 / 12)))
        far = ~near
        xf = x[far]
        ef = e[far]
        with np.errstate(divide="ignore", invalid="ignore"):
            # log1p only helps near 1; x - 1 rounds to -1 for tiny x
            lg = np.where(np.abs(ef) < 0.5, np.log1p(ef), np.log(xf))
            val = xf * lg - ef
        out[far] = np.where(xf == 0.0, 1.0, val)
        return out

    def dphi(self, x):
        with np.errstate(divide="ignore"):
            return np.log(np.asarray(x, dtype=float))

    def d2phi(self, x):
        return 1.0 / np.asarray(x, dtype=float)

    def d3phi(self, x):
        return -1.0 / np.asarray(x, dtype=float) ** 2

    def d4phi(self, x):
        return 2.0 / np.asarray(x, dtype=float) ** 3


def generator_from_json(obj) -> EntropyGenerator:
    if obj in ("log", "logarithmic", {"type": "log"}):
        return Logarithmic()
    if isinstance(obj, dict):
        extra = set(obj) - {"type", "beta"}
        if extra:
            raise ValueError(f"unknown generator keys {sorted(extra)}")
        if obj.get("type") in ("log", "logarithmic"):
            return Logarithmic()
        if obj.get("type") == "power":
            return PowerBeta(obj["beta"])
    if isinstance(obj, (int, float)):
        return PowerBeta(obj)
    raise ValueError(f"cannot parse generator {obj!r}")


def phi_eval(gen: EntropyGenerator, x):
    """phi(x) for x >= 0 (any real x for PowerBeta(2))."""
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("x contains NaN")
    if not gen.allows_signed() and np.any(arr < 0):
        raise ValueError("phi is defined for x >= 0 only")
    out = gen.phi(arr)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------- spatial data

@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Nodes with quadrature weights."""

    x: np.ndarray
    weights: np.ndarray

    @classmethod
    def cell_centered(cls, L: float, N: int) -> "SpatialGrid":
        h = 2.0 * L / N
        x = -L + (np.arange(N) + 0.5) * h
        return cls(x, np.full(N, h))

    @classmethod
    def trapezoid(cls, x) -> "SpatialGrid":
        x = np.asarray(x, dtype=float)
        w = np.zeros_like(x)
        d = np.diff(x)
        w[:-1] += d / 2
        w[1:] += d / 2
        return cls(x, w)

    @property
    def cell_width(self) -> float:
        return float(self.weights[0])

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f))

    def same_as(self, other: "SpatialGrid") -> bool:
        return self is other or (
            self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.weights, other.weights)
        )


@dataclass(frozen=True, eq=False)
class Field1D:
    """Samples of a density (or a signed perturbation) on a spatial grid."""

    grid: SpatialGrid
    values: np.ndarray

    @property
    def mass(self) -> float:
        return self.grid.integrate(self.values)


@dataclass(frozen=True, eq=False)
class SteadyState1D:
    """Discrete Gibbs state u_inf = M exp(-V) with unit discrete mass."""

    grid: SpatialGrid
    values: np.ndarray
    M: float

    @classmethod
    def gibbs(cls, grid: SpatialGrid, V) -> "SteadyState1D":
        Vx = np.asarray(V(grid.x) if callable(V) else V, dtype=float)
        shift = Vx.min()
        e = np.exp(-(Vx - shift))
        Z = grid.integrate(e)
        values = e / Z
        return cls(grid, values, float(np.exp(shift) / Z))

    @classmethod
    def gaussian(cls, grid: SpatialGrid) -> "SteadyState1D":
        return cls.gibbs(grid, lambda x: 0.5 * x * x)

    def field(self) -> Field1D:
        return Field1D(self.grid, self.values)


def _check_pair(u: Field1D, steady: SteadyState1D, mass_tol: float = 1e-8):
    if not u.grid.same_as(steady.grid):
        raise UsageError("field and steady state live on different grids")
    if abs(u.mass - 1.0) > mass_tol:
        raise UsageError(f"field mass {u.mass!r} deviates from 1")


def relative_entropy(gen: EntropyGenerator, u: Field1D, steady: SteadyState1D) -> float:
    """H_phi(u) = sum_i w_i phi(u_i / u_inf_i) u_inf_i."""
    _check_pair(u, steady)
    v = u.values / steady.values
    if not gen.allows_signed() and np.any(v < 0):
        raise UsageError("negative density values need PowerBeta(2)")
    return float(np.dot(steady.grid.weights, gen.phi(v) * steady.values))


def l1_distance(u: Field1D, steady: SteadyState1D) -> float:
    return float(np.dot(steady.grid.weights, np.abs(u.values - steady.values)))


def ckp_bound(gen: EntropyGenerator, entropy_value: float) -> float:
    """sqrt(2 H / phi''(1)), an upper bound for the L1 distance."""
    if entropy_value < 0:
        raise ValueError("entropy must be nonnegative")
    return float(np.sqrt(2.0 / float(gen.d2phi(1.0)) * entropy_value))


def convex_sobolev_residual(gen: EntropyGenerator, u: Field1D, steady: SteadyState1D, lam: float) -> float:
    """RHS - LHS of H(u) <= 1/(2 lam) int phi''(v) |v'|^2 u_inf, v = u/u_inf.

    The gradient uses second-order central differences and second-order
    one-sided stencils at the two ends.
    """
    _check_pair(u, steady)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    v = u.values / steady.values
    dv = np.gradient(v, steady.grid.x, edge_order=2)
    w = steady.grid.weights
    rhs = float(np.dot(w, gen.d2phi(v) * dv * dv * steady.values)) / (2.0 * lam)
    lhs = float(np.dot(w, gen.phi(v) * steady.values))
    return rhs - lhs


def pointwise_F(beta: float, x, y):
    """phi(x)^((b-1)/b) phi(y)^(1/b) - (x^(b-1) y + (1-b) x - y + b - 1)."""
    b = float(beta)
    gen = PowerBeta(b)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("x and y must be nonnegative")
    px, py = gen.phi(np.atleast_1d(x)), gen.phi(np.atleast_1d(y))
    px, py = np.maximum(px, 0.0), np.maximum(py, 0.0)
    first = px ** ((b - 1) / b) * py ** (1 / b)
    xb = np.atleast_1d(x) ** (b - 1)
    second = xb * np.atleast_1d(y) + (1 - b) * np.atleast_1d(x) - np.atleast_1d(y) + b - 1
    out = first - second
    out = out.reshape(np.broadcast(x, y).shape)
    return float(out) if out.ndim == 0 else out


def g_function(beta: float, y):
    """(b-1) y^(b-2) + (2-b) y^(b-1) - 1."""
    b = float(beta)
    y = np.asarray(y, dtype=float)
    return (b - 1) * y ** (b - 2) + (2 - b) * y ** (b - 1) - 1


def entropy_holder_bound(beta: float, f1: Field1D, f2: Field1D, g: SteadyState1D):
    """(lhs, rhs) with lhs = int (h1^(b-1) h2 - h1) g and
    rhs = H(f1|g)^((b-1)/b) H(f2|g)^(1/b), h_i = f_i / g."""
    for f in (f1, f2):
        _check_pair(f, g)
    b = float(beta)
    gen = PowerBeta(b)
    h1 = f1.values / g.values
    h2 = f2.values / g.values
    w = g.grid.weights
    lhs = float(np.dot(w, (h1 ** (b - 1) * h2 - h1) * g.values))
    e1 = max(float(np.dot(w, gen.phi(h1) * g.values)), 0.0)
    e2 = max(float(np.dot(w, gen.phi(h2) * g.values)), 0.0)
    rhs = e1 ** ((b - 1) / b) * e2 ** (1 / b)
    return lhs, rhs


def write_sweep_csv(rows: Iterable, path) -> None:
    """rows: iterables of (case_id, lhs, rhs); margin = rhs - lhs."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "lhs", "rhs", "margin"])
        for case_id, lhs, rhs in rows:
            w.writerow([case_id, repr(float(lhs)), repr(float(rhs)), repr(float(rhs) - float(lhs))])
