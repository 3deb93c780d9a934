"""Discrete calculus for the nonlocal derivative d/dt (k * .).

Index convention: a grid has nodes t_0 = 0 < t_1 < ... < t_N.  Weight
matrices act on the unknowns at t_1..t_N, so row/column ``i`` of a matrix
refers to node ``i + 1``.

Two quadrature rules are available.

``rectangle`` (default)
    l-convolutions use ``(l * f)(t_n) ~ sum_j W[n, j] f(t_j)`` with
    ``W[n, j] = int_{t_{j-1}}^{t_j} l(t_n - s) ds``, integrated exactly from
    the closed form of (1*l).  Row sums are exactly (1*l)(t_n), the weights
    are nonnegative, and the discrete derivative ``D = W^{-1}`` is the operator
    used by the solvers.  For kernels without a closed-form l (MultiTerm) the
    roles flip: ``K[n, j] = int_{t_{j-1}}^{t_j} k(t_n - s) ds`` is exact and
    ``W`` follows from discrete complementarity ``K W = S`` with
    ``S[n, j] = t_j - t_{j-1}``.

``trapezoid``
    piecewise-linear product integration of the l-form, second order for
    smooth data.  Only relaxation curves use it; it has no k-form.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg

from .kernels import KernelSpec, eval_k

try:  # compiled core unless ARTIFACT_PURE_PYTHON is set
    if os.environ.get("ARTIFACT_PURE_PYTHON"):
        raise ImportError("pure-Python core requested")
    from . import _core as _impl

    BACKEND = "cython"
except ImportError:
    from . import _core_py as _impl

    BACKEND = "python"

__all__ = [
    "BACKEND",
    "TimeGrid",
    "TriMatrix",
    "ConvolutionWeights",
    "RelaxationCurve",
    "EnvelopeViolation",
    "WeightConstructionError",
    "build_weights",
    "solve_relaxation",
    "apply_nonlocal_derivative",
    "check_fundamental_identity_discrete",
    "check_convexity_inequality",
    "write_relaxation_csv",
]


class WeightConstructionError(ArithmeticError):
    pass


class EnvelopeViolation(ArithmeticError):
    """A relaxation curve left its a-priori envelope."""

    def __init__(self, message, node, value, lower, upper):
        super().__init__(message)
        self.node = node
        self.value = value
        self.lower = lower
        self.upper = upper


# ---------------------------------------------------------------- grids

def _graded_uniform_nodes(h: float, steps: int, q: float, floor: float) -> np.ndarray:
    # Uniform nodes j*h.  The first cell is refined geometrically toward 0,
    # cell j >= 2 is split into ceil(1/((q-1)(j-1))) parts while that is > 1,
    # so neighbouring steps never grow by more than a factor ~q.
    pts = []
    t = h
    while t > h * floor:
        t /= q
        pts.append(t)
    nodes = [0.0] + sorted(pts) + [h]
    j = 2
    while j <= steps:
        r = math.ceil(1.0 / ((q - 1.0) * (j - 1))) if (q - 1.0) * (j - 1) < 1.0 else 1
        if r == 1:
            break
        base = (j - 1) * h
        nodes.extend(base + i * h / r for i in range(1, r))
        nodes.append(j * h)
        j += 1
    start = len(nodes) - 1
    rest = np.arange(j, steps + 1, dtype=float) * h
    return np.concatenate([np.array(nodes), rest]), start


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Time grid with t_0 = 0.

    ``uniform``: ``steps`` cells of width ``step``.  With ``graded=True``
    (default) the first few cells are subdivided geometrically so the
    t^alpha-type layer at the origin is resolved; all nodes ``j*step`` stay
    nodes of the grid.
    ``geometric``: widths ``first_step * ratio**k``, k = 0..steps-1.
    """

    kind: str
    steps: int
    step: Optional[float] = None
    first_step: Optional[float] = None
    ratio: Optional[float] = None
    graded: bool = True
    nodes: np.ndarray = field(init=False, repr=False)
    # first node index from which all later steps equal ``step``
    toeplitz_from: int = field(init=False, repr=False)

    def __post_init__(self):
        steps = int(self.steps)
        if steps < 1:
            raise ValueError("steps must be a positive integer")
        if self.kind == "uniform":
            if not (self.step and self.step > 0):
                raise ValueError("uniform grid needs a positive step")
            if self.graded:
                nodes, start = _graded_uniform_nodes(float(self.step), steps, 1.1, 1e-6)
            else:
                nodes, start = np.arange(steps + 1) * float(self.step), 0
        elif self.kind == "geometric":
            if not (self.first_step and self.first_step > 0):
                raise ValueError("geometric grid needs a positive first_step")
            if not (self.ratio and self.ratio > 1):
                raise ValueError("geometric grid needs ratio > 1")
            widths = float(self.first_step) * float(self.ratio) ** np.arange(steps)
            nodes = np.concatenate([[0.0], np.cumsum(widths)])
            start = len(nodes) - 1
        else:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "toeplitz_from", int(start))

    # constructors
    @classmethod
    def uniform(cls, step: float, steps: int, graded: bool = True) -> "TimeGrid":
        return cls("uniform", steps, step=float(step), graded=graded)

    @classmethod
    def uniform_to(cls, t_max: float, steps: int, graded: bool = True) -> "TimeGrid":
        return cls.uniform(t_max / steps, steps, graded)

    @classmethod
    def geometric(cls, first_step: float, ratio: float, steps: int) -> "TimeGrid":
        return cls("geometric", steps, first_step=float(first_step), ratio=float(ratio))

    @classmethod
    def geometric_to(cls, t_max: float, first_step: float = 1e-6, steps: int = 1500) -> "TimeGrid":
        """Geometric grid with given first step whose last node is ``t_max``."""
        if t_max <= first_step:
            return cls.uniform(t_max / 50, 50, graded=False)
        log_target = math.log(t_max / first_step)

        def log_sum(r):
            # log of sum_{k<steps} r^k, overflow-free
            a = steps * math.log(r)
            return a + math.log(-math.expm1(-a)) - math.log(r - 1.0)

        if log_sum(1.0 + 1e-12) >= log_target:
            return cls.uniform(t_max / steps, steps, graded=False)
        lo, hi = 1.0 + 1e-12, 2.0
        while log_sum(hi) < log_target:
            hi = 1.0 + 2.0 * (hi - 1.0)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if log_sum(mid) < log_target:
                lo = mid
            else:
                hi = mid
        ratio = 0.5 * (lo + hi)
        first = t_max * math.exp(-log_sum(ratio))
        return cls.geometric(first, ratio, steps)

    @property
    def n(self) -> int:
        """Number of unknowns (nodes after t_0)."""
        return self.nodes.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def to_json(self) -> dict:
        if self.kind == "uniform":
            return {"kind": "uniform", "step": self.step, "steps": self.steps, "graded": self.graded}
        return {"kind": "geometric", "first_step": self.first_step, "ratio": self.ratio, "steps": self.steps}

    @classmethod
    def from_json(cls, obj: dict) -> "TimeGrid":
        obj = dict(obj)
        kind = obj.pop("kind", None)
        allowed = {
            "uniform": {"step", "steps", "graded", "t_max"},
            "geometric": {"first_step", "ratio", "steps", "t_max"},
        }
        if kind not in allowed:
            raise ValueError(f"unknown grid kind {kind!r}")
        extra = set(obj) - allowed[kind]
        if extra:
            raise ValueError(f"unknown grid keys {sorted(extra)}")
        if kind == "uniform":
            if "t_max" in obj:
                if "step" in obj:
                    raise ValueError("give either step or t_max")
                return cls.uniform_to(float(obj["t_max"]), int(obj["steps"]), bool(obj.get("graded", True)))
            return cls.uniform(float(obj["step"]), int(obj["steps"]), bool(obj.get("graded", True)))
        if "t_max" in obj:
            return cls.geometric_to(float(obj["t_max"]), float(obj.get("first_step", 1e-6)), int(obj["steps"]))
        return cls.geometric(float(obj["first_step"]), float(obj["ratio"]), int(obj["steps"]))


# ---------------------------------------------------------------- structured matrices

@dataclass(eq=False)
class TriMatrix:
    """Lower-triangular N x N matrix: dense leading columns plus a Toeplitz tail.

    ``M[i, j] = head[i, j]`` for j < m and ``M[i, j] = tail[i - j]`` for
    j >= m (i >= j).  Grids whose steps become constant after some node give
    weight matrices of exactly this shape; geometric grids have m = N.
    """

    head: np.ndarray
    tail: np.ndarray

    @property
    def m(self) -> int:
        return self.head.shape[1]

    @property
    def size(self) -> int:
        return self.head.shape[0]

    def diag(self) -> np.ndarray:
        n, m = self.size, self.m
        d = np.empty(n)
        d[:m] = np.diagonal(self.head[:m, :m])
        d[m:] = self.tail[0] if n > m else 0.0
        return d

    def row(self, i: int) -> np.ndarray:
        """Entries M[i, 0..i]."""
        m = self.m
        if i < m:
            return self.head[i, : i + 1].copy()
        return np.concatenate([self.head[i], self.tail[i - m :: -1]])

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        m, n = self.m, self.size
        y = self.head @ x[:m]
        if n > m:
            y[m:] += np.convolve(self.tail, x[m:])[: n - m]
        return y

    def rowsums(self) -> np.ndarray:
        return self.matvec(np.ones(self.size))

    def solve(self, rhs: np.ndarray, a: float = 0.0, b: float = 1.0) -> np.ndarray:
        """Solve (a I + b M) x = rhs."""
        return _impl.tri_solve(self.head, self.tail, self.m, float(a), float(b), np.asarray(rhs, dtype=float))

    def to_dense(self) -> np.ndarray:
        n, m = self.size, self.m
        out = np.zeros((n, n))
        out[:, :m] = self.head
        if n > m:
            idx = np.arange(n - m)
            lag = idx[:, None] - idx[None, :]
            blk = np.where(lag >= 0, self.tail[np.maximum(lag, 0)], 0.0)
            out[m:, m:] = blk
        return out

    def min_entry(self) -> float:
        vals = [np.min(np.tril(self.head)) if self.m else np.inf]
        if self.size > self.m:
            vals.append(np.min(self.tail))
        return float(min(vals))

    def max_offdiag(self) -> float:
        """Largest strictly-lower entry."""
        m, n = self.m, self.size
        best = -np.inf
        if m:
            low = np.tril(self.head, -1)
            mask = np.tril(np.ones_like(self.head, dtype=bool), -1)
            if mask.any():
                best = max(best, float(low[mask].max()))
        if n - m > 1:
            best = max(best, float(self.tail[1:].max()))
        return best

    def inverse(self) -> "TriMatrix":
        n, m = self.size, self.m
        A = self.head[:m, :m]
        Ainv = linalg.solve_triangular(A, np.eye(m), lower=True) if m else np.zeros((0, 0))
        if n == m:
            return TriMatrix(Ainv, np.zeros(0))
        d = _impl.toeplitz_inverse(self.tail)
        head = np.empty((n, m))
        head[:m] = Ainv
        if m:
            Y = self.head[m:] @ Ainv
            head[m:] = -_toeplitz_apply(d, Y)
        return TriMatrix(head, d)


def _toeplitz_apply(d: np.ndarray, Y: np.ndarray, block: int = 512) -> np.ndarray:
    # lower-triangular Toeplitz(d) @ Y in row blocks, plain BLAS products
    n = Y.shape[0]
    out = np.empty_like(Y)
    for r0 in range(0, n, block):
        r1 = min(n, r0 + block)
        rows = np.arange(r0, r1)[:, None]
        cols = np.arange(r1)[None, :]
        lag = rows - cols
        T = np.where(lag >= 0, d[np.clip(lag, 0, n - 1)], 0.0)
        out[r0:r1] = T @ Y[:r1]
    return out


def _structured_from_entries(grid: TimeGrid, entry: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> TriMatrix:
    # entry(i, j) evaluates M[i, j] for broadcast index arrays with i >= j
    n = grid.n
    m = min(grid.toeplitz_from, n)
    ii = np.arange(n)[:, None]
    jj = np.arange(m)[None, :]
    head = np.zeros((n, m))
    if m:
        lower = ii >= jj
        I, J = np.broadcast_arrays(ii, jj)
        head[lower] = entry(I[lower], J[lower])
    if n > m:
        rows = np.arange(m, n)
        tail = entry(rows, np.full_like(rows, m))
    else:
        tail = np.zeros(0)
    return TriMatrix(head, np.asarray(tail, dtype=float))


# ---------------------------------------------------------------- weights

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
# cells narrower than this fraction of their distance from the singularity
# are integrated by Gauss-Legendre instead of differencing antiderivatives
_GL_RATIO = 0.1


def _cell_moment(f, p, q, moment):
    """int_p^q f(s) m((s - p)/(q - p)) ds for m = 1, 1 - x or x."""
    p = np.asarray(p, dtype=float)[..., None]
    d = np.asarray(q, dtype=float)[..., None] - p
    vals = f(p + d * _GL_X)
    if moment == "rise":
        vals = vals * (1.0 - _GL_X)
    elif moment == "fall":
        vals = vals * _GL_X
    return np.sum(d * vals * _GL_W, axis=-1)


def _smooth_cells(p, q):
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return (p > 0) & (q - p < _GL_RATIO * p)


def _integrate_cells(f, p, q, moment="flat", closed=None):
    """Cell integrals, by quadrature on smooth cells and ``closed`` elsewhere."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.empty(p.shape)
    sm = _smooth_cells(p, q)
    if sm.any():
        out[sm] = _cell_moment(f, p[sm], q[sm], moment)
    if (~sm).any():
        out[~sm] = closed(p[~sm], q[~sm])
    return out


@dataclass(eq=False)
class ConvolutionWeights:
    """Convolution weights for one kernel on one grid.

    Attributes computed on demand:
    ``l_weights`` (W), ``k_weights`` (K), ``derivative`` (D = W^{-1}, the
    discrete d/dt(k * .)), ``cum_l`` (discrete (1*l)(t_n) = W 1).
    """

    spec: KernelSpec
    grid: TimeGrid
    rule: str = "rectangle"
    _W: Optional[TriMatrix] = None
    _K: Optional[TriMatrix] = None
    _D: Optional[TriMatrix] = None
    # trapezoid rule: weights of the node t_0
    l_weights0: Optional[np.ndarray] = None

    @property
    def l_weights(self) -> TriMatrix:
        if self._W is None:
            self._W = self.derivative.inverse()
        return self._W

    @property
    def derivative(self) -> TriMatrix:
        if self.rule != "rectangle":
            raise NotImplementedError("the trapezoid rule has no k-form")
        if self._D is None:
            if self._K is not None:
                self._D = _row_difference(self._K, self.grid)
            else:
                self._D = self._W.inverse()
        return self._D

    def marching_derivative(self) -> tuple:
        """Sign-repaired copy of ``derivative`` for positivity-preserving marches.

        Returns ``(D, repaired)`` where ``repaired`` is the largest positive
        off-diagonal entry that was zeroed, relative to max |D|.
        """
        return _repair_signs(self.derivative)

    @property
    def k_weights(self) -> TriMatrix:
        if self.rule != "rectangle":
            raise NotImplementedError("the trapezoid rule has no k-form")
        if self._K is None:
            self._K = _row_cumsum(self.derivative, self.grid)
        return self._K

    @cached_property
    def cum_l(self) -> np.ndarray:
        W = self.l_weights
        out = W.rowsums()
        if self.l_weights0 is not None:
            out = out + self.l_weights0
        return out

    def complementarity_residual(self, probes: int = 3, seed: int = 0) -> float:
        """max |K W x - S x| / (S |x|) over x = e_1, 1 and random probes."""
        if self.rule != "rectangle":
            raise NotImplementedError("the trapezoid rule has no k-form")
        n = self.grid.n
        h = self.grid.widths
        rng = np.random.default_rng(seed)
        xs = [np.eye(1, n).ravel(), np.ones(n)] + [rng.standard_normal(n) for _ in range(probes)]
        worst = 0.0
        for x in xs:
            lhs = self.k_weights.matvec(self.l_weights.matvec(x))
            rhs = np.cumsum(h * x)
            scale = np.cumsum(h * np.abs(x))
            ok = scale > 0
            worst = max(worst, float(np.max(np.abs(lhs - rhs)[ok] / scale[ok])))
        return worst


# Off-diagonal entries of D = W^{-1} are <= 0 for the kernels and grids used
# here, but the inverse is formed with cancellation: tiny graded cells make
# |D| reach ~1e7 while far entries are ~1e-10.  Entries that come out positive
# at that rounding scale are set to zero; anything larger is an error.
SIGN_REPAIR_TOL = 1e-10


def _repair_signs(D: TriMatrix):
    scale = max(float(np.max(np.abs(D.head))) if D.head.size else 0.0,
                float(np.max(np.abs(D.tail))) if D.tail.size else 0.0)
    worst = max(D.max_offdiag(), 0.0)
    if worst > SIGN_REPAIR_TOL * scale:
        raise WeightConstructionError(
            f"derivative weights lost their sign pattern (entry {worst:.3g}, scale {scale:.3g})"
        )
    if worst > 0:
        head = D.head.copy()
        low = np.tril(np.ones(head.shape, dtype=bool), -1)
        head[low & (head > 0)] = 0.0
        tail = D.tail.copy()
        tail[1:] = np.minimum(tail[1:], 0.0)
        D = TriMatrix(head, tail)
    return D, (worst / scale if scale else 0.0)


def _row_difference(K: TriMatrix, grid: TimeGrid) -> TriMatrix:
    # D = S^{-1} K : (K[i] - K[i-1]) / h_i
    h = grid.widths
    head = np.diff(K.head, axis=0, prepend=0.0) / h[:, None]
    if K.tail.size:
        tail = np.diff(K.tail, prepend=0.0) / h[-1]
    else:
        tail = K.tail.copy()
    return TriMatrix(head, tail)


def _row_cumsum(D: TriMatrix, grid: TimeGrid) -> TriMatrix:
    # K = S D
    h = grid.widths
    head = np.cumsum(h[:, None] * D.head, axis=0)
    tail = h[-1] * np.cumsum(D.tail) if D.tail.size else D.tail.copy()
    return TriMatrix(head, tail)


def build_weights(spec: KernelSpec, grid: TimeGrid, rule: str = "rectangle") -> ConvolutionWeights:
    """Product-integration weights of ``spec`` on ``grid``.

    l-primary kernels integrate (1*l) exactly and derive the k-weights by
    discrete complementarity; MultiTerm integrates (1*k) exactly and derives
    the l-weights.  Raises :class:`WeightConstructionError` if a leading
    weight vanishes or an l-weight comes out negative.
    """
    t = grid.nodes
    if rule not in ("rectangle", "trapezoid"):
        raise ValueError(f"unknown rule {rule!r}")
    if rule == "trapezoid" and not spec.has_closed_l:
        raise ValueError("the trapezoid rule needs a closed-form l")

    if rule == "rectangle" and spec.has_closed_l:
        F1 = spec.cum_l

        def entry(i, j):
            return _integrate_cells(spec.l, t[i + 1] - t[j + 1], t[i + 1] - t[j],
                                    closed=lambda p, q: F1(q) - F1(p))

        W = _structured_from_entries(grid, entry)
        _check_leading(W, "l")
        out = ConvolutionWeights(spec, grid, rule, _W=W)
    elif rule == "rectangle":
        A1 = spec.cum_k

        def entry(i, j):
            return _integrate_cells(spec.k, t[i + 1] - t[j + 1], t[i + 1] - t[j],
                                    closed=lambda p, q: A1(q) - A1(p))

        K = _structured_from_entries(grid, entry)
        _check_leading(K, "k")
        out = ConvolutionWeights(spec, grid, rule, _K=K)
    else:
        F1, F2 = spec.cum_l, spec.cum2_l

        def rise(n, j):
            # hat of node j on [t_{j-1}, t_j], seen from t_n
            return _integrate_cells(spec.l, t[n] - t[j], t[n] - t[j - 1], "rise",
                                    closed=lambda p, q: (F2(q) - F2(p)) / (q - p) - F1(p))

        def fall(n, j):
            # hat of node j on [t_j, t_{j+1}], j + 1 <= n
            return _integrate_cells(spec.l, t[n] - t[j + 1], t[n] - t[j], "fall",
                                    closed=lambda p, q: F1(q) - (F2(q) - F2(p)) / (q - p))

        def entry(i, j):
            n, node = i + 1, j + 1
            val = rise(n, node)
            inner = node < n
            if np.any(inner):
                val = np.asarray(val, dtype=float).copy()
                val[inner] += fall(n[inner], node[inner])
            return val

        W = _structured_from_entries(grid, entry)
        _check_leading(W, "l")
        nn = np.arange(1, grid.n + 1)
        w0 = fall(nn, np.zeros_like(nn))
        out = ConvolutionWeights(spec, grid, rule, _W=W, l_weights0=w0)

    if out.l_weights.min_entry() < 0 or (out.l_weights0 is not None and out.l_weights0.min() < 0):
        raise WeightConstructionError("negative l-weight; grid too coarse for this kernel")
    return out


def _check_leading(M: TriMatrix, name: str):
    d = M.diag()
    if not np.all(d > 0):
        raise WeightConstructionError(f"non-invertible leading {name}-weight")


# ---------------------------------------------------------------- relaxation

@dataclass(eq=False)
class RelaxationCurve:
    mu: float
    grid: TimeGrid
    values: np.ndarray
    lower_env: np.ndarray
    upper_env: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def at(self, t: float) -> float:
        """Value at a grid node (no interpolation)."""
        idx = np.flatnonzero(np.isclose(self.grid.nodes, t, rtol=1e-12, atol=0.0))
        if idx.size == 0:
            raise KeyError(f"{t} is not a node of the grid")
        return float(self.values[idx[0]])


def _envelopes(weights: ConvolutionWeights, mu: float):
    t = weights.grid.nodes[1:]
    spec = weights.spec
    k = eval_k(spec, t)
    cl = spec.cum_l(t) if spec.has_closed_l else weights.cum_l
    lower = np.concatenate([[1.0], k / (k + mu)]) if mu > 0 else np.ones(t.size + 1)
    upper = np.concatenate([[1.0], 1.0 / (1.0 + mu * cl)])
    return lower, upper


def solve_relaxation(weights: ConvolutionWeights, mu: float, slack: float = 1e-10, check: bool = True) -> RelaxationCurve:
    """Relaxation function s_mu on the grid of ``weights``.

    Implicit marching of s + mu (l * s) = 1.  Envelope violations beyond
    ``slack`` raise :class:`EnvelopeViolation` unless ``check`` is False.
    """
    mu = float(mu)
    if not mu >= 0:
        raise ValueError("mu must be nonnegative")
    n = weights.grid.n
    if weights.rule == "trapezoid":
        W = weights.l_weights
        s = W.solve(1.0 - mu * weights.l_weights0, a=1.0, b=mu)
    elif weights._W is not None and weights._D is None:
        s = weights.l_weights.solve(np.ones(n), a=1.0, b=mu)
    else:
        D = weights.derivative
        s = D.solve(D.rowsums(), a=mu, b=1.0)
    values = np.concatenate([[1.0], s])
    lower, upper = _envelopes(weights, mu)
    curve = RelaxationCurve(mu, weights.grid, values, lower, upper)
    if check:
        _certify(curve, slack)
    return curve


def _certify(curve: RelaxationCurve, slack: float):
    v = curve.values
    bad_lo = np.flatnonzero(v < curve.lower_env - slack)
    bad_hi = np.flatnonzero(v > curve.upper_env + slack)
    bad = np.concatenate([bad_lo, bad_hi])
    if bad.size:
        i = int(bad.min())
        raise EnvelopeViolation(
            f"relaxation value left its envelope at node {i} (t={curve.t[i]:.6g})",
            i, float(v[i]), float(curve.lower_env[i]), float(curve.upper_env[i]),
        )
    inc = np.flatnonzero(np.diff(v) > slack)
    if inc.size:
        i = int(inc[0]) + 1
        raise EnvelopeViolation(
            f"relaxation values increase at node {i}", i, float(v[i]),
            float(curve.lower_env[i]), float(curve.upper_env[i]),
        )


def write_relaxation_csv(curve: RelaxationCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "s_mu", "lower_env", "upper_env"])
        for row in zip(curve.t, curve.values, curve.lower_env, curve.upper_env):
            w.writerow([repr(float(x)) for x in row])


# ---------------------------------------------------------------- derivative and identities

def apply_nonlocal_derivative(weights: ConvolutionWeights, history: Sequence[float], baseline: float) -> float:
    """Discrete d/dt (k * [v - v_0]) at node n = len(history).

    ``history[j]`` holds v(t_{j+1}).  Computed as
    ((K(v - v_0))_n - (K(v - v_0))_{n-1}) / (t_n - t_{n-1}).
    """
    h = np.asarray(history, dtype=float)
    n = h.size
    if n == 0:
        raise ValueError("history must be nonempty")
    if n > weights.grid.n:
        raise ValueError(f"history of length {n} exceeds the grid ({weights.grid.n} steps)")
    row = weights.derivative.row(n - 1)
    return float(row @ (h - baseline))


def check_fundamental_identity_discrete(values: Sequence[float], step: float, convex_fn) -> float:
    """Max residual of the backward-difference chain-rule identity.

    psi'(u_n) (u_n - u_{n-1})/tau
        = (psi(u_n) - psi(u_{n-1}))/tau
          + (psi(u_{n-1}) - psi(u_n) - psi'(u_n)(u_{n-1} - u_n))/tau

    Both sides are formed independently; the residual is scaled by the
    magnitude of the terms so that rounding is measured in relative units.
    """
    psi, dpsi = _as_psi(convex_fn)
    u = np.asarray(values, dtype=float)
    tau = float(step)
    un, up = u[1:], u[:-1]
    lhs = dpsi(un) * (un - up) / tau
    chain = (psi(un) - psi(up)) / tau
    rem = (psi(up) - psi(un) - dpsi(un) * (up - un)) / tau
    scale = np.maximum(1.0, np.abs(psi(un)) + np.abs(psi(up)) + np.abs(dpsi(un) * un) + np.abs(dpsi(un) * up)) / tau
    res = np.abs(lhs - chain - rem) / scale
    return float(res.max()) if res.size else 0.0


def check_convexity_inequality(weights: ConvolutionWeights, values: Sequence[float], baseline: float, convex_fn) -> float:
    """Most negative margin of
    psi'(u_n) D(u - u_0)_n - D(psi(u) - psi(u_0))_n  over all nodes n.

    ``values[j]`` is u(t_{j+1}).
    """
    psi, dpsi = _as_psi(convex_fn)
    u = np.asarray(values, dtype=float)
    D = weights.derivative
    a = D.matvec(u - baseline)
    b = D.matvec(psi(u) - psi(np.float64(baseline)))
    margin = dpsi(u) * a - b
    scale = np.maximum(1.0, np.abs(dpsi(u) * a) + np.abs(b))
    return float(np.min(margin / scale))


def _as_psi(convex_fn):
    """Accept an EntropyGenerator, a power (float) or a (psi, dpsi) pair."""
    if isinstance(convex_fn, (int, float)):
        p = float(convex_fn)
        return (lambda y: np.asarray(y, dtype=float) ** p, lambda y: p * np.asarray(y, dtype=float) ** (p - 1))
    if isinstance(convex_fn, tuple):
        return convex_fn
    return convex_fn.phi, convex_fn.dphi
