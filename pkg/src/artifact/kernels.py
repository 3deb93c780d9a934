"""Kernel pairs (k, l) with k * l = 1 on (0, inf).

Four families are provided.  For all of them ``k`` is evaluated pointwise and
the first antiderivative of ``k`` is available in closed form.  Except for
``MultiTerm`` the complementary kernel ``l`` and its first two
antiderivatives ``(1*l)`` and ``(1*1*l)`` are also known in closed form; the
weight construction in :mod:`artifact.convq` integrates them exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import special

from .specfun import EULER_GAMMA, DomainError, exp_e1, gamma

__all__ = [
    "KernelSpec",
    "Fractional",
    "TemperedFractional",
    "MultiTerm",
    "DistributedOrder",
    "DecayClass",
    "eval_k",
    "eval_cum_l",
    "decay_class",
    "kernel_from_json",
    "kernel_to_json",
    "parse_kernel",
    "log_decay_threshold",
    "log_decay_interval",
]


def _as_positive_array(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.isnan(arr).any():
        raise DomainError("t contains NaN")
    if np.any(arr <= 0):
        raise DomainError("kernels are evaluated only for t > 0")
    return arr


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def _pow_ratio(t: np.ndarray, b: float) -> np.ndarray:
    # t**b / Gamma(b+1) with the convention 0 at t = 0
    return np.where(t > 0, np.maximum(t, 0.0) ** b, 0.0) / gamma(b + 1.0)


@dataclass(frozen=True)
class DecayClass:
    """Asymptotic behaviour of the relaxation function."""

    kind: str  # "algebraic" | "exponential" | "logarithmic"
    exponent: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("algebraic", "exponential", "logarithmic"):
            raise ValueError(f"unknown decay kind {self.kind!r}")
        if self.kind == "algebraic" and not (self.exponent and self.exponent > 0):
            raise ValueError("algebraic decay needs a positive exponent")


class KernelSpec:
    """Base class of the kernel variants.  Instances are immutable."""

    #: True if l, (1*l) and (1*1*l) are available in closed form
    has_closed_l: bool = True

    def k(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cum_k(self, t: np.ndarray) -> np.ndarray:
        """(1*k)(t) for t >= 0."""
        raise NotImplementedError

    def l(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def cum_l(self, t: np.ndarray) -> np.ndarray:
        """(1*l)(t) for t >= 0."""
        raise NotImplementedError

    def cum2_l(self, t: np.ndarray) -> np.ndarray:
        """(1*1*l)(t) for t >= 0."""
        raise NotImplementedError

    def laplace_k(self, z: float) -> float:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


def _check_alpha(alpha: float, name: str = "alpha") -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {alpha}")
    return alpha


@dataclass(frozen=True)
class Fractional(KernelSpec):
    """k = g_{1-alpha}, l = g_alpha."""

    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))

    def k(self, t):
        return t ** (-self.alpha) / gamma(1.0 - self.alpha)

    def cum_k(self, t):
        return _pow_ratio(t, 1.0 - self.alpha)

    def l(self, t):
        return t ** (self.alpha - 1.0) / gamma(self.alpha)

    def cum_l(self, t):
        return _pow_ratio(t, self.alpha)

    def cum2_l(self, t):
        return _pow_ratio(t, 1.0 + self.alpha)

    def laplace_k(self, z):
        return z ** (self.alpha - 1.0)

    def to_json(self):
        return {"type": "fractional", "alpha": self.alpha}


@dataclass(frozen=True)
class TemperedFractional(KernelSpec):
    """k = g_{1-alpha} e^{-gamma t}.

    The complement is l = g_alpha e^{-gamma t} + gamma * gamma^{-alpha} P(alpha, gamma t)
    with P the regularised lower incomplete gamma function.
    """

    alpha: float
    gamma_rate: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        g = float(self.gamma_rate)
        if not g > 0:
            raise DomainError("gamma_rate must be positive")
        object.__setattr__(self, "gamma_rate", g)

    def k(self, t):
        return t ** (-self.alpha) / gamma(1.0 - self.alpha) * np.exp(-self.gamma_rate * t)

    def cum_k(self, t):
        a, g = self.alpha, self.gamma_rate
        return g ** (a - 1.0) * special.gammainc(1.0 - a, g * np.maximum(t, 0.0))

    def l(self, t):
        a, g = self.alpha, self.gamma_rate
        return t ** (a - 1.0) / gamma(a) * np.exp(-g * t) + g ** (1.0 - a) * special.gammainc(a, g * t)

    def cum_l(self, t):
        a, g = self.alpha, self.gamma_rate
        x = g * np.maximum(t, 0.0)
        P = special.gammainc
        return g ** (-a) * ((1.0 + x) * P(a, x) - a * P(a + 1.0, x))

    def cum2_l(self, t):
        a, g = self.alpha, self.gamma_rate
        x = g * np.maximum(t, 0.0)
        P = special.gammainc
        return g ** (-a - 1.0) * (
            (x + 0.5 * x * x) * P(a, x)
            - a * (1.0 + x) * P(a + 1.0, x)
            + 0.5 * a * (a + 1.0) * P(a + 2.0, x)
        )

    def laplace_k(self, z):
        return (z + self.gamma_rate) ** (self.alpha - 1.0)

    def to_json(self):
        return {"type": "tempered", "alpha": self.alpha, "gamma_rate": self.gamma_rate}


@dataclass(frozen=True)
class MultiTerm(KernelSpec):
    """k = sum_j delta_j g_{1-alpha_j}; terms are (delta, alpha) pairs.

    There is no closed form for l.  Its discrete counterpart is obtained from
    the weights built in :mod:`artifact.convq`.
    """

    terms: Tuple[Tuple[float, float], ...]

    has_closed_l = False

    def __post_init__(self):
        terms = tuple((float(d), _check_alpha(a)) for d, a in self.terms)
        if not terms:
            raise DomainError("MultiTerm needs at least one term")
        if any(d <= 0 for d, _ in terms):
            raise DomainError("MultiTerm deltas must be positive")
        alphas = [a for _, a in terms]
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise DomainError("MultiTerm alphas must be strictly increasing")
        object.__setattr__(self, "terms", terms)

    def k(self, t):
        return sum(d * t ** (-a) / gamma(1.0 - a) for d, a in self.terms)

    def cum_k(self, t):
        return sum(d * _pow_ratio(t, 1.0 - a) for d, a in self.terms)

    def laplace_k(self, z):
        return sum(d * z ** (a - 1.0) for d, a in self.terms)

    def to_json(self):
        return {"type": "multiterm", "terms": [[d, a] for d, a in self.terms]}


# 64-point Gauss-Legendre rule on [0, 1] for the order integral.  The
# integrand beta -> t^(beta-1)/Gamma(beta) is entire, so the fixed rule is
# accurate to rounding for |log t| up to about 40.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_GL_RGAMMA = np.array([1.0 / gamma(b) for b in _GL_X])


def _expm1_minus_x(t):
    # expm1(t) - t for 0 <= t <= 1 by series
    out = np.zeros_like(t)
    term = t.copy()
    for k in range(2, 24):
        term = term * t / k
        out += term
    return out


def _ein(t):
    # sum_{k>=1} (-1)^(k+1) t^k / (k k!) for 0 <= t <= 1
    out = np.zeros_like(t)
    term = np.ones_like(t)
    for k in range(1, 24):
        term = term * (-t) / k
        out -= term / k
    return out


def _ein_minus_t(t):
    out = np.zeros_like(t)
    term = -t
    for k in range(2, 24):
        term = term * (-t) / k
        out -= term / k
    return out


@dataclass(frozen=True)
class DistributedOrder(KernelSpec):
    """k = int_0^1 g_beta d beta (uniform order weight), l(t) = e^t E1(t)."""

    def k(self, t):
        t = np.asarray(t, dtype=float)
        lt = np.log(t)[..., None]
        vals = np.exp((_GL_X - 1.0) * lt) * _GL_RGAMMA
        return vals @ _GL_W

    def cum_k(self, t):
        t = np.asarray(t, dtype=float)
        tt = np.maximum(t, 1e-300)[..., None]
        # int_0^1 t^beta / Gamma(beta+1) d beta
        vals = np.exp(_GL_X * np.log(tt)) * _GL_RGAMMA / _GL_X
        return np.where(t > 0, vals @ _GL_W, 0.0)

    def l(self, t):
        return exp_e1(t)

    def cum_l(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        small = (t > 0) & (t <= 1.0)
        big = t > 1.0
        ts = t[small]
        if ts.size:
            lg = EULER_GAMMA + np.log(ts)
            out[small] = np.exp(ts) * _ein(ts) - np.expm1(ts) * lg
        tb = t[big]
        if tb.size:
            out[big] = exp_e1(tb) + np.log(tb) + EULER_GAMMA
        return out

    def cum2_l(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        small = (t > 0) & (t <= 1.0)
        big = t > 1.0
        ts = t[small]
        if ts.size:
            lg = EULER_GAMMA + np.log(ts)
            em = np.expm1(ts)
            out[small] = em * _ein(ts) + _ein_minus_t(ts) - _expm1_minus_x(ts) * lg
        tb = t[big]
        if tb.size:
            out[big] = self.cum_l(tb) + tb * (np.log(tb) - 1.0 + EULER_GAMMA)
        return out

    def laplace_k(self, z):
        return 1.0 if z == 1 else (z - 1.0) / (z * math.log(z))

    def to_json(self):
        return {"type": "distributed"}


# ---------------------------------------------------------------- operations

def eval_k(spec: KernelSpec, t):
    """Pointwise kernel value k(t) for t > 0 (scalar or array)."""
    return _scalar_or_array(spec.k(_as_positive_array(t)))


def eval_cum_l(spec: KernelSpec, t, grid=None):
    """(1*l)(t) for t > 0.

    For ``MultiTerm`` the value comes from the discrete complementary weights
    on ``grid`` (a :class:`artifact.convq.TimeGrid`); ``t`` must then be a
    node of that grid or an array of nodes.  Without a grid a geometric grid
    ending at max(t) is built.
    """
    arr = _as_positive_array(t)
    if spec.has_closed_l:
        return _scalar_or_array(spec.cum_l(arr))
    from .convq import TimeGrid, build_weights

    if grid is None:
        tmax = float(np.max(arr))
        grid = TimeGrid.geometric_to(tmax)
    w = build_weights(spec, grid)
    cum = np.concatenate([[0.0], w.cum_l])
    nodes = grid.nodes
    if float(np.max(arr)) > nodes[-1] * (1 + 1e-12):
        raise DomainError("t beyond the end of the grid")
    # piecewise linear between nodes (exact at nodes)
    out = np.interp(arr, nodes, cum)
    return _scalar_or_array(out)


def decay_class(spec: KernelSpec) -> DecayClass:
    if isinstance(spec, Fractional):
        return DecayClass("algebraic", spec.alpha)
    if isinstance(spec, MultiTerm):
        return DecayClass("algebraic", min(a for _, a in spec.terms))
    if isinstance(spec, TemperedFractional):
        return DecayClass("exponential")
    if isinstance(spec, DistributedOrder):
        return DecayClass("logarithmic")
    raise TypeError(f"unknown kernel {spec!r}")


def log_decay_threshold(t, spec: Optional["DistributedOrder"] = None) -> float:
    """Smallest node T1 > 1 of ``t`` from which on k(t) log t >= 1/2 and
    (1*l)(t) >= log(t)/2 hold at every later node.

    Past T1 the envelopes give log t / (1 + 2 mu log t) <= s_mu(t) log t
    <= log t / (1 + mu log(t)/2).  Returns inf if no such node exists.
    """
    spec = spec or DistributedOrder()
    t = np.asarray(t, dtype=float)
    t = t[t > 1.0]
    if t.size == 0:
        return math.inf
    lg = np.log(t)
    ok = (spec.k(t) * lg >= 0.5) & (spec.cum_l(t) >= 0.5 * lg)
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(t[0])
    if bad[-1] == t.size - 1:
        return math.inf
    return float(t[bad[-1] + 1])


def log_decay_interval(mu: float, t_lo: float, t_hi: float):
    """Fixed interval containing s_mu(t) log t for t in [t_lo, t_hi] past T1."""
    a, b = math.log(t_lo), math.log(t_hi)
    lower = a / (1.0 + 2.0 * mu * a)
    upper = b / (1.0 + 0.5 * mu * b)
    return lower, upper


# ---------------------------------------------------------------- (de)serialisation

_KEYS = {
    "fractional": {"type", "alpha"},
    "tempered": {"type", "alpha", "gamma_rate"},
    "multiterm": {"type", "terms"},
    "distributed": {"type"},
}


def kernel_to_json(spec: KernelSpec) -> dict:
    return spec.to_json()


def kernel_from_json(obj) -> KernelSpec:
    """Inverse of :func:`kernel_to_json`.  Unknown keys are rejected."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("kernel must be an object with a 'type' key")
    kind = obj["type"]
    if kind not in _KEYS:
        raise ValueError(f"unknown kernel type {kind!r}")
    extra = set(obj) - _KEYS[kind]
    missing = _KEYS[kind] - set(obj)
    if extra:
        raise ValueError(f"unknown kernel keys {sorted(extra)}")
    if missing:
        raise ValueError(f"missing kernel keys {sorted(missing)}")
    if kind == "fractional":
        return Fractional(obj["alpha"])
    if kind == "tempered":
        return TemperedFractional(obj["alpha"], obj["gamma_rate"])
    if kind == "multiterm":
        return MultiTerm(tuple((d, a) for d, a in obj["terms"]))
    return DistributedOrder()


def parse_kernel(text: str) -> KernelSpec:
    """Parse the short command-line form.

    ``frac:0.5``, ``tempered:0.5,1``, ``multiterm:1,0.3,1,0.7``, ``distributed``.
    """
    name, _, args = text.partition(":")
    vals = [float(v) for v in args.split(",")] if args else []
    name = name.strip().lower()
    if name in ("frac", "fractional") and len(vals) == 1:
        return Fractional(vals[0])
    if name in ("tempered", "temp") and len(vals) == 2:
        return TemperedFractional(vals[0], vals[1])
    if name in ("multiterm", "multi") and vals and len(vals) % 2 == 0:
        return MultiTerm(tuple(zip(vals[0::2], vals[1::2])))
    if name in ("distributed", "dist") and not vals:
        return DistributedOrder()
    raise ValueError(f"cannot parse kernel {text!r}")
