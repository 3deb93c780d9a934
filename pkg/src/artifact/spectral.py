"""Ornstein-Uhlenbeck oracle in the Hermite eigenbasis.

For V(x) = x^2/2 the backward operator has eigenfunctions
phi_k = He_k / sqrt(k!) with eigenvalues k.  A solution v = u/u_inf with
coefficients c_k evolves as c_k(t) = c_k s_k(t), where s_mu is the
relaxation function of the chosen time dynamics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .convq import ConvolutionWeights, TimeGrid, build_weights, solve_relaxation
from .entropy import EntropyGenerator
from .kernels import KernelSpec

__all__ = [
    "OUModel",
    "SpectralCoeffs",
    "Classical",
    "DiscreteBE",
    "CertificateUnavailable",
    "hermite_phi",
    "hermite_matrix",
    "project",
    "reconstruct",
    "evolve",
    "evolve_series",
    "weighted_norm_sq",
    "entropy_of",
    "lower_bound_certificate",
    "write_spectral_csv",
]


class CertificateUnavailable(ValueError):
    pass


@dataclass(frozen=True)
class Classical:
    """Classical time derivative, s_mu(t) = exp(-mu t)."""


@dataclass(frozen=True)
class DiscreteBE:
    """Backward-difference scheme with step tau, s_mu(n) = (1 + tau mu)^-n."""

    tau: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")


def hermite_matrix(K: int, x) -> np.ndarray:
    """Rows phi_0..phi_K evaluated at x (shape (K+1, len(x)))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = np.empty((K + 1, x.size))
    P[0] = 1.0
    if K >= 1:
        P[1] = x
    for k in range(1, K):
        P[k + 1] = (x * P[k] - math.sqrt(k) * P[k - 1]) / math.sqrt(k + 1)
    return P


def hermite_phi(k: int, x):
    """Normalised probabilists' Hermite polynomial He_k(x)/sqrt(k!)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = hermite_matrix(k, x)[k]
    return float(out[0]) if np.ndim(x) == 0 else out


@dataclass(frozen=True, eq=False)
class OUModel:
    """Hermite basis of size K+1 with a Gauss-Hermite rule of order Q."""

    K: int = 40
    Q: Optional[int] = None
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        K = int(self.K)
        Q = int(self.Q) if self.Q is not None else 2 * K + 8
        if K < 1 or Q < 2 * K:
            raise ValueError("need K >= 1 and Q >= 2K")
        x, w = np.polynomial.hermite_e.hermegauss(Q)
        w = w / math.sqrt(2.0 * math.pi)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "basis", hermite_matrix(K, x))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.arange(self.K + 1, dtype=float)

    def gram(self) -> np.ndarray:
        B = self.basis
        return (B * self.weights) @ B.T


@dataclass(frozen=True, eq=False)
class SpectralCoeffs:
    """Coefficients c_0..c_K of v = u/u_inf.  ``signed`` marks data whose
    density u = v u_inf may take negative values."""

    coeffs: np.ndarray
    signed: bool = False

    @property
    def K(self) -> int:
        return self.coeffs.size - 1

    @classmethod
    def of(cls, *values, signed: bool = False) -> "SpectralCoeffs":
        return cls(np.asarray(values, dtype=float), signed)


def project(v0_values, model: OUModel, signed: Optional[bool] = None) -> SpectralCoeffs:
    """c_k = int v0 phi_k u_inf by Gauss-Hermite quadrature.

    ``v0_values`` are the values of v0 at ``model.nodes``.  ``signed`` is
    inferred from the sign of v0 when not given.
    """
    v0 = np.asarray(v0_values, dtype=float)
    if v0.shape != model.nodes.shape:
        raise ValueError("v0 must be sampled at the model's quadrature nodes")
    c = model.basis @ (model.weights * v0)
    if abs(c[0] - 1.0) > 1e-8:
        raise ValueError(f"c_0 = {c[0]!r}: v0 does not describe a unit-mass density")
    if signed is None:
        signed = bool(np.any(v0 < 0))
    return SpectralCoeffs(c, signed)


def reconstruct(coeffs: SpectralCoeffs, x) -> np.ndarray:
    return coeffs.coeffs @ hermite_matrix(coeffs.K, x)


def _factors(dynamics, K: int, t, grid: Optional[TimeGrid] = None, weights: Optional[ConvolutionWeights] = None):
    # multipliers s_k at time t for k = 0..K
    lam = np.arange(K + 1, dtype=float)
    if isinstance(dynamics, Classical):
        return np.exp(-lam * float(t))
    if isinstance(dynamics, DiscreteBE):
        n = int(t)
        if n != t or n < 0:
            raise ValueError("DiscreteBE evolves by a nonnegative integer number of steps")
        return (1.0 + dynamics.tau * lam) ** (-n)
    if isinstance(dynamics, KernelSpec):
        if float(t) == 0.0:
            return np.ones(K + 1)
        w = weights if weights is not None else _weights_for(dynamics, grid)
        idx = np.flatnonzero(np.isclose(w.grid.nodes, float(t), rtol=1e-12, atol=0.0))
        if idx.size == 0:
            raise ValueError("t must be a node of the grid (no interpolation across grids)")
        return np.array([solve_relaxation(w, mu).values[idx[0]] for mu in lam])
    raise TypeError(f"unknown dynamics {dynamics!r}")


def _weights_for(kernel: KernelSpec, grid: Optional[TimeGrid]) -> ConvolutionWeights:
    if grid is None:
        raise ValueError("nonlocal evolution needs the experiment's time grid")
    return build_weights(kernel, grid)


def evolve(coeffs: SpectralCoeffs, dynamics, t, grid: Optional[TimeGrid] = None,
           weights: Optional[ConvolutionWeights] = None) -> SpectralCoeffs:
    """c_k(t) = c_k s_{lambda_k}(t).

    ``dynamics`` is a KernelSpec (needs ``grid`` or ``weights``; t must be a
    node), :class:`Classical` or :class:`DiscreteBE` (t is a step count).
    """
    if float(t) < 0:
        raise ValueError("t must be nonnegative")
    f = _factors(dynamics, coeffs.K, t, grid, weights)
    return SpectralCoeffs(coeffs.coeffs * f, coeffs.signed)


def evolve_series(coeffs: SpectralCoeffs, dynamics, grid: Optional[TimeGrid] = None,
                  steps: Optional[int] = None, weights: Optional[ConvolutionWeights] = None):
    """All-node evolution.  Returns (times, S) with S[n, k] = s_{lambda_k}(t_n)
    so that the coefficients at node n are ``coeffs.coeffs * S[n]``.

    Modes with c_k = 0 are skipped (their column is left at s = 1 and
    never contributes).
    """
    K = coeffs.K
    lam = np.arange(K + 1, dtype=float)
    active = np.flatnonzero(coeffs.coeffs != 0.0)
    if isinstance(dynamics, DiscreteBE):
        if steps is None:
            raise ValueError("DiscreteBE needs a number of steps")
        n = np.arange(steps + 1)[:, None]
        return n[:, 0] * dynamics.tau, (1.0 + dynamics.tau * lam[None, :]) ** (-n)
    if isinstance(dynamics, Classical):
        if grid is None:
            raise ValueError("classical evolution needs a grid")
        t = grid.nodes
        return t, np.exp(-np.outer(t, lam))
    w = weights if weights is not None else _weights_for(dynamics, grid)
    t = w.grid.nodes
    S = np.ones((t.size, K + 1))
    for k in active:
        if k == 0:
            continue
        S[:, k] = solve_relaxation(w, lam[k]).values
    return t, S


def weighted_norm_sq(coeffs: SpectralCoeffs) -> float:
    """sum_{k>=1} c_k^2 = ||v - 1||^2 in L2(u_inf)."""
    c = coeffs.coeffs
    return float(np.sum(c[1:] ** 2))


def entropy_of(gen: EntropyGenerator, coeffs: SpectralCoeffs, model: OUModel) -> float:
    """Relative entropy of u = v u_inf by Gauss-Hermite quadrature."""
    if coeffs.K > model.K:
        raise ValueError("model basis smaller than the coefficient vector")
    v = coeffs.coeffs @ model.basis[: coeffs.K + 1]
    if np.any(v < 0) and not gen.allows_signed():
        raise ValueError("reconstructed density is negative at a quadrature node")
    return float(np.dot(model.weights, gen.phi(v)))


def lower_bound_certificate(coeffs: SpectralCoeffs, dynamics, t_grid=None,
                            weights: Optional[ConvolutionWeights] = None, steps: Optional[int] = None) -> np.ndarray:
    """c_1^2 s_1(t)^2 at every node: a lower bound for the beta=2 entropy."""
    c = coeffs.coeffs
    if c.size < 2 or c[1] == 0.0:
        raise CertificateUnavailable("c_1 = 0: no single-mode lower bound")
    one = SpectralCoeffs(np.array([1.0, 1.0]))
    if isinstance(dynamics, Classical):
        t = np.asarray(t_grid.nodes if isinstance(t_grid, TimeGrid) else t_grid, dtype=float)
        return c[1] ** 2 * np.exp(-2.0 * t)
    _, S = evolve_series(one, dynamics, grid=t_grid, steps=steps, weights=weights)
    return c[1] ** 2 * S[:, 1] ** 2


def write_spectral_csv(times, coeffs: SpectralCoeffs, S, path) -> None:
    """Columns t, k, c_k, s_lambda_k (one row per node and active mode)."""
    c = coeffs.coeffs
    active = [k for k in range(c.size) if c[k] != 0.0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "c_k", "s_lambda_k"])
        for n, t in enumerate(times):
            for k in active:
                w.writerow([repr(float(t)), k, repr(float(c[k] * S[n, k])), repr(float(S[n, k]))])
