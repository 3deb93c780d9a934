"""Conservative 1-D solver for the nonlocal-in-time Fokker-Planck equation

    d/dt (k * [u - u_0]) = u'' + (u V')'    on [-L, L], zero flux at the ends,

plus the backward-difference scheme for the classical equation and a
spectral path for the Ornstein-Uhlenbeck case.

Space: cell-centred finite volumes with Scharfetter-Gummel fluxes, so the
discrete Gibbs state is an exact steady state and columns sum to zero.
Time: the discrete derivative D of :mod:`artifact.convq` (row n of D applied
to u_1..u_n, minus its row sum times u_0).  Each step solves the tridiagonal
M-matrix system (D_nn I - A) u_n = -sum_{j<n} D_nj u_j + (sum_j D_nj) u_0,
whose right-hand side is a nonnegative combination of earlier states.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .convq import TimeGrid, build_weights, solve_relaxation
from .entropy import (
    EntropyGenerator,
    Field1D,
    Logarithmic,
    PowerBeta,
    SpatialGrid,
    SteadyState1D,
    ckp_bound,
    generator_from_json,
)
from .kernels import (
    DecayClass,
    Fractional,
    KernelSpec,
    kernel_from_json,
)
from .specfun import gamma

__all__ = [
    "Potential1D",
    "SpatialOperator",
    "SimResult",
    "ExperimentConfig",
    "ConfigError",
    "NumericalFailure",
    "build_spatial_operator",
    "initial_field",
    "step_nonlocal",
    "step_backward_difference",
    "run_experiment",
    "fit_decay_rate",
    "envelope_margins",
    "RateFit",
]


class ConfigError(ValueError):
    pass


class NumericalFailure(ArithmeticError):
    pass


# ---------------------------------------------------------------- potential and operator

@dataclass(frozen=True, eq=False)
class Potential1D:
    """V(x) = m x^2 / 2 (``kind='quadratic'``) or tabulated values on the
    solver grid (``kind='table'``).  ``lam`` is a lower bound for V''."""

    kind: str = "quadratic"
    m: float = 1.0
    table: Optional[np.ndarray] = None
    lam: Optional[float] = None

    def __post_init__(self):
        if self.kind == "quadratic":
            if not self.m > 0:
                raise ConfigError("quadratic potential needs m > 0")
            object.__setattr__(self, "lam", float(self.m) if self.lam is None else float(self.lam))
            if self.lam > self.m:
                raise ConfigError("lambda exceeds V'' = m")
        elif self.kind == "table":
            if self.table is None:
                raise ConfigError("table potential needs values")
            object.__setattr__(self, "table", np.asarray(self.table, dtype=float))
        else:
            raise ConfigError(f"unknown potential kind {self.kind!r}")

    def __call__(self, x):
        if self.kind == "quadratic":
            return 0.5 * self.m * np.asarray(x, dtype=float) ** 2
        if np.shape(x) != self.table.shape:
            raise ConfigError("tabulated potential does not match the grid")
        return self.table


def _bernoulli(z):
    # B(z) = z / (e^z - 1), B(0) = 1
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = np.abs(z) > 1e-10
    out[nz] = z[nz] / np.expm1(z[nz])
    small = ~nz
    out[small] = 1.0 - z[small] / 2.0
    return out


@dataclass(frozen=True, eq=False)
class SpatialOperator:
    """Tridiagonal discretisation of u'' + (u V')'.

    ``lower[i] = A[i+1, i]``, ``diag[i] = A[i, i]``, ``upper[i] = A[i, i+1]``.
    """

    grid: SpatialGrid
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    steady: SteadyState1D

    def matvec(self, u):
        u = np.asarray(u, dtype=float)
        y = self.diag * u
        y[:-1] += self.upper * u[1:]
        y[1:] += self.lower * u[:-1]
        return y

    def to_dense(self):
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def shifted_solve(self, shift: float, rhs):
        """Solve (shift I - A) x = rhs."""
        n = self.diag.size
        ab = np.zeros((3, n))
        ab[0, 1:] = -self.upper
        ab[1] = shift - self.diag
        ab[2, :-1] = -self.lower
        try:
            x = linalg.solve_banded((1, 1), ab, rhs, check_finite=True)
        except (linalg.LinAlgError, ValueError) as exc:
            raise NumericalFailure(f"tridiagonal solve failed (shift={shift:g}): {exc}") from exc
        return x


def build_spatial_operator(potential: Potential1D, grid: SpatialGrid) -> SpatialOperator:
    """Scharfetter-Gummel operator with zero-flux ends.

    Flux between cells i and i+1 is (B(-dV) u_{i+1} - B(dV) u_i)/h with
    dV = V_{i+1} - V_i, which vanishes on u ~ exp(-V).  Diagonal entries
    are minus the off-diagonal column sums, so mass is conserved exactly.
    """
    V = potential(grid.x)
    h = grid.cell_width
    if not np.allclose(grid.weights, h, rtol=1e-14, atol=0):
        raise ConfigError("the finite-volume operator needs a uniform cell-centred grid")
    dV = np.diff(V)
    upper = _bernoulli(-dV) / h ** 2
    lower = _bernoulli(dV) / h ** 2
    diag = np.zeros(V.size)
    diag[:-1] -= lower
    diag[1:] -= upper
    steady = SteadyState1D.gibbs(grid, V)
    return SpatialOperator(grid, lower, diag, upper, steady)


# ---------------------------------------------------------------- steps

def step_nonlocal(history, D_row, operator: SpatialOperator):
    """One step of the nonlocal scheme.

    ``history``: states u_0..u_{n-1} (array of shape (n, N)).
    ``D_row``: row n of the discrete derivative, entries for u_1..u_n.
    """
    history = np.asarray(history, dtype=float)
    D_row = np.asarray(D_row, dtype=float)
    n = history.shape[0]
    if D_row.size != n:
        raise ValueError("derivative row and history length disagree")
    r = D_row.sum()
    rhs = r * history[0]
    if n > 1:
        rhs = rhs - D_row[:-1] @ history[1:]
    return operator.shifted_solve(D_row[-1], rhs)


def step_backward_difference(u_prev, tau: float, operator: SpatialOperator):
    """(I/tau - A) u_n = u_{n-1}/tau."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    u_prev = np.asarray(u_prev, dtype=float)
    return operator.shifted_solve(1.0 / tau, u_prev / tau)


# ---------------------------------------------------------------- configuration

_TOP_KEYS = {"kernel", "scheme", "potential", "generators", "grid", "u0", "seed",
             "output_dir", "slack", "fit_window", "spectral"}
_REQUIRED = {"scheme", "potential", "generators", "grid", "u0"}


@dataclass(eq=False)
class ExperimentConfig:
    scheme: str
    kernel: Optional[object]
    potential: Potential1D
    generators: List[EntropyGenerator]
    L: float
    N: int
    time: TimeGrid
    u0: dict
    seed: int = 0
    output_dir: str = "out"
    slack: Optional[float] = None
    fit_window: Optional[Tuple[float, float]] = None
    spectral_K: int = 40
    raw: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @classmethod
    def from_json(cls, obj, base_dir: str = ".") -> "ExperimentConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(obj) - _TOP_KEYS
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        missing = _REQUIRED - set(obj)
        if missing:
            raise ConfigError(f"missing config keys {sorted(missing)}")
        scheme = obj["scheme"]
        if scheme not in ("nonlocal", "backward_difference", "spectral"):
            raise ConfigError(f"unknown scheme {scheme!r}")
        try:
            kernel = None
            if "kernel" in obj:
                if obj["kernel"] in ("classical", "backward_difference"):
                    kernel = obj["kernel"]
                else:
                    kernel = kernel_from_json(obj["kernel"])
            if scheme == "nonlocal" and not isinstance(kernel, KernelSpec):
                raise ConfigError("the nonlocal scheme needs a kernel")
            if scheme == "spectral" and kernel is None:
                raise ConfigError("the spectral scheme needs a kernel, 'classical' or 'backward_difference'")
            pot = obj["potential"]
            if not isinstance(pot, dict) or set(pot) - {"type", "m"} or pot.get("type", "quadratic") != "quadratic":
                raise ConfigError("potential must be {'type': 'quadratic', 'm': ...}")
            potential = Potential1D("quadratic", float(pot.get("m", 1.0)))
            gens = obj["generators"]
            if not isinstance(gens, list) or not gens:
                raise ConfigError("generators must be a nonempty list")
            generators = [generator_from_json(g) for g in gens]
            grid = obj["grid"]
            if not isinstance(grid, dict) or set(grid) - {"L", "N", "time"} or "time" not in grid:
                raise ConfigError("grid must have keys L, N, time")
            time = TimeGrid.from_json(grid["time"])
            if (scheme == "backward_difference" or kernel == "backward_difference") and (time.kind != "uniform" or len(time.nodes) != time.steps + 1):
                raise ConfigError("backward_difference needs an ungraded uniform time grid (graded: false)")
            u0 = dict(obj["u0"])
            _validate_u0(u0, base_dir)
            spectral = obj.get("spectral", {})
            if set(spectral) - {"K"}:
                raise ConfigError("spectral options: only K")
            fw = obj.get("fit_window")
            cfg = cls(
                scheme=scheme,
                kernel=kernel,
                potential=potential,
                generators=generators,
                L=float(grid.get("L", 8.0)),
                N=int(grid.get("N", 400)),
                time=time,
                u0=u0,
                seed=int(obj.get("seed", 0)),
                output_dir=str(obj.get("output_dir", "out")),
                slack=None if obj.get("slack") is None else float(obj["slack"]),
                fit_window=None if fw is None else (float(fw[0]), float(fw[1])),
                spectral_K=int(spectral.get("K", 40)),
                raw=obj,
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.L <= 0 or cfg.N < 8:
            raise ConfigError("need L > 0 and N >= 8")
        return cfg


_U0_KEYS = {
    "single_hermite": {"mode", "k", "amplitude", "signed"},
    "hermite_modes": {"mode", "coeffs", "signed"},
    "gaussian_mixture": {"mode", "components", "random_components", "signed"},
    "file": {"mode", "path", "signed"},
    "steady": {"mode"},
}


def _validate_u0(u0: dict, base_dir: str):
    mode = u0.get("mode")
    if mode not in _U0_KEYS:
        raise ConfigError(f"unknown u0 mode {mode!r}")
    extra = set(u0) - _U0_KEYS[mode]
    if extra:
        raise ConfigError(f"unknown u0 keys {sorted(extra)}")
    if mode == "single_hermite" and ("k" not in u0 or "amplitude" not in u0):
        raise ConfigError("single_hermite needs k and amplitude")
    if mode == "hermite_modes" and not (isinstance(u0.get("coeffs"), list) and u0["coeffs"]):
        raise ConfigError("hermite_modes needs a nonempty coeffs list (c_1, c_2, ...)")
    if mode == "gaussian_mixture" and not (("components" in u0) ^ ("random_components" in u0)):
        raise ConfigError("gaussian_mixture needs either components or random_components")
    if mode == "file":
        path = u0.get("path")
        if not path:
            raise ConfigError("file mode needs a path")
        full = path if os.path.isabs(path) else os.path.join(base_dir, path)
        if not os.path.exists(full):
            raise ConfigError(f"u0 file {path!r} does not exist")
        u0["path"] = full


def _hermite_coeffs(u0: dict) -> np.ndarray:
    """Coefficients c_0.. of v_0 = u_0/u_inf for the Hermite modes."""
    if u0["mode"] == "single_hermite":
        k = int(u0["k"])
        if k < 1:
            raise ConfigError("single_hermite needs k >= 1")
        c = np.zeros(k + 1)
        c[k] = float(u0["amplitude"])
    else:
        c = np.concatenate([[0.0], np.asarray(u0["coeffs"], dtype=float)])
    c[0] = 1.0
    return c


def _mixture_components(u0: dict, seed: int):
    if "components" in u0:
        comps = [(float(c["weight"]), float(c["mean"]), float(c["std"])) for c in u0["components"]]
    else:
        rng = np.random.default_rng(seed)
        n = int(u0["random_components"])
        w = rng.uniform(0.2, 1.0, n)
        comps = list(zip(w / w.sum(), rng.uniform(-2.0, 2.0, n), rng.uniform(0.5, 1.5, n)))
    if not comps or any(w <= 0 or s <= 0 for w, _, s in comps):
        raise ConfigError("mixture components need positive weight and std")
    return comps


def _mixture_density(comps, x):
    x = np.asarray(x, dtype=float)
    tot = sum(w for w, _, _ in comps)
    return sum(w / tot * np.exp(-0.5 * ((x - mu) / s) ** 2) / (s * math.sqrt(2 * math.pi)) for w, mu, s in comps)


def initial_field(u0: dict, steady: SteadyState1D, m: float = 1.0, seed: int = 0) -> Tuple[Field1D, bool]:
    """Initial density on the solver grid and whether it is treated as signed.

    Unsigned data is floored at 1e-300 and renormalised to unit mass.
    """
    grid = steady.grid
    mode = u0["mode"]
    signed = bool(u0.get("signed", False))
    if mode == "steady":
        vals = steady.values.copy()
    elif mode in ("single_hermite", "hermite_modes"):
        from .spectral import hermite_matrix

        c = _hermite_coeffs(u0)
        vals = (c @ hermite_matrix(c.size - 1, math.sqrt(m) * grid.x)) * steady.values
    elif mode == "gaussian_mixture":
        vals = _mixture_density(_mixture_components(u0, seed), grid.x)
    else:
        path = u0["path"]
        vals = np.load(path) if path.endswith(".npy") else np.loadtxt(path, delimiter=",").ravel()
        if vals.shape != grid.x.shape:
            raise ConfigError("u0 file does not match the spatial grid")
    vals = np.asarray(vals, dtype=float)
    if not signed:
        vals = np.maximum(vals, 1e-300)
    mass = grid.integrate(vals)
    if mode != "steady":
        vals = vals / mass
    return Field1D(grid, vals), signed


# ---------------------------------------------------------------- results

@dataclass(eq=False)
class SimResult:
    times: np.ndarray
    entropy_series: Dict[str, np.ndarray]
    l1_distance: np.ndarray
    mass_error: np.ndarray
    min_value: np.ndarray
    # envelope factors (multiply by H(u_0) of a generator)
    envelope_A: np.ndarray
    envelope_B: Dict[str, np.ndarray]
    theoretical_upper: Dict[str, Dict[str, np.ndarray]]
    violations: List[dict]
    generators: List[EntropyGenerator]
    diagnostics: dict = field(default_factory=dict)
    final_state: Optional[np.ndarray] = None

    def csv_columns(self):
        cols = {"t": self.times}
        for g in self.generators:
            cols[_column_name(g)] = self.entropy_series[g.name]
        cols["l1"] = self.l1_distance
        cols["envelopeA"] = self.envelope_A
        for g in self.generators:
            if isinstance(g, PowerBeta):
                cols[f"envelopeB_{g.beta:g}"] = self.envelope_B[g.name]
        cols["mass_err"] = self.mass_error
        return cols

    def write_csv(self, path):
        cols = self.csv_columns()
        names = list(cols)
        with open(path, "w") as fh:
            fh.write(",".join(names) + "\n")
            for i in range(self.times.size):
                fh.write(",".join(repr(float(cols[c][i])) for c in names) + "\n")


def _column_name(g: EntropyGenerator) -> str:
    return "H_log" if isinstance(g, Logarithmic) else f"H_beta{g.beta:g}"


def _check_series(res: SimResult, slack: float, signed: bool):
    viol = []
    for g in res.generators:
        H = res.entropy_series[g.name]
        inc = np.flatnonzero(np.diff(H) > 1e-10)
        if inc.size:
            viol.append({"invariant": "entropy_nonincreasing", "generator": g.name,
                         "node": int(inc[0]) + 1, "excess": float(np.max(np.diff(H)))})
        for env_name, bound in res.theoretical_upper[g.name].items():
            excess = H - bound * (1.0 + slack)
            bad = np.flatnonzero(excess > 1e-14)
            if bad.size:
                viol.append({"invariant": f"envelope_{env_name}", "generator": g.name,
                             "node": int(bad[0]), "excess": float(excess[bad].max())})
        ckp = np.array([ckp_bound(g, max(h, 0.0)) for h in H])
        bad = np.flatnonzero(res.l1_distance > ckp + 1e-8)
        if bad.size and not signed:
            viol.append({"invariant": "ckp", "generator": g.name, "node": int(bad[0])})
    if np.max(np.abs(res.mass_error)) > 1e-12:
        viol.append({"invariant": "mass", "excess": float(np.max(np.abs(res.mass_error)))})
    if not signed and np.min(res.min_value) < 0:
        viol.append({"invariant": "positivity", "min": float(np.min(res.min_value))})
    return viol


def envelope_margins(res: SimResult) -> dict:
    """Smallest relative margin (bound - H)/bound per generator and envelope,
    over t > 0 (at t = 0 bound and entropy coincide)."""
    out = {}
    for g in res.generators:
        H = res.entropy_series[g.name]
        for env, bound in res.theoretical_upper[g.name].items():
            b, h = bound[1:], H[1:]
            ok = b > 0
            out[f"{g.name}:{env}"] = float(((b[ok] - h[ok]) / b[ok]).min()) if ok.any() else None
    return out


# ---------------------------------------------------------------- experiment

def _timefrac_factor(alpha: float, lam: float, beta: float, t: np.ndarray) -> np.ndarray:
    # C / (1 + t^(alpha beta)) dominating (1 + (2 lam / beta) t^alpha / Gamma(1+alpha))^-beta
    a = 2.0 * lam / (beta * gamma(1.0 + alpha))
    C = max(1.0, a ** (-beta))
    return C / (1.0 + t ** (alpha * beta))


def run_experiment(config: ExperimentConfig) -> SimResult:
    """March the configured scheme and collect entropies and envelopes."""
    if config.scheme == "spectral":
        return _run_spectral(config)
    sgrid = SpatialGrid.cell_centered(config.L, config.N)
    op = build_spatial_operator(config.potential, sgrid)
    steady = op.steady
    lam = config.potential.lam
    u0, signed = initial_field(config.u0, steady, config.potential.m, config.seed)
    for g in config.generators:
        if signed and not g.allows_signed():
            raise ConfigError("signed initial data only works with the beta=2 generator")
    t = config.time.nodes
    n = t.size - 1
    N = sgrid.x.size
    U = np.empty((n + 1, N))
    U[0] = u0.values
    diagnostics = {}
    if config.scheme == "nonlocal":
        weights = build_weights(config.kernel, config.time)
        D, repaired = weights.marching_derivative()
        diagnostics["sign_repair"] = repaired
        for i in range(n):
            U[i + 1] = step_nonlocal(U[: i + 1], D.row(i), op)
        envA = solve_relaxation(weights, 2.0 * lam).values
        envB = {g.name: solve_relaxation(weights, 2.0 * lam / g.beta).values ** g.beta
                for g in config.generators if isinstance(g, PowerBeta)}
    else:
        tau = config.time.step
        for i in range(n):
            U[i + 1] = step_backward_difference(U[i], tau, op)
        steps = np.arange(n + 1)
        envA = (1.0 / (1.0 + 2.0 * tau * lam)) ** steps
        envB = {g.name: (1.0 / (1.0 + 2.0 * tau * lam / g.beta)) ** (g.beta * steps)
                for g in config.generators if isinstance(g, PowerBeta)}

    w = sgrid.weights
    V = U / steady.values
    masses = U @ w
    series = {}
    upper = {}
    for g in config.generators:
        H = (g.phi(V) * steady.values) @ w
        series[g.name] = H
        bounds = {"A": envA * H[0]}
        if isinstance(g, PowerBeta):
            bounds["B"] = envB[g.name] * H[0]
        if config.scheme == "nonlocal" and isinstance(config.kernel, Fractional):
            beta = g.beta if isinstance(g, PowerBeta) else 1.0
            mu_beta = beta if isinstance(g, PowerBeta) else 1.0
            bounds["timefrac"] = _timefrac_factor(config.kernel.alpha, lam, mu_beta, t) * H[0]
        upper[g.name] = bounds
    res = SimResult(
        times=t.copy(),
        entropy_series=series,
        l1_distance=np.abs(U - steady.values) @ w,
        mass_error=masses - 1.0,
        min_value=U.min(axis=1),
        envelope_A=envA,
        envelope_B=envB,
        theoretical_upper=upper,
        violations=[],
        generators=list(config.generators),
        diagnostics=diagnostics,
        final_state=U[-1].copy(),
    )
    slack = config.slack if config.slack is not None else (0.05 if config.scheme == "nonlocal" else 0.02)
    res.violations = _check_series(res, slack, signed)
    return res


def _run_spectral(config: ExperimentConfig) -> SimResult:
    from .spectral import OUModel, hermite_matrix

    m = config.potential.m
    lam = config.potential.lam
    model = OUModel(config.spectral_K)
    # basis in the variable y = sqrt(m) x; steady state N(0, 1/m)
    y = model.nodes
    x = y / math.sqrt(m)
    u0 = config.u0
    mode = u0["mode"]
    signed = bool(u0.get("signed", False))
    if mode == "steady":
        c = np.ones(1)
    elif mode in ("single_hermite", "hermite_modes"):
        c = _hermite_coeffs(u0)
    elif mode == "gaussian_mixture":
        uinf = np.sqrt(m / (2 * math.pi)) * np.exp(-0.5 * m * x * x)
        v0 = _mixture_density(_mixture_components(u0, config.seed), x) / uinf
        c = model.basis @ (model.weights * v0)
    else:
        raise ConfigError("the spectral scheme cannot read u0 from a file")
    if c.size > model.K + 1:
        raise ConfigError("more Hermite modes than the spectral basis holds")
    c = np.concatenate([c, np.zeros(model.K + 1 - c.size)])
    basis = hermite_matrix(model.K, y)
    tt = config.time.nodes
    ks = np.arange(c.size)
    dynamics = config.kernel
    if dynamics == "classical":
        S = np.exp(-np.outer(tt, m * ks))
        envA = np.exp(-2 * lam * tt)
        envB = {g.name: np.exp(-2 * lam * tt) for g in config.generators if isinstance(g, PowerBeta)}
    elif dynamics == "backward_difference":
        tau = config.time.step
        steps = np.arange(tt.size)
        S = (1.0 / (1.0 + tau * m * ks[None, :])) ** steps[:, None]
        envA = (1.0 / (1.0 + 2.0 * tau * lam)) ** steps
        envB = {g.name: (1.0 / (1.0 + 2.0 * tau * lam / g.beta)) ** (g.beta * steps)
                for g in config.generators if isinstance(g, PowerBeta)}
    else:
        weights = build_weights(dynamics, config.time)
        S = np.ones((tt.size, c.size))
        for k in range(1, c.size):
            if c[k] != 0.0:
                S[:, k] = solve_relaxation(weights, m * k).values
        envA = solve_relaxation(weights, 2 * lam).values
        envB = {g.name: solve_relaxation(weights, 2 * lam / g.beta).values ** g.beta
                for g in config.generators if isinstance(g, PowerBeta)}
    C = c[None, :] * S
    Vn = C @ basis  # v = u/u_inf at the quadrature nodes
    series = {}
    upper = {}
    for g in config.generators:
        if signed and not g.allows_signed():
            raise ConfigError("signed initial data only works with the beta=2 generator")
        if not g.allows_signed() and np.any(Vn < 0):
            raise ConfigError("reconstructed density is negative; use beta=2 or positive data")
        H = g.phi(Vn) @ model.weights
        series[g.name] = H
        bounds = {"A": envA * H[0]}
        if isinstance(g, PowerBeta):
            bounds["B"] = envB[g.name] * H[0]
        upper[g.name] = bounds
    l1 = np.abs(Vn - 1.0) @ model.weights
    res = SimResult(
        times=tt.copy(),
        entropy_series=series,
        l1_distance=l1,
        mass_error=C[:, 0] - 1.0,
        min_value=Vn.min(axis=1),
        envelope_A=envA,
        envelope_B=envB,
        theoretical_upper=upper,
        violations=[],
        generators=list(config.generators),
        diagnostics={"spectral_K": model.K},
    )
    slack = config.slack if config.slack is not None else 1e-10
    res.violations = _check_series(res, slack, signed)
    return res


# ---------------------------------------------------------------- rate fitting

@dataclass(frozen=True)
class RateFit:
    rate: float
    r2: float
    points: int


def fit_decay_rate(t, values, cls: DecayClass, window: Optional[Tuple[float, float]] = None) -> RateFit:
    """Least-squares decay rate on ``window``.

    algebraic: slope of log v against log t; exponential: slope of log v
    against t; logarithmic: c in v ~ c / log t.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = np.ones(t.size, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    tw, vw = t[sel], v[sel]
    if tw.size < 8:
        raise ValueError(f"window holds {tw.size} points; need at least 8")
    if np.any(vw <= 0):
        raise ValueError("values must be positive on the window")
    if cls.kind == "logarithmic":
        if np.any(tw <= 1):
            raise ValueError("logarithmic fits need t > 1")
        b = 1.0 / np.log(tw)
        c = float(np.dot(vw, b) / np.dot(b, b))
        resid = vw - c * b
        ss = float(np.sum((vw - vw.mean()) ** 2))
        r2 = 1.0 - float(np.dot(resid, resid)) / ss if ss > 0 else 1.0
        return RateFit(c, r2, int(tw.size))
    X = np.log(tw) if cls.kind == "algebraic" else tw
    Y = np.log(vw)
    slope, icept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + icept)
    ss = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(np.dot(resid, resid)) / ss if ss > 0 else 1.0
    return RateFit(float(slope), r2, int(tw.size))
