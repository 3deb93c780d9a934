"""Command-line front end: ``artifact relax | simulate | verify | spectral``.

Exit codes: 0 on success (recorded violations included), 2 for usage or
configuration errors, 1 for numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from typing import List, Optional

import numpy as np

from .convq import (
    EnvelopeViolation,
    TimeGrid,
    WeightConstructionError,
    build_weights,
    check_convexity_inequality,
    check_fundamental_identity_discrete,
    solve_relaxation,
    write_relaxation_csv,
)
from .entropy import (
    Field1D,
    Logarithmic,
    PowerBeta,
    SpatialGrid,
    SteadyState1D,
    UsageError,
    ckp_bound,
    convex_sobolev_residual,
    entropy_holder_bound,
    l1_distance,
    pointwise_F,
    relative_entropy,
    write_sweep_csv,
)
from .fpsolver import (
    ConfigError,
    ExperimentConfig,
    NumericalFailure,
    envelope_margins,
    fit_decay_rate,
    run_experiment,
)
from .kernels import (
    DecayClass,
    DistributedOrder,
    Fractional,
    MultiTerm,
    TemperedFractional,
    decay_class,
    kernel_to_json,
    parse_kernel,
)
from .specfun import DomainError, MLAccuracyError
from .spectral import Classical, DiscreteBE, OUModel, SpectralCoeffs, evolve_series, hermite_matrix, write_spectral_csv

__all__ = ["main", "ExperimentConfig", "SUITES", "run_suite"]


class _Usage(Exception):
    pass


def _hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _emit(report: dict, out_dir: Optional[str] = None, name: str = "summary.json"):
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default)
    print(text)
    if out_dir:
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------- rate fits

def default_window(t, cls: DecayClass):
    t_max = float(t[-1])
    if cls.kind == "exponential":
        return (t_max / 4.0, t_max)
    if cls.kind == "logarithmic":
        return (max(math.sqrt(t_max), 1.0 + 1e-9), t_max)
    return (t_max / 10.0, t_max)


def _fit(t, v, cls: DecayClass, window=None) -> dict:
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    w = tuple(window) if window is not None else default_window(t, cls)
    keep = v > 1e-300
    try:
        f = fit_decay_rate(t[keep], v[keep], cls, w)
    except ValueError as exc:
        return {"class": cls.kind, "window": list(w), "error": str(exc)}
    return {"class": cls.kind, "window": list(w), "rate": f.rate, "r2": f.r2, "points": f.points}


# ---------------------------------------------------------------- grids from flags

def _time_grid(spec: str, t_max: float, steps: int) -> TimeGrid:
    """``uniform`` (graded start), ``uniform-pure``, ``geometric`` or
    ``geometric:FIRST_STEP``."""
    kind, _, arg = spec.partition(":")
    if kind == "uniform":
        return TimeGrid.uniform_to(t_max, steps, graded=True)
    if kind == "uniform-pure":
        return TimeGrid.uniform_to(t_max, steps, graded=False)
    if kind == "geometric":
        first = float(arg) if arg else 1e-6
        return TimeGrid.geometric_to(t_max, first, steps)
    raise _Usage(f"unknown grid {spec!r} (uniform, uniform-pure, geometric[:first_step])")


# ---------------------------------------------------------------- relax

def cmd_relax(args) -> int:
    t0 = time.perf_counter()
    kernel = parse_kernel(args.kernel)
    grid = _time_grid(args.grid, args.t_max, args.steps)
    weights = build_weights(kernel, grid, rule=args.rule)
    os.makedirs(args.out, exist_ok=True)
    rates, margins, violations = {}, {}, []
    cls = decay_class(kernel)
    for mu in args.mu:
        curve = solve_relaxation(weights, mu, check=False)
        path = os.path.join(args.out, f"relax_mu{mu:g}.csv")
        write_relaxation_csv(curve, path)
        v = curve.values
        lo = v - curve.lower_env
        hi = curve.upper_env - v
        margins[f"mu{mu:g}"] = {"lower": _finite(lo.min()), "upper": _finite(hi.min())}
        bad = np.flatnonzero((lo < -1e-10) | (hi < -1e-10))
        if bad.size:
            violations.append({"invariant": "envelope", "mu": mu, "node": int(bad[0]), "t": float(curve.t[bad[0]])})
        if mu > 0:
            rates[f"mu{mu:g}"] = _fit(curve.t, v, cls, args.window)
    report = {
        "config_hash": _hash({"cmd": "relax", "kernel": kernel_to_json(kernel), "grid": grid.to_json(),
                              "mu": list(args.mu), "rule": args.rule}),
        "fitted_rates": rates,
        "envelope_margins": margins,
        "violations": violations,
        "runtime_seconds": time.perf_counter() - t0,
    }
    _emit(report, args.out, "relax_summary.json")
    return 0


# ---------------------------------------------------------------- simulate

def _sim_decay_class(cfg: ExperimentConfig, gen) -> DecayClass:
    if cfg.scheme == "backward_difference" or cfg.kernel in ("classical", "backward_difference"):
        return DecayClass("exponential")
    cls = decay_class(cfg.kernel)
    if cls.kind == "algebraic":
        # entropy decays like s^beta (or s^2 near equilibrium)
        return DecayClass("algebraic", 2.0 * cls.exponent)
    return cls


def simulate(cfg: ExperimentConfig):
    """Run ``cfg``, write the CSV and return (result, summary dict)."""
    t0 = time.perf_counter()
    res = run_experiment(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    res.write_csv(os.path.join(cfg.output_dir, "simulation.csv"))
    rates = {}
    for g in res.generators:
        H = res.entropy_series[g.name]
        if np.all(np.abs(H) <= 1e-12):
            rates[g.name] = {"class": "none", "note": "entropy identically zero"}
            continue
        entry = _fit(res.times, H, _sim_decay_class(cfg, g), cfg.fit_window)
        if cfg.scheme == "backward_difference" or cfg.kernel == "backward_difference":
            ok = H[:-1] > 0
            entry["per_step_factor"] = float(np.max(H[1:][ok] / H[:-1][ok])) if ok.any() else None
        rates[g.name] = entry
    names = ["mass", "positivity", "entropy_nonincreasing", "ckp"] + sorted(
        {f"envelope_{e}" for b in res.theoretical_upper.values() for e in b})
    failed = {v["invariant"] for v in res.violations}
    summary = {
        "config_hash": cfg.config_hash,
        "fitted_rates": rates,
        "envelope_margins": {k: _finite(v) if v is not None else None for k, v in envelope_margins(res).items()},
        "violations": res.violations,
        "runtime_seconds": time.perf_counter() - t0,
        "invariants": {n: n not in failed for n in names},
        "seed": cfg.seed,
        "diagnostics": res.diagnostics,
    }
    return res, summary


def cmd_simulate(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise _Usage(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise _Usage(f"config is not valid JSON: {exc}")
    cfg = ExperimentConfig.from_json(raw, base_dir=os.path.dirname(os.path.abspath(args.config)))
    if args.output_dir:
        cfg.output_dir = args.output_dir
    _, summary = simulate(cfg)
    _emit(summary, cfg.output_dir)
    return 0


# ---------------------------------------------------------------- verify suites

def _random_density(rng, grid: SpatialGrid, ncomp: int = 3) -> np.ndarray:
    w = rng.uniform(0.2, 1.0, ncomp)
    mu = rng.uniform(-2.0, 2.0, ncomp)
    sd = rng.uniform(0.6, 1.6, ncomp)
    x = grid.x
    f = sum(wi * np.exp(-0.5 * ((x - m) / s) ** 2) / s for wi, m, s in zip(w, mu, sd))
    return f / grid.integrate(f)


def _random_ratio(rng, grid: SpatialGrid, base, modes: int = 4, amp: float = 1.0) -> np.ndarray:
    # positive bounded v with int v base = 1
    x = grid.x / np.max(np.abs(grid.x)) * np.pi
    a = rng.uniform(-amp, amp, modes) / np.arange(1, modes + 1)
    th = rng.uniform(0.0, 2 * np.pi, modes)
    v = np.exp(sum(ak * np.cos((k + 1) * x + t) for k, (ak, t) in enumerate(zip(a, th))))
    return v / grid.integrate(v * base)


def _steady_from(grid: SpatialGrid, values) -> SteadyState1D:
    return SteadyState1D(grid, np.asarray(values, dtype=float), 1.0)


def suite_pointwise(rng, samples: int):
    x = np.exp(rng.uniform(math.log(1e-6), math.log(20.0), samples))
    y = np.exp(rng.uniform(math.log(1e-6), math.log(20.0), samples))
    # include exact zeros and the diagonal
    x[: samples // 50] = 0.0
    betas = 1.0 + np.arange(1, 201) / 200.0
    beta = betas[rng.integers(0, betas.size, samples)]
    F = np.empty(samples)
    for b in betas:
        sel = beta == b
        if sel.any():
            F[sel] = pointwise_F(b, x[sel], y[sel])
    diag = np.array([pointwise_F(b, xx, xx) for b, xx in zip(beta[:200], y[:200])])
    i = int(np.argmin(F))
    report = {
        "min_margin": float(F.min()),
        "worst_case": {"beta": float(beta[i]), "x": float(x[i]), "y": float(y[i])},
        "max_abs_diagonal": float(np.abs(diag).max()),
        "passed": bool(F.min() >= -1e-12 and np.abs(diag).max() <= 1e-12),
    }
    rows = [(k, 0.0, F[k]) for k in range(min(samples, 1000))]
    return report, rows


def suite_ckp(rng, samples: int):
    grid = SpatialGrid.cell_centered(10.0, 400)
    worst, rows = math.inf, []
    for k in range(samples):
        g = _random_density(rng, grid)
        f = g * _random_ratio(rng, grid, g, amp=float(rng.uniform(0.1, 2.0)))
        steady = _steady_from(grid, g)
        for gen in (PowerBeta(float(rng.uniform(1.05, 2.0))), Logarithmic()):
            H = relative_entropy(gen, Field1D(grid, f), steady)
            lhs = l1_distance(Field1D(grid, f), steady)
            rhs = ckp_bound(gen, max(H, 0.0))
            rows.append((f"{k}:{gen.name}", lhs, rhs))
            worst = min(worst, rhs - lhs)
    return {"min_margin": worst, "passed": bool(worst >= -1e-8)}, rows


def suite_sobolev(rng, samples: int):
    grid = SpatialGrid.cell_centered(10.0, 2000)
    steady = SteadyState1D.gaussian(grid)
    x = grid.x
    H = hermite_matrix(1, x)
    worst, rows = math.inf, []
    for k in range(samples):
        u = steady.values * _random_ratio(rng, grid, steady.values, amp=float(rng.uniform(0.05, 1.0)))
        for gen in (PowerBeta(float(rng.uniform(1.05, 2.0))), PowerBeta(2.0), Logarithmic()):
            r = convex_sobolev_residual(gen, Field1D(grid, u), steady, 1.0)
            rows.append((f"{k}:{gen.name}", 0.0, r))
            worst = min(worst, r)
    # single-mode perturbation: equality for beta = 2
    u = (1.0 + 0.5 * H[1]) * steady.values
    sat = convex_sobolev_residual(PowerBeta(2.0), Field1D(grid, u / grid.integrate(u)), steady, 1.0)
    report = {"min_residual": worst, "single_mode_residual": sat,
              "passed": bool(worst >= -1e-6 and abs(sat) <= 1e-4)}
    return report, rows


def suite_holder(rng, samples: int):
    grid = SpatialGrid.cell_centered(8.0, 400)
    worst, eq_err, rows = math.inf, 0.0, []
    g = SteadyState1D.gaussian(grid)
    for k in range(samples):
        beta = float(rng.uniform(1.05, 2.0))
        f1, f2 = (Field1D(grid, g.values * _random_ratio(rng, grid, g.values, amp=float(rng.uniform(0.1, 2.0))))
                  for _ in range(2))
        lhs, rhs = entropy_holder_bound(beta, f1, f2, g)
        rows.append((k, lhs, rhs))
        worst = min(worst, rhs - lhs)
        l2, r2 = entropy_holder_bound(beta, f1, f1, g)
        eq_err = max(eq_err, abs(l2 - r2))
    return {"min_margin": worst, "equality_error": eq_err,
            "passed": bool(worst >= -1e-10 and eq_err <= 1e-10)}, rows


def suite_identity(rng, samples: int):
    worst_res, worst_margin, rows = 0.0, math.inf, []
    grid = TimeGrid.uniform_to(5.0, 200, graded=False)
    weights = {k: build_weights(k, grid) for k in (Fractional(0.3), Fractional(0.7), TemperedFractional(0.5, 1.0),
                                                   MultiTerm(((1.0, 0.3), (1.0, 0.7))), DistributedOrder())}
    gens = [PowerBeta(1.5), PowerBeta(2.0), Logarithmic(), 3.0]
    for k in range(samples):
        u = np.exp(rng.normal(0.0, 0.5, 50))
        tau = float(rng.uniform(0.01, 1.0))
        for gen in gens:
            r = check_fundamental_identity_discrete(u, tau, gen)
            worst_res = max(worst_res, r)
            rows.append((f"fi:{k}:{getattr(gen, 'name', gen)}", r, 1e-12))
        kern = list(weights)[k % len(weights)]
        v = np.exp(rng.normal(0.0, 0.5, grid.n))
        for gen in gens:
            m = check_convexity_inequality(weights[kern], v, float(np.exp(rng.normal(0.0, 0.5))), gen)
            worst_margin = min(worst_margin, m)
            rows.append((f"cx:{k}:{getattr(gen, 'name', gen)}", 0.0, m))
    return {"max_identity_residual": worst_res, "min_convexity_margin": worst_margin,
            "passed": bool(worst_res <= 1e-12 and worst_margin >= -1e-12)}, rows


_ALL_KERNELS = ("frac:0.5", "tempered:0.5,1", "multiterm:1,0.3,1,0.7", "distributed")


def suite_bounds(rng, samples: int, kernels=None, mus=(0.5, 1.0, 2.0)):
    kernels = kernels or _ALL_KERNELS
    cases, rows, count = [], [], 0
    grids = {"uniform": TimeGrid.uniform_to(10.0, 1000), "geometric": TimeGrid.geometric_to(1e3, 1e-6, 1200)}
    for name in kernels:
        spec = parse_kernel(name)
        for gname, grid in grids.items():
            w = build_weights(spec, grid)
            for mu in mus:
                c = solve_relaxation(w, mu, check=False)
                lo = float((c.values - c.lower_env).min())
                hi = float((c.upper_env - c.values).min())
                mono = float(np.diff(c.values).max())
                bad = lo < -1e-10 or hi < -1e-10 or mono > 1e-10
                count += int(bad)
                cases.append({"kernel": name, "grid": gname, "mu": mu, "lower_margin": lo,
                              "upper_margin": hi, "max_increase": mono})
                rows.append((f"{name}|{gname}|{mu:g}", 0.0, min(lo, hi)))
    return {"violations": count, "cases": cases, "passed": count == 0}, rows


SUITES = {
    "pointwise": (suite_pointwise, 100000),
    "ckp": (suite_ckp, 100),
    "sobolev": (suite_sobolev, 50),
    "identity": (suite_identity, 100),
    "holder": (suite_holder, 1000),
    "bounds": (suite_bounds, 1),
}


def run_suite(name: str, samples: Optional[int] = None, seed: int = 0, kernels=None):
    if name not in SUITES:
        raise _Usage(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    fn, default = SUITES[name]
    rng = np.random.default_rng(seed)
    n = default if samples is None else samples
    if n < 1:
        raise _Usage("samples must be positive")
    if name == "bounds":
        return fn(rng, n, kernels)
    return fn(rng, n)


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    kernels = [args.kernel] if args.kernel else None
    if kernels and args.suite != "bounds":
        raise _Usage("--kernel only applies to the bounds suite")
    if kernels:
        parse_kernel(args.kernel)
    report, rows = run_suite(args.suite, args.samples, args.seed, kernels)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_sweep_csv(rows, os.path.join(args.out, f"verify_{args.suite}.csv"))
    summary = {
        "config_hash": _hash({"cmd": "verify", "suite": args.suite, "samples": args.samples,
                              "seed": args.seed, "kernel": args.kernel}),
        "fitted_rates": {},
        "envelope_margins": {},
        "violations": [] if report["passed"] else [{"suite": args.suite}],
        "runtime_seconds": time.perf_counter() - t0,
        "seed": args.seed,
        "report": report,
    }
    _emit(summary, args.out, f"verify_{args.suite}.json")
    return 0


# ---------------------------------------------------------------- spectral

def _parse_modes(text: str) -> np.ndarray:
    """"1:0.5,2:0.1" -> coefficients with c_0 = 1."""
    pairs = {}
    try:
        for part in text.split(","):
            k, _, a = part.partition(":")
            pairs[int(k)] = float(a)
    except ValueError:
        raise _Usage(f"bad --modes {text!r}; expected k:amplitude[,k:amplitude]")
    if not pairs or min(pairs) < 1:
        raise _Usage("--modes needs indices >= 1")
    c = np.zeros(max(pairs) + 1)
    c[0] = 1.0
    for k, a in pairs.items():
        c[k] = a
    return c


def cmd_spectral(args) -> int:
    t0 = time.perf_counter()
    c = _parse_modes(args.modes)
    signed = bool(np.any(c @ hermite_matrix(c.size - 1, OUModel(max(40, c.size)).nodes) < 0))
    coeffs = SpectralCoeffs(c, signed)
    if args.kernel == "classical":
        dyn, grid = Classical(), _time_grid(args.grid, args.t_max, args.steps)
        times, S = evolve_series(coeffs, dyn, grid=grid)
        cls = DecayClass("exponential")
    elif args.kernel.startswith("be:"):
        tau = float(args.kernel[3:])
        times, S = evolve_series(coeffs, DiscreteBE(tau), steps=args.steps)
        cls = DecayClass("exponential")
    else:
        kern = parse_kernel(args.kernel)
        grid = _time_grid(args.grid, args.t_max, args.steps)
        times, S = evolve_series(coeffs, kern, grid=grid)
        cls = decay_class(kern)
        if cls.kind == "algebraic":
            cls = DecayClass("algebraic", 2 * cls.exponent)
    os.makedirs(args.out, exist_ok=True)
    write_spectral_csv(times, coeffs, S, os.path.join(args.out, "spectral.csv"))
    H2 = np.sum((c[None, 1:] * S[:, 1:]) ** 2, axis=1)
    summary = {
        "config_hash": _hash({"cmd": "spectral", "kernel": args.kernel, "modes": args.modes,
                              "grid": args.grid, "t_max": args.t_max, "steps": args.steps}),
        "fitted_rates": {"beta2": _fit(times, H2, cls, args.window)},
        "envelope_margins": {},
        "violations": [],
        "runtime_seconds": time.perf_counter() - t0,
    }
    _emit(summary, args.out, "spectral_summary.json")
    return 0


# ---------------------------------------------------------------- entry point

def _window(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("window must be 'a,b'")
    if not 0 <= a < b:
        raise argparse.ArgumentTypeError("window needs 0 <= a < b")
    return (a, b)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="artifact", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("relax", help="relaxation function with envelopes")
    r.add_argument("--kernel", required=True, help="frac:A | tempered:A,G | multiterm:d1,a1,... | distributed")
    r.add_argument("--mu", type=float, action="append", required=True, help="repeatable")
    r.add_argument("--t-max", type=float, default=10.0)
    r.add_argument("--steps", type=int, default=2000)
    r.add_argument("--grid", default="uniform", help="uniform | uniform-pure | geometric[:first_step]")
    r.add_argument("--rule", choices=("rectangle", "trapezoid"), default="rectangle")
    r.add_argument("--window", type=_window, default=None, help="fit window 'a,b'")
    r.add_argument("--out", default="out")
    r.set_defaults(func=cmd_relax)

    s = sub.add_parser("simulate", help="run an experiment config")
    s.add_argument("config")
    s.add_argument("--output-dir", default=None)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="inequality and identity sweeps")
    v.add_argument("suite", help="pointwise | ckp | sobolev | identity | holder | bounds")
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--kernel", default=None, help="bounds suite only")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    sp = sub.add_parser("spectral", help="Hermite-mode evolution for the OU case")
    sp.add_argument("--kernel", required=True, help="kernel string, 'classical' or 'be:TAU'")
    sp.add_argument("--modes", default="1:0.5", help="k:amplitude[,k:amplitude]")
    sp.add_argument("--t-max", type=float, default=10.0)
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--grid", default="uniform")
    sp.add_argument("--window", type=_window, default=None)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_spectral)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "steps", 1) is not None and getattr(args, "steps", 1) < 1:
        parser.error("--steps must be positive")
    if getattr(args, "t_max", 1.0) <= 0:
        parser.error("--t-max must be positive")
    try:
        return int(args.func(args) or 0)
    except (_Usage, ConfigError, UsageError, DomainError) as exc:
        print(f"artifact: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, MLAccuracyError, WeightConstructionError, EnvelopeViolation, ArithmeticError) as exc:
        print(f"artifact: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"artifact: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
