"""Acceptance criteria 1-13.  Each test prints one PASS/FAIL line; the
lines are repeated in the terminal summary."""

import math
import time

import numpy as np
import pytest

from artifact.cli import run_suite
from artifact.convq import (
    TimeGrid,
    build_weights,
    check_convexity_inequality,
    check_fundamental_identity_discrete,
    solve_relaxation,
)
from artifact.entropy import Logarithmic, PowerBeta
from artifact.fpsolver import ExperimentConfig, fit_decay_rate, run_experiment
from artifact.kernels import (
    DecayClass,
    DistributedOrder,
    Fractional,
    MultiTerm,
    TemperedFractional,
    log_decay_interval,
    log_decay_threshold,
)
from artifact.specfun import erfcx, mittag_leffler

from conftest import ACCEPTANCE_LINES


def report(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}: {detail}"
    ACCEPTANCE_LINES[num] = line
    print(line)
    assert ok, line


KERNELS = {
    "Fractional(0.5)": Fractional(0.5),
    "Tempered(0.5,1)": TemperedFractional(0.5, 1.0),
    "MultiTerm": MultiTerm(((1.0, 0.3), (1.0, 0.7))),
    "DistributedOrder": DistributedOrder(),
}


def test_01_special_functions():
    t0 = time.perf_counter()
    t = np.logspace(-3, math.log10(50), 200)
    e1 = max(abs(mittag_leffler(1.0, -x) - math.exp(-x)) for x in t)
    xs = np.linspace(0.0, 8.0, 401)
    e2 = max(abs(mittag_leffler(0.5, -x) - erfcx(x)) for x in xs)
    dt = time.perf_counter() - t0
    report(1, "special functions", e1 <= 1e-10 and e2 <= 1e-8 and dt < 1.0,
           f"alpha=1 err {e1:.1e} (<=1e-10), alpha=0.5 err {e2:.1e} (<=1e-8), {dt:.2f}s (<1s)")


def test_02_relaxation_vs_mittag_leffler():
    t0 = time.perf_counter()
    grid = TimeGrid.uniform_to(10.0, 2000)
    worst = 0.0
    for a in (0.3, 0.5, 0.8):
        w = build_weights(Fractional(a), grid, rule="trapezoid")
        for mu in (0.5, 1.0, 2.0):
            s = solve_relaxation(w, mu).values
            ex = np.array([mittag_leffler(a, -mu * x ** a) for x in grid.nodes])
            worst = max(worst, float(np.abs(s - ex).max()))
    dt = time.perf_counter() - t0
    report(2, "relaxation vs Mittag-Leffler", worst <= 1e-3 and dt < 10.0,
           f"max node error {worst:.1e} (<=1e-3) over 9 cases, {dt:.1f}s (<10s)")


def test_03_envelope_certification():
    t0 = time.perf_counter()
    grids = {"uniform": TimeGrid.uniform_to(10.0, 2000), "geometric": TimeGrid.geometric_to(1e4, 1e-6, 1500)}
    violations, cases = 0, 0
    for spec in KERNELS.values():
        for grid in grids.values():
            w = build_weights(spec, grid)
            for mu in (0.5, 1.0, 2.0):
                c = solve_relaxation(w, mu, check=False)
                bad = (c.values < c.lower_env - 1e-10) | (c.values > c.upper_env + 1e-10)
                violations += int(bad.sum())
                cases += 1
    dt = time.perf_counter() - t0
    report(3, "envelope certification", violations == 0 and dt < 30.0,
           f"{violations} violations over {cases} curves (4 kernels x 2 grids x 3 mu), {dt:.1f}s (<30s)")


def test_04_tail_rates():
    t0 = time.perf_counter()
    grid = TimeGrid.geometric_to(1e3, 1e-6, 1500)
    slopes = {}
    for a in (0.3, 0.5, 0.8):
        c = solve_relaxation(build_weights(Fractional(a), grid), 2.0)
        slopes[a] = fit_decay_rate(c.t, c.values, DecayClass("algebraic", a), (10.0, 1e3)).rate
    ok_frac = all(abs(slopes[a] + a) <= 0.05 for a in slopes)
    c = solve_relaxation(build_weights(MultiTerm(((1.0, 0.3), (1.0, 0.7))), grid), 2.0)
    mt = fit_decay_rate(c.t, c.values, DecayClass("algebraic", 0.3), (10.0, 1e3)).rate
    ok_mt = abs(mt + 0.3) <= 0.07
    glog = TimeGrid.geometric_to(1e6, 1e-6, 1500)
    T1 = log_decay_threshold(glog.nodes)
    w = build_weights(DistributedOrder(), glog)
    ok_do, spans = T1 <= 1e2, []
    for mu in (0.5, 1.0, 2.0):
        c = solve_relaxation(w, mu)
        sel = (c.t >= 1e2) & (c.t <= 1e6)
        prod = c.values[sel] * np.log(c.t[sel])
        lo, hi = log_decay_interval(mu, 1e2, 1e6)
        ok_do &= bool(prod.min() >= lo and prod.max() <= hi)
        spans.append(f"mu={mu:g}: [{prod.min():.3f},{prod.max():.3f}] in [{lo:.3f},{hi:.3f}]")
    dt = time.perf_counter() - t0
    fr = ", ".join(f"{slopes[a]:.3f}" for a in slopes)
    report(4, "tail rates", ok_frac and ok_mt and ok_do and dt < 120.0,
           f"Fractional slopes (mu=2) {fr} vs -0.3/-0.5/-0.8 (+-0.05); MultiTerm {mt:.3f} (-0.3+-0.07); "
           f"DistributedOrder T1={T1:.2f}, s*log t {'; '.join(spans)}; {dt:.1f}s (<120s)")


def test_05_pointwise_sweep():
    t0 = time.perf_counter()
    r, _ = run_suite("pointwise", 100000, seed=7)
    dt = time.perf_counter() - t0
    report(5, "pointwise inequality sweep", r["min_margin"] >= -1e-12 and r["max_abs_diagonal"] <= 1e-12 and dt < 5.0,
           f"min F {r['min_margin']:.1e} (>=-1e-12), max |F(x,x)| {r['max_abs_diagonal']:.1e} (<=1e-12), {dt:.2f}s (<5s)")


def test_06_holder_bound():
    t0 = time.perf_counter()
    r, _ = run_suite("holder", 1000, seed=11)
    dt = time.perf_counter() - t0
    report(6, "Hoelder entropy bound", r["min_margin"] >= -1e-10 and r["equality_error"] <= 1e-10 and dt < 10.0,
           f"min rhs-lhs {r['min_margin']:.1e} (>=-1e-10), equality error {r['equality_error']:.1e} (<=1e-10), {dt:.2f}s (<10s)")


def test_07_ckp():
    t0 = time.perf_counter()
    r, _ = run_suite("ckp", 100, seed=5)
    dt = time.perf_counter() - t0
    report(7, "CKP inequality", r["min_margin"] >= -1e-8 and dt < 5.0,
           f"min bound-L1 {r['min_margin']:.1e} (>=-1e-8) over 100 pairs x 2 families, {dt:.2f}s (<5s)")


def test_08_convex_sobolev():
    r, _ = run_suite("sobolev", 50, seed=3)
    report(8, "convex Sobolev / Poincare", r["min_residual"] >= -1e-6 and abs(r["single_mode_residual"]) <= 1e-4,
           f"min residual {r['min_residual']:.1e} (>=-1e-6), single-mode residual {r['single_mode_residual']:.1e} (|.|<=1e-4)")


def _cfg(**over):
    base = {
        "potential": {"type": "quadratic", "m": 1.0},
        "generators": [{"type": "power", "beta": 2}],
        "grid": {"L": 8, "N": 400, "time": {"kind": "uniform", "t_max": 50, "steps": 4000, "graded": False}},
        "u0": {"mode": "single_hermite", "k": 1, "amplitude": 0.5, "signed": True},
        "seed": 0,
    }
    base.update(over)
    return ExperimentConfig.from_json(base)


def test_09_spectral_optimality():
    t0 = time.perf_counter()
    kern = {"type": "fractional", "alpha": 0.5}
    sp = run_experiment(_cfg(scheme="spectral", kernel=kern))
    s1 = solve_relaxation(build_weights(Fractional(0.5), sp_grid := TimeGrid.uniform_to(50.0, 4000, graded=False)), 1.0).values
    H = sp.entropy_series["beta2"]
    exact_dev = float(np.max(np.abs(H - 0.25 * s1 ** 2) / (0.25 * s1 ** 2)))
    fd = run_experiment(_cfg(scheme="nonlocal", kernel=kern))
    sel = (sp_grid.nodes >= 0.1) & (sp_grid.nodes <= 50.0)
    fd_dev = float(np.max(np.abs(fd.entropy_series["beta2"][sel] / H[sel] - 1.0)))
    dt = time.perf_counter() - t0
    report(9, "spectral optimality", exact_dev <= 1e-8 and fd_dev <= 0.02 and dt < 120.0,
           f"spectral H vs 0.25 s1^2 rel {exact_dev:.1e} (<=1e-8); FD vs spectral rel {fd_dev:.1e} on [0.1,50] (<=2%); {dt:.1f}s (<120s)")


def test_10_fractional_rates():
    slopes = {}
    for a in (0.4, 0.6):
        r = run_experiment(_cfg(scheme="spectral", kernel={"type": "fractional", "alpha": a},
                                grid={"L": 8, "N": 400, "time": {"kind": "geometric", "t_max": 1e4, "first_step": 1e-6, "steps": 1500}}))
        slopes[a] = fit_decay_rate(r.times, r.entropy_series["beta2"], DecayClass("algebraic", 2 * a), (1e2, 1e4)).rate
    ok_slopes = all(abs(slopes[a] + 2 * a) <= 0.15 for a in slopes)
    worst = -np.inf
    for a in (0.4, 0.6):
        r = run_experiment(_cfg(scheme="nonlocal", kernel={"type": "fractional", "alpha": a},
                                generators=[{"type": "log"}],
                                grid={"L": 8, "N": 400, "time": {"kind": "uniform", "t_max": 50, "steps": 2000, "graded": False}},
                                u0={"mode": "gaussian_mixture", "components": [
                                    {"weight": 0.6, "mean": -1.0, "std": 0.8}, {"weight": 0.4, "mean": 1.5, "std": 1.2}]}))
        H, A = r.entropy_series["log"], r.theoretical_upper["log"]["A"]
        worst = max(worst, float(np.max(H[1:] / A[1:])))
    report(10, "fractional-dynamics rates", ok_slopes and worst <= 1.05,
           f"beta=2 slopes {slopes[0.4]:.3f} (-0.8+-0.15), {slopes[0.6]:.3f} (-1.2+-0.15); "
           f"FD Boltzmann H / (s_2lambda H0) max {worst:.3f} (<=1.05)")


def test_11_discrete_decay_bound():
    a = 0.5
    coeffs = [2 * a / (1 + a * a), a * a * math.sqrt(2) / (1 + a * a)]
    spec_excess, fd_ratio, strict = -np.inf, 0.0, True
    for beta in (1.5, 2.0):
        for tau in (0.05, 0.1):
            common = dict(kernel="backward_difference", generators=[{"type": "power", "beta": beta}],
                          grid={"L": 8, "N": 400, "time": {"kind": "uniform", "step": tau, "steps": 200, "graded": False}},
                          u0={"mode": "hermite_modes", "coeffs": coeffs})
            name = f"beta{beta:g}"
            sp = run_experiment(_cfg(scheme="spectral", **common))
            H, B, A = sp.entropy_series[name], sp.theoretical_upper[name]["B"], sp.theoretical_upper[name]["A"]
            spec_excess = max(spec_excess, float(np.max(H - B)))
            strict &= bool(np.all(B[1:] < A[1:]))
            fd = run_experiment(_cfg(scheme="backward_difference", **common))
            Hf, Bf = fd.entropy_series[name], fd.theoretical_upper[name]["B"]
            fd_ratio = max(fd_ratio, float(np.max(Hf[1:] / Bf[1:])))
    arith = (1 / 1.1) ** 2 < 1 / 1.2 and abs((1 / 1.1) ** 2 - 0.826446) < 1e-6
    report(11, "discrete decay bound", spec_excess <= 1e-12 and fd_ratio <= 1.02 and strict and arith,
           f"spectral max H-bound {spec_excess:.1e} (<=1e-12); FD max H/bound {fd_ratio:.4f} (<=1.02); "
           f"strictly below the general-phi bound: {strict}; (1/1.1)^2={(1 / 1.1) ** 2:.6f} < {1 / 1.2:.6f}")


def test_12_identities():
    rng = np.random.default_rng(12)
    res = 0.0
    for _ in range(200):
        u = np.exp(rng.normal(0.0, 1.0, 100))
        tau = float(rng.uniform(1e-3, 1.0))
        for psi in (PowerBeta(1.5), PowerBeta(2.0), Logarithmic(), 3.0):
            res = max(res, check_fundamental_identity_discrete(u, tau, psi))
    grid = TimeGrid.uniform_to(5.0, 300, graded=False)
    margin = np.inf
    for spec in KERNELS.values():
        w = build_weights(spec, grid)
        for _ in range(25):
            v = np.exp(rng.normal(0.0, 1.0, grid.n))
            for psi in (PowerBeta(1.5), PowerBeta(2.0), Logarithmic(), 3.0):
                margin = min(margin, check_convexity_inequality(w, v, float(np.exp(rng.normal())), psi))
    report(12, "identity suites", res <= 1e-12 and margin >= -1e-12,
           f"fundamental identity residual {res:.1e} (<=1e-12); convexity margin {margin:.1e} (>=-1e-12)")


def test_13_conservation_positivity():
    runs = []
    mix = {"mode": "gaussian_mixture", "random_components": 3}
    for scheme, kern, tgrid in (
        ("nonlocal", {"type": "fractional", "alpha": 0.5}, {"kind": "uniform", "t_max": 20, "steps": 1500, "graded": False}),
        ("nonlocal", {"type": "tempered", "alpha": 0.6, "gamma_rate": 0.5}, {"kind": "uniform", "t_max": 20, "steps": 1500}),
        ("nonlocal", {"type": "multiterm", "terms": [[1, 0.3], [1, 0.7]]}, {"kind": "geometric", "t_max": 100, "first_step": 1e-5, "steps": 800}),
        ("nonlocal", {"type": "distributed"}, {"kind": "uniform", "t_max": 20, "steps": 1500, "graded": False}),
        ("backward_difference", None, {"kind": "uniform", "step": 0.05, "steps": 400, "graded": False}),
    ):
        cfg = {"scheme": scheme, "generators": [{"type": "log"}, {"type": "power", "beta": 1.5}],
               "grid": {"L": 8, "N": 300, "time": tgrid}, "u0": mix, "seed": len(runs)}
        if kern:
            cfg["kernel"] = kern
        runs.append(run_experiment(_cfg(**cfg)))
    mass = max(float(np.abs(r.mass_error).max()) for r in runs)
    low = min(float(r.min_value.min()) for r in runs)
    report(13, "conservation and positivity", mass <= 1e-12 and low >= 0.0,
           f"max |mass-1| {mass:.1e} (<=1e-12), min u {low:.1e} (>=0) over {len(runs)} runs (4 kernels + backward differences)")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v", "-s"]))
