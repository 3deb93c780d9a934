"""Regenerate frozen.json with mpmath.  Not collected by pytest.

    python3 tests/oracles/make_oracles.py

Every value is computed from first principles (power series, integral
representations, Laplace-type integrals) without importing the package.
"""

import json
import os

import mpmath as mp

mp.mp.dps = 30


def ml_series(alpha, x):
    # E_alpha(-x) by its power series at high working precision
    with mp.workdps(int(60 + 1.2 * float(x) ** (1 / alpha) / 2.3)):
        s, j = mp.mpf(0), 0
        x = mp.mpf(x)
        while True:
            term = (-x) ** j / mp.gamma(mp.mpf(alpha) * j + 1)
            s += term
            if j > 10 and abs(term) < mp.mpf(10) ** (-45):
                break
            j += 1
        return +s


def ml_integral(alpha, x):
    # sin(a pi)/(a pi) int_0^inf exp(-(x u)^(1/a)) / ((u + cos(a pi))^2 + sin(a pi)^2) du
    a, x = mp.mpf(alpha), mp.mpf(x)
    c = mp.cos(a * mp.pi)
    w = mp.sin(a * mp.pi)
    f = lambda u: mp.exp(-(x * u) ** (1 / a)) / ((u + c) ** 2 + w * w)
    pts = {mp.mpf(0), mp.mpf(1), mp.inf} | {mp.mpf(k) / x for k in (0.25, 0.5, 1, 2, 4, 8)}
    # narrow peak at u = -cos(a pi) of width sin(a pi) when a is near 1
    pts |= {-c + k * w for k in (-10, -1, 0, 1, 10) if -c + k * w > 0}
    pts = sorted(pts)
    return mp.sin(a * mp.pi) / (a * mp.pi) * mp.quad(f, pts, maxdegree=10)


def ml(alpha, x):
    if x == 0:
        return mp.mpf(1)
    if alpha == 1:
        return mp.exp(-x)
    # the series needs ~x^(1/alpha) digits of headroom; beyond that use the integral
    return ml_series(alpha, x) if x ** (1 / alpha) <= 60 else ml_integral(alpha, x)


def f(v):
    return float(v)


out = {}

# Mittag-Leffler E_alpha(-x)
alphas = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999999]
xs = [1e-4, 1e-2, 0.5, 1.0, 3.0, 7.5, 20.0, 100.0, 1000.0]
out["mittag_leffler"] = [[a, x, f(ml(a, x))] for a in alphas for x in xs]
# overlap check of the two independent evaluations
for a in alphas:
    for x in (2.0, 6.0):
        if x ** (1 / a) > 200:
            continue
        d = abs(ml_series(a, x) - ml_integral(a, x))
        assert d < 1e-25, (a, x, d)

out["gamma"] = [[x, f(mp.gamma(x))] for x in (-2.5, -0.3, 1e-8, 0.1, 0.5, 1.7, 10.5, 25.25, 150.3)]
out["erfc"] = [[x, f(mp.erfc(x))] for x in (-3.0, -0.2, 0.0, 0.1, 0.49, 0.51, 2.0, 6.0, 25.0)]
out["e1"] = [[x, f(mp.e1(x))] for x in (1e-10, 1e-3, 0.5, 1.0, 1.0001, 3.0, 10.0, 50.0)]
out["exp_e1"] = [[x, f(mp.exp(x) * mp.e1(x))] for x in (1e-6, 0.3, 1.0, 1.5, 4.0, 12.0, 30.0, 400.0)]

# kernels, from their defining formulas
ts = [1e-3, 0.1, 1.0, 2.5, 10.0]
g = lambda b, t: mp.mpf(t) ** (b - 1) / mp.gamma(b)

rows = []
for a in (0.3, 0.5, 0.8):
    for t in ts:
        rows.append(["fractional", a, None, t, f(g(1 - a, t)), f(g(a, t)), f(g(1 + a, t)), f(g(2 + a, t))])
# tempered: k = e^{-gt} g_{1-a}; l solves k*l = 1 and equals
# e^{-gt} g_a + g int_0^t e^{-gs} g_a(s) ds
for a, gam in ((0.5, 1.0), (0.3, 2.0)):
    for t in ts:
        k = mp.exp(-gam * t) * g(1 - a, t)
        # int_0^s e^{-gr} g_a(r) dr = g^{-a} P(a, g s)
        lt = lambda s: mp.exp(-gam * s) * g(a, s) + gam ** (1 - a) * mp.gammainc(a, 0, gam * s, regularized=True)
        # s = t w^(1/a) removes the s^(a-1) endpoint singularity
        ds = lambda w: t / a * w ** (1 / mp.mpf(a) - 1)
        L1 = mp.quad(lambda w: lt(t * w ** (1 / mp.mpf(a))) * ds(w), [0, 1])
        L2 = mp.quad(lambda w: (t - t * w ** (1 / mp.mpf(a))) * lt(t * w ** (1 / mp.mpf(a))) * ds(w), [0, 1])
        rows.append(["tempered", a, gam, t, f(k), f(lt(t)), f(L1), f(L2)])
# distributed order: k = int_0^1 g_{1-b} db; l = int_0^inf e^{-s t}/(1+s) ds
for t in ts:
    k = mp.quad(lambda b: g(1 - b, t) if b < 1 else 0, [0, 1])
    lt = lambda s: mp.quad(lambda r: mp.exp(-r * s) / (1 + r), [0, mp.inf])
    L1 = mp.quad(lambda r: (1 - mp.exp(-r * t)) / (r * (1 + r)), [0, 1, mp.inf])
    L2 = mp.quad(lambda r: (r * t - 1 + mp.exp(-r * t)) / (r * r * (1 + r)), [0, 1, mp.inf])
    rows.append(["distributed", None, None, t, f(k), f(lt(t)), f(L1), f(L2)])
out["kernels"] = rows
out["multiterm_k"] = [[t, f(g(0.7, t) + g(0.3, t))] for t in ts]

# complementarity: (k * l)(t) = 1 for the tempered pair at a sample point
a, gam, t = 0.5, 1.0, 1.3
kk = lambda s: mp.exp(-gam * s) * g(1 - a, s)
ll = lambda s: mp.exp(-gam * s) * g(a, s) + gam ** (1 - a) * mp.gammainc(a, 0, gam * s, regularized=True)
assert abs(mp.quad(lambda s: kk(t - s) * ll(s), [0, t / 2, t]) - 1) < 1e-12

# Hermite functions phi_k(x) = He_k(x)/sqrt(k!)
out["hermite"] = [[k, x, f(mp.hermite(k, x / mp.sqrt(2)) * 2 ** (-mp.mpf(k) / 2) / mp.sqrt(mp.factorial(k)))]
                  for k in (0, 1, 2, 5, 12) for x in (-2.0, 0.0, 0.7, 3.1)]

path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "frozen.json")
with open(path, "w") as fh:
    json.dump(out, fh, indent=1)
print("wrote", path)
