import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.convq import TimeGrid, build_weights, solve_relaxation
from artifact.entropy import Logarithmic, PowerBeta
from artifact.kernels import Fractional, MultiTerm
from artifact.spectral import (
    CertificateUnavailable,
    Classical,
    DiscreteBE,
    OUModel,
    SpectralCoeffs,
    entropy_of,
    evolve,
    evolve_series,
    hermite_matrix,
    hermite_phi,
    lower_bound_certificate,
    project,
    reconstruct,
    weighted_norm_sq,
    write_spectral_csv,
)


def test_hermite_against_oracle(oracles):
    for k, x, v in oracles["hermite"]:
        assert hermite_phi(k, x) == pytest.approx(v, rel=1e-12, abs=1e-14)


def test_gram_is_identity():
    m = OUModel(K=30)
    np.testing.assert_allclose(m.gram(), np.eye(31), atol=1e-12)
    assert m.eigenvalues[-1] == 30.0
    with pytest.raises(ValueError):
        OUModel(K=10, Q=15)


def test_hermite_matrix_shape_and_low_orders():
    x = np.linspace(-2, 2, 7)
    P = hermite_matrix(3, x)
    assert P.shape == (4, 7)
    np.testing.assert_allclose(P[2], (x * x - 1) / math.sqrt(2))
    np.testing.assert_allclose(P[3], (x ** 3 - 3 * x) / math.sqrt(6))
    with pytest.raises(ValueError):
        hermite_phi(-1, 0.0)


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=6))
def test_project_reconstruct_round_trip(c):
    m = OUModel(K=8)
    coeffs = np.concatenate([[1.0], c])
    v0 = coeffs @ m.basis[: coeffs.size]
    got = project(v0, m)
    np.testing.assert_allclose(got.coeffs[: coeffs.size], coeffs, atol=1e-12)
    np.testing.assert_allclose(got.coeffs[coeffs.size:], 0.0, atol=1e-12)
    np.testing.assert_allclose(reconstruct(got, m.nodes), v0, atol=1e-12)
    assert weighted_norm_sq(got) == pytest.approx(float(np.sum(np.square(c))), abs=1e-12)


def test_project_rejects_bad_input():
    m = OUModel(K=4)
    with pytest.raises(ValueError):
        project(np.ones(3), m)
    with pytest.raises(ValueError):
        project(2.0 * np.ones(m.nodes.size), m)
    assert project(1.0 + 2.0 * m.nodes, m).signed


def test_classical_and_be_factors():
    c = SpectralCoeffs.of(1.0, 0.5, 0.2)
    np.testing.assert_allclose(evolve(c, Classical(), 0.7).coeffs, [1.0, 0.5 * math.exp(-0.7), 0.2 * math.exp(-1.4)])
    np.testing.assert_allclose(evolve(c, DiscreteBE(0.1), 3).coeffs, [1.0, 0.5 / 1.1 ** 3, 0.2 / 1.2 ** 3])
    with pytest.raises(ValueError):
        evolve(c, DiscreteBE(0.1), 2.5)
    with pytest.raises(ValueError):
        DiscreteBE(0.0)
    with pytest.raises(ValueError):
        evolve(c, Classical(), -1.0)
    with pytest.raises(TypeError):
        evolve(c, "heat", 1.0)


def test_nonlocal_factors_are_relaxation_functions():
    g = TimeGrid.uniform_to(4.0, 200)
    kern = Fractional(0.6)
    c = SpectralCoeffs.of(1.0, 0.4, 0.0, 0.1)
    t, S = evolve_series(c, kern, grid=g)
    w = build_weights(kern, g)
    np.testing.assert_array_equal(S[:, 2], 1.0)  # inactive mode skipped
    np.testing.assert_allclose(S[:, 3], solve_relaxation(w, 3.0).values)
    idx = int(np.argmin(np.abs(t - 2.0)))
    np.testing.assert_allclose(evolve(c, kern, t[idx], weights=w).coeffs, c.coeffs * S[idx], rtol=1e-13)
    with pytest.raises(ValueError):
        evolve(c, kern, 2.00001, grid=g)
    with pytest.raises(ValueError):
        evolve(c, kern, 1.0)


def test_entropy_of_matches_coefficients_for_beta_two():
    m = OUModel(K=12)
    c = SpectralCoeffs.of(1.0, 0.3, -0.2, 0.1)
    assert entropy_of(PowerBeta(2.0), c, m) == pytest.approx(0.14, rel=1e-13)
    with pytest.raises(ValueError):
        entropy_of(PowerBeta(2.0), SpectralCoeffs(np.ones(20)), m)
    with pytest.raises(ValueError):
        entropy_of(Logarithmic(), SpectralCoeffs.of(1.0, 2.0), m)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(-0.8, 0.8), b=st.floats(1.05, 2.0))
def test_spectral_entropy_decays(a, b):
    # v = (1 + a x)^2 / (1 + a^2) is a nonnegative quadratic
    m = OUModel(K=10)
    c = SpectralCoeffs.of(1.0, 2 * a / (1 + a * a), math.sqrt(2) * a * a / (1 + a * a))
    assert np.all(reconstruct(c, m.nodes) >= -1e-15)
    _, S = evolve_series(c, DiscreteBE(0.2), steps=30)
    for gen in (PowerBeta(b), Logarithmic()):
        H = [entropy_of(gen, SpectralCoeffs(c.coeffs * S[n]), m) for n in range(31)]
        assert np.all(np.diff(H) <= 1e-14)


def test_lower_bound_certificate():
    c = SpectralCoeffs.of(1.0, 0.5, 0.1)
    t = np.linspace(0, 3, 7)
    np.testing.assert_allclose(lower_bound_certificate(c, Classical(), t), 0.25 * np.exp(-2 * t))
    lb = lower_bound_certificate(c, DiscreteBE(0.5), steps=4)
    np.testing.assert_allclose(lb, 0.25 * 1.5 ** (-2.0 * np.arange(5)))
    g = TimeGrid.uniform_to(3.0, 60)
    lb = lower_bound_certificate(c, MultiTerm(((1.0, 0.4), (0.5, 0.8))), g)
    m = OUModel(K=6)
    _, S = evolve_series(c, MultiTerm(((1.0, 0.4), (0.5, 0.8))), grid=g)
    H = np.array([entropy_of(PowerBeta(2.0), SpectralCoeffs(c.coeffs * S[n]), m) for n in range(S.shape[0])])
    assert np.all(lb <= H + 1e-15)
    with pytest.raises(CertificateUnavailable):
        lower_bound_certificate(SpectralCoeffs.of(1.0, 0.0, 0.3), Classical(), t)


def test_spectral_csv(tmp_path):
    c = SpectralCoeffs.of(1.0, 0.5, 0.0)
    t, S = evolve_series(c, DiscreteBE(0.1), steps=3)
    path = tmp_path / "sp.csv"
    write_spectral_csv(t, c, S, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "k", "c_k", "s_lambda_k"]
    assert len(rows) == 1 + 4 * 2
