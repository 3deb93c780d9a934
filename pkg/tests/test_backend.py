import os
import subprocess
import sys

import numpy as np
import pytest

from artifact import _core_py, convq

core = pytest.importorskip("artifact._core")


def _case(n=300, m=25, seed=1):
    rng = np.random.default_rng(seed)
    head = np.tril(rng.uniform(0.1, 1.0, (n, m)))
    head[np.arange(m), np.arange(m)] += 1.0
    tail = 1.0 / np.arange(1, n - m + 2) ** 1.5
    tail[0] += 1.0
    return head, tail, m, rng.normal(size=n)


def test_compiled_core_is_selected():
    assert convq.BACKEND == "cython"


def test_backends_agree():
    head, tail, m, rhs = _case()
    np.testing.assert_allclose(core.tri_solve(head, tail, m, 0.7, 1.3, rhs),
                               _core_py.tri_solve(head, tail, m, 0.7, 1.3, rhs), rtol=1e-12)
    c = 1.0 / np.arange(1, 400) ** 0.6
    np.testing.assert_allclose(core.toeplitz_inverse(c), _core_py.toeplitz_inverse(c), rtol=1e-12, atol=1e-15)


def test_fallback_selected_by_environment():
    env = dict(os.environ, ARTIFACT_PURE_PYTHON="1")
    code = ("from artifact import convq, TimeGrid, build_weights, solve_relaxation, Fractional;"
            "w = build_weights(Fractional(0.5), TimeGrid.uniform_to(10.0, 400));"
            "print(convq.BACKEND, repr(solve_relaxation(w, 1.0).at(1.0)))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == "python"
    from artifact import Fractional, TimeGrid, build_weights, solve_relaxation
    ref = solve_relaxation(build_weights(Fractional(0.5), TimeGrid.uniform_to(10.0, 400)), 1.0).at(1.0)
    assert float(out[1]) == pytest.approx(ref, rel=1e-12)
