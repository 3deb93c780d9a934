"""Reference (pure numpy) implementation of the hot loops.

The compiled module ``_core`` exposes the same functions; ``convq`` picks the
compiled one when it imports.
"""

import numpy as np


def tri_solve(head, tail, m, a, b, rhs):
    """Solve ``(a I + b M) x = rhs`` by forward substitution.

    ``M`` is lower triangular, stored as dense leading columns ``head``
    (shape (N, m)) plus a Toeplitz tail, ``M[i, j] = tail[i - j]`` for j >= m.
    """
    head = np.asarray(head, dtype=float)
    tail = np.asarray(tail, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    x = np.empty(n)
    for i in range(n):
        mm = min(m, i)
        acc = head[i, :mm] @ x[:mm] if mm else 0.0
        if i > m:
            acc += tail[i - m:0:-1] @ x[m:i]
        diag = head[i, i] if i < m else tail[0]
        x[i] = (rhs[i] - b * acc) / (a + b * diag)
    return x


def toeplitz_inverse(c):
    """First column of the inverse of the lower-triangular Toeplitz matrix
    with first column ``c``."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    d = np.empty(n)
    c0 = c[0]
    d[0] = 1.0 / c0
    for p in range(1, n):
        d[p] = -(c[1:p + 1] @ d[p - 1::-1]) / c0
    return d
