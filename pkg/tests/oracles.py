"""Independent reference implementations used to cross-check the library.

Everything here is written with plain Python loops on purpose — no
numpy.linalg, no einsum — so agreement with the library is evidence, not
tautology.
"""

import numpy as np


def gj_solve(A, B):
    """Solve A X = B by Gauss-Jordan elimination with partial pivoting.

    A: n x n, B: n x m (lists or arrays). Returns X as a list of rows.
    """
    A = [[float(v) for v in row] for row in np.asarray(A)]
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    B = [[float(v) for v in row] for row in B]
    n = len(A)
    m = len(B[0])
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(A[r][col]))
        if abs(A[pivot][col]) == 0.0:
            raise ZeroDivisionError("singular matrix in elimination oracle")
        A[col], A[pivot] = A[pivot], A[col]
        B[col], B[pivot] = B[pivot], B[col]
        scale = A[col][col]
        for j in range(n):
            A[col][j] /= scale
        for j in range(m):
            B[col][j] /= scale
        for r in range(n):
            if r == col:
                continue
            factor = A[r][col]
            if factor == 0.0:
                continue
            for j in range(n):
                A[r][j] -= factor * A[col][j]
            for j in range(m):
                B[r][j] -= factor * B[col][j]
    return B


def gj_invert(A):
    n = len(np.asarray(A))
    eye = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    return gj_solve(A, eye)


def quadratic_form(x, mu, P):
    """(x-mu)' P (x-mu) with explicit loops."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    P = np.asarray(P, dtype=float)
    d = x.size
    diff = [float(x[i] - mu[i]) for i in range(d)]
    total = 0.0
    for i in range(d):
        for j in range(d):
            total += diff[i] * float(P[i][j]) * diff[j]
    return total


def matmul(A, B):
    """Triple-loop matrix product."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    n, k = A.shape
    k2, m = B.shape
    assert k == k2
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += float(A[i][t]) * float(B[t][j])
            out[i][j] = s
    return out


def mean_and_cov(rows):
    """Population mean/covariance (1/m) with explicit loops."""
    rows = np.asarray(rows, dtype=float)
    m, d = rows.shape
    mean = [sum(float(rows[i][j]) for i in range(m)) / m for j in range(d)]
    cov = [[0.0] * d for _ in range(d)]
    for a in range(d):
        for b in range(d):
            s = 0.0
            for i in range(m):
                s += (float(rows[i][a]) - mean[a]) * (float(rows[i][b]) - mean[b])
            cov[a][b] = s / m
    return mean, cov


def random_spd(rng, d, scale=1.0):
    """Well-conditioned random SPD matrix for oracle instances."""
    A = rng.standard_normal((d, d))
    return scale * (A @ A.T + d * np.eye(d))
