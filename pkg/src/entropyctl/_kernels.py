"""Compiled inner loops: fixed-step RK4 for the affine real-coordinate system
and a Jacobi eigensolver for batches of 4x4 Hermitian matrices.

LAPACK call overhead dominates for 4x4 problems, so the batched eigensolver
here is roughly an order of magnitude faster than ``numpy.linalg.eigh`` over a
stack of a few thousand matrices.
"""
import numpy as np
from numba import njit

# Positions of the real coordinates inside a 4x4 Hermitian matrix.
DIAG_IDX = np.array([0, 7, 12, 15])
# (row, col, re_index, im_index) for the upper triangle.
OFFDIAG_IDX = np.array(
    [
        [0, 1, 1, 2],
        [0, 2, 3, 4],
        [0, 3, 5, 6],
        [1, 2, 8, 9],
        [1, 3, 10, 11],
        [2, 3, 13, 14],
    ]
)

_MAX_SWEEPS = 40


@njit(cache=True)
def _fill_matrix(x, A):
    for k in range(4):
        A[k, k] = x[DIAG_IDX[k]]
    for m in range(6):
        i = OFFDIAG_IDX[m, 0]
        j = OFFDIAG_IDX[m, 1]
        z = x[OFFDIAG_IDX[m, 2]] + 1j * x[OFFDIAG_IDX[m, 3]]
        A[i, j] = z
        A[j, i] = np.conj(z)


@njit(cache=True)
def _jacobi(A, w, V, want_vectors):
    """Diagonalize Hermitian ``A`` in place; eigenvalues into ``w``."""
    if want_vectors:
        for i in range(4):
            for j in range(4):
                V[i, j] = 1.0 if i == j else 0.0
    for _ in range(_MAX_SWEEPS):
        off = 0.0
        scale = 0.0
        for p in range(4):
            scale += A[p, p].real ** 2
            for q in range(p + 1, 4):
                off += abs(A[p, q]) ** 2
        # eigenvalue error is second order in the off-diagonal mass, so the
        # values-only path can stop earlier than the eigenvector path
        if off <= (1e-32 if want_vectors else 1e-26) * scale or off == 0.0:
            break
        for p in range(3):
            for q in range(p + 1, 4):
                apq = A[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                ph = apq / r
                a = A[p, p].real
                b = A[q, q].real
                tau = (b - a) / (2.0 * r)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                phc = np.conj(ph)
                # A <- A U, U restricted to (p, q):
                # [[c, s], [-s conj(ph), c conj(ph)]]
                for k in range(4):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * phc * akq
                    A[k, q] = s * akp + c * phc * akq
                # A <- U^H A
                for k in range(4):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * ph * aqk
                    A[q, k] = s * apk + c * ph * aqk
                A[p, q] = 0.0
                A[q, p] = 0.0
                A[p, p] = a - t * r
                A[q, q] = b + t * r
                if want_vectors:
                    for k in range(4):
                        vkp = V[k, p]
                        vkq = V[k, q]
                        V[k, p] = c * vkp - s * phc * vkq
                        V[k, q] = s * vkp + c * phc * vkq
    for k in range(4):
        w[k] = A[k, k].real


@njit(cache=True)
def eigvalsh_coords(X):
    n = X.shape[0]
    W = np.empty((n, 4))
    A = np.empty((4, 4), np.complex128)
    V = np.empty((4, 4), np.complex128)
    for k in range(n):
        _fill_matrix(X[k], A)
        _jacobi(A, W[k], V, False)
    return W


@njit(cache=True)
def eigh_coords(X):
    n = X.shape[0]
    W = np.empty((n, 4))
    VV = np.empty((n, 4, 4), np.complex128)
    A = np.empty((4, 4), np.complex128)
    for k in range(n):
        _fill_matrix(X[k], A)
        _jacobi(A, W[k], VV[k], True)
    return W, VV


@njit(cache=True)
def eigh_batch(M):
    """Eigen-decomposition of a stack of Hermitian 4x4 matrices."""
    n = M.shape[0]
    W = np.empty((n, 4))
    VV = np.empty((n, 4, 4), np.complex128)
    A = np.empty((4, 4), np.complex128)
    for k in range(n):
        for i in range(4):
            for j in range(4):
                A[i, j] = 0.5 * (M[k, i, j] + np.conj(M[k, j, i]))
        _jacobi(A, W[k], VV[k], True)
    return W, VV


@njit(cache=True)
def _matvec(A, x, out):
    n = x.shape[0]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += A[i, j] * x[j]
        out[i] = s


@njit(cache=True)
def _assemble(G, coef, A):
    n = A.shape[0]
    for i in range(n):
        for j in range(n):
            A[i, j] = (
                G[0, i, j]
                + coef[1] * G[1, i, j]
                + coef[2] * G[2, i, j]
                + coef[3] * G[3, i, j]
            )


@njit(cache=True)
def rk4_affine(G, coef, src, x0, h, steps, normalize, drift_tol):
    """Classical RK4 for x' = (sum_k coef_k(t) G_k) x + src(t).

    ``coef`` and ``src`` are sampled at half steps (2 * steps + 1 rows);
    ``src`` may have zero rows, meaning no source. With ``normalize`` the
    trace coordinates are rescaled to one after every step; a trace drift
    above ``drift_tol`` or a non-finite value aborts and the failing step
    index is returned (else -1).
    """
    n = x0.shape[0]
    out = np.empty((steps + 1, n))
    has_src = src.shape[0] > 0
    x = x0.copy()
    out[0] = x
    Aa = np.empty((n, n))
    Am = np.empty((n, n))
    Ab = np.empty((n, n))
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    y = np.empty(n)
    _assemble(G, coef[0], Aa)
    for s in range(steps):
        _assemble(G, coef[2 * s + 1], Am)
        _assemble(G, coef[2 * s + 2], Ab)
        _matvec(Aa, x, k1)
        if has_src:
            for i in range(n):
                k1[i] += src[2 * s, i]
        for i in range(n):
            y[i] = x[i] + 0.5 * h * k1[i]
        _matvec(Am, y, k2)
        if has_src:
            for i in range(n):
                k2[i] += src[2 * s + 1, i]
        for i in range(n):
            y[i] = x[i] + 0.5 * h * k2[i]
        _matvec(Am, y, k3)
        if has_src:
            for i in range(n):
                k3[i] += src[2 * s + 1, i]
        for i in range(n):
            y[i] = x[i] + h * k3[i]
        _matvec(Ab, y, k4)
        if has_src:
            for i in range(n):
                k4[i] += src[2 * s + 2, i]
        for i in range(n):
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if normalize:
            tr = x[0] + x[7] + x[12] + x[15]
            if not np.isfinite(tr) or abs(tr - 1.0) > drift_tol:
                return out[: s + 1], s + 1
            for i in range(n):
                x[i] /= tr
        out[s + 1] = x
        Aa, Ab = Ab, Aa
    return out, -1

