"""Dense kernels for two-qubit density matrices.

States are plain ``(4, 4)`` complex numpy arrays. The 16 real coordinates
``x`` used throughout the package are laid out row by row over the upper
triangle::

    [[x1,      x2+ix3,   x4+ix5,   x6+ix7 ],
     [.,       x8,       x9+ix10,  x11+ix12],
     [.,       .,        x13,      x14+ix15],
     [.,       .,        .,        x16     ]]

(0-based indices in code: diagonal at 0, 7, 12, 15).
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidStateError

LAMBDA_FLOOR = 1e-14
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

DIAG_IDX = _kernels.DIAG_IDX
OFFDIAG_IDX = _kernels.OFFDIAG_IDX
# <A, B> = Tr(A B) for Hermitian A, B equals x_A . (COORD_WEIGHTS * x_B)
COORD_WEIGHTS = np.full(16, 2.0)
COORD_WEIGHTS[DIAG_IDX] = 1.0


@dataclass(frozen=True)
class QubitReduction:
    reduced: np.ndarray
    bloch: np.ndarray


def hermitian_part(a, tol=HERMITIAN_TOL):
    """Return (a + a^H)/2, raising if ``a`` is further than ``tol`` from Hermitian."""
    a = np.asarray(a, dtype=complex)
    if a.shape[-2:] != (a.shape[-1], a.shape[-1]):
        raise InvalidStateError(f"expected square matrix, got shape {a.shape}")
    dev = np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2))), initial=0.0)
    if dev > tol:
        raise InvalidStateError(f"matrix is not Hermitian (max deviation {dev:.3e})")
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def check_density_matrix(rho, dim=4):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise InvalidStateError(f"expected a {dim}x{dim} matrix, got {rho.shape}")
    rho = hermitian_part(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise InvalidStateError(f"trace is {tr!r}, expected 1")
    lmin = np.linalg.eigvalsh(rho).min()
    if lmin < -PSD_TOL:
        raise InvalidStateError(f"matrix is not positive semidefinite (min eigenvalue {lmin:.3e})")
    return rho


def entropy_from_eigenvalues(w):
    """-sum(l log l) over eigenvalues above the floor, along the last axis."""
    w = np.asarray(w, dtype=float)
    mask = w > LAMBDA_FLOOR
    safe = np.where(mask, w, 1.0)
    return -np.sum(np.where(mask, safe * np.log(safe), 0.0), axis=-1)


def von_neumann_entropy(rho):
    """Von Neumann entropy in nats; eigenvalues at or below 1e-14 count as zero."""
    w = np.linalg.eigvalsh(hermitian_part(rho))
    return float(entropy_from_eigenvalues(w))


def matrix_log(rho):
    """Natural log of a PSD matrix with eigenvalues clamped at the floor."""
    w, v = np.linalg.eigh(hermitian_part(rho))
    return (v * np.log(np.maximum(w, LAMBDA_FLOOR))) @ v.conj().T


def entropy_derivative(rho):
    """dS/drho = -log(rho) - I."""
    rho = np.asarray(rho)
    return -matrix_log(rho) - np.eye(rho.shape[0])


def partial_trace(rho, keep):
    """Reduced state of qubit ``keep`` (1 or 2) together with its Bloch vector."""
    if keep not in (1, 2):
        raise ValueError(f"keep must be 1 or 2, got {keep!r}")
    r = hermitian_part(rho).reshape(2, 2, 2, 2)
    red = np.einsum("ijkj->ik", r) if keep == 1 else np.einsum("jijk->ik", r)
    return QubitReduction(reduced=red, bloch=bloch_vector(red))


def bloch_vector(reduced):
    return np.array([np.trace(reduced @ s).real for s in (SIGMA_X, SIGMA_Y, SIGMA_Z)])


def from_bloch(r):
    r = np.asarray(r, dtype=float)
    return 0.5 * (I2 + r[0] * SIGMA_X + r[1] * SIGMA_Y + r[2] * SIGMA_Z)


def purity(rho):
    rho = np.asarray(rho)
    return float(np.real(np.trace(rho @ rho)))


def linear_entropy(rho):
    return 1.0 - purity(rho)


def hs_distance(a, b):
    d = np.asarray(a) - np.asarray(b)
    return float(np.sqrt(max(np.real(np.trace(d @ d)), 0.0)))


def real_coordinates(rho):
    """Map Hermitian matrices (..., 4, 4) to their 16 real coordinates (..., 16)."""
    rho = np.asarray(rho)
    x = np.empty(rho.shape[:-2] + (16,))
    for k, i in enumerate(DIAG_IDX):
        x[..., i] = rho[..., k, k].real
    for i, j, re, im in OFFDIAG_IDX:
        x[..., re] = rho[..., i, j].real
        x[..., im] = rho[..., i, j].imag
    return x


def hermitian_from_coordinates(x):
    """Inverse of :func:`real_coordinates` without any state validation."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != 16:
        raise ValueError(f"expected 16 coordinates, got {x.shape[-1]}")
    m = np.zeros(x.shape[:-1] + (4, 4), dtype=complex)
    for k, i in enumerate(DIAG_IDX):
        m[..., k, k] = x[..., i]
    for i, j, re, im in OFFDIAG_IDX:
        z = x[..., re] + 1j * x[..., im]
        m[..., i, j] = z
        m[..., j, i] = np.conj(z)
    return m


def density_from_coordinates(x):
    """Density matrix from 16 real coordinates; rejects non-unit trace or non-PSD input."""
    x = np.asarray(x, dtype=float)
    if x.shape != (16,):
        raise InvalidStateError(f"expected 16 coordinates, got shape {x.shape}")
    return check_density_matrix(hermitian_from_coordinates(x))


def coordinate_inner(xa, xb):
    """Tr(A B) for Hermitian A, B given in real coordinates (batched on the left axes)."""
    return np.sum(np.asarray(xa) * COORD_WEIGHTS * np.asarray(xb), axis=-1)


def entropies_from_coordinates(X):
    """Entropy of every state in a (N, 16) coordinate stack."""
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    return entropy_from_eigenvalues(_kernels.eigvalsh_coords(X))


def eigh_from_coordinates(X):
    X = np.ascontiguousarray(np.atleast_2d(X), dtype=float)
    return _kernels.eigh_coords(X)


def log_from_eigh(w, v):
    """Batched clamped matrix logarithm from eigen-decompositions."""
    lw = np.log(np.maximum(w, LAMBDA_FLOOR))
    return np.einsum("nij,nj,nkj->nik", v, lw, v.conj())


def random_density_matrix(rng, dim=4, rank=None):
    """Normalized A A^H for a complex Gaussian A (full rank unless ``rank`` is given)."""
    k = dim if rank is None else rank
    a = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_unitary(rng, dim=4):
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def bloch_vectors_from_coordinates(X):
    """Bloch vectors of both qubits, read directly off the real coordinates."""
    X = np.atleast_2d(X)
    r1 = np.column_stack(
        [2 * (X[:, 3] + X[:, 10]), -2 * (X[:, 4] + X[:, 11]), X[:, 0] + X[:, 7] - X[:, 12] - X[:, 15]]
    )
    r2 = np.column_stack(
        [2 * (X[:, 1] + X[:, 13]), -2 * (X[:, 2] + X[:, 14]), X[:, 0] - X[:, 7] + X[:, 12] - X[:, 15]]
    )
    return r1, r2


def qubit_entropy(r):
    """Entropy of the qubit state with Bloch vector(s) r; eigenvalues (1 +- |r|)/2."""
    norm = np.linalg.norm(np.atleast_2d(r), axis=-1)
    w = np.column_stack([(1 + norm) / 2, (1 - norm) / 2])
    return entropy_from_eigenvalues(w)
