"""Fixed-step RK4 propagation of the state and co-state on a shared grid."""
import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels, qcore
from .errors import IntegrationError

MIN_STEPS = 2000
TRACE_DRIFT_TOL = 1e-6
PSD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    coords: np.ndarray  # (N, 16) real coordinates of rho(t) or chi(t)
    direction: str = "forward"

    @property
    def T(self):
        return float(self.times[-1])

    @property
    def steps(self):
        return len(self.times) - 1

    @property
    def h(self):
        return self.T / self.steps

    @cached_property
    def states(self):
        return qcore.hermitian_from_coordinates(self.coords)

    @property
    def initial(self):
        return self.states[0]

    @property
    def final(self):
        return self.states[-1]

    @cached_property
    def eigenvalues(self):
        return _kernels.eigvalsh_coords(np.ascontiguousarray(self.coords))

    @cached_property
    def entropies(self):
        return qcore.entropy_from_eigenvalues(self.eigenvalues)

    def interpolate(self, t):
        return interpolate(self, t)


def default_steps(c):
    """10 integration steps per control interval (at least 2000), aligned so
    every control node, including the end of a partial support, is a grid node."""
    per_T = c.M / c.support
    unit = _alignment_unit(c)
    n = max(10 * per_T, MIN_STEPS)
    return int(np.ceil(n / unit - 1e-9) * unit)


def _alignment_unit(c):
    # smallest steps count with steps * support / M integral
    for k in range(1, 10001):
        steps = k * c.M / c.support
        if abs(steps - round(steps)) < 1e-9:
            return int(round(steps))
    return c.M


def half_step_controls(c, steps):
    t = np.linspace(0.0, c.T, 2 * steps + 1)
    v = c(t)
    coef = np.empty((len(t), 4))
    coef[:, 0] = 1.0
    coef[:, 1:] = v
    return coef


def solve_forward(p, ops, rho0, c, steps=None, check_psd=True):
    """Integrate the master equation under controls ``c`` from ``rho0`` over [0, c.T]."""
    if steps is None:
        steps = default_steps(c)
    if steps < c.M:
        raise ValueError(f"steps={steps} is coarser than the control grid (M={c.M})")
    rho0 = qcore.check_density_matrix(rho0)
    if np.any(c.samples[1:] < 0):
        raise ValueError("incoherent controls must be nonnegative")
    coef = half_step_controls(c, steps)
    x0 = qcore.real_coordinates(rho0)
    X, fail = _kernels.rk4_affine(
        ops.generators, coef, np.empty((0, 16)), x0, c.T / steps, steps, True, TRACE_DRIFT_TOL
    )
    if fail >= 0:
        raise IntegrationError("trace drift or overflow during forward integration", fail)
    traj = Trajectory(np.linspace(0.0, c.T, steps + 1), X, "forward")
    if check_psd:
        bad = np.nonzero(traj.eigenvalues[:, 0] < -PSD_TOL)[0]
        if bad.size:
            raise IntegrationError(
                f"state lost positivity (min eigenvalue {traj.eigenvalues[bad[0], 0]:.3e})", int(bad[0])
            )
    return traj


def solve_backward(p, ops, chiT, c, forward, source=None):
    """Integrate dchi/dt = -L_c^dagger(chi) + source(t) backward from chi(T) = chiT.

    ``source`` holds the real coordinates of the Hermitian source at the
    half-step times of ``forward``'s grid, shape (2 * steps + 1, 16).
    """
    steps = forward.steps
    if abs(forward.T - c.T) > 1e-12 * max(1.0, c.T):
        raise ValueError(f"forward trajectory ends at {forward.T}, controls at {c.T}")
    coef = half_step_controls(c, steps)[::-1].copy()
    if source is None:
        src = np.empty((0, 16))
    else:
        source = np.asarray(source, dtype=float)
        if source.shape != (2 * steps + 1, 16):
            raise ValueError(f"source must have shape {(2 * steps + 1, 16)}, got {source.shape}")
        src = -source[::-1].copy()
    xT = qcore.real_coordinates(qcore.hermitian_part(chiT))
    Y, _ = _kernels.rk4_affine(
        ops.adjoint_generators, coef, src, xT, c.T / steps, steps, False, 0.0
    )
    return Trajectory(forward.times.copy(), Y[::-1].copy(), "backward")


def interpolate(traj, t):
    """Linear interpolation of the stored states at time t."""
    t = float(t)
    T = traj.T
    if t < 0 or t > T * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {T}]")
    pos = min(t / traj.h, traj.steps)
    i = min(int(np.floor(pos)), traj.steps - 1)
    w = pos - i
    x = (1 - w) * traj.coords[i] + w * traj.coords[i + 1]
    return qcore.hermitian_from_coordinates(x)


def midpoint_coordinates(traj):
    """States at all half-step times (nodes and linearly interpolated midpoints)."""
    X = traj.coords
    out = np.empty((2 * len(X) - 1, X.shape[1]))
    out[0::2] = X
    out[1::2] = 0.5 * (X[1:] + X[:-1])
    return out


TRAJECTORY_COLUMNS = ["t", "S", "purity", "hs_rho0", "hs_mixed", "S1", "S2", "rz1", "rz2"]


def trajectory_table(traj):
    X = traj.coords
    x0 = X[0]
    mixed = qcore.real_coordinates(np.eye(4) / 4)
    r1, r2 = qcore.bloch_vectors_from_coordinates(X)
    return np.column_stack(
        [
            traj.times,
            traj.entropies,
            qcore.coordinate_inner(X, X),
            np.sqrt(np.maximum(qcore.coordinate_inner(X - x0, X - x0), 0.0)),
            np.sqrt(np.maximum(qcore.coordinate_inner(X - mixed, X - mixed), 0.0)),
            qcore.qubit_entropy(r1),
            qcore.qubit_entropy(r2),
            r1[:, 2],
            r2[:, 2],
        ]
    )


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" for v in row])


def write_trajectory_csv(traj, path):
    write_csv(path, TRAJECTORY_COLUMNS, trajectory_table(traj))
