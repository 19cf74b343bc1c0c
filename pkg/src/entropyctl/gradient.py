"""Adjoint-state gradient of the unified objective, a finite-difference oracle
and the projected-stationarity residual."""
from dataclasses import dataclass

import numpy as np

from . import dynamics, model, objectives, qcore
from .controls import project_samples
from .dynamics import write_csv


@dataclass(frozen=True, eq=False)
class GradientField:
    times: np.ndarray  # control nodes
    components: np.ndarray  # (3, M + 1): dPhi/du, dPhi/dn1, dPhi/dn2

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        if comp.ndim != 2 or comp.shape[0] != 3 or comp.shape[1] != len(self.times):
            raise ValueError(f"components shape {comp.shape} does not match {len(self.times)} nodes")
        object.__setattr__(self, "components", comp)

    @property
    def gu(self):
        return self.components[0]

    def write_csv(self, path):
        write_csv(path, ["t", "gu", "gn1", "gn2"], np.column_stack([self.times, self.components.T]))


@dataclass(frozen=True, eq=False)
class GradientResult:
    field: GradientField
    value: float
    evaluation: objectives.Evaluation
    forward: dynamics.Trajectory
    costate: dynamics.Trajectory
    dense: np.ndarray  # (steps + 1, 3) gradient on the integration grid


def _prefactor(S, spec):
    return 2.0 * (S - spec.target)


def transversality(kind, rhoT, spec):
    """chi(T) = -dF/drho = 2 (log rho + I) (S(rho) - S_ref or S_tar)."""
    _check_kind(kind, spec)
    S = qcore.von_neumann_entropy(rhoT)
    return _prefactor(S, spec) * (qcore.matrix_log(rhoT) + qcore.I4)


def penalty_source(kind, rho_t, spec):
    """dg/drho for a single state (zero for J3)."""
    _check_kind(kind, spec)
    if kind == "J3":
        return np.zeros((4, 4), dtype=complex)
    S = qcore.von_neumann_entropy(rho_t)
    return _g_scale(np.array([S]), spec)[0] * (qcore.matrix_log(rho_t) + qcore.I4)


def _g_scale(S, spec):
    # dg/drho = -scale * (log rho + I)
    if spec.kind == "J1":
        return -2.0 * (S - spec.S_ref)
    if spec.kind == "J4":
        return -2.0 * np.maximum(S - spec.S_bar, 0.0)
    return np.zeros_like(S)


def _check_kind(kind, spec):
    if kind not in objectives.GRADIENT_KINDS or kind != spec.kind:
        raise ValueError(f"gradient defined for J1/J3/J4 matching the spec, got {kind}")


def _source_coordinates(traj, spec):
    """P * dg/drho at every half-step time, in real coordinates."""
    n = 2 * traj.steps + 1
    if spec.kind == "J3":
        return None
    Xm = dynamics.midpoint_coordinates(traj)
    w, v = qcore.eigh_from_coordinates(Xm)
    S = qcore.entropy_from_eigenvalues(w)
    scale = spec.P * _g_scale(S, spec)
    active = np.nonzero(scale != 0.0)[0]
    out = np.zeros((n, 16))
    if active.size:
        L = qcore.log_from_eigh(w[active], v[active])
        out[active] = scale[active, None] * qcore.real_coordinates(L + qcore.I4)
    return out


def switching_dense(ops, forward, costate, p=None, form="exact"):
    """(K^u, K^n1, K^n2) at every integration node, shape (steps + 1, 3).

    ``form`` as in :func:`model.switching_functions`; "printed" needs ``p``.
    """
    if form not in model.SWITCHING_FORMS:
        raise ValueError(f"form must be one of {model.SWITCHING_FORMS}, got {form!r}")
    G = ops.generators[1:]
    if form == "printed":
        G = G.copy()
        G[1:] += (1.0 - p.epsilon) * ops.lamb_generators
    GX = np.einsum("kij,nj->nki", G, forward.coords)
    return np.einsum("ni,nki->nk", costate.coords * qcore.COORD_WEIGHTS, GX)


def assemble_gradient(p, ops, rho0, c, spec, steps=None, switching="exact"):
    """Forward solve, co-state solve and gradient at the control nodes.

    ``switching="printed"`` swaps in the printed-form K^{n_j} (see
    :func:`model.switching_functions`); the result is then no longer the exact
    derivative of Phi in n.
    """
    _check_kind(spec.kind, spec)
    fwd = dynamics.solve_forward(p, ops, rho0, c, steps)
    ev = objectives.evaluate_unified(fwd, spec, c)
    chiT = transversality(spec.kind, fwd.final, spec)
    back = dynamics.solve_backward(p, ops, chiT, c, fwd, _source_coordinates(fwd, spec))
    dense = -switching_dense(ops, fwd, back, p, switching)
    if spec.reg.mode == "integral":
        v = c(fwd.times)
        dense[:, 0] += 2.0 * spec.reg.gamma_u * v[:, 0]
        dense[:, 1:] += spec.reg.gamma_n
    # control nodes are grid nodes by construction of the step count
    idx = np.rint(c.times / fwd.h).astype(int)
    if np.max(np.abs(idx * fwd.h - c.times)) > 1e-9 * max(1.0, c.T):
        raise ValueError("control nodes do not fall on the integration grid")
    field = GradientField(c.times, dense[idx].T.copy())
    return GradientResult(field, ev.value, ev, fwd, back, dense)


def hat_pairing(result, c):
    """Integral of the dense gradient against each nodal hat function, shape (3, M + 1)."""
    t = result.forward.times
    out = np.empty((3, c.M + 1))
    for s in range(c.M + 1):
        e = np.zeros(c.M + 1)
        e[s] = 1.0
        hat = np.interp(t, c.times, e, right=0.0)
        if c.support < 1:
            hat = np.where(t > c.times[-1] * (1 + 1e-12), 0.0, hat)
        for k in range(3):
            out[k, s] = objectives.trapezoid(result.dense[:, k] * hat, t)
    return out


def fd_gradient_oracle(p, ops, rho0, c, spec, h=1e-5, steps=None, nodes=None):
    """Central differences of Phi with respect to node values, shape (3, M + 1).

    Entries not listed in ``nodes`` (pairs (k, s)) are left as NaN. Perturbations
    are not projected, so pass controls with n > h at perturbed n-nodes.
    """
    if steps is None:
        steps = dynamics.default_steps(c)
    out = np.full((3, c.M + 1), np.nan)
    if nodes is None:
        nodes = [(k, s) for k in range(3) for s in range(c.M + 1)]

    def phi(samples):
        cc = c.replace(samples, check=False)
        fwd = dynamics.solve_forward(p, ops, rho0, cc, steps, check_psd=False)
        return objectives.evaluate_unified(fwd, spec, cc).value

    for k, s in nodes:
        plus = c.samples.copy()
        minus = c.samples.copy()
        plus[k, s] += h
        minus[k, s] -= h
        out[k, s] = (phi(plus) - phi(minus)) / (2 * h)
    return out


def directional_derivative_fd(p, ops, rho0, c, spec, direction, h=1e-5, steps=None):
    """(Phi(c + h d) - Phi(c - h d)) / 2h for a (3, M + 1) nodal direction d."""
    if steps is None:
        steps = dynamics.default_steps(c)
    vals = []
    for sgn in (1.0, -1.0):
        cc = c.replace(c.samples + sgn * h * np.asarray(direction), check=False)
        fwd = dynamics.solve_forward(p, ops, rho0, cc, steps, check_psd=False)
        vals.append(objectives.evaluate_unified(fwd, spec, cc).value)
    return (vals[0] - vals[1]) / (2 * h)


def pmp_residual(c, grad, bounds, alpha):
    """max over nodes of |c - Pr_Q(c - alpha grad)|_inf."""
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    g = grad.components if isinstance(grad, GradientField) else np.asarray(grad)
    s = c.samples
    return float(np.max(np.abs(s - project_samples(s - alpha * g, bounds))))
