"""Entropy objectives J_O and J1..J5, GA objective functions and stopping tests."""
import json
from dataclasses import dataclass, field

import numpy as np

from . import controls, dynamics, qcore
from .controls import RegularizationSpec

KINDS = ("JO", "J1", "J2", "J3", "J4", "J5")
GRADIENT_KINDS = ("J1", "J3", "J4")


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    S_ref: float = None  # S(rho0), fixed at problem setup (J1, J2)
    S_tar: float = None  # J3, J4, J5
    S_bar: float = None  # J4, J5
    P: float = 0.0
    beta_inv_temp: float = 1.0
    O: np.ndarray = None
    direction: str = "min"
    reg: RegularizationSpec = field(default_factory=RegularizationSpec)
    T_range: tuple = None
    eval_grid: int = None  # J2/J5 max-sampling count; None = every trajectory node

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        need = {
            "J1": ("S_ref",),
            "J2": ("S_ref",),
            "J3": ("S_tar",),
            "J4": ("S_tar", "S_bar"),
            "J5": ("S_tar", "S_bar"),
        }.get(self.kind, ())
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"{self.kind} needs {name}")
        if self.kind in ("J1", "J4", "J5") and not self.P > 0:
            raise ValueError(f"{self.kind} needs a positive penalty P, got {self.P}")
        if self.kind == "JO":
            if not self.beta_inv_temp > 0:
                raise ValueError("beta_inv_temp must be positive")
            if self.direction not in ("min", "max"):
                raise ValueError(f"direction must be 'min' or 'max', got {self.direction!r}")

    def validate_initial(self, S0):
        """Side conditions that involve S(rho0)."""
        if self.kind in ("J3", "J4") and abs(self.S_tar - S0) < 1e-12:
            raise ValueError("S_tar must differ from S(rho0)")
        if self.kind in ("J4", "J5") and not self.S_bar > S0:
            raise ValueError(f"S_bar={self.S_bar} must exceed S(rho0)={S0}")

    @property
    def target(self):
        """Reference value in the terminal term F."""
        return self.S_ref if self.kind in ("J1", "J2") else self.S_tar


@dataclass(frozen=True)
class Evaluation:
    value: float
    terminal: float
    integral: float
    reg: float

    def record(self, iteration, kind):
        return {
            "iteration": iteration,
            "kind": kind,
            "value": self.value,
            "terminal_term": self.terminal,
            "integral_term": self.integral,
            "reg_term": self.reg,
        }


def log_record(fh, evaluation, iteration, kind):
    fh.write(json.dumps(evaluation.record(iteration, kind)) + "\n")


def trapezoid(y, x):
    y = np.asarray(y)
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def terminal_function(S, spec):
    """F as a function of the entropy value(s)."""
    return (np.asarray(S) - spec.target) ** 2


def running_function(S, spec):
    """g as a function of the entropy value(s)."""
    S = np.asarray(S, dtype=float)
    if spec.kind == "J1":
        return (S - spec.S_ref) ** 2
    if spec.kind == "J4":
        return np.maximum(S - spec.S_bar, 0.0) ** 2
    return np.zeros_like(S)


def eval_JO(traj, spec):
    """<O> - S(rho(T)) / beta at the final state; negated when maximizing."""
    rhoT = traj.final
    O = np.zeros((4, 4)) if spec.O is None else np.asarray(spec.O)
    val = float(np.real(np.trace(O @ rhoT))) - traj.entropies[-1] / spec.beta_inv_temp
    return -val if spec.direction == "max" else val


def evaluate_unified(traj, spec, c=None):
    if spec.kind not in GRADIENT_KINDS:
        raise ValueError(f"unified objective covers J1/J3/J4, got {spec.kind}")
    S = traj.entropies
    terminal = float(terminal_function(S[-1], spec))
    integral = 0.0
    if spec.kind != "J3":
        integral = spec.P * trapezoid(running_function(S, spec), traj.times)
    reg = 0.0
    if c is not None and spec.reg.mode == "integral":
        reg = controls.regularization_integral(c, spec.reg, traj.times)
    return Evaluation(terminal + integral + reg, terminal, integral, reg)


def eval_unified(traj, spec, c=None):
    """F(rho(T)) + P * int g(rho(t)) dt (+ integral regularization when ``c`` is given)."""
    return evaluate_unified(traj, spec, c).value


def sampled_entropies(traj, spec):
    """Entropies at the max-sampling times t_1 > 0, ..., t_M = T."""
    if spec.eval_grid is None:
        return traj.entropies[1:]
    t = np.linspace(0.0, traj.T, spec.eval_grid + 1)[1:]
    X = np.array([qcore.real_coordinates(dynamics.interpolate(traj, tk)) for tk in t])
    return qcore.entropies_from_coordinates(X)


def eval_J2(traj, spec):
    return float(np.max(np.abs(sampled_entropies(traj, spec) - spec.S_ref)))


def J5_terms(traj, spec):
    terminal = abs(float(traj.entropies[-1]) - spec.S_tar)
    excess = float(np.max(np.maximum(sampled_entropies(traj, spec) - spec.S_bar, 0.0)))
    return terminal, spec.P * excess


def eval_J5(traj, spec, T=None):
    """|S(rho(T)) - S_tar| + P max_k max(S(rho(t_k)) - S_bar, 0); T is the trajectory's end."""
    if T is not None and abs(T - traj.T) > 1e-9 * max(1.0, T):
        raise ValueError(f"trajectory ends at {traj.T}, not T={T}")
    terminal, penalty = J5_terms(traj, spec)
    return terminal + penalty


class GAObjective:
    """q2 / q5: decode a parameter vector, propagate, evaluate J2 / J5 plus regularization."""

    def __init__(self, p, ops, rho0, spec, encoding, steps=None):
        if spec.kind not in ("J2", "J5"):
            raise ValueError(f"GA objectives are J2 or J5, got {spec.kind}")
        self.p, self.ops, self.spec, self.encoding = p, ops, spec, encoding
        self.rho0 = qcore.check_density_matrix(rho0)
        self.steps = steps

    def controls(self, a):
        return self.encoding.decode(a)

    def trajectory(self, a):
        c = self.controls(a)
        return c, dynamics.solve_forward(self.p, self.ops, self.rho0, c, self.steps, check_psd=False)

    def terms(self, a):
        c, traj = self.trajectory(a)
        if self.spec.kind == "J2":
            j = eval_J2(traj, self.spec)
            reg = controls.regularization_jumps(c, self.spec.reg)
            return Evaluation(j + reg, j, 0.0, reg)
        terminal, penalty = J5_terms(traj, self.spec)
        reg = controls.regularization_supnorm(c, self.spec.reg)
        return Evaluation(terminal + penalty + reg, terminal, penalty, reg)

    def __call__(self, a):
        return self.terms(a).value


def eval_q2(a, objective):
    return objective(a)


def eval_q5(a, T, objective):
    a = np.asarray(a, dtype=float)
    if objective.encoding.T_range is not None:
        a = np.append(a, T)
    return objective(a)


STOP_INTEGRAL_MODES = ("penalty", "literal")


def stopping_terms(traj, spec, integral_mode="penalty"):
    """(terminal test quantity, integral test quantity) of the GPM stopping rule.

    ``integral_mode="penalty"`` divides the penalty term P * int g by P, giving
    int g dt; ``"literal"`` applies a further 1/P, i.e. (1/P) int g dt.
    """
    if integral_mode not in STOP_INTEGRAL_MODES:
        raise ValueError(f"integral_mode must be one of {STOP_INTEGRAL_MODES}, got {integral_mode!r}")
    S = traj.entropies
    first = float((S[-1] - spec.target) ** 2)
    if spec.kind == "J3":
        return first, 0.0
    second = trapezoid(running_function(S, spec), traj.times)
    if integral_mode == "literal":
        second /= spec.P
    return first, second


def stopping_check(kind, traj, spec, eps1, eps2=None, integral_mode="penalty"):
    """J1 / J4: both terms below their thresholds. J3: J3 itself below eps1.

    Control regularization never enters the test.
    """
    if kind != spec.kind or kind not in GRADIENT_KINDS:
        raise ValueError(f"stopping rule defined for J1/J3/J4 matching the spec, got {kind}")
    first, second = stopping_terms(traj, spec, integral_mode)
    if kind == "J3":
        return first <= eps1
    return first <= eps1 and second <= eps2
