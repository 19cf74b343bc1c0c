"""Projected gradient methods (one-step and heavy-ball) and a real-coded genetic algorithm."""
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gradient, objectives, qcore
from .controls import project_samples


@dataclass(frozen=True)
class GPMConfig:
    alpha: float
    beta_momentum: float = 0.0
    max_iters: int = 500
    eps_stop: tuple = (1e-6, 1e-5)
    stop_integral: str = "penalty"  # see objectives.stopping_terms

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 <= self.beta_momentum < 1:
            raise ValueError(f"beta_momentum must lie in [0, 1), got {self.beta_momentum}")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.stop_integral not in objectives.STOP_INTEGRAL_MODES:
            raise ValueError(f"unknown stop_integral {self.stop_integral!r}")


@dataclass
class GPMProblem:
    p: object
    ops: object
    rho0: np.ndarray
    spec: objectives.ObjectiveSpec
    bounds: object
    steps: int = None
    switching: str = "exact"  # or "printed", see model.switching_functions

    def __post_init__(self):
        self.rho0 = qcore.check_density_matrix(self.rho0)
        if self.spec.kind not in objectives.GRADIENT_KINDS:
            raise ValueError(f"gradient methods need J1/J3/J4, got {self.spec.kind}")
        self.spec.validate_initial(qcore.von_neumann_entropy(self.rho0))

    def gradient(self, c):
        return gradient.assemble_gradient(
            self.p, self.ops, self.rho0, c, self.spec, self.steps, self.switching
        )


@dataclass
class GPMResult:
    controls: object
    history: list
    converged: bool
    iterations: int
    last: gradient.GradientResult = field(repr=False, default=None)

    @property
    def stopped_by(self):
        return "criterion" if self.converged else "max_iters"

    def write_history(self, path):
        with open(path, "w") as fh:
            for rec in self.history:
                fh.write(json.dumps(rec) + "\n")


def _admissible(samples, bounds):
    lo, hi = bounds.lower[:, None], bounds.upper[:, None]
    return bool(np.all(samples >= lo) and np.all(samples <= hi))


def _run_gpm(problem, c0, cfg, beta, callback=None):
    spec = problem.spec
    if not _admissible(c0.samples, problem.bounds):
        raise ValueError("initial control is not admissible")
    eps1, eps2 = cfg.eps_stop
    c, prev = c0, None
    history = []
    for k in range(cfg.max_iters + 1):
        t0 = time.perf_counter()
        res = problem.gradient(c)
        ev = res.evaluation
        if not np.isfinite(ev.value) or not np.all(np.isfinite(res.field.components)):
            raise FloatingPointError(f"non-finite objective or gradient at iteration {k}: {ev.value}")
        stop = objectives.stopping_check(spec.kind, res.forward, spec, eps1, eps2, cfg.stop_integral)
        rec = {
            "k": k,
            "value": ev.value,
            "terminal": ev.terminal,
            "integral": ev.integral,
            "reg": ev.reg,
            "residual": gradient.pmp_residual(c, res.field, problem.bounds, cfg.alpha),
            "wall_ms": 1e3 * (time.perf_counter() - t0),
        }
        history.append(rec)
        if callback is not None:
            callback(rec)
        if stop or k == cfg.max_iters:
            return GPMResult(c, history, bool(stop), k, res)
        step = c.samples - cfg.alpha * res.field.components
        if prev is not None and beta > 0:
            step = step + beta * (c.samples - prev.samples)
        new = project_samples(step, problem.bounds)
        assert _admissible(new, problem.bounds), "projected iterate left the box"
        prev, c = c, c.replace(new)


def gpm1(problem, c0, cfg, callback=None):
    """c <- Pr_Q(c - alpha grad) at the control nodes until the stopping rule holds."""
    return _run_gpm(problem, c0, cfg, 0.0, callback)


def gpm2(problem, c0, cfg, callback=None):
    """Heavy-ball variant; the first step is a plain projected-gradient step."""
    return _run_gpm(problem, c0, cfg, cfg.beta_momentum, callback)


@dataclass(frozen=True)
class GAConfig:
    population: int = 50
    max_iters: int = 350
    mutation_prob: float = 0.1
    crossover_prob: float = 0.7
    elite_fraction: float = 0.05
    trials: int = 1
    seed: int = 0
    tournament: int = 3
    mutation_scale: float = 0.05  # sigma as a fraction of each box width
    workers: int = 1

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be at least 4")
        for name in ("mutation_prob", "crossover_prob"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if not 0 <= self.elite_fraction < 1:
            raise ValueError("elite_fraction must lie in [0, 1)")
        if self.trials < 1 or self.max_iters < 0 or self.tournament < 1:
            raise ValueError("trials, tournament must be >= 1 and max_iters >= 0")


@dataclass
class GATrial:
    x: np.ndarray
    value: float
    history: list  # best-so-far value after each generation (index 0 = initial population)
    evaluations: int


@dataclass
class GAResult:
    x: np.ndarray
    value: float
    history: list
    trials: list

    def __iter__(self):
        return iter((self.x, self.value, self.history))

    def write_history(self, path):
        with open(path, "w") as fh:
            for trial, t in enumerate(self.trials):
                for k, v in enumerate(t.history):
                    fh.write(json.dumps({"trial": trial, "k": k, "value": v}) + "\n")


def _tournament(rng, fit, size, k):
    idx = rng.integers(0, len(fit), size=(size, k))
    return idx[np.arange(size), np.argmin(fit[idx], axis=1)]


def _ga_trial(objective, lower, upper, cfg, seed_seq):
    rng = np.random.default_rng(seed_seq)
    n, dim = cfg.population, len(lower)
    width = upper - lower
    sigma = cfg.mutation_scale * width
    n_elite = max(1, int(round(cfg.elite_fraction * n)))
    pop = lower + rng.random((n, dim)) * width
    fit = np.array([objective(a) for a in pop])
    evals = n
    best = int(np.argmin(fit))
    history = [float(fit[best])]
    for _ in range(cfg.max_iters):
        order = np.argsort(fit, kind="stable")
        elite, elite_fit = pop[order[:n_elite]], fit[order[:n_elite]]
        n_child = n - n_elite
        pa = pop[_tournament(rng, fit, n_child, cfg.tournament)]
        pb = pop[_tournament(rng, fit, n_child, cfg.tournament)]
        cross = rng.random(n_child) < cfg.crossover_prob
        mask = (rng.random((n_child, dim)) < 0.5) & cross[:, None]
        kids = np.where(mask, pb, pa)
        mut = rng.random((n_child, dim)) < cfg.mutation_prob
        kids = kids + mut * rng.normal(size=(n_child, dim)) * sigma
        kids = np.clip(kids, lower, upper)
        kid_fit = np.array([objective(a) for a in kids])
        evals += n_child
        pop = np.vstack([elite, kids])
        fit = np.concatenate([elite_fit, kid_fit])
        best = int(np.argmin(fit))
        # elites survive, so the best value cannot get worse
        assert fit[best] <= history[-1], "best-so-far increased"
        history.append(float(fit[best]))
    return GATrial(pop[best].copy(), float(fit[best]), history, evals)


def ga_minimize(objective, bounds, cfg):
    """Best of ``cfg.trials`` independently seeded GA runs on the box ``bounds`` = (lower, upper)."""
    lower, upper = (np.asarray(b, dtype=float) for b in bounds)
    if lower.shape != upper.shape or lower.ndim != 1:
        raise ValueError("bounds must be two equal-length vectors")
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)) and np.all(lower <= upper)):
        raise ValueError("bounds must be finite with lower <= upper")
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    if cfg.workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            futs = [ex.submit(_ga_trial, objective, lower, upper, cfg, s) for s in seeds]
            trials = [f.result() for f in futs]
    else:
        trials = [_ga_trial(objective, lower, upper, cfg, s) for s in seeds]
    best = min(trials, key=lambda t: t.value)
    return GAResult(best.x, best.value, best.history, trials)
