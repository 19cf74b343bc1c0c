"""Scenario files: parsing, validation, canonical serialization and execution.

A scenario is a YAML mapping::

    name: steering-noreg
    T: 40
    rho0: {diag: [0, 0.5, 0, 0.5]}          # or {matrix: [[...]]} with real/imag rows
    model: {epsilon: 0.1}                    # omitted fields take the default values
    bounds: {u_max: 30, n_max: 10}
    grid: {M: 1000, steps: null}
    objective: {kind: J3, S_tar: 0.4, reg: {gamma_u: 0, gamma_n: 0, mode: none}}
    initial_guess: {type: constant, value: 0.5}
    optimizer: {method: gpm2, alpha: 3, beta: 0.9, max_iters: 130}

GA scenarios add ``ga_class`` (coherent_only, support, T_range) and use
``optimizer.method: ga``.
"""
import copy
import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import controls, dynamics, model, objectives, optim, qcore
from .controls import ControlBounds, ControlSet, GAEncoding, RegularizationSpec
from .errors import InvalidStateError

OUTPUT_ROOT_ENV = "ENTROPYCTL_OUTPUT_ROOT"
BUNDLED_DIR = Path(__file__).with_name("scenarios")
GPM_METHODS = ("gpm1", "gpm2")
EXIT_OK, EXIT_ERROR, EXIT_MAX_ITERS = 0, 1, 2


class ScenarioError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


_MODEL_DEFAULTS = model.ModelParameters().to_dict()
_REG_DEFAULTS = {"gamma_u": 0.0, "gamma_n": 0.0, "delta_n": [1.0, 1.0], "mode": "none"}
_GPM_DEFAULTS = {
    "alpha": 3.0,
    "beta": 0.9,
    "max_iters": 500,
    "eps_stop": [1e-6, 1e-5],
    "stop_integral": "penalty",
    "switching": "exact",
}
_GA_DEFAULTS = {
    "population": 50,
    "max_iters": 350,
    "mutation_prob": 0.1,
    "crossover_prob": 0.7,
    "elite_fraction": 0.05,
    "trials": 1,
    "seed": 0,
    "tournament": 3,
    "mutation_scale": 0.05,
}
_OBJECTIVE_KEYS = ("kind", "S_tar", "S_bar", "P", "eval_grid", "reg")


def _require(d, key, path):
    if key not in d:
        raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


def _mapping(v, path):
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ScenarioError(path, f"expected a mapping, got {type(v).__name__}")
    return v


def _unknown(d, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ScenarioError(f"{path}.{extra[0]}" if path else extra[0], "unknown field")


def _float(v, path):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ScenarioError(path, f"expected a number, got {v!r}") from None


def _int(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ScenarioError(path, f"expected an integer, got {v!r}")
    return int(v)


def normalize(raw, base_dir=None):
    """Validate a raw scenario mapping and return its canonical form."""
    raw = _mapping(raw, "<root>")
    _unknown(
        raw,
        ("name", "T", "rho0", "model", "bounds", "grid", "objective", "initial_guess",
         "optimizer", "ga_class", "outputs"),
        "",
    )
    out = {"name": str(_require(raw, "name", ""))}
    out["T"] = _float(_require(raw, "T", ""), "T")
    if out["T"] <= 0:
        raise ScenarioError("T", "must be positive")

    m = dict(_MODEL_DEFAULTS)
    mraw = _mapping(raw.get("model"), "model")
    _unknown(mraw, _MODEL_DEFAULTS, "model")
    m.update(mraw)
    try:
        m = model.ModelParameters(**m).to_dict()
    except (TypeError, ValueError) as e:
        raise ScenarioError("model", str(e)) from None
    out["model"] = m

    r = _mapping(_require(raw, "rho0", ""), "rho0")
    if set(r) == {"diag"}:
        diag = [_float(v, "rho0.diag") for v in r["diag"]]
        if len(diag) != 4:
            raise ScenarioError("rho0.diag", "needs four entries")
        out["rho0"] = {"diag": diag}
    elif set(r) <= {"matrix", "imag"} and "matrix" in r:
        out["rho0"] = {"matrix": np.asarray(r["matrix"], float).tolist()}
        if "imag" in r:
            out["rho0"]["imag"] = np.asarray(r["imag"], float).tolist()
    else:
        raise ScenarioError("rho0", "expected {diag: [...]} or {matrix: [[...]], imag: [[...]]}")
    try:
        rho0_matrix(out)
    except (InvalidStateError, ValueError) as e:
        raise ScenarioError("rho0", str(e)) from None

    b = _mapping(_require(raw, "bounds", ""), "bounds")
    _unknown(b, ("u_max", "n_max"), "bounds")
    out["bounds"] = {
        "u_max": _float(_require(b, "u_max", "bounds"), "bounds.u_max"),
        "n_max": _float(_require(b, "n_max", "bounds"), "bounds.n_max"),
    }
    try:
        ControlBounds(**out["bounds"])
    except ValueError as e:
        raise ScenarioError("bounds", str(e)) from None

    g = _mapping(_require(raw, "grid", ""), "grid")
    _unknown(g, ("M", "steps"), "grid")
    out["grid"] = {
        "M": _int(_require(g, "M", "grid"), "grid.M"),
        "steps": None if g.get("steps") is None else _int(g["steps"], "grid.steps"),
    }
    if out["grid"]["M"] < 1:
        raise ScenarioError("grid.M", "must be at least 1")

    o = _mapping(_require(raw, "objective", ""), "objective")
    _unknown(o, _OBJECTIVE_KEYS, "objective")
    kind = _require(o, "kind", "objective")
    if kind not in objectives.KINDS or kind == "JO":
        raise ScenarioError("objective.kind", f"expected one of J1..J5, got {kind!r}")
    obj = {"kind": kind}
    for key in ("S_tar", "S_bar", "P"):
        if o.get(key) is not None:
            obj[key] = _float(o[key], f"objective.{key}")
    if o.get("eval_grid") is not None:
        obj["eval_grid"] = _int(o["eval_grid"], "objective.eval_grid")
    reg = dict(_REG_DEFAULTS)
    rraw = _mapping(o.get("reg"), "objective.reg")
    _unknown(rraw, _REG_DEFAULTS, "objective.reg")
    reg.update(rraw)
    try:
        reg = RegularizationSpec(
            _float(reg["gamma_u"], "objective.reg.gamma_u"),
            _float(reg["gamma_n"], "objective.reg.gamma_n"),
            tuple(reg["delta_n"]),
            reg["mode"],
        )
    except (TypeError, ValueError) as e:
        raise ScenarioError("objective.reg", str(e)) from None
    obj["reg"] = {
        "gamma_u": reg.gamma_u, "gamma_n": reg.gamma_n,
        "delta_n": list(reg.delta_n), "mode": reg.mode,
    }
    out["objective"] = obj

    opt = _mapping(_require(raw, "optimizer", ""), "optimizer")
    method = _require(opt, "method", "optimizer")
    if method in GPM_METHODS:
        if kind not in objectives.GRADIENT_KINDS:
            raise ScenarioError("optimizer.method", f"{method} needs J1/J3/J4, objective is {kind}")
        defaults = _GPM_DEFAULTS
    elif method == "ga":
        if kind not in ("J2", "J5"):
            raise ScenarioError("optimizer.method", f"ga needs J2/J5, objective is {kind}")
        defaults = _GA_DEFAULTS
    else:
        raise ScenarioError("optimizer.method", f"expected gpm1, gpm2 or ga, got {method!r}")
    _unknown(opt, ("method",) + tuple(defaults), "optimizer")
    cfg = dict(defaults)
    cfg.update({k: v for k, v in opt.items() if k != "method"})
    if method == "ga":
        for key in ("population", "max_iters", "trials", "seed", "tournament"):
            cfg[key] = _int(cfg[key], f"optimizer.{key}")
        for key in ("mutation_prob", "crossover_prob", "elite_fraction", "mutation_scale"):
            cfg[key] = _float(cfg[key], f"optimizer.{key}")
    else:
        cfg["alpha"] = _float(cfg["alpha"], "optimizer.alpha")
        cfg["beta"] = _float(cfg["beta"], "optimizer.beta")
        cfg["max_iters"] = _int(cfg["max_iters"], "optimizer.max_iters")
        cfg["eps_stop"] = [None if e is None else _float(e, "optimizer.eps_stop") for e in cfg["eps_stop"]]
        if cfg["stop_integral"] not in objectives.STOP_INTEGRAL_MODES:
            raise ScenarioError("optimizer.stop_integral", f"unknown mode {cfg['stop_integral']!r}")
        if cfg["switching"] not in model.SWITCHING_FORMS:
            raise ScenarioError("optimizer.switching", f"unknown form {cfg['switching']!r}")
    out["optimizer"] = {"method": method, **cfg}

    gc = _mapping(raw.get("ga_class"), "ga_class")
    _unknown(gc, ("coherent_only", "support", "T_range"), "ga_class")
    if gc and method != "ga":
        raise ScenarioError("ga_class", "only meaningful for the ga optimizer")
    if method == "ga":
        out["ga_class"] = {
            "coherent_only": bool(gc.get("coherent_only", False)),
            "support": _float(gc.get("support", 1.0), "ga_class.support"),
            "T_range": None if gc.get("T_range") is None
            else [_float(v, "ga_class.T_range") for v in gc["T_range"]],
        }

    ig = _mapping(raw.get("initial_guess", {"type": "zero"}), "initial_guess")
    typ = ig.get("type", "zero")
    if typ == "zero":
        out["initial_guess"] = {"type": "zero"}
    elif typ == "constant":
        v = _require(ig, "value", "initial_guess")
        vals = [_float(x, "initial_guess.value") for x in np.broadcast_to(np.asarray(v, float), (3,))]
        out["initial_guess"] = {"type": "constant", "value": vals}
    elif typ == "sinusoid":
        out["initial_guess"] = {
            "type": "sinusoid",
            "amplitude": _float(ig.get("amplitude", 1.0), "initial_guess.amplitude"),
            "frequency": _float(_require(ig, "frequency", "initial_guess"), "initial_guess.frequency"),
        }
    elif typ == "file":
        p = Path(_require(ig, "path", "initial_guess"))
        if not p.is_absolute() and base_dir is not None:
            p = Path(base_dir) / p
        if not p.exists():
            raise ScenarioError("initial_guess.path", f"file {p} does not exist")
        out["initial_guess"] = {"type": "file", "path": str(p)}
    else:
        raise ScenarioError("initial_guess.type", f"unknown type {typ!r}")
    if method == "ga" and typ != "zero":
        raise ScenarioError("initial_guess", "the GA draws its own initial population")

    outs = _mapping(raw.get("outputs"), "outputs")
    _unknown(outs, ("dir",), "outputs")
    out["outputs"] = {"dir": outs.get("dir")}
    return out


def load(path):
    path = Path(path)
    if not path.exists() and (BUNDLED_DIR / f"{path.name}.yaml").exists():
        path = BUNDLED_DIR / f"{path.name}.yaml"
    try:
        raw = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(str(path), "scenario file not found") from None
    except yaml.YAMLError as e:
        raise ScenarioError(str(path), f"not valid YAML ({e})") from None
    return normalize(raw, base_dir=path.parent)


def dump(canonical):
    return yaml.safe_dump(canonical, sort_keys=False)


def bundled_names():
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.yaml"))


def rho0_matrix(sc):
    r = sc["rho0"]
    if "diag" in r:
        rho = np.diag(r["diag"]).astype(complex)
    else:
        rho = np.asarray(r["matrix"], float) + 1j * np.asarray(r.get("imag", np.zeros((4, 4))), float)
    return qcore.check_density_matrix(rho)


def objective_spec(sc, S0):
    o = sc["objective"]
    reg = RegularizationSpec(
        o["reg"]["gamma_u"], o["reg"]["gamma_n"], tuple(o["reg"]["delta_n"]), o["reg"]["mode"]
    )
    T_range = sc.get("ga_class", {}).get("T_range")
    return objectives.ObjectiveSpec(
        o["kind"],
        S_ref=S0,
        S_tar=o.get("S_tar"),
        S_bar=o.get("S_bar"),
        P=o.get("P", 0.0),
        reg=reg,
        T_range=None if T_range is None else tuple(T_range),
        eval_grid=o.get("eval_grid"),
    )


def initial_controls(sc, bounds):
    ig, T, M = sc["initial_guess"], sc["T"], sc["grid"]["M"]
    if ig["type"] == "zero":
        return ControlSet.zeros(T, M, bounds)
    if ig["type"] == "constant":
        return controls.project_box(np.repeat(np.asarray(ig["value"])[:, None], M + 1, axis=1), bounds, T)
    if ig["type"] == "sinusoid":
        a, w = ig["amplitude"], ig["frequency"]
        return ControlSet.from_functions(T, M, bounds, u=lambda t: a * np.sin(w * t))
    c = ControlSet.read_csv(ig["path"], bounds)
    if c.M != M or abs(c.T - T) > 1e-9 * T:
        raise ScenarioError("initial_guess.path", f"file grid (T={c.T}, M={c.M}) differs from the scenario")
    return c


@dataclass
class Overrides:
    seed: int = None
    steps: int = None
    max_iters: int = None
    trials: int = None
    parallel: bool = False


def apply_overrides(sc, ov):
    sc = copy.deepcopy(sc)
    if ov.steps is not None:
        sc["grid"]["steps"] = ov.steps
    if ov.max_iters is not None:
        sc["optimizer"]["max_iters"] = ov.max_iters
    if sc["optimizer"]["method"] == "ga":
        if ov.seed is not None:
            sc["optimizer"]["seed"] = ov.seed
        if ov.trials is not None:
            sc["optimizer"]["trials"] = ov.trials
    return sc


def output_dir(sc, out=None):
    if out is not None:
        return Path(out)
    if sc["outputs"]["dir"] is not None:
        return Path(sc["outputs"]["dir"])
    root = Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))
    return root / sc["name"]


def run(sc, out=None, overrides=None, log=print):
    """Execute a canonical scenario; returns (exit code, summary dict)."""
    if overrides is not None:
        sc = apply_overrides(sc, overrides)
    odir = output_dir(sc, out)
    odir.mkdir(parents=True, exist_ok=True)
    p = model.ModelParameters(**{k: tuple(v) if isinstance(v, list) else v for k, v in sc["model"].items()})
    ops = model.build_operators(p)
    bounds = ControlBounds(**sc["bounds"])
    rho0 = rho0_matrix(sc)
    S0 = qcore.von_neumann_entropy(rho0)
    spec = objective_spec(sc, S0)
    opt = sc["optimizer"]
    t0 = time.perf_counter()
    (odir / "scenario.yaml").write_text(dump(sc))
    if opt["method"] in GPM_METHODS:
        cfg = optim.GPMConfig(
            opt["alpha"], opt["beta"] if opt["method"] == "gpm2" else 0.0, opt["max_iters"],
            tuple(opt["eps_stop"]), opt["stop_integral"],
        )
        problem = optim.GPMProblem(p, ops, rho0, spec, bounds, sc["grid"]["steps"], opt["switching"])
        c0 = initial_controls(sc, bounds)
        run_fn = optim.gpm2 if opt["method"] == "gpm2" else optim.gpm1
        res = run_fn(problem, c0, cfg)
        res.write_history(odir / "history.jsonl")
        c, traj = res.controls, res.last.forward
        res.last.field.write_csv(odir / "gradient.csv")
        first, second = objectives.stopping_terms(traj, spec, opt["stop_integral"])
        summary = {
            "final_objective": res.history[-1]["value"],
            "iterations": res.iterations,
            "stopped_by": res.stopped_by,
            "stop_terms": [first, second],
        }
        code = EXIT_OK if res.converged else EXIT_MAX_ITERS
    else:
        gc = sc["ga_class"]
        enc = GAEncoding(
            sc["grid"]["M"], bounds,
            T=None if gc["T_range"] else sc["T"],
            T_range=None if gc["T_range"] is None else tuple(gc["T_range"]),
            coherent_only=gc["coherent_only"], support=gc["support"],
        )
        objective = objectives.GAObjective(p, ops, rho0, spec, enc, sc["grid"]["steps"])
        workers = opt["trials"] if overrides is not None and overrides.parallel else 1
        cfg = optim.GAConfig(**{k: opt[k] for k in _GA_DEFAULTS}, workers=workers)
        res = optim.ga_minimize(objective, (enc.lower, enc.upper), cfg)
        res.write_history(odir / "history.jsonl")
        for k, trial in enumerate(res.trials):
            with open(odir / f"history_trial{k}.jsonl", "w") as fh:
                for i, v in enumerate(trial.history):
                    fh.write(json.dumps({"k": i, "value": v}) + "\n")
        c, traj = objective.trajectory(res.x)
        ev = objective.terms(res.x)
        summary = {
            "final_objective": res.value,
            "iterations": cfg.max_iters,
            "stopped_by": "budget",
            "terms": {"objective": ev.terminal, "penalty": ev.integral, "reg": ev.reg},
            "trial_values": [t.value for t in res.trials],
            "trial_terms": [
                {"objective": e.terminal, "penalty": e.integral, "reg": e.reg}
                for e in (objective.terms(t.x) for t in res.trials)
            ],
        }
        if spec.kind == "J2":
            summary["jump_excess"] = list(controls.jump_excess(c, spec.reg))
        code = EXIT_OK
    c.write_csv(odir / "controls.csv")
    dynamics.write_trajectory_csv(traj, odir / "trajectory.csv")
    summary.update(
        {
            "scenario": sc["name"],
            "S_initial": S0,
            "S_final": float(traj.entropies[-1]),
            "S_max": float(traj.entropies.max()),
            "T": c.T,
            "wall_s": time.perf_counter() - t0,
        }
    )
    (odir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    log(json.dumps(summary))
    return code, summary
