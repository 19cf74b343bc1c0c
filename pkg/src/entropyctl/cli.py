"""Command-line entry point: ``entropyctl simulate | run | verify | export-figures``."""
import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import dynamics, gradient, model, objectives, qcore, scenario
from .controls import ControlBounds, ControlSet, RegularizationSpec
from .errors import IntegrationError, NumericalConsistencyError

SIMULATE_COLUMNS = [
    "t", "S", "x1", "x8", "x13", "x16", "S1", "S2", "S1+S2",
    "x1_exact", "x8_exact", "x13_exact", "x16_exact", "S_exact",
]


def _parse_rho0(text):
    if text == "mixed":
        return np.full(4, 0.25)
    vals = np.array([float(v) for v in text.split(",")])
    if vals.shape != (4,):
        raise ValueError(f"--rho0 needs four comma-separated populations or 'mixed', got {text!r}")
    return vals


def simulate_table(p, diag, T, steps):
    """Zero-control trajectory from diag(``diag``) with the exact overlay, shape (steps + 1, 14)."""
    ops = model.build_operators(p)
    c = ControlSet.zeros(T, 1, ControlBounds(1.0, 1.0))
    traj = dynamics.solve_forward(p, ops, np.diag(diag).astype(complex), c, steps)
    X = traj.coords
    r1, r2 = qcore.bloch_vectors_from_coordinates(X)
    S1, S2 = qcore.qubit_entropy(r1), qcore.qubit_entropy(r2)
    exact = model.zero_control_populations(p, diag, traj.times)
    S_exact = qcore.entropy_from_eigenvalues(np.sort(exact, axis=1))
    return np.column_stack(
        [traj.times, traj.entropies, X[:, qcore.DIAG_IDX], S1, S2, S1 + S2, exact, S_exact]
    )


def cmd_simulate(args):
    p = model.ModelParameters(epsilon=args.epsilon)
    steps = args.steps if args.steps is not None else int(round(args.T / 0.01))
    table = simulate_table(p, _parse_rho0(args.rho0), args.T, steps)
    if args.out:
        dynamics.write_csv(args.out, SIMULATE_COLUMNS, table)
    else:
        w = csv.writer(sys.stdout)
        w.writerow(SIMULATE_COLUMNS)
        for row in table:
            w.writerow([f"{v:.17g}" for v in row])
    return 0


def cmd_run(args):
    sc = scenario.load(args.scenario)
    ov = scenario.Overrides(args.seed, args.steps, args.max_iters, args.trials, args.parallel)
    code, _ = scenario.run(sc, out=args.out, overrides=ov)
    return code


# verify -------------------------------------------------------------------


def check_zero_control(p_run, p_oracle, T=300.0, h=0.01):
    ops = model.build_operators(p_run)
    c = ControlSet.zeros(T, 1, ControlBounds(1.0, 1.0))
    traj = dynamics.solve_forward(p_run, ops, np.eye(4) / 4, c, int(round(T / h)))
    exact = model.zero_control_populations(p_oracle, np.full(4, 0.25), traj.times)
    diff = traj.coords.copy()
    diff[:, qcore.DIAG_IDX] -= exact
    return float(np.sqrt(np.max(qcore.coordinate_inner(diff, diff)))), 1e-6


def check_fixed_point(p):
    p0 = model.ModelParameters(**{**p.to_dict(), "epsilon": 0.0})
    rho0 = np.diag([0.5, 0.3, 0.1, 0.1]).astype(complex)
    c = ControlSet.zeros(5.0, 1, ControlBounds(1.0, 1.0))
    traj = dynamics.solve_forward(p0, model.build_operators(p0), rho0, c, 500)
    return max(qcore.hs_distance(r, rho0) for r in traj.states), 1e-10


def check_adjointness(p, rng, n=50):
    ops = model.build_operators(p)
    worst = 0.0
    for _ in range(n):
        rho = qcore.random_density_matrix(rng)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        chi = a + a.conj().T
        c = (rng.uniform(-3, 3), rng.uniform(0, 3), rng.uniform(0, 3))
        lhs = np.trace(chi.conj().T @ model.liouvillian_apply(p, ops, rho, c))
        rhs = np.trace(model.adjoint_liouvillian_apply(p, ops, chi, c).conj().T @ rho)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return worst, 1e-12


def check_switching(p, rng, n=20, h=1e-6):
    ops = model.build_operators(p)
    worst = 0.0
    for _ in range(n):
        rho = qcore.random_density_matrix(rng)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        chi = a + a.conj().T
        c = np.array([rng.uniform(-3, 3), rng.uniform(0.5, 3), rng.uniform(0.5, 3)])
        K = model.switching_functions(chi, rho, p, ops)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd = (
                np.trace(chi.conj().T @ model.liouvillian_apply(p, ops, rho, c + e))
                - np.trace(chi.conj().T @ model.liouvillian_apply(p, ops, rho, c - e))
            ).real / (2 * h)
            worst = max(worst, abs(fd - K[k]) / max(1.0, abs(fd)))
    return worst, 1e-7


def check_gradient(p, rng, n=3):
    ops = model.build_operators(p)
    b = ControlBounds(30.0, 10.0)
    rho0 = np.diag([0.4, 0.3, 0.2, 0.1]).astype(complex)
    S0 = qcore.von_neumann_entropy(rho0)
    specs = [
        objectives.ObjectiveSpec("J1", S_ref=S0, P=0.1),
        objectives.ObjectiveSpec("J3", S_tar=0.5, reg=RegularizationSpec(1e-2, 1e-2, mode="integral")),
        objectives.ObjectiveSpec("J4", S_tar=0.5, S_bar=S0 + 0.05, P=1.0),
    ]
    worst = 0.0
    for spec in specs:
        for _ in range(n):
            s = np.vstack([rng.uniform(-1, 1, 9), rng.uniform(0.2, 1.5, (2, 9))])
            c = ControlSet(5.0, s, b)
            res = gradient.assemble_gradient(p, ops, rho0, c, spec, steps=400)
            hat = gradient.hat_pairing(res, c)
            fd = gradient.fd_gradient_oracle(p, ops, rho0, c, spec, steps=400)
            worst = max(worst, float(np.max(np.abs(hat - fd)) / np.max(np.abs(fd))))
    return worst, 1e-3


def run_checks(perturb_omega2=0.0, seed=0):
    p = model.ModelParameters()
    od = p.omega_diss
    p_oracle = model.ModelParameters(**{**p.to_dict(), "omega_diss": (od[0], od[1] + perturb_omega2)})
    rng = np.random.default_rng(seed)
    return [
        ("zero-control oracle", *check_zero_control(p, p_oracle)),
        ("fixed point (eps = 0)", *check_fixed_point(p)),
        ("adjointness", *check_adjointness(p, rng)),
        ("switching functions vs FD", *check_switching(p, rng)),
        ("gradient vs FD (J1/J3/J4)", *check_gradient(p, rng)),
    ]


def cmd_verify(args):
    results = run_checks(args.perturb_omega2, args.seed or 0)
    ok = True
    for name, err, tol in results:
        passed = err < tol
        ok &= passed
        line = f"{'PASS' if passed else 'FAIL'}  {name}"
        if args.verbose:
            line += f"  max error {err:.3e} (tol {tol:.0e})"
        print(line)
    return 0 if ok else 1


# export-figures -----------------------------------------------------------


def _read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def export_figures(run_dir, out=None):
    """Per-figure CSV bundles from a run directory; returns the written paths."""
    run_dir = Path(run_dir)
    out = Path(out) if out else run_dir / "figures"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    head, traj = _read_csv(run_dir / "trajectory.csv")
    cols = [head.index(k) for k in ("t", "S", "S1", "S2")]
    path = out / "entropy.csv"
    dynamics.write_csv(path, ["t", "S", "S1", "S2"], traj[:, cols])
    written.append(path)
    head, ctrl = _read_csv(run_dir / "controls.csv")
    path = out / "controls.csv"
    dynamics.write_csv(path, head, ctrl)
    written.append(path)
    hist = run_dir / "history.jsonl"
    if hist.exists():
        recs = [json.loads(line) for line in hist.read_text().splitlines() if line.strip()]
        trial = [r.get("trial", 0) for r in recs]
        path = out / "convergence.csv"
        dynamics.write_csv(path, ["trial", "k", "value"], [(t, r["k"], r["value"]) for t, r in zip(trial, recs)])
        written.append(path)
    return written


def cmd_export(args):
    for path in export_figures(args.run_dir, args.out):
        print(path)
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="entropyctl", description=__doc__)
    ap.add_argument("--seed", type=int, default=None, help="GA seed override / verify RNG seed")
    ap.add_argument("--steps", type=int, default=None, help="integration steps override")
    ap.add_argument("--max-iters", type=int, default=None, help="optimizer iteration cap override")
    ap.add_argument("--trials", type=int, default=None, help="number of GA trials")
    ap.add_argument("--parallel", action="store_true", help="run GA trials in worker processes")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="zero-control evolution with the exact overlay")
    s.add_argument("--rho0", default="mixed", help="'mixed' or four comma-separated populations")
    s.add_argument("--T", type=float, default=300.0)
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--out", default=None, help="CSV path (stdout if omitted)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="run a scenario file or bundled scenario name")
    r.add_argument("scenario")
    r.add_argument("--out", default=None, help="output directory")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="oracle and gradient self-checks")
    v.add_argument("-v", "--verbose", action="store_true")
    v.add_argument("--perturb-omega2", type=float, default=0.0, help="shift Omega_2 in the oracle only")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("export-figures", help="per-figure CSV bundles from a run directory")
    e.add_argument("run_dir")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_export)

    sub.add_parser("list", help="list bundled scenarios").set_defaults(
        func=lambda a: print("\n".join(scenario.bundled_names())) or 0
    )
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IntegrationError, NumericalConsistencyError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
