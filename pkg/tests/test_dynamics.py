import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entropyctl import ControlBounds, ControlSet, dynamics, model, qcore
from entropyctl.errors import InvalidStateError

RHO_A = np.diag([0.5, 0.3, 0.1, 0.1]).astype(complex)

# Matrix-exponential reference (column-stacked superoperator, 40-digit entropy):
# (u, n1, n2, T) -> (S(T), rho_11(T), |rho_12(T)|)
EXPM_REFERENCE = [
    ((1.0, 0.5, 0.5, 5.0), (1.151121251460058, 0.5010121011500259, 0.06637030504558679)),
    ((0.0, 0.0, 0.0, 50.0), (0.13224197067196655, 0.971974988744801, 0.0)),
    ((-2.0, 1.0, 3.0, 2.0), (1.2369437174708364, 0.37322566138594176, 0.029462111128219205)),
]


@pytest.mark.parametrize("c, ref", EXPM_REFERENCE)
def test_constant_control_against_matrix_exponential(params, ops, wide_bounds, c, ref):
    T = c[3]
    traj = dynamics.solve_forward(params, ops, RHO_A, ControlSet.constant(T, 4, wide_bounds, c[:3]), 2000)
    assert traj.entropies[-1] == pytest.approx(ref[0], abs=1e-9)
    assert traj.final[0, 0].real == pytest.approx(ref[1], abs=1e-9)
    assert abs(traj.final[0, 1]) == pytest.approx(ref[2], abs=1e-9)


def _final_error(params, ops, c, steps, ref):
    return qcore.hs_distance(dynamics.solve_forward(params, ops, RHO_A, c, steps).final, ref)


def test_rk4_order_ratio(params, ops, wide_bounds):
    c = ControlSet.from_functions(5.0, 10, wide_bounds, u=lambda t: 3 * np.sin(2 * t), n1=lambda t: 1 + np.cos(t))
    ref = dynamics.solve_forward(params, ops, RHO_A, c, 8000).final
    e1 = _final_error(params, ops, c, 100, ref)
    e2 = _final_error(params, ops, c, 200, ref)
    assert 8 <= e1 / e2 <= 32


def test_default_steps_align_with_nodes(wide_bounds):
    c = ControlSet.zeros(40.0, 20, wide_bounds, support=0.3)
    steps = dynamics.default_steps(c)
    assert steps >= dynamics.MIN_STEPS
    node = steps * 0.3 / 20
    assert abs(node - round(node)) < 1e-9
    assert dynamics.default_steps(ControlSet.zeros(5.0, 1000, wide_bounds)) == 10000


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1))
def test_trace_and_positivity_along_random_controls(seed):
    rng = np.random.default_rng(seed)
    p = model.ModelParameters()
    ops = model.build_operators(p)
    b = ControlBounds(30.0, 10.0)
    s = np.vstack([rng.uniform(-30, 30, 6), rng.uniform(0, 10, (2, 6))])
    traj = dynamics.solve_forward(p, ops, qcore.random_density_matrix(rng), ControlSet(2.0, s, b), 2000)
    X = traj.coords
    assert np.max(np.abs(X[:, qcore.DIAG_IDX].sum(axis=1) - 1)) < 1e-12
    assert traj.eigenvalues.min() > -1e-9


def test_backward_solve_conserves_pairing_without_source(params, ops, wide_bounds, rng):
    c = ControlSet.from_functions(5.0, 10, wide_bounds, u=np.sin, n2=lambda t: 0.5 + 0 * t)
    fwd = dynamics.solve_forward(params, ops, RHO_A, c, 1000)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    back = dynamics.solve_backward(params, ops, a + a.conj().T, c, fwd)
    pairing = qcore.coordinate_inner(back.coords, fwd.coords)
    assert np.ptp(pairing) < 1e-10 * max(1.0, abs(pairing[0]))


def test_backward_source_shape_is_checked(params, ops, wide_bounds):
    c = ControlSet.zeros(1.0, 2, wide_bounds)
    fwd = dynamics.solve_forward(params, ops, RHO_A, c, 10)
    with pytest.raises(ValueError, match="source"):
        dynamics.solve_backward(params, ops, np.eye(4), c, fwd, np.zeros((10, 16)))


def test_forward_input_validation(params, ops, wide_bounds):
    c = ControlSet.zeros(1.0, 20, wide_bounds)
    with pytest.raises(ValueError, match="coarser"):
        dynamics.solve_forward(params, ops, RHO_A, c, 10)
    with pytest.raises(InvalidStateError):
        dynamics.solve_forward(params, ops, np.eye(4), c)


def test_interpolation(params, ops, wide_bounds):
    traj = dynamics.solve_forward(params, ops, RHO_A, ControlSet.zeros(1.0, 1, wide_bounds), 10)
    np.testing.assert_allclose(dynamics.interpolate(traj, 0.05), 0.5 * (traj.states[0] + traj.states[1]), atol=1e-15)
    np.testing.assert_allclose(traj.interpolate(1.0), traj.final)
    with pytest.raises(ValueError):
        dynamics.interpolate(traj, 1.5)


def test_trajectory_csv_columns(params, ops, wide_bounds, tmp_path):
    traj = dynamics.solve_forward(params, ops, RHO_A, ControlSet.zeros(1.0, 1, wide_bounds), 10)
    path = tmp_path / "traj.csv"
    dynamics.write_trajectory_csv(traj, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "S", "purity", "hs_rho0", "hs_mixed", "S1", "S2", "rz1", "rz2"]
    assert len(rows) == 12
    first = [float(v) for v in rows[1]]
    assert first[1] == pytest.approx(qcore.von_neumann_entropy(RHO_A), abs=1e-14)
    assert first[3] == 0.0
    assert first[2] == pytest.approx(0.36)
    assert len(rows[2][1].replace("-", "").replace(".", "").split("e")[0]) >= 15
