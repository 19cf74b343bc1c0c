import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from entropyctl import ControlBounds, ControlSet, GAEncoding, RegularizationSpec, controls

B = ControlBounds(30.0, 10.0)
raw = arrays(np.float64, (3, 6), elements=st.floats(-100, 100))


@given(raw)
def test_projection_is_idempotent_and_admissible(s):
    once = controls.project_samples(s, B)
    np.testing.assert_array_equal(controls.project_samples(once, B), once)
    assert np.all(once >= B.lower[:, None]) and np.all(once <= B.upper[:, None])


@given(raw, raw)
def test_projection_is_nonexpansive(a, b):
    pa, pb = controls.project_samples(a, B), controls.project_samples(b, B)
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) + 1e-9


def test_bounds_and_control_set_validation():
    with pytest.raises(ValueError):
        ControlBounds(0.0, 1.0)
    with pytest.raises(ValueError, match="box"):
        ControlSet(1.0, np.array([[0, 0], [-1, 0], [0, 0]]), B)
    with pytest.raises(ValueError, match="shape"):
        ControlSet(1.0, np.zeros((2, 3)), B)
    with pytest.raises(ValueError, match="support"):
        ControlSet(1.0, np.zeros((3, 3)), B, support=1.5)
    with pytest.raises(ValueError):
        controls.project_box(np.zeros((2, 3)), B)


def test_piecewise_linear_evaluation_and_support():
    s = np.array([[0.0, 2.0, -2.0], [0.0, 1.0, 1.0], [1.0, 1.0, 0.0]])
    c = ControlSet(4.0, s, B)
    np.testing.assert_allclose(c([0.5, 1.0, 3.0]), [[0.5, 0.25, 1.0], [1.0, 0.5, 1.0], [0.0, 1.0, 0.5]])
    short = ControlSet(10.0, s, B, support=0.3)
    assert short.dt == pytest.approx(1.5)
    np.testing.assert_allclose(short(3.0), s[:, -1])
    np.testing.assert_array_equal(short([3.5, 10.0]), np.zeros((2, 3)))


def test_csv_and_json_round_trip(tmp_path):
    c = ControlSet.from_functions(5.0, 7, B, u=lambda t: np.sin(2 * t), n1=lambda t: t)
    c.write_csv(tmp_path / "c.csv")
    back = ControlSet.read_csv(tmp_path / "c.csv", B)
    np.testing.assert_array_equal(back.samples, c.samples)
    assert back.T == c.T
    again = ControlSet.from_json(c.to_json())
    np.testing.assert_array_equal(again.samples, c.samples)


@given(st.integers(0, 2**32 - 1), st.booleans(), st.booleans())
def test_ga_encoding_round_trip(seed, coherent, free_T):
    rng = np.random.default_rng(seed)
    enc = GAEncoding(6, B, T=None if free_T else 5.0, T_range=(38.0, 40.0) if free_T else None, coherent_only=coherent)
    a = enc.lower + rng.random(enc.size) * (enc.upper - enc.lower)
    c = enc.decode(a)
    np.testing.assert_allclose(enc.encode(c), a)
    if coherent:
        assert not c.samples[1:].any()


def test_ga_encoding_validation():
    with pytest.raises(ValueError):
        GAEncoding(4, B)
    with pytest.raises(ValueError):
        GAEncoding(4, B, T=1.0, T_range=(1.0, 2.0))
    enc = GAEncoding(4, B, T=1.0)
    with pytest.raises(ValueError, match="length"):
        enc.decode(np.zeros(3))
    # out-of-box parameters are clipped on decode
    assert enc.decode(np.full(enc.size, 99.0)).u.max() == 30.0


def test_regularizers():
    s = np.array([[1.0, -3.0, 2.0], [0.0, 2.0, 0.5], [1.0, 1.0, 1.0]])
    c = ControlSet(2.0, s, B)
    spec = RegularizationSpec(0.1, 0.01, (1.0, 1.0), "jump-penalty")
    assert controls.regularization_supnorm(c, spec) == pytest.approx(0.1 * 3 + 0.01 * (2 + 1))
    assert controls.jump_excess(c, spec) == pytest.approx((1.0, 0.0))
    assert controls.regularization_jumps(c, spec) == pytest.approx(0.3 + 0.01)
    # exact integral of piecewise-linear u^2 and n on [0, 2]
    u2 = (1 + 1 * -3 + 9) / 3 + (9 + -3 * 2 + 4) / 3
    n = (0 + 2) / 2 + (2 + 0.5) / 2 + 2.0
    val = controls.regularization_integral(c, RegularizationSpec(1.0, 1.0, mode="integral"), np.linspace(0, 2, 20001))
    assert val == pytest.approx(u2 + n, rel=1e-7)
    with pytest.raises(ValueError):
        RegularizationSpec(mode="l1")
    with pytest.raises(ValueError):
        RegularizationSpec(-1.0)
