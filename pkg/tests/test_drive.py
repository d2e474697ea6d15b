import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import drive_quadrature
from tbcreset.drive import DriveField, eval_w, effective_tunnelling, w_increment, w_values
from tbcreset.specfun import bessel_j

FIG3_F0 = 0.2404825558


def test_zero_time():
    s = eval_w(DriveField(1.0, 0.1), 0.0)
    assert s.w == 0 and s.u == 0.0 and s.v == 0.0


def test_no_field_is_linear():
    d = DriveField(0.0, 3.0)
    t = np.linspace(0.0, 50.0, 11)
    assert np.allclose(w_values(d, t), t, rtol=0, atol=1e-13)


def test_full_period():
    d = DriveField(1.0, 0.1)
    period = 2 * math.pi / 0.1
    assert eval_w(d, period).w == pytest.approx(period * bessel_j(0, 10.0), abs=1e-10)


def test_fast_drive_against_quadrature():
    assert abs(eval_w(DriveField(1.0, 10.0), 0.37).w - drive_quadrature(1.0, 10.0, 0.37)) < 1e-10


@pytest.mark.parametrize("f0,omega", [(1.0, 0.1), (1.0, 10.0), (FIG3_F0, 0.1)])
def test_series_matches_quadrature_on_log_grid(f0, omega):
    d = DriveField(f0, omega)
    for t in np.logspace(-3, 3, 50):
        assert abs(eval_w(d, t).w - drive_quadrature(f0, omega, t)) < 1e-9, t


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.0, 3.0),
    st.sampled_from([0.1, 0.5, 1.0, 10.0]),
    st.floats(0.0, 500.0),
)
def test_periodic_increment(f0, omega, t):
    d = DriveField(f0, omega)
    period = 2 * math.pi / omega
    step = w_values(d, t + period) - w_values(d, t)
    assert abs(step - period * bessel_j(0, f0 / omega)) < 1e-9


@pytest.mark.parametrize("f0,omega", [(1.0, 0.1), (2.0, 10.0), (FIG3_F0, 0.1)])
def test_small_time_expansion(f0, omega):
    d = DriveField(f0, omega)
    for t in np.logspace(-6, -3, 7):
        assert abs(eval_w(d, t).w / t - 1.0) < 2 * f0 * t


def test_increment_is_difference():
    d = DriveField(1.0, 0.7)
    a, b = np.array([0.0, 1.0, 3.0]), np.array([2.0, 5.0, 3.0])
    assert np.allclose(w_increment(d, a, b), w_values(d, b) - w_values(d, a), atol=1e-14)


def test_vector_and_scalar_agree():
    d = DriveField(1.3, 2.0)
    t = np.linspace(0.0, 20.0, 33)
    assert np.allclose(w_values(d, t), [eval_w(d, x).w for x in t], rtol=0, atol=1e-14)


def test_input_validation():
    d = DriveField(1.0, 1.0)
    with pytest.raises(ValueError):
        eval_w(d, -1.0)
    with pytest.raises(ValueError):
        eval_w(d, 1.0, tol=1e-3)
    with pytest.raises(ValueError):
        DriveField(1.0, 0.0)


def test_effective_tunnelling():
    assert effective_tunnelling(DriveField(0.0, 2.0), 1.0) == 1.0
    assert abs(effective_tunnelling(DriveField(FIG3_F0, 0.1), 1.0)) < 1e-9
    assert effective_tunnelling(DriveField(1.0, 0.1), 1.0) == pytest.approx(bessel_j(0, 10.0), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5.0, 5.0), st.floats(0.05, 20.0), st.floats(0.01, 10.0))
def test_effective_tunnelling_bounded(f0, omega, delta):
    assert abs(effective_tunnelling(DriveField(f0, omega), delta)) <= delta


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.05, 20.0), st.floats(0.0, 200.0))
def test_modulus_bounded_by_time(f0, omega, t):
    assert abs(w_values(DriveField(f0, omega), t)) <= t + 1e-9
