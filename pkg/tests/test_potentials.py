import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from transitlab.asymptotics import gamma_fn
from transitlab.potentials import (
    ModelSpec,
    Q,
    V,
    V_prime,
    V_second,
    build_scale,
    drift,
    mean_passage_time,
    q,
    speed_weight,
)

ys = st.floats(min_value=-6.0, max_value=6.0, allow_nan=False)
mus = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
degrees = st.sampled_from([3, 4, 5, 6])


@pytest.fixture(scope="module")
def scale_d3():
    return build_scale(ModelSpec(3, 0.0))


@pytest.fixture(scope="module")
def scale_d4():
    return build_scale(ModelSpec(4, 0.0))


# -- potential and derivatives --------------------------------------------------

@pytest.mark.parametrize("d, mu, y, expected", [
    (3, 0.0, 1.0, -1.0 / 6.0),
    (4, 0.0, 1.0, -0.25),
    (3, 2.0, -2.0, -2.0 / 3.0),
])
def test_potential_values(d, mu, y, expected):
    assert V(ModelSpec(d, mu), y) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("d, mu, y, expected_slope", [
    (3, 0.0, 2.0, -2.0),
    (4, 1.0, 1.0, 0.0),
    (3, 1.0, 1.0, 0.0),
])
def test_potential_slopes(d, mu, y, expected_slope):
    assert V_prime(ModelSpec(d, mu), y) == pytest.approx(expected_slope, abs=1e-15)


def test_drift_is_minus_slope():
    m = ModelSpec(3, 0.5)
    y = np.linspace(-3, 3, 13)
    assert np.array_equal(drift(m, y), -V_prime(m, y))


@given(d=degrees, mu=mus, y=ys)
def test_slope_matches_finite_difference(d, mu, y):
    m = ModelSpec(d, mu)
    h = 1e-5
    fd = (V(m, y + h) - V(m, y - h)) / (2 * h)
    assert V_prime(m, y) == pytest.approx(fd, rel=1e-6, abs=1e-6 * (1 + abs(y) ** d))
    fd2 = (V_prime(m, y + h) - V_prime(m, y - h)) / (2 * h)
    assert V_second(m, y) == pytest.approx(fd2, rel=1e-6, abs=1e-6 * (1 + abs(y) ** d))


@given(d=st.sampled_from([4, 6]), mu=mus, y=ys)
def test_even_degree_symmetry(d, mu, y):
    m = ModelSpec(d, mu)
    assert V(m, -y) == pytest.approx(V(m, y), rel=1e-14, abs=1e-14)
    assert q(m, -y) == pytest.approx(q(m, y), rel=1e-14, abs=1e-14)


# -- Schroedinger potentials ------------------------------------------------------

@pytest.mark.parametrize("d, x, expected", [(3, 2.0, 3.0), (3, 0.0, 0.0), (4, 1.0, 2.0)])
def test_half_convention_values(d, x, expected):
    assert q(ModelSpec(d, 0.0), x) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("eta, x, expected", [(0.0, 0.0, 0.0), (-4.0, 0.0, 4.0), (0.0, 2.0, 6.0)])
def test_full_convention_values(eta, x, expected):
    assert Q(ModelSpec(3, 0.0), eta, x) == pytest.approx(expected, abs=1e-14)


@given(d=degrees, mu=mus, x=ys)
def test_conventions_agree_at_zero_eta(d, mu, x):
    m = ModelSpec(d, mu)
    assert Q(m, 0.0, x) == pytest.approx(2.0 * q(m, x), rel=1e-10, abs=1e-10)


@given(mu=mus, x=ys)
def test_cubic_half_convention_closed_form(mu, x):
    m = ModelSpec(3, mu)
    assert q(m, x) == pytest.approx(x / 2 + (x * x - mu) ** 2 / 8, rel=1e-12, abs=1e-12)


@given(mu=mus, x=ys)
def test_quartic_half_convention_keeps_constant(mu, x):
    # built from the definition: the constant -mu/2 is present
    m = ModelSpec(4, mu)
    expected = 0.5 * (x**3 - mu * x) ** 2 + 1.5 * x * x - mu / 2
    assert q(m, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


# -- scale function -----------------------------------------------------------

def test_cubic_scale_limit_two_way(scale_d3):
    closed = 3.0 ** (1.0 / 3.0) * gamma_fn(4.0 / 3.0)
    quad, _ = integrate.quad(lambda u: math.exp(-u**3 / 3), 0, 10, epsabs=1e-13, limit=200)
    assert closed == pytest.approx(quad, abs=1e-10)
    assert scale_d3.s_infinity == pytest.approx(closed, abs=1e-10)
    assert round(scale_d3.s_infinity, 4) == 1.2879


def test_quartic_scale_limit_two_way(scale_d4):
    # the full width of the scale range is 2^(-3/4) Gamma(1/4); each half is s(inf)
    full_width = 2.0 ** (-0.75) * gamma_fn(0.25)
    quad, _ = integrate.quad(lambda u: math.exp(-u**4 / 2), 0, 8, epsabs=1e-13, limit=200)
    assert full_width / 2 == pytest.approx(quad, abs=1e-10)
    assert scale_d4.s_infinity == pytest.approx(full_width / 2, abs=1e-10)
    assert full_width == pytest.approx(2.155802, abs=5e-6)


@pytest.mark.parametrize("d, mu", [(3, 0.0), (4, 0.0), (3, -1.0), (4, 1.0)])
def test_scale_vanishes_at_origin(d, mu):
    assert build_scale(ModelSpec(d, mu)).s(0.0) == pytest.approx(0.0, abs=1e-15)


def test_scale_matches_direct_quadrature(scale_d3):
    m = scale_d3.model
    for y in (-3.0, -1.0, 0.5, 2.0, 4.0):
        ref, _ = integrate.quad(lambda u: math.exp(2 * V(m, u)), 0, y, epsabs=1e-14, epsrel=1e-13)
        assert scale_d3.s(y) == pytest.approx(ref, abs=1e-11)


def test_scale_slope_on_grid(scale_d3):
    # past y ~ 3 the values of s sit within a few ulps of s_inf and a
    # difference quotient of s carries no information
    y = scale_d3.y[::50]
    y = y[np.abs(y) <= 3.0]
    h = 1e-5
    fd = (scale_d3.s(y + h) - scale_d3.s(y - h)) / (2 * h)
    assert np.allclose(fd, scale_d3.s_prime(y), rtol=1e-6, atol=1e-12)
    assert np.all(scale_d3.s_prime(y) > 0)


@given(a=st.floats(-8, 8), b=st.floats(-8, 8))
def test_scale_is_increasing(scale_d3, a, b):
    if a == b:
        return
    lo, hi = min(a, b), max(a, b)
    assert scale_d3.s(lo) <= scale_d3.s(hi)
    if hi - lo > 1e-6 and hi < 4:
        assert scale_d3.s(lo) < scale_d3.s(hi)


# the inverse is only well conditioned while s' = exp(2V) is not tiny
@given(y=st.floats(-2.5, 2.5))
def test_inverse_round_trip(scale_d3, y):
    assert scale_d3.s_inv(scale_d3.s(y)) == pytest.approx(y, abs=1e-9)


@given(y=st.floats(0, 4))
def test_even_scale_is_odd(scale_d4, y):
    assert scale_d4.s(-y) == pytest.approx(-scale_d4.s(y), abs=1e-12)


# -- speed weight -----------------------------------------------------------------

def test_speed_weight_examples(scale_d3):
    assert speed_weight(scale_d3, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert speed_weight(scale_d3, scale_d3.s(1.0)) == pytest.approx(math.exp(2.0 / 3.0), rel=1e-9)
    table = build_scale(ModelSpec(4, 1.0))
    assert speed_weight(table, 0.0) == pytest.approx(1.0, abs=1e-12)


@given(y=st.floats(-2.5, 2.5))
def test_speed_weight_identity(scale_d3, y):
    m = scale_d3.model
    assert speed_weight(scale_d3, scale_d3.s(y)) == pytest.approx(math.exp(-4 * V(m, y)), rel=1e-8)


def test_speed_weight_blows_up_at_the_end(scale_d3):
    z = scale_d3.s_infinity - np.array([1e-2, 1e-4, 1e-6])
    w = speed_weight(scale_d3, z)
    assert np.all(np.diff(w) > 0) and w[-1] > 1e3


def test_speed_weight_out_of_range(scale_d3, scale_d4):
    with pytest.raises(ValueError):
        speed_weight(scale_d3, scale_d3.s_infinity)
    with pytest.raises(ValueError):
        speed_weight(scale_d4, -scale_d4.s_infinity - 0.1)


# -- mean passage times -------------------------------------------------------------

def test_passage_time_tails_follow_the_drift():
    m = ModelSpec(3, 0.0)
    # far out the noise is irrelevant and the time from y to +inf is 2/y
    assert mean_passage_time(m, 40.0, math.inf) == pytest.approx(2.0 / 40.0, rel=2e-3)


def test_passage_time_is_additive():
    m = ModelSpec(4, 0.5)
    whole = mean_passage_time(m, 0.0, 3.0)
    parts = mean_passage_time(m, 0.0, 1.2) + mean_passage_time(m, 1.2, 3.0)
    assert whole == pytest.approx(parts, rel=1e-9)


def test_passage_time_errors():
    with pytest.raises(ValueError):
        mean_passage_time(ModelSpec(3, 0.0), 1.0, 1.0)
    with pytest.raises(ValueError):
        mean_passage_time(ModelSpec(4, 0.0), -1.0, 1.0)
