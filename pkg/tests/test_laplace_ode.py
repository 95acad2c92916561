import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from transitlab.asymptotics import constants
from transitlab.laplace_ode import (
    ShootControls,
    phi,
    phi_on_imaginary_axis,
    riccati_coefficients,
    series_log_and_slope,
    shoot_g,
    shoot_log_g_batch,
)
from transitlab.oracles import mean_time_quadrature
from transitlab.potentials import ModelSpec

CUBIC = ModelSpec(3, 0.0)
QUARTIC = ModelSpec(4, 0.0)


def central_mean(model, h=1e-4):
    # fourth-order stencil; the mu = 1 model sits close to its pole
    near = phi(model, h) - phi(model, -h)
    far = phi(model, 2 * h) - phi(model, -2 * h)
    return ((8 * near - far) / (12 * h)).real


# -- basic values -----------------------------------------------------------------

def test_transform_is_one_at_zero(model):
    assert phi(model, 0.0) == 1.0
    # the shot itself, not the shortcut
    assert abs(shoot_g(model, 0.0).phi - 1.0) < 1e-9


def test_characteristic_function_is_bounded(model):
    assert abs(phi(model, 1j)) <= 1.0


@pytest.mark.parametrize("m, expected", [(CUBIC, 9.952107902), (QUARTIC, 1.6431309)])
def test_mean_from_transform_slope(m, expected):
    slope = central_mean(m)
    assert slope == pytest.approx(9.952 if m.d == 3 else 1.643, abs=0.1 if m.d == 3 else 0.01)
    assert slope == pytest.approx(expected, rel=1e-6)


def test_mean_matches_green_function_quadrature(model):
    assert central_mean(model) == pytest.approx(mean_time_quadrature(model), rel=1e-6)


def test_large_negative_argument_follows_leading_form():
    c = constants(CUBIC, with_beta_max=False)
    ratio = phi(CUBIC, -200.0).real / math.exp(-c.C34 * 200.0**0.75)
    assert 0.5 <= ratio <= 2.0


def test_decay_along_the_imaginary_axis():
    c = constants(CUBIC, with_beta_max=False)
    assert abs(phi(CUBIC, 50j)) < 1e-6
    rate = math.log(abs(phi(CUBIC, 200j))) / 400.0**0.75
    assert rate == pytest.approx(-c.c_half_pi, rel=0.05)


def test_right_of_the_spectrum_raises():
    assert not shoot_g(CUBIC, 0.4).converged
    with pytest.raises(ArithmeticError):
        phi(CUBIC, 0.2)


# -- structural properties ----------------------------------------------------------

@settings(max_examples=15)
@given(re=st.floats(-5.0, 0.15), im=st.floats(0.05, 20.0))
def test_conjugate_symmetry(re, im):
    upper = phi(CUBIC, complex(re, im))
    lower = phi(CUBIC, complex(re, -im))
    assert lower == pytest.approx(upper.conjugate(), rel=1e-9, abs=1e-14)


def test_imaginary_axis_helper_uses_conjugation():
    s = np.array([-3.0, -0.5, 0.0, 0.5, 3.0])
    vals = phi_on_imaginary_axis(CUBIC, s)
    assert vals[2] == 1.0
    assert np.allclose(vals[:2], np.conj(vals[:-3:-1]), rtol=1e-12)
    assert vals[3] == pytest.approx(phi(CUBIC, 0.5j), rel=1e-9)


def test_monotone_and_log_convex_on_the_real_axis(model):
    lams = np.linspace(-4.0, 0.0, 21)
    lg, _, ok = shoot_log_g_batch(model, 2.0 * lams)
    assert ok.all()
    log_phi = -lg.real
    # a Laplace transform of a positive variable is increasing and log-convex
    assert np.all(np.diff(log_phi) > 0)
    assert np.all(np.diff(log_phi, 2) > -1e-10)


def test_integration_window_does_not_matter():
    wide = ShootControls(x_left=-40.0, x_right=16.0)
    for lam in (-1.0, 0.1, 2.0j):
        assert phi(CUBIC, lam, wide) == pytest.approx(phi(CUBIC, lam), rel=1e-9)


def test_batch_agrees_with_single_shots():
    etas = np.array([-3.0, 0.1, 1j, -2 + 5j])
    lg, err, ok = shoot_log_g_batch(QUARTIC, etas)
    assert ok.all() and np.all(err < 1e-8)
    for e, v in zip(etas, lg):
        assert v == pytest.approx(shoot_g(QUARTIC, e).log_g_infinity, rel=1e-10, abs=1e-12)


# -- formal series at infinity ---------------------------------------------------

def power_series_log(eta, mu, x):
    # g = 1 + c1/x + c2/x^2 + c3/x^3 + ..., with (n+1) c_{n+1} = eta c_n + mu (n-1) c_{n-1} + (n-2)(n-1) c_{n-2}
    c1 = eta
    c2 = eta * c1 / 2
    c3 = (eta * c2 + mu * c1) / 3
    return math.log(1 + c1 / x + c2 / x**2 + c3 / x**3), c3


@pytest.mark.parametrize("eta, mu", [(0.3, 0.7), (1.0, 0.0), (-2.0, -1.0)])
def test_series_third_coefficient(eta, mu):
    m = ModelSpec(3, mu)
    a = riccati_coefficients(-2.0 * m.v_prime_coeffs(), [np.array([eta])], 12)
    residuals = []
    for x in (10.0, 20.0, 40.0):
        psi, _, _ = series_log_and_slope(a, x)
        ref, c3 = power_series_log(eta, mu, x)
        residuals.append(abs(psi[0].real - ref))
    assert c3 == pytest.approx((mu * eta + eta**3 / 2) / 3, abs=1e-15)
    # residual of the three-term expansion is fourth order in 1/x
    assert residuals[0] / residuals[2] == pytest.approx(256.0, rel=0.1)
    # an extra 2 eta / 3 in c3 would leave a third-order residual
    psi, _, _ = series_log_and_slope(a, 40.0)
    wrong = math.log(1 + eta / 40 + eta**2 / 3200 + (c3 + 2 * eta / 3) / 40**3)
    assert abs(psi[0].real - wrong) > 10 * residuals[2]


def test_series_rejects_bad_degrees():
    with pytest.raises(ValueError):
        riccati_coefficients([1.0], [np.array([1.0])], 5)
    with pytest.raises(ValueError):
        riccati_coefficients([0.0, 1.0], [0.0, np.array([1.0])], 5)
