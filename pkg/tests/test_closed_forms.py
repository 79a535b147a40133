import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import spence

from llblow import closed_forms as cf


def test_lambda_phi_values():
    assert cf.lambda_phi(0.0) == 0.0
    assert cf.lambda_phi(1.0) == 1.0
    assert cf.lambda_phi(100.0) == pytest.approx(200.0 / 10001.0, rel=1e-14)
    # decay like 2/y
    assert cf.lambda_phi(100.0) == pytest.approx(0.02, rel=1e-3)


def test_z_and_v_values():
    assert cf.z_fn(0.0) == 1.0
    assert cf.z_fn(1.0) == 0.0
    assert cf.v_fn(1.0) == pytest.approx(-1.0, abs=1e-15)
    assert cf.v_fn(0.0) == 1.0
    assert cf.v_fn(10.0) == pytest.approx(9401.0 / 10201.0, rel=1e-14)


@given(st.floats(min_value=1e-6, max_value=1e6))
@settings(max_examples=200, deadline=None)
def test_pythagoras_identity(y):
    assert cf.lambda_phi(y) ** 2 + cf.z_fn(y) ** 2 == pytest.approx(
        1.0, abs=1e-14)


@given(st.floats(min_value=1e-3, max_value=1e3))
@settings(max_examples=200, deadline=None)
def test_potential_identity(y):
    # V = y Z' + Z^2
    assert cf.v_fn(y) == pytest.approx(
        y * cf.z_prime(y) + cf.z_fn(y) ** 2, abs=1e-12)


def test_gamma_values():
    assert cf.gamma_fn(1.0) == pytest.approx(0.0, abs=1e-15)
    assert cf.gamma_fn(2.0) == pytest.approx(
        (8.0 + 8.0 * np.log(2.0) - 0.5) / 20.0, rel=1e-14)
    # asymptote y/4
    assert cf.gamma_fn(100.0) == pytest.approx(25.0, rel=5e-3)
    with np.errstate(divide="ignore", invalid="ignore"):
        assert not np.isfinite(cf.gamma_fn(0.0))


def test_gamma_series_matches_closed_form():
    # continuity across the series crossover
    for y in (0.5e-3, 0.99e-3, 1.01e-3, 2e-3):
        direct = (y**3 + 4 * y * np.log(y) - 1 / y) / (4 * (1 + y * y))
        assert cf.gamma_fn(y) == pytest.approx(direct, rel=1e-10)


def test_gamma_prime_by_differences():
    for y in (0.01, 0.5, 1.0, 3.0, 50.0):
        h = 1e-6 * max(y, 1.0)
        fd = (cf.gamma_fn(y + h) - cf.gamma_fn(y - h)) / (2 * h)
        assert cf.gamma_prime(y) == pytest.approx(fd, rel=1e-7)


def test_wronskian_closed_form():
    y = np.geomspace(1e-2, 1e3, 1000)
    w = cf.lambda_phi_prime(y) * cf.gamma_fn(y) \
        - cf.gamma_prime(y) * cf.lambda_phi(y)
    assert np.max(np.abs(w + 1.0 / y)) < 1e-10


def test_t1_dilogarithm_oracle():
    # the quadrature route must match the closed dilogarithm form
    for y in (0.3, 1.0, 2.0, 7.0, 50.0, 300.0):
        integral = -0.5 * spence(1.0 + y * y)
        y2 = y * y
        expected = ((1 - y2 * y2) * np.log1p(y2) + 2 * y2 * y2 - y2
                    - 4 * y2 * integral) / (2 * y * (1 + y2))
        assert cf.t1_fn(y) == pytest.approx(expected, rel=1e-11)


def test_t1_regular_solution_values():
    # regular inverse of the scaling direction: (1 - pi^2/6)/4 at y = 1
    assert cf.t1_fn(1.0) == pytest.approx((1 - np.pi**2 / 6) / 4, rel=1e-12)
    # origin expansion -y^3/4
    assert cf.t1_fn(0.1) == pytest.approx(-2.5e-4, rel=0.05)
    # growth -y log y + y
    y = 100.0
    assert cf.t1_fn(y) == pytest.approx(-y * np.log(y) + y, rel=0.03)


def test_t1_variation_of_constants_oracle():
    # independent route: lam * int lam gamma x - gamma * int lam^2 x from 0
    def voc(y):
        p = quad(lambda x: cf.lambda_phi(x) * cf.gamma_fn(x) * x, 0, y,
                 epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        q = quad(lambda x: cf.lambda_phi(x) ** 2 * x, 0, y,
                 epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        return cf.lambda_phi(y) * p - cf.gamma_fn(y) * q
    for y in (0.5, 1.0, 4.0):
        assert cf.t1_fn(y) == pytest.approx(voc(y), abs=1e-10)


def test_t1_samples_matches_pointwise():
    y = np.geomspace(1e-4, 500.0, 300)
    samples = cf.t1_samples(y)
    spot = np.array([cf.t1_fn(float(v)) for v in y[::37]])
    assert np.allclose(samples[::37], spot, rtol=1e-10, atol=1e-14)


def test_a_t1_against_differences():
    # A t1 = -t1' + Z t1 / y
    for y in (0.5, 1.0, 3.0, 20.0):
        h = 1e-5
        d = (cf.t1_fn(y + h) - cf.t1_fn(y - h)) / (2 * h)
        expected = -d + cf.z_fn(y) * cf.t1_fn(y) / y
        assert cf.a_t1(y) == pytest.approx(expected, rel=1e-7)


def test_k2_exact_antiderivative():
    for y in (0.01, 0.2, 1.0, 30.0):
        ref = quad(lambda x: cf.lambda_phi(x) ** 2 * x, 0, y,
                   epsabs=1e-14, epsrel=1e-13)[0]
        assert cf.k2_exact(y) == pytest.approx(ref, rel=1e-10, abs=1e-16)


def test_ground_state_map():
    v = cf.ground_state_map(np.array([0.0, 1.0, 1e6]))
    assert np.allclose(v[:, 0], [0, 0, 1])
    assert np.allclose(v[:, 1], [1, 0, 0], atol=1e-15)
    assert v[2, 2] == pytest.approx(-1.0, abs=1e-10)
    rng = np.random.default_rng(1)
    y = rng.uniform(0, 1e3, 10_000)
    norms = np.sqrt((cf.ground_state_map(y) ** 2).sum(axis=0))
    assert np.max(np.abs(norms - 1.0)) < 1e-14


def test_frenet_frame_orthonormal():
    rng = np.random.default_rng(2)
    y = rng.uniform(1e-3, 1e3, 1000)
    e_r, e_tau = cf.frenet_vectors(y)
    q = cf.ground_state_map(y)
    assert np.max(np.abs((e_r * q).sum(axis=0))) < 1e-15
    assert np.max(np.abs((e_tau * q).sum(axis=0))) < 1e-15
    assert np.max(np.abs((e_r ** 2).sum(axis=0) - 1)) < 1e-14
    # e_r at y = 1 points straight down
    e_r1, _ = cf.frenet_vectors(1.0)
    assert np.allclose(e_r1[:, 0], [0, 0, -1])


def test_scaling_derivative_of_bubble():
    # y d/dy Q = lambda_phi e_r, checked by central differences
    y = np.array([0.3, 1.0, 2.5])
    h = 1e-6
    dq = (cf.ground_state_map(y + h) - cf.ground_state_map(y - h)) / (2 * h)
    e_r, _ = cf.frenet_vectors(y)
    lhs = y * dq
    rhs = cf.lambda_phi(y) * e_r
    assert np.max(np.abs(lhs - rhs)) < 1e-8
