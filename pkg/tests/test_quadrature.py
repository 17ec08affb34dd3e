import numpy as np
import pytest

from aaklab.quadrature import QuadratureError, fixed, gauss_legendre, integrate


def test_gauss_legendre_is_exact_for_polynomials():
    x, w = gauss_legendre(10)
    for k in range(20):
        assert np.dot(w, x ** k) == pytest.approx((1 + (-1) ** k) / (k + 1), abs=1e-14)


def test_vector_integrand():
    def f(t):
        return np.stack([np.exp(t), np.cos(t), 1 / (1.01 - t)], axis=1)
    got = integrate(f, -1, 1, tol=1e-13)
    want = [np.e - 1 / np.e, 2 * np.sin(1), np.log(2.01 / 0.01)]
    np.testing.assert_allclose(got, want, rtol=1e-12)


def test_fixed_rule_agrees_with_adaptive_on_smooth_data():
    def f(t):
        return np.exp(1j * t)[:, None]
    assert fixed(f, 0, 2, 4)[0] == pytest.approx(integrate(f, 0, 2)[0], abs=1e-14)


def test_unreachable_tolerance_fails_fast():
    rng = np.random.default_rng(0)

    def noisy(t):
        return (1 + 1e-8 * rng.standard_normal(t.shape))[:, None]
    with pytest.raises(QuadratureError):
        integrate(noisy, 0, 1, tol=1e-15)


def test_bad_interval():
    with pytest.raises(ValueError):
        integrate(lambda t: t[:, None], 1, 1)
