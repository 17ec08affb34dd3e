import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ellipk

from aaklab.potential import (EquilibriumError, equilibrium_measure, green_disk, green_energy,
                              green_potential, log_panel_integral, mobius, mobius_intervals,
                              predicted_rate, rate_from_capacity)


def segment_capacity(r):
    """Green capacity of [-r, r] in the unit disk from the Groetzsch ring modulus."""
    s = r * r
    return 4 * ellipk(s * s) / (np.pi * ellipk(1 - s * s))


def interior_probes(intervals, count=200, margin=0.01):
    pts = []
    for a, b in intervals:
        h = margin * (b - a)
        pts.append(np.linspace(a + h, b - h, count) + 0.37 * (b - a) / count)
    return np.concatenate(pts)


def test_green_function_examples():
    assert green_disk(0.5, 0) == pytest.approx(np.log(2), abs=1e-15)
    assert green_disk(0.3, 0.6j) == pytest.approx(green_disk(0.6j, 0.3), abs=1e-15)
    assert 0 < green_disk(0.999 * np.exp(0.7j), 0.4) <= 1e-2


@pytest.mark.parametrize("z, t", [(0.2, 0.2), (1.0, 0.1), (0.1, 1.5j)])
def test_green_function_domain(z, t):
    with pytest.raises(ValueError):
        green_disk(z, t)


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.9, 0.9), st.floats(0.01, 0.5), st.complex_numbers(max_magnitude=3))
def test_log_panel_integral_matches_quadrature(lo, width, z):
    from aaklab.quadrature import integrate
    hi = min(lo + width, 0.95)
    if abs(z.imag) < 1e-3 and lo - 1e-3 <= z.real <= hi + 1e-3:
        return
    want = integrate(lambda t: np.log(np.abs(z - t))[:, None], lo, hi, tol=1e-14)[0]
    assert log_panel_integral(z, lo, hi) == pytest.approx(want, abs=1e-12)


def test_segment_capacity_oracle(markov_mu):
    assert markov_mu.capacity == pytest.approx(segment_capacity(0.5), rel=1e-5)
    assert equilibrium_measure([(-0.3, 0.3)], 800).capacity == pytest.approx(segment_capacity(0.3), rel=1e-5)


def test_symmetric_segment(markov_mu):
    mu = markov_mu
    assert mu.mass() == pytest.approx(1, abs=1e-10)
    assert np.all(mu.density >= 0)
    np.testing.assert_allclose(mu.density, mu.density[::-1], atol=1e-8 * mu.density.max())
    coarse = equilibrium_measure([(-0.5, 0.5)], 400)
    assert abs(coarse.capacity - mu.capacity) <= 1e-4


def test_potential_is_flat_on_the_support(markov_mu, three_mu):
    for mu in (markov_mu, three_mu):
        U = green_potential(mu, interior_probes(mu.support))
        assert np.max(np.abs(U / mu.potential_constant - 1)) <= 1e-5


def test_three_intervals(three_mu):
    mu = three_mu
    assert mu.mass() == pytest.approx(1, abs=1e-10)
    assert np.all(mu.density >= 0)
    for a, b in mu.support:
        assert mu.cdf(b) - mu.cdf(a) > 0.05


def test_energy_equals_equilibrium_constant(markov_mu):
    assert green_energy(markov_mu) == pytest.approx(markov_mu.potential_constant, rel=1e-5)


def test_potential_examples(markov_mu):
    assert abs(green_potential(markov_mu, 0.9995j)) <= 1e-3
    u = green_potential(markov_mu, 0.9j)
    assert 0 < u < markov_mu.potential_constant


@pytest.mark.parametrize("w", [-0.3, 0.2, 0.5])
def test_moebius_invariance(markov_mu, w):
    image = mobius_intervals(markov_mu.support, w)
    mu_w = equilibrium_measure(image, 800)
    assert abs(mu_w.capacity - markov_mu.capacity) <= 1e-4
    # the equilibrium measure is carried along: same mass below x and below M_w(x)
    x = np.linspace(-0.45, 0.45, 7)
    np.testing.assert_allclose(mu_w.cdf(mobius(x, w)), markov_mu.cdf(x), atol=2e-3)


def test_capacity_grows_with_the_set():
    caps = [equilibrium_measure([(-r, r)], 400).capacity for r in (0.1, 0.3, 0.5)]
    assert caps[0] < caps[1] < caps[2]
    nested = equilibrium_measure([(-0.5, -0.1), (0.2, 0.5)], 400).capacity
    assert nested < caps[2]


def test_predicted_rate(markov_mu):
    assert rate_from_capacity(1.0) == pytest.approx(np.exp(-1))
    assert predicted_rate([(-0.5, 0.5)]) == pytest.approx(np.exp(-1 / markov_mu.capacity), abs=1e-12)
    rates = [predicted_rate([(-e, e)], 400) for e in (0.5, 0.2, 0.05)]
    assert rates[0] > rates[1] > rates[2]


@pytest.mark.parametrize("support, M", [
    ([(-0.5, 0.5)], 10),
    ([(0.5, 0.2)], 100),
    ([(-1.0, 0.2)], 100),
    ([(-0.5, 0.1), (0.0, 0.3)], 100),
    ([], 100),
])
def test_invalid_input(support, M):
    with pytest.raises(ValueError):
        equilibrium_measure(support, M)


def test_potential_outside_disk_refused(markov_mu):
    with pytest.raises(ValueError):
        green_potential(markov_mu, 1.2)


def test_equilibrium_error_is_a_runtime_error():
    assert issubclass(EquilibriumError, RuntimeError)
