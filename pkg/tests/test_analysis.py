import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aaklab.analysis import (AuditError, PROBE_CLEARANCE, angle, angle_bound_audit, attraction_audit,
                             capacity_convergence_field, check_radius, predicted_root_error, rate_table,
                             weak_star_distance)
from aaklab.hankel import aak_approximant, build_hankel, singular_triples
from aaklab.measure import MeasureSpec, MomentSequence, PolarTerm, argument_variation, moments
from aaklab.potential import equilibrium_measure
from aaklab.rational import circle_target, grid_size, multistart


def test_angle_examples():
    assert angle(0.1, [(-0.5, 0.5)]) == pytest.approx(np.pi)
    assert angle(-0.5, [(-0.5, 0.5)]) == pytest.approx(np.pi)
    # Arg(0) = pi makes the right endpoint see the interval under angle 0
    assert angle(0.5, [(-0.5, 0.5)]) == 0
    assert angle(1j, [(-1, 1)]) == pytest.approx(np.pi / 2)
    assert angle(2, [(-0.5, 0.5)]) == 0


@settings(max_examples=200, deadline=None)
@given(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False))
def test_angle_range(xi):
    S = [(-0.8, -0.4), (-0.1, 0.2), (0.5, 0.9)]
    a = angle(xi, S)
    assert -1e-12 <= a <= np.pi + 1e-12
    on_S = xi.imag == 0 and any(lo <= xi.real < hi for lo, hi in S)
    if on_S:
        assert a == pytest.approx(np.pi)


def quantiles(mu, u):
    x = np.linspace(mu.support[0][0], mu.support[-1][1], 20001)
    F = mu.cdf(x)
    keep = np.concatenate([[True], np.diff(F) > 0])
    return np.interp(u, F[keep], x[keep])


def test_ks_of_equilibrium_samples(three_mu):
    rng = np.random.default_rng(0)
    poles = quantiles(three_mu, rng.uniform(size=200)) + 0j
    pd = weak_star_distance(poles, three_mu)
    assert pd.ks_distance <= 0.08
    assert len(pd.near_S) + len(pd.outliers) == len(pd.poles)


def test_ks_of_a_point_mass(markov_mu):
    pd = weak_star_distance(np.full(10, -0.5 + 0j), markov_mu)
    assert pd.ks_distance == pytest.approx(1.0, abs=1e-12)


def test_ks_without_near_poles(markov_mu):
    pd = weak_star_distance(np.array([0.9j, -0.8]), markov_mu)
    assert pd.ks_distance == 1.0
    assert "no-poles-near-S" in pd.flags
    assert len(pd.outliers) == 2


def test_ks_decreases_for_the_three_interval_example(three_aak_512, three_mu):
    ks = {n: weak_star_distance(three_aak_512[n].poles, three_mu).ks_distance for n in (8, 13, 20)}
    assert ks[13] < ks[8]
    assert ks[20] <= 0.25


def test_outliers_are_bounded(three_aak_512, three_mu):
    worst = []
    for delta in (0.02, 0.05, 0.1, 0.2):
        counts = [len(weak_star_distance(three_aak_512[n].poles, three_mu, delta).outliers)
                  for n in range(5, 21)]
        worst.append(max(counts))
    assert all(b <= a for a, b in zip(worst, worst[1:]))
    # poles attracted by the polar terms (multiplicities 2+3+4) plus a few more, not growing with n
    assert worst[1] <= 12


def test_poles_invariant_under_unimodular_scaling(three_aak_256):
    c = np.exp(0.7j)
    ms = three_aak_256.moments
    scaled = MomentSequence(ms.N, c * ms.m, ms.tail_bound)
    tr = singular_triples(build_hankel(scaled), 8)
    a = aak_approximant(scaled, tr[8])
    np.testing.assert_allclose(np.sort_complex(a.poles), np.sort_complex(three_aak_256[8].poles), atol=1e-8)


def test_rate_table_recovers_geometric_rate():
    rho = 0.37
    table = rate_table({n: rho ** (2 * n) for n in range(3, 12)}, capacity=1.0)
    assert table.fitted_limit == pytest.approx(rho, rel=1e-12)
    assert table.predicted == pytest.approx(np.exp(-1))


def test_rate_table_floor_and_flags():
    errors = {n: 0.3 ** (2 * n) for n in range(3, 30)}
    table = rate_table(errors, 1.0, flagged=[4])
    assert 4 not in table.used
    assert all(errors[n] > 1e-14 for n in table.used)
    assert max(table.used) < 29
    with pytest.raises(ValueError):
        rate_table({n: 0.5 ** n for n in range(1, 5)}, 1.0)


def test_markov_rate(markov_aak, markov_mu):
    table = rate_table({n: markov_aak[n].sigma for n in range(5, 26)}, markov_mu.capacity,
                       [n for n in range(5, 26) if markov_aak[n].flags])
    assert abs(table.fitted_limit - np.exp(-1 / markov_mu.capacity)) <= 0.05


def test_attraction_dominant_pole(simple_pole):
    ms = moments(simple_pole, 32)
    tr = singular_triples(build_hankel(ms), 4)
    poles = {n: aak_approximant(ms, tr[n]).poles for n in range(1, 5)}
    (rec,) = attraction_audit(poles, simple_pole)
    assert all(c >= 1 for c in rec.count_inside.values())
    assert rec.lower_ok and rec.threshold == 1


def test_attraction_three_interval(three, three_aak_512):
    recs = attraction_audit({13: three_aak_512[13].poles}, three, 0.15)
    counts = [r.count_inside[13] for r in recs]
    assert counts[0] >= 2 and counts[1] >= 3 and counts[2] >= 4


def test_attraction_radius_checked(three):
    with pytest.raises(AuditError):
        check_radius(three, 5.0)
    spec = MeasureSpec(three.intervals, (PolarTerm(0.6j, (1,)), PolarTerm(0.7j, (1,))))
    with pytest.raises(AuditError):
        check_radius(spec, 0.15)


def test_angle_bound_trivial_cases(markov):
    ab = angle_bound_audit(np.array([-0.3, 0.0, 0.2]) + 0j, markov)
    assert ab.lhs == pytest.approx(0, abs=1e-12) and ab.ok
    # real Markov weight: no polar terms, w = 1
    assert ab.rhs == pytest.approx(argument_variation(markov), abs=1e-12)


def test_angle_bound_three_interval(three, three_aak_512):
    a = three_aak_512[13]
    assert angle_bound_audit(a.poles, three, a.split.w).ok


def test_field_on_the_circle(markov_mu):
    assert predicted_root_error(markov_mu, np.exp(0.4j)) == pytest.approx(np.exp(-1 / markov_mu.capacity))


def test_field_markov_exterior(markov, markov_aak, markov_mu):
    (row,) = capacity_convergence_field(markov, markov_aak[8], markov_mu, [2j])
    assert 0.8 <= row.ratio <= 1.25
    target = circle_target(markov, grid_size(256, 8))
    point = multistart(target, 8, markov_aak[8].poles, seed=8)
    (row,) = capacity_convergence_field(markov, point.approximant(), markov_mu, [2j])
    assert 0.8 <= row.ratio <= 1.25


def test_field_interior_shape(three, three_aak_512, three_mu):
    a = three_aak_512[13]
    (row,) = capacity_convergence_field(three, a, three_mu, [0.9j])
    on_circle = a.sigma ** (1 / 26)
    assert row.observed / on_circle <= 1.3 * row.predicted / np.exp(-1 / three_mu.capacity)


def test_field_probe_refusals(markov, markov_aak, markov_mu, three, three_aak_512, three_mu):
    with pytest.raises(AuditError):
        capacity_convergence_field(markov, markov_aak[4], markov_mu, [0.1 + PROBE_CLEARANCE / 2 * 1j])
    with pytest.raises(AuditError):
        capacity_convergence_field(markov, markov_aak[4], markov_mu, [2.5])
    with pytest.raises(AuditError):
        capacity_convergence_field(three, three_aak_512[13], three_mu, [1.5j])
