"""Comparison of computed approximants with the potential-theoretic predictions."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Mapping, Sequence

import numpy as np

from .hankel import Approximant
from .measure import (MeasureSpec, argument_variation, cauchy_transform, distance_to_intervals, pair,
                      unwrapped_variation)
from .potential import EquilibriumMeasure, green_potential

P = np.polynomial.polynomial

DEFAULT_DELTA = 0.05
DEFAULT_RADIUS = 0.15
RATE_FLOOR = 1e-14
PROBE_CLEARANCE = 1e-3
FIELD_RTOL = 1e-3


class AuditError(ValueError):
    pass


def _arg(w):
    w = np.asarray(w, dtype=complex)
    # a signed zero imaginary part would put a negative real on -pi; use +0
    w = np.where(w.imag == 0, w.real + 0j, w)
    return np.where(w == 0, np.pi, np.angle(w))


def angle(xi, intervals) -> np.ndarray | float:
    """Angle under which the intervals are seen from ``xi``.

    Sum over intervals of ``|Arg(a - xi) - Arg(b - xi)|`` with ``Arg(0) = pi``.
    """
    xi = np.asarray(xi, dtype=complex)
    out = np.zeros(xi.shape)
    for a, b in intervals:
        out = out + np.abs(_arg(a - xi) - _arg(b - xi))
    return float(out) if out.ndim == 0 else out


# -- weak-star convergence ---------------------------------------------------

@dataclass(frozen=True)
class PoleDiagnostics:
    n: int
    poles: np.ndarray = field(repr=False)
    near_S: np.ndarray = field(repr=False)
    outliers: np.ndarray = field(repr=False)
    ks_distance: float
    per_pole_angles: np.ndarray = field(repr=False)
    max_imag: float = 0.0
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "ks_distance": self.ks_distance,
            "near_S": int(len(self.near_S)),
            "outliers": int(len(self.outliers)),
            "max_imag": self.max_imag,
            "flags": list(self.flags),
        }


def weak_star_distance(poles, mu: EquilibriumMeasure, delta: float = DEFAULT_DELTA,
                       n: int | None = None, grid: int = 1000) -> PoleDiagnostics:
    """Sup-distance between the CDF of the near-S poles (real parts) and mu_G."""
    poles = np.asarray(poles, dtype=complex)
    S = mu.support
    dist = distance_to_intervals(poles, S) if poles.size else np.zeros(0)
    near = poles[dist <= delta]
    far = poles[dist > delta]
    angles = angle(poles, S) if poles.size else np.zeros(0)
    n = len(poles) if n is None else n
    if near.size == 0:
        return PoleDiagnostics(n, poles, near, far, 1.0, np.atleast_1d(angles), 0.0, ("no-poles-near-S",))
    x = np.linspace(S[0][0], S[-1][1], grid)
    re = np.sort(near.real)
    empirical = np.searchsorted(re, x, side="right") / len(re)
    ks = float(np.max(np.abs(empirical - mu.cdf(x))))
    return PoleDiagnostics(n, poles, near, far, min(ks, 1.0), np.atleast_1d(angles),
                           float(np.max(np.abs(near.imag))))


# -- rates -------------------------------------------------------------------

@dataclass(frozen=True)
class RateRecord:
    n: int
    error: float
    root_rate: float
    predicted: float
    used: bool = True


@dataclass(frozen=True)
class RateTable:
    records: tuple
    fitted_limit: float
    slope: float
    predicted: float

    @property
    def used(self) -> list[int]:
        return [r.n for r in self.records if r.used]


def rate_table(errors: Mapping[int, float], capacity: float, flagged: Sequence[int] = (),
               floor: float = RATE_FLOOR) -> RateTable:
    """n-th root rates and their extrapolated limit.

    ``log(error^(1/2n))`` is fitted by least squares as ``alpha + beta / n``
    over the usable entries (not flagged, error above ``floor``); the limit
    estimate is ``exp(alpha)``.
    """
    predicted = float(np.exp(-1 / capacity))
    flagged = set(flagged)
    recs = []
    for n in sorted(errors):
        e = float(errors[n])
        if n < 1:
            raise ValueError("degrees must be positive")
        root = e ** (1 / (2 * n)) if e > 0 else 0.0
        recs.append(RateRecord(n, e, root, predicted, n not in flagged and e > floor))
    use = [r for r in recs if r.used]
    if len(use) < 5:
        raise ValueError(f"need at least 5 usable degrees, have {len(use)}")
    inv = np.array([1 / r.n for r in use])
    y = np.log([r.root_rate for r in use])
    A = np.stack([np.ones_like(inv), inv], axis=1)
    (alpha, beta), *_ = np.linalg.lstsq(A, y, rcond=None)
    return RateTable(tuple(recs), float(np.exp(alpha)), float(beta), predicted)


# -- pole attraction ---------------------------------------------------------

@dataclass(frozen=True)
class AttractionRecord:
    eta: complex
    m_eta: int
    radius: float
    count_inside: dict
    lower_ok: bool
    threshold: int | None
    theta_eta: float

    def to_dict(self) -> dict:
        return {
            "eta": [self.eta.real, self.eta.imag],
            "m_eta": self.m_eta,
            "radius": self.radius,
            "counts": {str(n): c for n, c in sorted(self.count_inside.items())},
            "lower_ok": self.lower_ok,
            "threshold": self.threshold,
            "theta_eta": self.theta_eta,
        }


def check_radius(spec: MeasureSpec, radius: float) -> None:
    etas = [p.eta for p in spec.poles]
    for i, a in enumerate(etas):
        if distance_to_intervals(np.array([a]), spec.support)[0] <= radius:
            raise AuditError(f"ball of radius {radius} around {a} meets the support")
        for b in etas[i + 1:]:
            if abs(a - b) <= 2 * radius:
                raise AuditError(f"balls of radius {radius} around {a} and {b} overlap")


def attraction_audit(poles_by_n: Mapping[int, np.ndarray], spec: MeasureSpec,
                     radius: float = DEFAULT_RADIUS) -> list[AttractionRecord]:
    """Count approximant poles near each polar singularity, per degree.

    ``threshold`` is the least degree from which every computed count reaches
    the multiplicity; ``lower_ok`` requires such a tail of at least three
    degrees (or all of them when fewer were computed).
    """
    check_radius(spec, radius)
    ns = sorted(poles_by_n)
    out = []
    for p in spec.poles:
        counts = {n: int(np.sum(np.abs(np.asarray(poles_by_n[n]) - p.eta) < radius)) for n in ns}
        threshold = None
        for n in reversed(ns):
            if counts[n] >= p.multiplicity:
                threshold = n
            else:
                break
        tail = sum(1 for n in ns if threshold is not None and n >= threshold)
        lower_ok = threshold is not None and tail >= min(3, len(ns))
        out.append(AttractionRecord(complex(p.eta), p.multiplicity, radius, counts, lower_ok,
                                    threshold, angle(p.eta, spec.support)))
    return out


def outer_variation(spec: MeasureSpec, w: Callable | None) -> float:
    """Variation of a continuous argument of ``w`` over the support (0 for w = 1)."""
    if w is None:
        return 0.0
    return sum(unwrapped_variation(lambda t: w(t.astype(complex)), a, b) for a, b in spec.support)


def upper_bound_constant(spec: MeasureSpec, v_phi: float, v_w: float) -> float:
    """V = V(arg phi) + V_W + (m + 2 s' - 1) pi + 2 sum m(eta) theta(eta).

    Polar singularities never lie on the support here, so s' = 0.
    """
    m = len(spec.intervals)
    polar = sum(p.multiplicity * angle(p.eta, spec.support) for p in spec.poles)
    return v_phi + v_w + (m - 1) * np.pi + 2 * polar


def upper_audit(records: Sequence[AttractionRecord], spec: MeasureSpec, v_phi: float,
                v_w: float) -> dict:
    """Per degree, sum_eta (count - m(eta)) (pi - theta(eta)) against V."""
    V = upper_bound_constant(spec, v_phi, v_w)
    ns = sorted(records[0].count_inside) if records else []
    lhs = {n: float(sum((r.count_inside[n] - r.m_eta) * (np.pi - r.theta_eta) for r in records))
           for n in ns}
    return {"V": float(V), "lhs": lhs, "ok": all(v <= V for v in lhs.values())}


# -- angle bound ---------------------------------------------------------------

@dataclass(frozen=True)
class AngleBound:
    lhs: float
    rhs: float
    ok: bool
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "ok": self.ok, "flags": list(self.flags)}


def angle_bound_audit(poles, spec: MeasureSpec, w: Callable | None = None,
                      v_phi: float | None = None) -> AngleBound:
    """lhs = sum (pi - theta(xi_j)) against
    rhs = V(arg phi) + V(arg w) + sum m(eta) theta(eta) + (m + s - 1) pi.

    ``w`` is the outer factor of the singular vector, or None when it is 1.
    """
    poles = np.asarray(poles, dtype=complex)
    S = spec.support
    lhs = float(np.sum(np.pi - angle(poles, S))) if poles.size else 0.0
    v_phi = argument_variation(spec) if v_phi is None else v_phi
    v_w = outer_variation(spec, w)
    flags = ()
    if not np.isfinite(v_w) or not np.isfinite(v_phi):
        flags = ("argument-unresolved",)
    polar = sum(p.multiplicity * angle(p.eta, S) for p in spec.poles)
    rhs = float(v_phi + v_w + polar + (len(spec.intervals) + spec.degree - 1) * np.pi)
    # rounding allowance: poles on S carry imaginary parts at machine level
    return AngleBound(lhs, rhs, bool(lhs <= rhs + 1e-8 * (1 + rhs)), flags)


# -- convergence in capacity ---------------------------------------------------

@dataclass(frozen=True)
class FieldRow:
    z: complex
    observed: float
    predicted: float

    @property
    def ratio(self) -> float:
        return self.observed / self.predicted


def _aak_error_inside(spec: MeasureSpec, approx: Approximant, z: complex) -> complex:
    v = approx.triple.v

    def h(t):
        return (P.polyval(t, v) / (z - t))[:, None]
    total = 0j
    if spec.intervals:
        total += complex(pair(MeasureSpec(spec.intervals, ()), h, singularities=[z]).value[0])
    for p in spec.poles:
        d = z - p.eta
        vt = [P.polyval(p.eta, P.polyder(v, j)) / factorial(j) for j in range(p.multiplicity)]
        for j, r in enumerate(p.coeffs):
            total += r * sum(vt[a] / d ** (j - a + 1) for a in range(j + 1))
    return total / P.polyval(z, v)


def _aak_error_outside(approx: Approximant, z: complex) -> complex:
    # On T, F_N - g_n = sigma u(1/z) / (z v(z)) is accurate relative to sigma, while
    # a long v cannot be evaluated off T. Split the samples into the part analytic
    # outside D and the part analytic inside the outer singularities of g_n.
    t = approx.triple
    N = len(t.v)
    G = 1 << int(np.ceil(np.log2(max(4 * N, 4096))))
    c = np.zeros(G, dtype=complex)
    c[(np.arange(N) + 1) % G] = t.sigma * t.u
    num = np.fft.fft(c)
    den = np.fft.ifft(np.concatenate([t.v, np.zeros(G - N)])) * G
    e = num / den
    neg = np.fft.ifft(e)[: G // 2]       # multiplies z^(-m)
    pos = np.fft.fft(e)[: G // 2] / G    # multiplies z^m
    noise = 64 * np.finfo(float).eps * np.max(np.abs(e))
    big = np.flatnonzero(np.abs(pos[1:]) > noise)
    M = int(big[-1]) + 2 if big.size else 1
    inner = complex(P.polyval(1 / z, neg))
    outer = complex(P.polyval(z, np.concatenate([[0], pos[1:M]])))
    total = inner + outer
    # coefficient noise and the dropped tail both grow like |z|^M
    r = abs(z)
    err = noise * r ** M + (abs(pos[M - 1]) * r ** (M - 1) if M > 1 else 0.0)
    if M >= G // 2 - 1 or not err <= FIELD_RTOL * abs(total):
        raise AuditError(f"probe {z} is too far out: the continuation of g_{approx.n} from T "
                         f"is accurate only to {err:.2g}")
    return total


def aak_error(spec: MeasureSpec, approx: Approximant, z: complex) -> complex:
    """F - g_n at z without forming the difference of two nearly equal values.

    Inside D this is ``(1 / v(z)) int v(t) / (z - t) d(lambda)(t)``, exact
    because P_+(F_N v) = P_+(F v) when deg v < N; the polar terms use exact
    Taylor coefficients, since a contour around a pole near T would reach
    where a long v is huge. Outside D a long v cannot be evaluated at all,
    so the error of the truncated symbol is summed from its Laurent series
    on T; the analytic part of g_n has singularities out there, and probes
    beyond them are refused. The discarded moments add at most
    ``tail_bound / |z|^(N+1)``.
    """
    if abs(z) > 1:
        return _aak_error_outside(approx, z)
    return _aak_error_inside(spec, approx, z)


def observed_error(spec: MeasureSpec, approx: Approximant, z: complex) -> float:
    if approx.method == "aak" and approx.triple is not None:
        return abs(aak_error(spec, approx, z))
    return abs(cauchy_transform(spec, z) - approx(z))


def distance_to_reflection(z: complex, intervals) -> float:
    """Distance from z to S* = {1/x : x in S}, a union of real segments and rays."""
    best = np.inf
    for a, b in intervals:
        if a < 0 < b:
            pieces = [(-np.inf, 1 / a), (1 / b, np.inf)]
        elif a == 0 or b == 0:
            end = 1 / (b if a == 0 else a)
            pieces = [(end, np.inf)] if end > 0 else [(-np.inf, end)]
        else:
            pieces = [(min(1 / a, 1 / b), max(1 / a, 1 / b))]
        for lo, hi in pieces:
            x = min(max(z.real, lo), hi)
            best = min(best, abs(z - x))
    return float(best)


def check_probe(spec: MeasureSpec, approx: Approximant, z: complex) -> None:
    S = spec.support
    if distance_to_intervals(np.array([z]), S)[0] < PROBE_CLEARANCE:
        raise AuditError(f"probe {z} is too close to the support")
    if distance_to_reflection(z, S) < PROBE_CLEARANCE:
        raise AuditError(f"probe {z} is too close to the reflected support")
    for p in spec.poles:
        if abs(z - p.eta) < PROBE_CLEARANCE:
            raise AuditError(f"probe {z} is too close to the pole {p.eta}")
    if approx.poles.size and np.min(np.abs(approx.poles - z)) < PROBE_CLEARANCE:
        raise AuditError(f"probe {z} is too close to a pole of the approximant")


def predicted_root_error(mu: EquilibriumMeasure, z: complex) -> float:
    """exp(U(z) - 1/cap) inside, exp(-1/cap) on T, exp(-1/cap - U(1/conj z)) outside."""
    c = mu.potential_constant
    r = abs(z)
    if abs(r - 1) < 1e-12:
        return float(np.exp(-c))
    if r < 1:
        return float(np.exp(green_potential(mu, z) - c))
    return float(np.exp(-c - green_potential(mu, 1 / np.conj(z))))


def capacity_convergence_field(spec: MeasureSpec, approx: Approximant, mu: EquilibriumMeasure,
                               probes) -> list[FieldRow]:
    """Observed |F - g_n|^(1/2n) against the predicted limit at each probe."""
    rows = []
    for z in probes:
        z = complex(z)
        check_probe(spec, approx, z)
        obs = observed_error(spec, approx, z) ** (1 / (2 * approx.n))
        rows.append(FieldRow(z, float(obs), predicted_root_error(mu, z)))
    return rows
