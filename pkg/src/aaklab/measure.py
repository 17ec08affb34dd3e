"""Complex measures on (-1, 1) plus polar terms, their Cauchy transforms and moments.

A :class:`MeasureSpec` holds interval terms ``density(t) dt`` on disjoint
subintervals of (-1, 1) and polar terms ``sum_k r_k / (z - eta)^(k+1)``.
Polar terms act on analytic test functions ``h`` through their Taylor
coefficients at ``eta``: the term ``r_k`` contributes ``r_k h^(k)(eta) / k!``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Sequence

import numpy as np

from .density import DensityExpr, parse_density
from .quadrature import QuadratureError, integrate

QUAD_TOL = 1e-12


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class IntervalTerm:
    a: float
    b: float
    density: DensityExpr

    def __post_init__(self):
        if not (-1.0 < self.a < self.b < 1.0):
            raise MeasureError(f"interval [{self.a}, {self.b}] must satisfy -1 < a < b < 1")
        values = self.density.check_on(self.a, self.b, samples=8193)
        if not np.min(np.abs(values)) > 0:
            raise MeasureError(f"density {self.density.source!r} vanishes on [{self.a}, {self.b}]")

    @classmethod
    def from_text(cls, a: float, b: float, src: str) -> "IntervalTerm":
        return cls(float(a), float(b), parse_density(src))


@dataclass(frozen=True)
class PolarTerm:
    eta: complex
    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "eta", complex(self.eta))
        object.__setattr__(self, "coeffs", tuple(complex(c) for c in self.coeffs))
        if not abs(self.eta) < 1:
            raise MeasureError(f"pole {self.eta} must lie in the open unit disk")
        if not self.coeffs or self.coeffs[-1] == 0:
            raise MeasureError(f"pole {self.eta}: last coefficient must be nonzero")

    @property
    def multiplicity(self) -> int:
        return len(self.coeffs)

    def rational(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        d = z - self.eta
        for k, r in enumerate(self.coeffs):
            if r != 0:
                out += r / d ** (k + 1)
        return out


@dataclass(frozen=True)
class MeasureSpec:
    intervals: tuple
    poles: tuple = ()

    def __post_init__(self):
        ivs = tuple(sorted(self.intervals, key=lambda iv: iv.a))
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "poles", tuple(self.poles))
        if not ivs:
            raise MeasureError("at least one interval term is required")
        for left, right in zip(ivs, ivs[1:]):
            if not left.b < right.a:
                raise MeasureError(f"intervals [{left.a}, {left.b}] and [{right.a}, {right.b}] overlap")
        etas = [p.eta for p in self.poles]
        if len(set(etas)) != len(etas):
            raise MeasureError("pole locations must be distinct")
        for eta in etas:
            for iv in ivs:
                if eta in (complex(iv.a), complex(iv.b)):
                    raise MeasureError(f"pole {eta} sits on an interval endpoint")

    # -- geometry --
    @property
    def support(self) -> list[tuple[float, float]]:
        return [(iv.a, iv.b) for iv in self.intervals]

    @property
    def degree(self) -> int:
        """Degree s of the denominator of the rational part."""
        return sum(p.multiplicity for p in self.poles)

    @property
    def radius(self) -> float:
        r = max(max(abs(iv.a), abs(iv.b)) for iv in self.intervals)
        return max([r] + [abs(p.eta) for p in self.poles])

    def distance_to_support(self, z) -> np.ndarray:
        return distance_to_intervals(z, self.support)

    def denominator(self, z) -> np.ndarray:
        """Q_s(z) = prod (z - eta)^m(eta)."""
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=complex)
        for p in self.poles:
            out *= (z - p.eta) ** p.multiplicity
        return out

    # -- serialization --
    def to_dict(self) -> dict:
        return {
            "intervals": [{"a": iv.a, "b": iv.b, "density": iv.density.source} for iv in self.intervals],
            "poles": [{"eta": [p.eta.real, p.eta.imag],
                       "coeffs": [[c.real, c.imag] for c in p.coeffs]} for p in self.poles],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MeasureSpec":
        try:
            intervals = [IntervalTerm.from_text(d["a"], d["b"], d["density"]) for d in data["intervals"]]
            poles = [PolarTerm(_to_complex(d["eta"]), [_to_complex(c) for c in d["coeffs"]])
                     for d in data.get("poles", [])]
        except (KeyError, TypeError) as exc:
            raise MeasureError(f"malformed measure description: {exc!r}") from exc
        return cls(tuple(intervals), tuple(poles))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "MeasureSpec":
        return cls.from_dict(json.loads(text))


def _to_complex(pair) -> complex:
    if isinstance(pair, (int, float)):
        return complex(pair)
    re_, im_ = pair
    return complex(float(re_), float(im_))


def distance_to_intervals(z, intervals: Sequence[tuple[float, float]]) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    best = np.full(z.shape, np.inf)
    for a, b in intervals:
        x = np.clip(z.real, a, b)
        best = np.minimum(best, np.abs(z - x))
    return best


@dataclass(frozen=True)
class MomentSequence:
    N: int
    m: np.ndarray = field(repr=False)
    tail_bound: float = 0.0  # majorant of sum_{k >= N} |m_k|, 0 when unknown

    def __post_init__(self):
        m = np.asarray(self.m, dtype=complex)
        if m.shape != (self.N,):
            raise ValueError(f"expected {self.N} moments, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def series(self, z) -> np.ndarray:
        """F_N(z) = sum_k m_k z^(-k-1), by Horner in 1/z."""
        w = 1.0 / np.asarray(z, dtype=complex)
        acc = np.zeros(w.shape, dtype=complex)
        for mk in self.m[::-1]:
            acc = acc * w + mk
        return acc * w

    def on_circle(self, gridsize: int) -> np.ndarray:
        """F_N at the points exp(2 pi i j / gridsize)."""
        if gridsize < self.N + 1:
            # fold the series onto the grid (aliasing is exact on the roots of unity)
            coeffs = np.zeros(gridsize, dtype=complex)
            np.add.at(coeffs, (np.arange(self.N) + 1) % gridsize, self.m)
        else:
            coeffs = np.zeros(gridsize, dtype=complex)
            coeffs[1:self.N + 1] = self.m
        return np.fft.fft(coeffs)


# -- operations --------------------------------------------------------------

def cauchy_transform(spec: MeasureSpec, z, tol: float = QUAD_TOL) -> np.ndarray | complex:
    """Evaluate F(z) = int dmu(t)/(z - t) + sum of polar terms.

    ``z`` may be a scalar or an array; points on the support or at a pole
    raise :class:`MeasureError`.
    """
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if np.any(spec.distance_to_support(zz) <= 1e-14):
        raise MeasureError("Cauchy transform evaluated on the support of the measure")
    for p in spec.poles:
        if np.any(np.abs(zz - p.eta) <= 1e-14):
            raise MeasureError(f"Cauchy transform evaluated at the pole {p.eta}")
    out = np.zeros(zz.shape, dtype=complex)
    for iv in spec.intervals:
        def f(t, iv=iv):
            return iv.density(t)[:, None] / (zz[None, :] - t[:, None])
        try:
            out += integrate(f, iv.a, iv.b, tol=tol)
        except QuadratureError as exc:
            raise MeasureError(str(exc)) from exc
    for p in spec.poles:
        out += p.rational(zz)
    out = out.reshape(np.shape(z))
    return complex(out) if scalar else out


def moments(spec: MeasureSpec, N: int, tol: float = QUAD_TOL) -> MomentSequence:
    """Moments m_k = int t^k d(lambda)(t), k < N, including the polar part."""
    if N < 1:
        raise ValueError("N must be at least 1")
    k = np.arange(N)
    m = np.zeros(N, dtype=complex)
    for iv in spec.intervals:
        def f(t, iv=iv):
            return iv.density(t)[:, None] * t[:, None] ** k[None, :]
        try:
            m += integrate(f, iv.a, iv.b, tol=tol)
        except QuadratureError as exc:
            raise MeasureError(str(exc)) from exc
    m += polar_moments(spec.poles, N)
    return MomentSequence(N, m, truncation_tail(spec, N))


def truncation_tail(spec: MeasureSpec, N: int) -> float:
    """Majorant of the discarded moments, sum_{k >= N} |m_k|."""
    r = spec.radius
    # run the bound far enough that the geometric remainder is negligible
    K = N + max(64, int(np.ceil(60 / max(-np.log(r), 1e-3))))
    return float(np.sum(moment_bound(spec, K)[N:]))


def polar_moments(poles: Sequence[PolarTerm], N: int) -> np.ndarray:
    """Exact moments of the polar part: r_l * C(k, l) * eta^(k-l)."""
    m = np.zeros(N, dtype=complex)
    for p in poles:
        for l, r in enumerate(p.coeffs):
            if r == 0 or l >= N:
                continue
            ks = np.arange(l, N)
            binom = np.array([comb(int(kk), l) for kk in ks], dtype=float)
            m[l:] += r * binom * p.eta ** (ks - l)
    return m


def moment_bound(spec: MeasureSpec, N: int) -> np.ndarray:
    """Majorant for |m_k| computed from the measure description alone.

    Interval terms contribute ``max|density| * length * r^k`` with
    ``r = max(|a|, |b|)``; polar terms contribute ``|r_l| C(k, l) |eta|^(k-l)``.
    """
    k = np.arange(N, dtype=float)
    bound = np.zeros(N)
    for iv in spec.intervals:
        dmax = np.max(np.abs(iv.density.check_on(iv.a, iv.b, samples=8193)))
        r = max(abs(iv.a), abs(iv.b))
        bound += 1.01 * dmax * (iv.b - iv.a) * r ** k
    bound += np.abs(polar_moments(
        [PolarTerm(abs(p.eta) + 0j, [abs(c) for c in p.coeffs]) for p in spec.poles], N))
    return bound


def unwrapped_variation(values_fn: Callable, a: float, b: float, points: int = 4096,
                        rtol: float = 1e-6, max_refine: int = 4) -> float:
    """Total variation of a continuous argument of ``values_fn`` on ``[a, b]``.

    Sampled on ``points`` nodes, refined by 4x until the estimate changes by
    less than ``rtol``. Returns ``inf`` when adjacent samples of the finest
    grid still differ in argument by more than pi/2 (unresolved).
    """
    prev = None
    n = points
    for _ in range(max_refine + 1):
        t = np.linspace(a, b, n)
        phase = np.unwrap(np.angle(values_fn(t)))
        steps = np.abs(np.diff(phase))
        var = float(np.sum(steps))
        if prev is not None and abs(var - prev) < rtol:
            return var if steps.max() <= np.pi / 2 else float("inf")
        prev = var
        n = 4 * (n - 1) + 1
    return var if steps.max() <= np.pi / 2 else float("inf")


def argument_variation(spec: MeasureSpec) -> float:
    """Total variation of the argument of the density, summed over the intervals."""
    return sum(unwrapped_variation(iv.density, iv.a, iv.b) for iv in spec.intervals)


# -- pairing with analytic test functions -------------------------------------

def taylor_at(h: Callable, center: complex, count: int, radius: float, points: int = 128) -> np.ndarray:
    """First ``count`` Taylor coefficients of ``h`` at ``center`` by the trapezoid rule on a circle.

    ``h`` maps a 1-D complex array to shape ``(len, ...)``.
    """
    theta = 2 * np.pi * np.arange(points) / points
    nodes = center + radius * np.exp(1j * theta)
    vals = np.asarray(h(nodes))
    coeffs = np.fft.fft(vals, axis=0) / points
    scale = radius ** np.arange(count)
    return coeffs[:count] / scale.reshape((-1,) + (1,) * (vals.ndim - 1))


@dataclass
class Pairing:
    """Result of integrating a test function against the measure."""

    value: np.ndarray
    scale: np.ndarray


def _integrate_to_noise(f, a, b, tol, ref, floor=1e-7):
    # rounding in h itself can sit above tol * ref (e.g. a long polynomial
    # that is tiny on the interval), so back off until the rule settles
    rel = tol
    while True:
        try:
            return integrate(f, a, b, tol=rel * ref)
        except QuadratureError:
            if rel >= floor:
                raise
            rel *= 100


def pair(spec: MeasureSpec, h: Callable, singularities=(), tol: float = 1e-13) -> Pairing:
    """Integrate the analytic test function ``h`` against the full measure.

    ``h`` maps a 1-D array of (real or complex) points to shape ``(len, K)``.
    ``singularities`` lists points where ``h`` is not analytic; the contour
    around each pole stays clear of them. ``scale`` is the integral of ``|h|``
    against the total variation, with each polar term counted in absolute value.
    """
    sing = np.asarray(list(singularities), dtype=complex)
    value = None
    scale = None
    for iv in spec.intervals:
        def f(t, iv=iv):
            ht = np.asarray(h(t.astype(complex)))
            d = iv.density(t).reshape((-1,) + (1,) * (ht.ndim - 1))
            return np.concatenate([ht * d, np.abs(ht * d)], axis=1)
        est = integrate(f, iv.a, iv.b, tol=1e-6, order=20)
        k = est.shape[0] // 2
        ref = float(np.max(np.abs(est[k:]))) or 1.0
        res = _integrate_to_noise(f, iv.a, iv.b, tol, ref)
        v, s = res[:k], res[k:].real
        value = v if value is None else value + v
        scale = s if scale is None else scale + s
    for p in spec.poles:
        gap = np.min(np.abs(sing - p.eta)) if sing.size else 1.0
        # stay well inside D: test functions built from long polynomials blow up outside
        radius = min(0.25, 0.5 * gap, 0.5 * (1 - abs(p.eta)))
        coeffs = taylor_at(h, p.eta, p.multiplicity, radius)
        r = np.asarray(p.coeffs).reshape((-1,) + (1,) * (coeffs.ndim - 1))
        value = value + np.sum(r * coeffs, axis=0)
        scale = scale + np.sum(np.abs(r * coeffs), axis=0)
    return Pairing(value, scale)


# -- ready-made measures -----------------------------------------------------

def markov_uniform(half_width: float = 0.5) -> MeasureSpec:
    """Unit density on [-w, w], no polar part."""
    return MeasureSpec((IntervalTerm.from_text(-half_width, half_width, "1"),))


def three_interval_example() -> MeasureSpec:
    """Three complex densities plus poles of multiplicity 2, 3 and 4."""
    return MeasureSpec(
        (
            IntervalTerm.from_text(-6 / 7, -1 / 8, "7*exp(i*t)"),
            IntervalTerm.from_text(2 / 5, 1 / 2, "-(3+i)/(t-2*i)"),
            IntervalTerm.from_text(2 / 3, 7 / 8, "(2-4*i)*log(t)"),
        ),
        (
            PolarTerm(-3 / 7 + 4j / 7, (0, 2)),
            PolarTerm(5 / 9 + 3j / 4, (0, 0, 6)),
            PolarTerm(-1 / 5 - 6j / 7, (0, 0, 0, 24)),
        ),
    )
