"""Truncated Hankel operator, its singular triples, and AAK approximants.

Conventions: the symbol is ``F_N(z) = sum_{k<N} m_k z^(-k-1)``; a vector ``v``
of length N is the polynomial ``v(z) = sum_j v_j z^j`` and the Hankel matrix
``H[i, j] = m_{i+j}`` (zero for ``i + j >= N``) maps it to the coefficients of
``z^(-i-1)`` in ``P_-(F_N v)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl

from .measure import MeasureSpec, MomentSequence, pair

P = np.polynomial.polynomial

GAP_RTOL = 1e-12
BOUNDARY_BAND = 1e-10


class HankelError(RuntimeError):
    pass


@dataclass(frozen=True)
class HankelSystem:
    N: int
    moments: MomentSequence
    H: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SingularTriple:
    n: int
    sigma: float
    v: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    gap: float
    unique: bool = True


@dataclass(frozen=True)
class BlaschkeSplit:
    zeros_in_disk: np.ndarray
    zeros_outside: np.ndarray
    q: np.ndarray            # monic, ascending coefficients
    q_reciprocal: np.ndarray  # z^k conj(q(1/conj z)), ascending
    outer_quotient: np.ndarray  # v / q, ascending
    boundary_ambiguous: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.zeros_in_disk)

    def q_eval(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=complex)
        for r in self.zeros_in_disk:
            out = out * (z - r)
        return out

    def q_reciprocal_eval(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.ones(z.shape, dtype=complex)
        for r in self.zeros_in_disk:
            out = out * (1 - np.conj(r) * z)
        return out

    def b(self, z):
        """Normalized Blaschke product q / q~."""
        return self.q_eval(z) / self.q_reciprocal_eval(z)

    def w(self, z):
        """Outer factor v / b = (v / q) * q~."""
        z = np.asarray(z, dtype=complex)
        return P.polyval(z, self.outer_quotient) * self.q_reciprocal_eval(z)


@dataclass(frozen=True)
class Approximant:
    n: int
    method: str
    poles: np.ndarray
    numerator: np.ndarray = field(repr=False)
    denominator: np.ndarray = field(repr=False)
    sigma: float
    flags: tuple = ()
    split: BlaschkeSplit | None = field(default=None, repr=False)
    triple: SingularTriple | None = field(default=None, repr=False)

    @property
    def reducible(self) -> bool:
        return len(self.poles) < self.n

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return P.polyval(z, self.numerator) / P.polyval(z, self.denominator)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "method": self.method,
            "sigma": float(self.sigma),
            "poles": [[float(p.real), float(p.imag)] for p in sort_points(self.poles)],
            "flags": list(self.flags),
        }


def sort_points(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if z.size == 0:
        return z
    order = np.lexsort((np.round(z.imag, 12), np.round(z.real, 12)))
    return z[order]


# -- construction --------------------------------------------------------------

def build_hankel(moments: MomentSequence) -> HankelSystem:
    """Zero-padded N x N Hankel matrix of the truncated symbol."""
    N = moments.N
    if N < 2:
        raise ValueError("need at least two moments")
    last_row = np.zeros(N, dtype=complex)
    last_row[0] = moments.m[-1]
    H = sl.hankel(moments.m, last_row)
    return HankelSystem(N, moments, H)


def singular_triples(system: HankelSystem, upto: int) -> list[SingularTriple]:
    """Singular triples 0..upto, sorted, with deterministic gauge.

    Each right vector ``v`` has unit norm and its first nonzero coefficient
    real positive; ``u`` is rotated by the same phase so ``H v = sigma u``.
    Triples whose singular value is within ``1e-12 * sigma_0`` of a
    neighbour are marked ``unique=False``.
    """
    N = system.N
    if not 0 <= upto < N:
        raise ValueError(f"upto must be in [0, {N})")
    try:
        U, s, Vh = sl.svd(system.H, lapack_driver="gesdd")
    except (sl.LinAlgError, ValueError) as exc:
        raise HankelError(f"SVD failed: {exc}") from exc
    if not np.all(np.isfinite(s)):
        raise HankelError("SVD returned non-finite singular values")
    s0 = s[0] if s[0] > 0 else 1.0
    out = []
    for n in range(upto + 1):
        v = Vh[n].conj()
        u = U[:, n]
        nz = np.flatnonzero(np.abs(v) > 1e-14 * np.max(np.abs(v)))
        phase = v[nz[0]] / abs(v[nz[0]]) if nz.size else 1.0
        v = v / phase
        u = u / phase
        gap = s[n] - s[n + 1] if n + 1 < N else s[n]
        left = s[n - 1] - s[n] if n > 0 else np.inf
        unique = min(gap, left) >= GAP_RTOL * s0 and s[n] > 0
        out.append(SingularTriple(n, float(s[n]), v, u, float(gap), bool(unique)))
    return out


# -- inner/outer split -------------------------------------------------------

def polish_roots(coeffs: np.ndarray, roots: np.ndarray, steps: int = 3) -> np.ndarray:
    """Newton steps on each root, each kept only where it reduces |p|."""
    d = P.polyder(coeffs)
    with np.errstate(all="ignore"):
        for _ in range(steps):
            p0 = P.polyval(roots, coeffs)
            cand = roots - p0 / P.polyval(roots, d)
            p1 = P.polyval(cand, coeffs)
            better = np.isfinite(cand) & np.isfinite(p1) & (np.abs(p1) < np.abs(p0))
            roots = np.where(better, cand, roots)
    return roots


def polynomial_roots(coeffs: np.ndarray, tail_rtol: float = 1e-17) -> np.ndarray:
    """Roots of a polynomial given by ascending coefficients.

    Trailing coefficients whose combined size is below ``tail_rtol`` times
    the largest one are dropped first: they move the polynomial on the
    closed unit disk by less than its own accuracy, so zeros in the disk stay
    put, while a tiny leading coefficient would wreck the companion matrix.
    Roots are then polished against the full polynomial.
    """
    c = np.asarray(coeffs, dtype=complex)
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise HankelError("zero polynomial has no well-defined roots")
    c = c[: nz[-1] + 1]
    tail = np.cumsum(np.abs(c[::-1]))[::-1]
    keep = np.flatnonzero(tail > tail_rtol * np.max(np.abs(c)))
    short = c[: keep[-1] + 1] if keep.size else c[:1]
    if len(short) == 1:
        return np.zeros(0, dtype=complex)
    try:
        roots = P.polyroots(short)
    except np.linalg.LinAlgError as exc:
        raise HankelError(f"root finder failed: {exc}") from exc
    return polish_roots(c, roots)


def winding_number(coeffs: np.ndarray, gridsize: int | None = None) -> int:
    """Number of zeros in the unit disk by the argument principle on the circle."""
    c = np.asarray(coeffs, dtype=complex)
    G = gridsize or max(1024, 8 * len(c))
    vals = _poly_on_circle(c, G)
    if np.min(np.abs(vals)) <= 1e-14 * np.max(np.abs(vals)):
        return -1
    turn = np.angle(np.roll(vals, -1) / vals)
    return int(round(np.sum(turn) / (2 * np.pi)))


def deflate(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """Divide out ``prod (z - r)`` by synthetic division from the leading coefficient."""
    c = np.asarray(coeffs, dtype=complex)
    nz = np.flatnonzero(c)
    c = c[: nz[-1] + 1].copy()
    for r in roots:
        n = len(c) - 1
        out = np.zeros(n, dtype=complex)
        acc = c[n]
        for j in range(n - 1, -1, -1):
            out[j] = acc
            acc = c[j] + r * acc
        c = out
    return c


ROOT_RTOL = 1e-8
TRUNCATION_RTOL = 1e-6


def relative_residual(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """|p(z)| over the same sum taken in absolute values."""
    with np.errstate(all="ignore"):
        return np.abs(P.polyval(z, coeffs)) / np.maximum(P.polyval(np.abs(z), np.abs(coeffs)), 1e-300)


def _contour_roots(coeffs: np.ndarray, known: np.ndarray, count: int, gridsize: int) -> np.ndarray:
    """The ``count`` disk zeros not in ``known``, from power sums on the circle."""
    z = circle_nodes(gridsize)
    ratio = _poly_on_circle(P.polyder(coeffs), gridsize) / _poly_on_circle(coeffs, gridsize)
    power = np.array([np.mean(z ** (p + 1) * ratio) for p in range(1, count + 1)])
    power = power - np.array([np.sum(known ** p) for p in range(1, count + 1)])
    # Newton's identities: elementary symmetric functions from power sums
    e = np.zeros(count + 1, dtype=complex)
    e[0] = 1
    for k in range(1, count + 1):
        e[k] = sum((-1) ** (i - 1) * e[k - i] * power[i - 1] for i in range(1, k + 1)) / k
    monic = np.array([(-1) ** k * e[k] for k in range(count + 1)])[::-1]
    return polish_roots(coeffs, P.polyroots(monic))


def split_blaschke(triple: SingularTriple | np.ndarray) -> BlaschkeSplit:
    """Factor v = b w with b the Blaschke product over the zeros of v in the disk.

    Companion-matrix roots that do not make v small are discarded; if that
    leaves fewer disk zeros than the winding number of v on the circle, the
    missing ones are recovered from contour power sums.
    """
    v = triple.v if isinstance(triple, SingularTriple) else np.asarray(triple, dtype=complex)
    if not np.any(v):
        raise HankelError("cannot split the zero vector")
    roots = polynomial_roots(v)
    roots = roots[relative_residual(v, roots) <= ROOT_RTOL]
    mod = np.abs(roots)
    inside = roots[mod < 1 - BOUNDARY_BAND]
    ambiguous = roots[np.abs(mod - 1) <= BOUNDARY_BAND]
    outside = roots[mod >= 1 - BOUNDARY_BAND]
    count = winding_number(v)
    if ambiguous.size == 0 and count > len(inside):
        extra = _contour_roots(v, inside, count - len(inside), max(4096, 8 * len(v)))
        good = (np.abs(extra) < 1 - BOUNDARY_BAND) & (relative_residual(v, extra) <= ROOT_RTOL)
        inside = np.concatenate([inside, extra[good]])
    inside = sort_points(inside)
    q = P.polyfromroots(inside) if inside.size else np.ones(1, dtype=complex)
    q_rec = np.conj(q[::-1])
    quotient = deflate(v, inside[np.argsort(np.abs(inside))])
    return BlaschkeSplit(inside, outside, q, q_rec, quotient, ambiguous)


# -- approximants ------------------------------------------------------------

def analytic_part(moments: MomentSequence, v: np.ndarray) -> np.ndarray:
    """Coefficients of P_+(F_N v), ascending."""
    N = moments.N
    conv = np.convolve(v, moments.m[::-1])
    # coefficient of z^p sits at index p + N
    return conv[N:]


def aak_approximant(moments: MomentSequence, triple: SingularTriple) -> Approximant:
    """g_n = P_+(F_N v_n) / v_n with poles at the zeros of v_n in the disk.

    A triple without a clear spectral gap still yields an approximant, flagged
    ``near-degenerate``; callers decide whether to trust it. The flag
    ``under-truncated`` marks sigma_n that the discarded moment tail could move
    by more than ``TRUNCATION_RTOL`` relative.
    """
    split = split_blaschke(triple)
    num = analytic_part(moments, triple.v)
    flags = [] if triple.unique else ["near-degenerate"]
    if split.degree < triple.n:
        flags.append("reducible")
    if split.degree > triple.n:
        flags.append("excess-zeros")
    if split.boundary_ambiguous.size:
        flags.append("boundary-ambiguous")
    if winding_number(triple.v) not in (split.degree, -1):
        flags.append("root-count-mismatch")
    if moments.tail_bound > TRUNCATION_RTOL * triple.sigma:
        # the discarded moments are not small against sigma_n: v_n belongs to F_N, not F
        flags.append("under-truncated")
    return Approximant(triple.n, "aak", split.zeros_in_disk, num, triple.v, triple.sigma,
                       tuple(flags), split, triple)


def circle_nodes(gridsize: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(gridsize) / gridsize)


def _poly_on_circle(coeffs: np.ndarray, gridsize: int) -> np.ndarray:
    """p(exp(2 pi i j / G)) for all j via one FFT."""
    c = np.zeros(max(gridsize, len(coeffs)), dtype=complex)
    c[: len(coeffs)] = coeffs
    if len(c) > gridsize:
        folded = np.zeros(gridsize, dtype=complex)
        np.add.at(folded, np.arange(len(c)) % gridsize, c)
        c = folded
    return np.fft.ifft(c) * gridsize


@dataclass
class CircleError:
    samples: np.ndarray = field(repr=False)
    max: float
    min: float
    mean: float


def circle_error(moments: MomentSequence, approximant: Approximant, gridsize: int = 4096) -> CircleError:
    """|F_N - g_n| on the uniform grid of the unit circle."""
    if gridsize < 64:
        raise ValueError("gridsize must be at least 64")
    den = _poly_on_circle(approximant.denominator, gridsize)
    den_scale = np.sum(np.abs(approximant.denominator))
    poles_near = np.any(np.abs(np.abs(approximant.poles) - 1) <= 1e-12)
    if poles_near or np.min(np.abs(den)) <= 1e-12 * den_scale:
        raise HankelError("approximant has a pole within 1e-12 of the circle grid")
    g = _poly_on_circle(approximant.numerator, gridsize) / den
    err = np.abs(moments.on_circle(gridsize) - g)
    return CircleError(err, float(err.max()), float(err.min()), float(err.mean()))


def orthogonality_residuals(spec: MeasureSpec, split: BlaschkeSplit, v: np.ndarray | None = None):
    """Normalized |int t^k q w / q~^2 d(lambda)| for k < deg q.

    With ``v`` given, ``q w / q~^2 = v / q~`` (AAK case); without it the weight
    is ``w = 1`` (rational case). Returns ``(residuals, scales)``.
    """
    n = split.degree
    k = np.arange(n)
    if v is None:
        def h(t):
            return (t[:, None] ** k) * (split.q_eval(t) / split.q_reciprocal_eval(t) ** 2)[:, None]
    else:
        def h(t):
            return (t[:, None] ** k) * (P.polyval(t, v) / split.q_reciprocal_eval(t))[:, None]
    poles = split.zeros_in_disk
    sing = [1 / np.conj(r) for r in poles if abs(r) > 0]
    res = pair(spec, h, singularities=sing)
    return res.value, res.scale
