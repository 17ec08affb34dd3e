"""Green potentials relative to the unit disk and the Green equilibrium measure.

The equilibrium measure of a finite union of real intervals is discretized
with a piecewise-constant density on Chebyshev-graded panels. The kernel
``g(x, t) = log|1 - x t| - log|x - t|`` is split into its logarithmic part,
integrated in closed form, and a smooth part handled by Gauss-Legendre.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import gauss_legendre

SMOOTH_ORDER = 12
NEGATIVE_TOL = 1e-8


class EquilibriumError(RuntimeError):
    pass


def green_disk(z, t):
    """Green function of the unit disk with pole at ``t``."""
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=complex)
    if np.any(np.abs(z) >= 1) or np.any(np.abs(t) >= 1):
        raise ValueError("green_disk needs points inside the unit disk")
    if np.any(z == t):
        raise ValueError("green_disk is infinite at z = t")
    out = np.log(np.abs(1 - np.conj(t) * z)) - np.log(np.abs(z - t))
    return float(out) if out.ndim == 0 else out


def mobius(x, w: float):
    """Disk automorphism ``(x - w) / (1 - x w)`` for real ``w``."""
    return (x - w) / (1 - x * w)


def mobius_intervals(intervals, w: float) -> list[tuple[float, float]]:
    # increasing on (-1, 1) for real |w| < 1, so endpoints map to endpoints
    return [(float(mobius(a, w)), float(mobius(b, w))) for a, b in intervals]


def _xlogx(u):
    u = np.asarray(u, dtype=complex)
    out = np.zeros(u.shape, dtype=complex)
    nz = u != 0
    out[nz] = u[nz] * np.log(u[nz])
    return out


def log_panel_integral(z, lo, hi):
    """int_lo^hi log|z - t| dt for complex z and real panels (broadcasting)."""
    z = np.asarray(z, dtype=complex)
    wl = z - lo
    wh = z - hi
    # Re(w log w - w) is continuous across the branch cut since Im w = 0 there
    return np.real(_xlogx(wl) - wl - _xlogx(wh) + wh)


def _g2(u):
    """Second antiderivative of log|u|: u^2/2 log|u| - 3u^2/4."""
    u = np.asarray(u, dtype=float)
    out = -0.75 * u * u
    nz = u != 0
    out[nz] += 0.5 * u[nz] ** 2 * np.log(np.abs(u[nz]))
    return out


@dataclass(frozen=True)
class EquilibriumMeasure:
    support: tuple
    edges: np.ndarray = field(repr=False)  # (M, 2) panel endpoints
    density: np.ndarray = field(repr=False)
    capacity: float
    potential_constant: float

    @property
    def panels(self) -> int:
        return len(self.density)

    @property
    def midpoints(self) -> np.ndarray:
        return self.edges.mean(axis=1)

    @property
    def lengths(self) -> np.ndarray:
        return self.edges[:, 1] - self.edges[:, 0]

    def mass(self) -> float:
        return float(np.sum(self.density * self.lengths))

    def cdf(self, x):
        """Distribution function mu_G((-inf, x])."""
        x = np.asarray(x, dtype=float)
        lo = self.edges[:, 0]
        covered = np.clip(x[..., None] - lo, 0, self.lengths)
        return np.sum(covered * self.density, axis=-1)

    def potential(self, z):
        return green_potential(self, z)


def chebyshev_panels(intervals, M: int) -> np.ndarray:
    """Panel endpoints, graded toward every interval endpoint, M in total.

    Panels are shared equally: the endpoint singularities, not the lengths,
    set the resolution each interval needs.
    """
    k = len(intervals)
    counts = np.full(k, M // k)
    counts[: M % k] += 1
    edges = []
    for (a, b), k in zip(intervals, counts):
        x = a + (b - a) * 0.5 * (1 - np.cos(np.pi * np.arange(k + 1) / k))
        x[0], x[-1] = a, b
        edges.append(np.stack([x[:-1], x[1:]], axis=1))
    return np.concatenate(edges)


def _smooth_matrix(x, edges, order=SMOOTH_ORDER):
    """int_panel log|1 - x t| dt by Gauss-Legendre, shape (len(x), M)."""
    nodes, weights = gauss_legendre(order)
    mid = edges.mean(axis=1)
    half = 0.5 * (edges[:, 1] - edges[:, 0])
    t = mid[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights[None, :]
    x = np.asarray(x)
    vals = np.log(np.abs(1 - x[..., None, None] * t))
    return np.sum(vals * w, axis=-1)


def _validate_support(intervals):
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    if not ivs:
        raise ValueError("support must contain at least one interval")
    for a, b in ivs:
        if not -1 < a < b < 1:
            raise ValueError(f"interval [{a}, {b}] must satisfy -1 < a < b < 1")
    for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
        if a1 <= b0:
            raise ValueError("support intervals must be disjoint")
    return tuple(ivs)


def equilibrium_measure(intervals, M: int = 800) -> EquilibriumMeasure:
    """Green equilibrium measure of the intervals relative to the unit disk.

    Collocation at panel midpoints of the piecewise-constant density, with the
    unknown constant potential bordered into the system and total mass one.
    """
    support = _validate_support(intervals)
    if M < 50:
        raise ValueError("need at least 50 panels")
    edges = chebyshev_panels(support, M)
    x = edges.mean(axis=1)
    A = _smooth_matrix(x, edges) - log_panel_integral(x[:, None], edges[None, :, 0], edges[None, :, 1])
    m = len(x)
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = A
    K[:m, m] = -1
    K[m, :m] = edges[:, 1] - edges[:, 0]
    rhs = np.zeros(m + 1)
    rhs[m] = 1
    if np.linalg.cond(K) > 1e14:
        raise EquilibriumError("collocation system is singular; panels too coarse or degenerate")
    sol = np.linalg.solve(K, rhs)
    density, c = sol[:m], sol[m]
    if density.min() < -NEGATIVE_TOL:
        raise EquilibriumError(f"negative density {density.min():.3g}; refine the panels")
    density = np.maximum(density, 0.0)
    if not c > 0:
        raise EquilibriumError("non-positive equilibrium constant")
    return EquilibriumMeasure(support, edges, density, float(1 / c), float(c))


def green_potential(mu: EquilibriumMeasure, z, chunk: int = 1024):
    """U(z) = sum_j density_j int_panel_j g_D(z, t) dt for z in the disk."""
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) >= 1):
        raise ValueError("green_potential needs |z| < 1")
    e = mu.edges
    nodes, weights = gauss_legendre(SMOOTH_ORDER)
    half = 0.5 * (e[:, 1] - e[:, 0])
    t = e.mean(axis=1)[:, None] + half[:, None] * nodes[None, :]
    w = half[:, None] * weights
    flat = z.ravel()
    out = np.empty(flat.shape)
    for s in range(0, len(flat), chunk):
        zc = flat[s:s + chunk]
        logpart = log_panel_integral(zc[:, None], e[:, 0], e[:, 1])
        smooth = np.sum(np.log(np.abs(1 - zc[:, None, None] * t)) * w, axis=-1)
        out[s:s + chunk] = (smooth - logpart) @ mu.density
    out = out.reshape(z.shape)
    return float(out) if out.ndim == 0 else out


def green_energy(mu: EquilibriumMeasure, block: int = 64) -> float:
    """Discrete Green energy sum_ij d_i d_j int int g_D(x, t) dx dt.

    The logarithmic part uses the closed form on nearby panel pairs and
    Gauss-Legendre elsewhere, where the closed form would cancel badly.
    """
    e = mu.edges
    lo, hi = e[:, 0], e[:, 1]
    length = hi - lo
    nodes, weights = gauss_legendre(SMOOTH_ORDER)
    x = (lo + hi)[:, None] / 2 + 0.5 * length[:, None] * nodes[None, :]
    wx = 0.5 * length[:, None] * weights[None, :]
    d = mu.density
    total = 0.0
    for s in range(0, len(d), block):
        rows = slice(s, s + block)
        xi, wi = x[rows], wx[rows]
        diff = xi[:, :, None, None] - x[None, None, :, :]
        prod = xi[:, :, None, None] * x[None, None, :, :]
        with np.errstate(divide="ignore"):
            kernel = np.log(np.abs(1 - prod)) - np.log(np.abs(diff))
        E = np.einsum("ip,jq,ipjq->ij", wi, wx, kernel)
        gap = np.maximum(lo[None, :] - hi[rows, None], lo[rows, None] - hi[None, :])
        near = gap < np.maximum(length[None, :], length[rows, None])
        i, j = np.nonzero(near)
        a, b, c, dd = lo[rows][i], hi[rows][i], lo[j], hi[j]
        smooth = np.einsum("kp,kq,kpq->k", wi[i], wx[j],
                           np.log(np.abs(1 - xi[i][:, :, None] * x[j][:, None, :])))
        E[i, j] = smooth - (_g2(b - c) - _g2(a - c) - _g2(b - dd) + _g2(a - dd))
        total += d[rows] @ E @ d
    return float(total)


def predicted_rate(intervals, M: int = 800) -> float:
    """Limit exp(-1/cap(S, T)) of the n-th root error rate."""
    return float(np.exp(-1 / equilibrium_measure(intervals, M).capacity))


def rate_from_capacity(capacity: float) -> float:
    return float(np.exp(-1 / capacity))
