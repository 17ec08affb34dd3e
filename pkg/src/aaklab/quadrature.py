"""Adaptive composite Gauss-Legendre quadrature for vector-valued integrands."""
from __future__ import annotations

import numpy as np

_RULES: dict[int, tuple[np.ndarray, np.ndarray]] = {}


class QuadratureError(RuntimeError):
    pass


def gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _RULES:
        _RULES[order] = np.polynomial.legendre.leggauss(order)
    return _RULES[order]


def _rule_on(lo, hi, order):
    x, w = gauss_legendre(order)
    mid = 0.5 * (lo + hi)[:, None]
    half = 0.5 * (hi - lo)[:, None]
    return mid + half * x[None, :], half * w[None, :]


def integrate(f, a: float, b: float, tol: float = 1e-12, order: int = 20,
              max_depth: int = 50, rtol: float = 0.0, max_panels: int = 4096) -> np.ndarray:
    """Integrate ``f`` over ``[a, b]`` by adaptive bisection.

    ``f`` maps a 1-D array of nodes to an array of shape ``(len(nodes), ...)``;
    every component is integrated. A panel is accepted when its ``order``-point
    estimate and the sum over its two halves agree to within its share of
    ``max(tol, rtol * |estimate|)``.

    Raises :class:`QuadratureError` if some panel is still unresolved after
    ``max_depth`` bisections, or if more than ``max_panels`` are unresolved at
    once (the tolerance is then below the noise in ``f``).
    """
    a, b = float(a), float(b)
    if not b > a:
        raise ValueError("integration interval must have b > a")
    length = b - a
    lo = np.array([a])
    hi = np.array([b])
    total = None
    coarse = None
    for depth in range(max_depth + 1):
        mid = 0.5 * (lo + hi)
        # children of every active panel, evaluated in one batch
        clo = np.stack([lo, mid], axis=1).ravel()
        chi = np.stack([mid, hi], axis=1).ravel()
        if coarse is None:
            nodes, weights = _rule_on(lo, hi, order)
            vals = np.asarray(f(nodes.ravel()))
            tail = vals.shape[1:]
            vals = vals.reshape(nodes.shape + tail)
            coarse = np.einsum("pq,pq...->p...", weights, vals)
            total = np.zeros(tail, dtype=vals.dtype if np.iscomplexobj(vals) else float)
        nodes, weights = _rule_on(clo, chi, order)
        vals = np.asarray(f(nodes.ravel())).reshape(nodes.shape + tail)
        fine = np.einsum("pq,pq...->p...", weights, vals)
        fine_pairs = fine.reshape((len(lo), 2) + tail)
        refined = fine_pairs.sum(axis=1)
        err = np.abs(refined - coarse)
        err = err.reshape(len(lo), -1).max(axis=1) if tail else err
        size = np.abs(refined).reshape(len(lo), -1).max(axis=1) if tail else np.abs(refined)
        share = (hi - lo) / length
        ok = err <= np.maximum(tol * share, rtol * size) + 1e-300
        total = total + refined[ok].sum(axis=0)
        if np.all(ok):
            return total
        bad = ~ok
        if 2 * bad.sum() > max_panels:
            break
        lo = np.stack([lo[bad], mid[bad]], axis=1).ravel()
        hi = np.stack([mid[bad], hi[bad]], axis=1).ravel()
        coarse = fine_pairs[bad].reshape((-1,) + tail)
    raise QuadratureError(f"quadrature on [{a}, {b}] did not reach tolerance {tol:g}")


def fixed(f, a: float, b: float, panels: int, order: int = 20) -> np.ndarray:
    """Composite Gauss-Legendre with ``panels`` equal panels (no adaptivity)."""
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = _rule_on(edges[:-1], edges[1:], order)
    vals = np.asarray(f(nodes.ravel()))
    vals = vals.reshape(nodes.shape + vals.shape[1:])
    return np.einsum("pq,pq...->...", weights, vals)
