"""Best L2(T) rational approximation with free poles in the disk.

The numerator is concentrated out (variable projection): for fixed zeros of
the denominator, the best ``p/q`` is a linear least-squares fit on a uniform
circle grid, done in the orthonormal Takenaka-Malmquist basis of
``{p/q : deg p < n}`` so coalescing zeros cause no rank loss. The remaining
objective is minimized over the zeros by Levenberg-Marquardt steps on the
projected residual, with the zeros kept inside the disk.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hankel import Approximant, BlaschkeSplit, orthogonality_residuals, sort_points
from .measure import MeasureSpec, cauchy_transform

P = np.polynomial.polynomial

FEASIBLE = 1 - 1e-8
RIDGE = 1e-14


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CircleTarget:
    """Samples of F on the uniform grid of the circle plus an evaluator off it."""

    func: Callable = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    singular_points: tuple = ()

    @property
    def gridsize(self) -> int:
        return len(self.nodes)

    @property
    def rounding(self) -> float:
        """Absolute rounding level of residuals formed in extended precision."""
        return 1e-18 * float(np.max(np.abs(self.values)))

    def objective_noise(self, objective: float) -> float:
        d = self.rounding
        return 2 * np.sqrt(objective) * d + d * d

    @property
    def norm(self) -> float:
        """Discrete L2 norm of F (normalized arclength)."""
        return float(np.sqrt(np.mean(np.abs(self.values) ** 2)))


def circle_target(source, gridsize: int, singular_points=()) -> CircleTarget:
    """Sample ``source`` (a MeasureSpec or a callable F) on ``gridsize`` circle points."""
    if isinstance(source, MeasureSpec):
        spec = source

        def func(z):
            return cauchy_transform(spec, z)
        singular_points = tuple(p.eta for p in spec.poles)
    else:
        func = source
    nodes = np.exp(2j * np.pi * np.arange(gridsize) / gridsize)
    values = np.asarray(func(nodes), dtype=complex)
    return CircleTarget(func, nodes, values, tuple(singular_points))


def grid_size(N: int, n: int) -> int:
    return 8 * max(N, 4 * n)


@dataclass(frozen=True)
class Projection:
    numerator: np.ndarray
    objective: float
    residual: np.ndarray = field(repr=False)
    model: np.ndarray = field(repr=False)
    basis_q: np.ndarray = field(repr=False)
    flagged: bool = False


def _tm_basis(z: np.ndarray, zeros: np.ndarray) -> np.ndarray:
    cols = []
    prefix = np.ones(z.shape, dtype=z.dtype)
    for xi in zeros:
        d = z - xi
        cols.append(np.sqrt(1 - abs(xi) ** 2) / d * prefix)
        prefix = prefix * (1 - np.conj(xi) * z) / d
    return np.stack(cols, axis=1) if cols else np.zeros(z.shape + (0,), dtype=z.dtype)


def _tm_numerator(zeros: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Coefficients of p with sum_k c_k e_k = p / q (q monic over ``zeros``)."""
    n = len(zeros)
    p = np.zeros(max(n, 1), dtype=complex)
    for k in range(n):
        # e_k q = sqrt(1-|xi_k|^2) prod_{j<k} (1 - conj(xi_j) z) prod_{j>k} (z - xi_j)
        term = np.ones(1, dtype=complex)
        for xi in zeros[:k]:
            term = P.polymul(term, np.array([1, -np.conj(xi)]))
        for xi in zeros[k + 1:]:
            term = P.polymul(term, np.array([-xi, 1]))
        term = c[k] * np.sqrt(1 - abs(zeros[k]) ** 2) * term
        p[: len(term)] += term
    return p


def project_numerator(target: CircleTarget, zeros) -> Projection:
    """Best numerator of degree < n for the given denominator zeros.

    Returns the numerator (ascending coefficients) and the concentrated
    objective ``mean |F - p/q|^2`` over the grid. The solve is done in double
    precision; the residual is formed and refined in extended precision,
    because F - p/q cancels heavily near a good fit and the rounding noise
    would otherwise swamp the gradient.
    """
    zeros = np.asarray(zeros, dtype=complex)
    if np.any(np.abs(zeros) >= 1):
        raise OptimizationError("denominator zeros must lie in the open unit disk")
    f = target.values.astype(np.clongdouble)
    Bx = _tm_basis(target.nodes.astype(np.clongdouble), zeros.astype(np.clongdouble))
    B = Bx.astype(complex)
    flagged = False
    if zeros.size:
        Q, R = np.linalg.qr(B)
        rdiag = np.abs(np.diag(R)) / np.sqrt(target.gridsize)
        if rdiag.min() < 1e-7:
            flagged = True
            G = B.conj().T @ B / target.gridsize
            Greg = G + RIDGE * np.eye(len(zeros))

            def solve(rhs):
                return np.linalg.solve(Greg, B.conj().T @ rhs / target.gridsize)
        else:
            def solve(rhs):
                return np.linalg.solve(R, Q.conj().T @ rhs)
        c = solve(target.values).astype(np.clongdouble)
        for _ in range(2):
            resid = f - Bx @ c
            c = c + solve(resid.astype(complex))
        model = Bx @ c
    else:
        Q = np.zeros((len(f), 0), dtype=complex)
        c = np.zeros(0, dtype=np.clongdouble)
        model = np.zeros_like(f)
    resid = f - model
    obj = float(np.mean(np.abs(resid) ** 2))
    return Projection(_tm_numerator(zeros, c.astype(complex)), obj, resid, model, Q, flagged)


def objective_and_gradient(target: CircleTarget, zeros: np.ndarray):
    """Concentrated objective and its gradient in (Re, Im) coordinates of the zeros."""
    proj = project_numerator(target, zeros)
    z = target.nodes.astype(np.clongdouble)
    # d(p/q)/d xi_j = (p/q) / (z - xi_j), numerator held at its optimum
    dmodel = proj.model[:, None] / (z[:, None] - np.asarray(zeros, dtype=np.clongdouble)[None, :])
    wirt = -np.mean(dmodel * np.conj(proj.residual)[:, None], axis=0).astype(complex)
    grad = np.concatenate([2 * wirt.real, -2 * wirt.imag])
    return proj, grad


@dataclass(frozen=True)
class DenominatorPoint:
    zeros: np.ndarray
    objective: float
    grad_norm: float
    numerator: np.ndarray = field(repr=False)
    converged: bool = True
    iterations: int = 0
    flags: tuple = ()
    trace: tuple = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return len(self.zeros)

    def approximant(self) -> Approximant:
        q = P.polyfromroots(self.zeros)
        return Approximant(self.n, "rational-l2", sort_points(self.zeros), self.numerator, q,
                           float(np.sqrt(self.objective)), self.flags)

    def split(self) -> BlaschkeSplit:
        return split_from_zeros(self.zeros)


def split_from_zeros(zeros) -> BlaschkeSplit:
    zeros = sort_points(np.asarray(zeros, dtype=complex))
    q = P.polyfromroots(zeros) if zeros.size else np.ones(1, dtype=complex)
    return BlaschkeSplit(zeros, np.zeros(0, dtype=complex), q, np.conj(q[::-1]),
                         np.ones(1, dtype=complex), np.zeros(0, dtype=complex))


def _project_feasible(x: np.ndarray, n: int) -> np.ndarray:
    z = x[:n] + 1j * x[n:]
    mod = np.abs(z)
    over = mod > FEASIBLE
    if np.any(over):
        z = np.where(over, z / np.where(over, mod, 1) * FEASIBLE, z)
    return np.concatenate([z.real, z.imag])


def optimize_denominator(target: CircleTarget, n: int, init, max_iter: int = 500,
                         gtol: float = 1e-10, ptol: float = 1e-10,
                         record_trace: bool = False) -> DenominatorPoint:
    """Local minimizer of the concentrated L2 objective over n denominator zeros.

    Each iteration is a damped Gauss-Newton (Levenberg-Marquardt) step on the
    projected residual. The run converges when
    ``|grad| <= gtol * |F| * sqrt(objective)`` plus a rounding floor, a test
    that scales with F and does not stop near-exact fits early. If no step
    makes progress at working precision first, the point still counts as
    converged when the undamped step predicts a decrease below
    ``ptol * objective`` (plus the objective's rounding level); otherwise it
    is flagged ``stalled``. Running out of iterations flags
    ``max-iterations``.
    """
    init = np.asarray(init, dtype=complex)
    if init.shape != (n,):
        raise ValueError(f"need {n} initial zeros, got {init.shape}")
    if np.any(np.abs(init) >= 1):
        raise OptimizationError("initial zeros must lie in the open unit disk")
    x = _project_feasible(np.concatenate([init.real, init.imag]), n)
    proj, g = objective_and_gradient(target, _complex(x, n))
    f = proj.objective
    lam = 1e-3
    trace = []
    flags = []
    converged = False
    it = 0
    for it in range(max_iter + 1):
        gnorm = float(np.linalg.norm(g))
        if record_trace:
            trace.append((it, f, gnorm))
        zeros = _complex(x, n)
        # Kaufman's approximation of the projected residual Jacobian (holomorphic in xi)
        D = proj.model.astype(complex)[:, None] / (target.nodes[:, None] - zeros[None, :])
        Jc = -(D - proj.basis_q @ (proj.basis_q.conj().T @ D))
        A = Jc.conj().T @ Jc
        rhs = -(Jc.conj().T @ proj.residual.astype(complex))
        diag = np.maximum(np.real(np.diag(A)), 1e-300)
        full = np.linalg.lstsq(A, rhs, rcond=1e-15)[0]
        predicted = max(float(np.real(np.vdot(rhs, full))) / target.gridsize, 0.0)
        noise = target.objective_noise(f)
        if gnorm <= gtol * target.norm * np.sqrt(f) + target.norm * target.rounding:
            converged = True
            break
        if it == max_iter:
            flags.append("max-iterations")
            break
        accepted = False
        while lam < 1e16:
            try:
                delta = np.linalg.solve(A + lam * np.diag(diag), rhs)
            except np.linalg.LinAlgError:
                lam *= 4
                continue
            x_new = _project_feasible(np.concatenate([(zeros + delta).real, (zeros + delta).imag]), n)
            if not np.any(x_new - x):
                break
            proj_new, g_new = objective_and_gradient(target, _complex(x_new, n))
            # below the rounding level of the objective, judge by the gradient
            if proj_new.objective < f or (
                    proj_new.objective <= f + noise and np.linalg.norm(g_new) < 0.5 * gnorm):
                accepted = True
                lam = max(lam / 3, 1e-12)
                break
            lam *= 4
        if not accepted:
            # no progress at working precision; accept if nothing is left to gain
            converged = predicted <= ptol * f + noise
            if not converged:
                flags.append("stalled")
            break
        x, g, f, proj = x_new, g_new, proj_new.objective, proj_new
    if proj.flagged:
        flags.append("ridge-regularized")
    return DenominatorPoint(_complex(x, n), f, float(np.linalg.norm(g)), proj.numerator, converged,
                            it, tuple(flags), tuple(trace))


def _complex(x, n):
    return x[:n] + 1j * x[n:]


def multistart(target: CircleTarget, n: int, init, seed: int = 0, starts: int = 4,
               spread: float = 0.05, threads: int = 1, record_trace: bool = False) -> DenominatorPoint:
    """Best local minimum over ``init`` and ``starts`` random perturbations of it."""
    init = np.asarray(init, dtype=complex)
    rng = np.random.default_rng(seed)
    inits = [init]
    for _ in range(starts):
        kick = spread * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        cand = init + kick
        mod = np.abs(cand)
        cand = np.where(mod > 0.99, cand / np.maximum(mod, 1e-300) * 0.99, cand)
        inits.append(cand)

    def run(z0):
        return optimize_denominator(target, n, z0, record_trace=record_trace)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, inits))
    else:
        results = [run(z0) for z0 in inits]
    best = min(range(len(results)), key=lambda i: (results[i].objective, i))
    return results[best]


# -- criticality certificates ---------------------------------------------------

def _reflected_error(target: CircleTarget, approx: Approximant, w: np.ndarray) -> np.ndarray:
    """z * (F - g)(z) at z = 1/w; analytic in w near 0."""
    z = 1 / w
    return z * (target.func(z) - approx(z))


def interpolation_residual(target: CircleTarget, point: DenominatorPoint, h: float = 1e-3) -> np.ndarray:
    """Residuals of the order-2 interpolation at the reflections of the poles.

    With ``G(w) = z (F - g)(z)``, ``z = 1/w``, returns ``|G|`` and ``|G'|`` at
    ``w = conj(xi_j)`` for each zero ``xi_j``, shape ``(n, 2)``. Working in
    ``w`` keeps a zero at the origin (reflection at infinity) well defined.
    """
    approx = point.approximant()
    out = []
    for xi in point.zeros:
        if abs(xi) > 1e-300:
            refl = 1 / np.conj(xi)
            for s in target.singular_points:
                if abs(refl - s) <= 1e-10:
                    raise OptimizationError(f"reflected point {refl} hits a pole of F")
        w0 = np.conj(xi)
        step = min(h, 0.1 * (1 - abs(w0)))
        ws = w0 + step * np.array([-2, -1, 1, 2])
        G = _reflected_error(target, approx, ws)
        deriv = (G[0] - 8 * G[1] + 8 * G[2] - G[3]) / (12 * step)
        if abs(w0) > 1e-8:
            val = _reflected_error(target, approx, np.array([w0]))[0]
        else:
            val = (-G[0] + 4 * G[1] + 4 * G[2] - G[3]) / 6
        out.append((abs(val), abs(deriv)))
    return np.array(out)


def l2_orthogonality_residual(spec: MeasureSpec, point: DenominatorPoint):
    """r_k = int t^k q / q~^2 d(lambda), k < n, and the matching absolute scales."""
    return orthogonality_residuals(spec, split_from_zeros(point.zeros))
