"""Independent verification paths for solver and atom arithmetic.

Nothing here reuses the frequency-domain convolution pipeline: residuals are
assembled pointwise from separate evaluations of each coefficient and each
per-atom derivative, expanding -div(A grad u) by the product rule into
A : Hess u + (div A) . grad u.  Finite-difference modes replace the
derivatives of u with central differences at fixed step sizes, so the bounds
are reproducible rather than adaptively tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atoms import AtomMap, Lattice, multiply
from .problem import EllipticProblem

#: fixed central-difference steps (second order)
FD_STEP_RESIDUAL = 1e-4
FD_STEP_DERIVATIVE = 1e-5


@dataclass
class ResidualStats:
    points: int
    linf: float
    l2_rms: float
    worst_point: tuple[float, ...]

    def to_obj(self) -> dict:
        return {
            "points": self.points,
            "linf": self.linf,
            "l2_rms": self.l2_rms,
            "worst_point": list(self.worst_point),
        }


def default_sampling_box(lattice: Lattice) -> tuple[float, float]:
    """Half-open sampling interval per axis: one fundamental period, capped at 10."""
    half = min(math.pi / min(lattice.h), 10.0)
    return (-half, half)


def _sample_points(lattice: Lattice, points: int, seed) -> np.ndarray:
    lo, hi = default_sampling_box(lattice)
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(points, lattice.d))


def _unit(d: int, i: int) -> tuple[int, ...]:
    return tuple(1 if k == i else 0 for k in range(d))


def _u_derivatives_analytic(u: AtomMap, X: np.ndarray):
    """grad (d,P) and Hessian (d,d,P) of u at the sample points, per-atom exact."""
    d = u.lattice.d
    P = X.shape[0]
    grad = np.empty((d, P))
    hess = np.empty((d, d, P))
    for i in range(d):
        grad[i] = u.partial(_unit(d, i)).eval_many(X)
    for i in range(d):
        for j in range(i, d):
            a = tuple((1 if k == i else 0) + (1 if k == j else 0) for k in range(d))
            hij = u.partial(a).eval_many(X)
            hess[i, j] = hij
            hess[j, i] = hij
    return grad, hess


def _u_derivatives_fd(u: AtomMap, X: np.ndarray, step: float):
    """Same layout as the analytic version, via second-order central differences."""
    d = u.lattice.d
    P = X.shape[0]
    u0 = u.eval_many(X)
    shift = {}
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        shift[(i, +1)] = u.eval_many(X + e)
        shift[(i, -1)] = u.eval_many(X - e)
    grad = np.empty((d, P))
    hess = np.empty((d, d, P))
    for i in range(d):
        grad[i] = (shift[(i, +1)] - shift[(i, -1)]) / (2.0 * step)
        hess[i, i] = (shift[(i, +1)] - 2.0 * u0 + shift[(i, -1)]) / step**2
    for i in range(d):
        for j in range(i + 1, d):
            ei = np.zeros(d)
            ei[i] = step
            ej = np.zeros(d)
            ej[j] = step
            hij = (
                u.eval_many(X + ei + ej)
                - u.eval_many(X + ei - ej)
                - u.eval_many(X - ei + ej)
                + u.eval_many(X - ei - ej)
            ) / (4.0 * step**2)
            hess[i, j] = hij
            hess[j, i] = hij
    return grad, hess


def residual_pointwise(
    u: AtomMap,
    p: EllipticProblem,
    points: int,
    seed=0,
    mode: str = "analytic",
) -> ResidualStats:
    """Pointwise PDE residual statistics at uniform random sample points.

    Assembles -sum_ij A_ij d_ij u - sum_ij (d_i e_ij) d_j u + b.grad u
    + c u - f from separate evaluations; `mode="finite_difference"` swaps all
    derivatives of u for central differences with step 1e-4.
    """
    if points < 1:
        raise ValueError("points must be at least 1")
    if mode not in ("analytic", "finite_difference"):
        raise ValueError(f"unknown residual mode {mode!r}")
    d = p.lattice.d
    X = _sample_points(p.lattice, points, seed)
    if mode == "analytic":
        grad, hess = _u_derivatives_analytic(u, X)
    else:
        grad, hess = _u_derivatives_fd(u, X, FD_STEP_RESIDUAL)

    res = (p.alpha + p.w.eval_many(X)) * u.eval_many(X) - p.f.eval_many(X)
    for i in range(d):
        bi = p.beta[i] + (0.0 if p.v[i].is_zero else p.v[i].eval_many(X))
        res += bi * grad[i]
    for i in range(d):
        for j in range(d):
            aij = p.M[i, j] + (0.0 if p.E[i][j].is_zero else p.E[i][j].eval_many(X))
            res -= aij * hess[i, j]
            if not p.E[i][j].is_zero:
                de = p.E[i][j].partial(_unit(d, i)).eval_many(X)
                res -= de * grad[j]

    abs_res = np.abs(res)
    worst = int(np.argmax(abs_res))
    return ResidualStats(
        points=points,
        linf=float(abs_res[worst]),
        l2_rms=float(np.sqrt(np.mean(res**2))),
        worst_point=tuple(float(v) for v in X[worst]),
    )


def fd_partial_check(g: AtomMap, samples: int, seed=0, step: float = FD_STEP_DERIVATIVE) -> float:
    """Max discrepancy between per-atom first derivatives and central differences."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    d = g.lattice.d
    rng = np.random.default_rng(seed)
    lo, hi = default_sampling_box(g.lattice)
    X = rng.uniform(lo, hi, size=(samples, d))
    axes = rng.integers(0, d, size=samples)
    worst = 0.0
    derivs = {}
    for i in range(d):
        derivs[i] = g.partial(_unit(d, i))
    for x, ax in zip(X, axes):
        e = np.zeros(d)
        e[ax] = step
        fd = (g.eval(x + e) - g.eval(x - e)) / (2.0 * step)
        worst = max(worst, abs(derivs[int(ax)].eval(x) - fd))
    return worst


def pointwise_product_check(g: AtomMap, h: AtomMap, samples: int, seed=0) -> float:
    """Max relative gap between the convolution product and pointwise products."""
    if samples < 1:
        raise ValueError("samples must be at least 1")
    X = _sample_points(g.lattice, samples, seed)
    gh = multiply(g, h)
    lhs = gh.eval_many(X)
    rhs = g.eval_many(X) * h.eval_many(X)
    return float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(rhs))))
