"""Frequency-domain differential operators and the two fixed-point solves.

The constant-coefficient part acts diagonally in frequency through the symbol

    sigma(xi) = alpha + i xi.beta + xi.M xi,      |sigma| >= min(alpha, m) (1+|xi|^2),

so its inverse maps order-s data to order-(s+2) iterates with norm gain at
most 2/min(alpha, m).  Two iteration schemes solve the full problem:

  combined:  u <- L0^{-1}(f + div(E grad u) - w u - v.grad u),
             contraction factor K / min(alpha, m);
  nested:    u <- inner_solve(f - w u - v.grad u), where the inner loop
             u <- L0^{-1}(g + div(E grad u)) inverts the full second-order
             operator; outer factor (|w| + |v|) / (min(alpha, m) - |E|).

Both certify the returned iterate a posteriori: for a contraction with factor
q, any iterate u satisfies |u - u*| <= |Phi(u) - u| / (1 - q), which is
bounded by (q * increment + prune + inner slack) / (1 - q).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .atoms import AtomMap, Lattice, multiply
from .errors import A3ViolationError, DivergenceError, SolverError
from .problem import Constants, EllipticProblem, validate


@dataclass
class SolveOptions:
    mode: str = "combined"
    tol: float = 1e-8
    prune_tau_frac: float = 0.1
    max_iters: int = 200
    residual_points: int = 128

    def __post_init__(self):
        if self.mode not in ("combined", "nested"):
            raise ValueError(f"mode must be 'combined' or 'nested', got {self.mode!r}")
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise ValueError("tol must be positive and finite")
        if not (0.0 <= self.prune_tau_frac < 1.0):
            raise ValueError("prune_tau_frac must lie in [0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.residual_points < 0:
            raise ValueError("residual_points must be nonnegative")

    def to_obj(self) -> dict:
        return {
            "mode": self.mode,
            "tol": self.tol,
            "prune_tau_frac": self.prune_tau_frac,
            "max_iters": self.max_iters,
            "residual_points": self.residual_points,
        }


@dataclass
class SolveReport:
    """Iteration trace and certificate data for one solve."""

    mode: str
    certified: bool
    tol: float
    iterations: int
    increments: list[float]
    measured_rates: list[float]
    prune_spent: float
    u_norm_s2: float
    bound_rhs: float | None
    residual_linf: float | None
    error_bound: float
    symbol_factor: float
    constants: Constants | None
    inner_iterations: list[int] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "mode": self.mode,
            "certified": self.certified,
            "tol": self.tol,
            "iterations": self.iterations,
            "increments": list(self.increments),
            "measured_rates": list(self.measured_rates),
            "prune_spent": self.prune_spent,
            "u_norm_s2": self.u_norm_s2,
            "bound_rhs": self.bound_rhs,
            "residual_linf": self.residual_linf,
            "error_bound": self.error_bound,
            "symbol_factor": self.symbol_factor,
            "constants": self.constants.to_obj() if self.constants else None,
            "inner_iterations": list(self.inner_iterations),
        }


def _as_matrix(M, d: int):
    M = np.asarray(M, dtype=float)
    if M.shape != (d, d):
        raise ValueError(f"expected a {d}x{d} matrix")
    return tuple(tuple(float(v) for v in row) for row in M)


def _as_vector(beta, d: int):
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (d,):
        raise ValueError(f"expected a vector of length {d}")
    return tuple(float(v) for v in beta)


def _symbol(lattice: Lattice, z, alpha: float, beta, M) -> complex:
    # plain Python arithmetic keeps the value bit-stable regardless of BLAS
    xi = lattice.frequency(z)
    quad = 0.0
    for i, xv in enumerate(xi):
        if xv != 0.0:
            row = M[i]
            acc = 0.0
            for j, yv in enumerate(xi):
                if yv != 0.0:
                    acc += row[j] * yv
            quad += xv * acc
    imag = 0.0
    for xv, bv in zip(xi, beta):
        imag += xv * bv
    return complex(alpha + quad, imag)


def _apply_multiplier(u: AtomMap, alpha: float, beta, M, invert: bool) -> AtomMap:
    d = u.lattice.d
    beta_t = _as_vector(beta, d)
    M_t = _as_matrix(M, d)
    half = {}
    for z, c in u.half_items():
        sig = _symbol(u.lattice, z, alpha, beta_t, M_t)
        half[z] = c / sig if invert else c * sig
    return AtomMap._from_half(u.lattice, half)


def l0_apply(u: AtomMap, alpha: float, beta, M) -> AtomMap:
    """Apply the constant-coefficient operator: amplitude at z times sigma(xi_z)."""
    return _apply_multiplier(u, float(alpha), beta, M, invert=False)


def l0_inv(g: AtomMap, alpha: float, beta, M) -> AtomMap:
    """Invert the constant-coefficient operator by per-atom division.

    Requires alpha > 0 and M positive definite so the symbol never vanishes.
    """
    alpha = float(alpha)
    M_arr = np.asarray(M, dtype=float)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if float(np.linalg.eigvalsh((M_arr + M_arr.T) / 2.0)[0]) <= 0:
        raise ValueError("M must be positive definite")
    return _apply_multiplier(g, alpha, beta, M, invert=True)


def div_E_grad(E, u: AtomMap) -> AtomMap:
    """sum_i d_i( sum_j e_ij * d_j u ), assembled as partial o multiply o partial."""
    d = u.lattice.d
    out = AtomMap.zero(u.lattice)
    grads = None
    for i in range(d):
        inner = AtomMap.zero(u.lattice)
        for j in range(d):
            e = E[i][j]
            if e.is_zero:
                continue
            if grads is None:
                grads = [None] * d
            if grads[j] is None:
                grads[j] = u.partial(tuple(1 if k == j else 0 for k in range(d)))
            inner = inner + multiply(e, grads[j])
        if not inner.is_zero:
            out = out + inner.partial(tuple(1 if k == i else 0 for k in range(d)))
    return out


def _perturbation_terms(u: AtomMap, p: EllipticProblem) -> AtomMap:
    """w*u + sum_i v_i * d_i u (the lower-order variable part)."""
    d = p.lattice.d
    out = AtomMap.zero(p.lattice)
    if not p.w.is_zero and not u.is_zero:
        out = out + multiply(p.w, u)
    for i in range(d):
        if p.v[i].is_zero or u.is_zero:
            continue
        du = u.partial(tuple(1 if k == i else 0 for k in range(d)))
        out = out + multiply(p.v[i], du)
    return out


def apply_L(u: AtomMap, p: EllipticProblem) -> AtomMap:
    """The full operator: -div(A grad u) + b.grad u + c u, exact per convolution."""
    out = l0_apply(u, p.alpha, p.beta, p.M)
    div_part = div_E_grad(p.E, u)
    if not div_part.is_zero:
        out = out - div_part
    pert = _perturbation_terms(u, p)
    if not pert.is_zero:
        out = out + pert
    return out


def symbol_factor(p: EllipticProblem, constants: Constants) -> float:
    """Pointwise residual gain per unit of certified order-(s+2) error.

    Bounds |(L delta)(x)| <= factor * |delta|_{B^{s+2}} via
    |delta|_{B^0} <= 2^{-s/2} |delta|_{B^s} together with
    sup |sigma(xi)| / (2 (1+|xi|^2)) <= (max(alpha, lambda_max(M)) + |beta|/2)/2
    and the lower-order gains K/2.
    """
    lam_max = float(np.linalg.eigvalsh((p.M + p.M.T) / 2.0)[-1])
    beta_norm = float(np.linalg.norm(p.beta))
    op = (max(p.alpha, lam_max) + 0.5 * beta_norm) / 2.0 + 0.5 * constants.K
    return 2.0 ** (-0.5 * p.s) * op


def _prune_budget(opts: SolveOptions, q: float, k: int) -> float:
    # schedule sums to at most prune_tau_frac * tol over all max_iters steps
    if q <= 0.0 or opts.prune_tau_frac == 0.0:
        return 0.0
    return opts.prune_tau_frac * opts.tol * (1.0 - q) * q ** (opts.max_iters - k)


def inner_solve(g: AtomMap, p: EllipticProblem, opts: SolveOptions | None = None):
    """Solve (alpha + beta.grad - div(A grad)) u = g by contraction.

    Iterates u <- L0^{-1}(g + div(E grad u)); requires |E|_{B^{s+1}} below
    min(alpha, m).  Returns (u, report) with a certified order-(s+2) error
    bound <= opts.tol and |u| <= L |g| + tol.
    """
    opts = opts or SolveOptions()
    rep = validate(p)
    if not rep.structural_ok or not rep.a3_holds:
        raise A3ViolationError(
            "inner solve needs the second-order smallness condition: "
            + "; ".join(rep.messages)
        )
    c = rep.constants
    q = c.q_inner
    s2 = p.s + 2.0
    E_zero = all(e.is_zero for row in p.E for e in row)

    u = AtomMap.zero(p.lattice)
    increments: list[float] = []
    rates: list[float] = []
    spent: list[float] = []
    err_bound = math.inf
    converged = False
    for k in range(1, opts.max_iters + 1):
        rhs = g if E_zero else g + div_E_grad(p.E, u)
        raw = l0_inv(rhs, p.alpha, p.beta, p.M)
        tau = _prune_budget(opts, q, k)
        u_next, disc = raw.prune(s2, tau) if tau > 0.0 else (raw, 0.0)
        inc = (u_next - u).barron_norm(s2)
        if increments and increments[-1] > 0:
            rates.append(inc / increments[-1])
        increments.append(inc)
        spent.append(disc)
        u = u_next
        err_bound = (q * inc + disc) / (1.0 - q)
        if err_bound <= opts.tol:
            converged = True
            break
    iterations = len(increments)
    u_norm = u.barron_norm(s2)
    g_norm = g.barron_norm(p.s)
    report = SolveReport(
        mode="inner",
        certified=converged,
        tol=opts.tol,
        iterations=iterations,
        increments=increments,
        measured_rates=rates,
        prune_spent=math.fsum(spent),
        u_norm_s2=u_norm,
        bound_rhs=c.L * g_norm,
        residual_linf=None,
        error_bound=err_bound,
        symbol_factor=symbol_factor(p, c),
        constants=c,
    )
    if not converged:
        raise DivergenceError(
            f"inner solve did not certify within {opts.max_iters} iterations", report
        )
    if u_norm > c.L * g_norm + opts.tol:
        raise SolverError(
            f"inner regularity certificate violated: |u| = {u_norm} > "
            f"L |g| + tol = {c.L * g_norm + opts.tol}"
        )
    return u, report


def _inner_tolerance(opts: SolveOptions, c: Constants, q_outer: float) -> float:
    # heuristic split of the budget between outer tail and inner slack; the
    # cap keeps the outer certificate reachable as q_outer -> 1
    base = opts.tol / (4.0 * c.L * max(1.0, c.norm_w + c.norm_v))
    if q_outer < 1.0:
        base = min(base, opts.tol * (1.0 - q_outer) / 4.0)
    return base


def apply_T(u: AtomMap, p: EllipticProblem, opts: SolveOptions | None = None) -> AtomMap:
    """The second-kind integral operator: inner_solve(w u + v.grad u)."""
    opts = opts or SolveOptions()
    rep = validate(p)
    if not rep.structural_ok or not rep.a3_holds:
        raise A3ViolationError(
            "operator application needs the second-order smallness condition: "
            + "; ".join(rep.messages)
        )
    c = rep.constants
    rhs = _perturbation_terms(u, p)
    if rhs.is_zero:
        return AtomMap.zero(p.lattice)
    q_out = (c.norm_w + c.norm_v) / (c.mu - c.norm_E)
    inner_opts = SolveOptions(
        mode="combined",
        tol=_inner_tolerance(opts, c, q_out),
        prune_tau_frac=opts.prune_tau_frac,
        max_iters=opts.max_iters,
        residual_points=0,
    )
    result, _ = inner_solve(rhs, p, inner_opts)
    return result


def solve(p: EllipticProblem, opts: SolveOptions | None = None):
    """Solve the full problem; certified under the combined smallness condition.

    With only the second-order condition the same iteration runs best-effort:
    the report is marked uncertified, and sustained non-contraction raises
    `DivergenceError` with the trace attached.
    """
    opts = opts or SolveOptions()
    rep = validate(p)
    if not rep.structural_ok or not rep.a3_holds:
        raise A3ViolationError("solve precondition failed: " + "; ".join(rep.messages))
    c = rep.constants
    certified = rep.a3prime_holds
    s2 = p.s + 2.0
    f_norm = p.f.barron_norm(p.s)
    E_zero = all(e.is_zero for row in p.E for e in row)

    if opts.mode == "combined":
        q = c.K / c.mu
        inner_slack = 0.0
    else:
        q = (c.norm_w + c.norm_v) / (c.mu - c.norm_E)
        inner_slack = _inner_tolerance(opts, c, q)

    q_sched = q if certified else 0.0
    u = AtomMap.zero(p.lattice)
    increments: list[float] = []
    rates: list[float] = []
    spent: list[float] = []
    inner_iters: list[int] = []
    err_bound = math.inf
    converged = False
    for k in range(1, opts.max_iters + 1):
        g_k = p.f - _perturbation_terms(u, p)
        if opts.mode == "combined":
            rhs = g_k if E_zero else g_k + div_E_grad(p.E, u)
            raw = l0_inv(rhs, p.alpha, p.beta, p.M)
        else:
            inner_opts = SolveOptions(
                mode="combined",
                tol=inner_slack,
                prune_tau_frac=opts.prune_tau_frac,
                max_iters=opts.max_iters,
                residual_points=0,
            )
            raw, inner_rep = inner_solve(g_k, p, inner_opts)
            inner_iters.append(inner_rep.iterations)
        tau = _prune_budget(opts, q_sched, k)
        u_next, disc = raw.prune(s2, tau) if tau > 0.0 else (raw, 0.0)
        inc = (u_next - u).barron_norm(s2)
        if increments and increments[-1] > 0:
            rates.append(inc / increments[-1])
        increments.append(inc)
        spent.append(disc)
        u = u_next
        if certified:
            err_bound = (q * inc + disc + inner_slack) / (1.0 - q)
            if err_bound <= opts.tol:
                converged = True
                break
        else:
            if inc <= opts.tol:
                converged = True
                err_bound = math.inf
                break
            if len(rates) >= 5 and all(r >= 1.0 for r in rates[-5:]):
                break

    u_norm = u.barron_norm(s2)
    bound_rhs = c.C_sharp * f_norm if certified else None
    report = SolveReport(
        mode=opts.mode,
        certified=certified and converged,
        tol=opts.tol,
        iterations=len(increments),
        increments=increments,
        measured_rates=rates,
        prune_spent=math.fsum(spent),
        u_norm_s2=u_norm,
        bound_rhs=bound_rhs,
        residual_linf=None,
        error_bound=err_bound if certified else math.inf,
        symbol_factor=symbol_factor(p, c),
        constants=c,
        inner_iterations=inner_iters,
    )
    if not converged:
        raise DivergenceError(
            f"solve did not converge within {len(increments)} iterations "
            f"(mode={opts.mode}, certified regime: {certified})",
            report,
        )
    if report.certified and u_norm > bound_rhs + opts.tol:
        raise SolverError(
            f"regularity certificate violated: |u|_{{B^{s2}}} = {u_norm} > "
            f"C_sharp |f| + tol = {bound_rhs + opts.tol}"
        )
    if opts.residual_points > 0:
        stats = oracle.residual_pointwise(u, p, opts.residual_points, seed=0, mode="analytic")
        report.residual_linf = stats.linf
    return u, report
