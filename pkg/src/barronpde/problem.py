"""Problem definition, admissibility checks, and every explicit constant.

An `EllipticProblem` holds the data of

    -div(A(x) grad u) + b(x) . grad u + c(x) u = f(x)   on R^d,

decomposed as A = M + E, b = beta + v, c = alpha + w, with E, v, w, f finite
Fourier-atom sums of order s.  `validate` decides the two smallness regimes:

  a3:  |E|_{B^{s+1}} < min(alpha, m)                        (inner solve contracts)
  a3': |E|_{B^{s+1}} + |w|_{B^s} + |v|_{B^s} < min(alpha, m)  (full solve certified)

and computes the derived constants (contraction rates, regularity bounds).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import jsonschema
import numpy as np
from scipy.special import gammaincc

from .atoms import AtomMap, Lattice, get_atom_cap, is_canonical
from .errors import (
    AtomBudgetError,
    ConjugateSymmetryError,
    ConstructionError,
    LatticeMismatchError,
    SchemaError,
)

_M_SYMMETRY_RTOL = 1e-12


class EllipticProblem:
    """Coefficient data for the second-order problem on a fixed lattice.

    E is a d x d grid of AtomMaps (entries may be zero maps), v a d-vector of
    AtomMaps, w and f AtomMaps; all must share the problem lattice.
    """

    __slots__ = ("lattice", "s", "alpha", "beta", "M", "E", "v", "w", "f")

    def __init__(self, lattice, s, alpha, beta, M, E=None, v=None, w=None, f=None):
        self.lattice = lattice
        self.s = float(s)
        if not (math.isfinite(self.s) and self.s >= 0):
            raise ValueError(f"order s must be finite and nonnegative, got {s}")
        self.alpha = float(alpha)
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise ValueError(f"alpha must be positive and finite, got {alpha}")
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (lattice.d,) or not np.all(np.isfinite(beta)):
            raise ValueError(f"beta must be a finite vector of length {lattice.d}")
        self.beta = beta
        M = np.asarray(M, dtype=float)
        if M.shape != (lattice.d, lattice.d) or not np.all(np.isfinite(M)):
            raise ValueError(f"M must be a finite {lattice.d}x{lattice.d} matrix")
        self.M = M

        zero = AtomMap.zero(lattice)
        d = lattice.d
        if E is None:
            E = [[zero] * d for _ in range(d)]
        self.E = tuple(tuple(row) for row in E)
        if len(self.E) != d or any(len(row) != d for row in self.E):
            raise ValueError(f"E must be a {d}x{d} grid of atom maps")
        self.v = tuple(v) if v is not None else (zero,) * d
        if len(self.v) != d:
            raise ValueError(f"v must have {d} components")
        self.w = w if w is not None else zero
        self.f = f if f is not None else zero
        for g in [self.w, self.f, *self.v, *(e for row in self.E for e in row)]:
            if g.lattice != lattice:
                raise LatticeMismatchError("all coefficient atom maps must share the problem lattice")


@dataclass(frozen=True)
class Constants:
    """Derived constants; fields needing the stronger regime are None without it.

    mu = min(alpha, m); K = norm_E + norm_w + norm_v;
    L = 2 / (mu - norm_E); q_inner = norm_E / mu;
    q_outer = (norm_w + norm_v) / (mu - norm_E);
    C_sharp = 2 (mu - norm_E + norm_w + norm_v)
              / ((mu - norm_E) (mu - norm_E - norm_w - norm_v));
    C_simple = 2 (mu + K) / (mu (mu - K)).
    """

    m: float
    norm_E: float
    norm_w: float
    norm_v: float
    K: float
    mu: float
    L: float
    q_inner: float
    q_outer: float | None
    C_sharp: float | None
    C_simple: float | None

    def to_obj(self) -> dict:
        return {
            "m": self.m,
            "norm_E": self.norm_E,
            "norm_w": self.norm_w,
            "norm_v": self.norm_v,
            "K": self.K,
            "mu": self.mu,
            "L": self.L,
            "q_inner": self.q_inner,
            "q_outer": self.q_outer,
            "C_sharp": self.C_sharp,
            "C_simple": self.C_simple,
        }


@dataclass
class ValidationReport:
    structural_ok: bool
    a3_holds: bool
    a3prime_holds: bool
    a1_certificate: bool
    constants: Constants | None
    messages: list[str] = field(default_factory=list)

    def to_obj(self) -> dict:
        return {
            "structural_ok": self.structural_ok,
            "a3_holds": self.a3_holds,
            "a3prime_holds": self.a3prime_holds,
            "a1_certificate": self.a1_certificate,
            "constants": self.constants.to_obj() if self.constants else None,
            "messages": list(self.messages),
        }


def norm_E(p: EllipticProblem) -> float:
    """Sum of entrywise order-(s+1) norms of the second-order perturbation."""
    return math.fsum(e.barron_norm(p.s + 1.0) for row in p.E for e in row)


def norm_v(p: EllipticProblem) -> float:
    return math.fsum(vi.barron_norm(p.s) for vi in p.v)


def validate(p: EllipticProblem) -> ValidationReport:
    """Check structure and smallness; populate constants where defined.

    Deterministic and side-effect free.  The pointwise condition c(x) >= 0 is
    not decidable from norms alone; `a1_certificate` reports the sufficient
    condition alpha >= |w|_{B^0} instead (via the uniform bound
    |w(x)| <= |w|_{B^0}).
    """
    messages: list[str] = []
    structural = True

    scale = max(1.0, float(np.abs(p.M).max()))
    if float(np.abs(p.M - p.M.T).max()) > _M_SYMMETRY_RTOL * scale:
        structural = False
        messages.append("constant matrix M is not symmetric")
    m = float(np.linalg.eigvalsh((p.M + p.M.T) / 2.0)[0])
    if m <= 0:
        structural = False
        messages.append(f"constant matrix M is not positive definite (lambda_min = {m})")
    for i in range(p.lattice.d):
        for j in range(i + 1, p.lattice.d):
            if p.E[i][j] != p.E[j][i]:
                structural = False
                messages.append(f"perturbation entries E[{i}][{j}] and E[{j}][{i}] differ")

    nE = norm_E(p)
    nw = p.w.barron_norm(p.s)
    nv = norm_v(p)
    K = nE + nw + nv
    mu = min(p.alpha, m)

    a3 = structural and nE < mu
    a3p = structural and K < mu
    a1_cert = p.alpha >= p.w.barron_norm(0.0)

    constants = None
    if a3:
        L = 2.0 / (mu - nE)
        q_inner = nE / mu
        constants = Constants(
            m=m,
            norm_E=nE,
            norm_w=nw,
            norm_v=nv,
            K=K,
            mu=mu,
            L=L,
            q_inner=q_inner,
            q_outer=(nw + nv) / (mu - nE) if a3p else None,
            C_sharp=2.0 * (mu - nE + nw + nv) / ((mu - nE) * (mu - K)) if a3p else None,
            C_simple=2.0 * (mu + K) / (mu * (mu - K)) if a3p else None,
        )
    elif structural:
        messages.append(
            f"smallness of the second-order perturbation fails: "
            f"|E| = {nE} is not below min(alpha, m) = {mu}"
        )
    if structural and a3 and not a3p:
        messages.append(
            f"combined smallness fails: K = {K} is not below min(alpha, m) = {mu}; "
            f"solves run best-effort without a certificate"
        )

    return ValidationReport(
        structural_ok=structural,
        a3_holds=a3,
        a3prime_holds=a3p,
        a1_certificate=a1_cert,
        constants=constants,
        messages=messages,
    )


def neuron_bound(C: float, vol: float, f_norm: float, eps: float) -> int:
    """ceil(C^2 * vol * f_norm^2 / eps^2), and at least 1.

    A near-integer value (within 1e-9 relative) is snapped before the
    ceiling, so exact targets are not bumped by the last-ulp of the quotient.
    """
    C, vol, f_norm, eps = float(C), float(vol), float(f_norm), float(eps)
    if not (C > 0 and vol > 0 and eps > 0 and f_norm >= 0):
        raise ValueError("C, vol, eps must be positive; f_norm nonnegative")
    if not all(map(math.isfinite, (C, vol, f_norm, eps))):
        raise ValueError("arguments must be finite")
    r = (C * C) * vol * (f_norm * f_norm) / (eps * eps)
    nearest = round(r)
    if abs(r - nearest) <= 1e-9 * max(1.0, abs(r)):
        n = int(nearest)
    else:
        n = math.ceil(r)
    return max(1, n)


def discretize_gaussian(lattice: Lattice, radius: float) -> AtomMap:
    """Midpoint discretization of the standard Gaussian density.

    Amplitudes are cell mass estimates of the transform density
    (2 pi)^{-d} exp(-|xi|^2 / 2): c(z) = (prod h) * density(xi_z) for all
    lattice frequencies with |xi_z| <= radius.  Even and positive, so
    conjugate symmetry is automatic.  Use `gaussian_tail_mass` for the
    analytic truncation bound on the order-0 norm.
    """
    radius = float(radius)
    if not (radius > 0 and math.isfinite(radius)):
        raise ValueError("radius must be positive and finite")
    cap = get_atom_cap()
    d = lattice.d
    cell = 1.0
    for hv in lattice.h:
        cell *= hv
    prefac = cell / (2.0 * math.pi) ** d
    rsq = radius * radius
    ranges = [range(-int(radius // hv), int(radius // hv) + 1) for hv in lattice.h]
    count = 1
    for r in ranges:
        count *= len(r)
    if count > 4 * cap:
        raise ConstructionError(
            f"lattice ball would enumerate {count} candidate indices, above 4x the atom cap {cap}"
        )
    half = {}
    for z in itertools.product(*ranges):
        if not is_canonical(z):
            continue
        nsq = lattice.freq_norm_sq(z)
        if nsq <= rsq:
            half[z] = complex(prefac * math.exp(-0.5 * nsq), 0.0)
            if 2 * len(half) > cap:
                raise AtomBudgetError(f"gaussian discretization exceeds the atom cap {cap}")
    return AtomMap.from_half_atoms(lattice, half)


def gaussian_tail_mass(d: int, radius: float) -> float:
    """Mass of the Gaussian transform density outside |xi| > radius.

    Equals (2 pi)^{-d/2} P(chi2_d > radius^2); bounds the order-0 norm error
    of truncating `discretize_gaussian` to the given radius.
    """
    return (2.0 * math.pi) ** (-0.5 * d) * float(gammaincc(0.5 * d, 0.5 * radius * radius))


def counterexample_eta(eps: float, lattice: Lattice) -> AtomMap:
    """Two-atom perturbation witnessing loss of ellipticity for large norms.

    Places amplitude -(1+eps) / (2 sqrt(1+|xi|^2)) at the smallest nonzero
    lattice frequency pair +-z*.  By construction the order-1 norm equals
    sqrt(2) (1+eps) and 1 + eta(0) < 0, so I + diag(eta, 0, ...) loses
    positive definiteness at the origin.
    """
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError("eps must be positive and finite")
    axis = min(range(lattice.d), key=lambda i: lattice.h[i])
    xi = lattice.h[axis]
    if xi * xi > 2.0 * eps:
        raise ConstructionError(
            f"smallest nonzero lattice frequency {xi} exceeds sqrt(2*eps) = "
            f"{math.sqrt(2.0 * eps)}; use a finer frequency step"
        )
    z = tuple(1 if i == axis else 0 for i in range(lattice.d))
    amp = -(1.0 + eps) / (2.0 * math.sqrt(1.0 + xi * xi))
    return AtomMap.from_half_atoms(lattice, {z: complex(amp, 0.0)})


# --------------------------------------------------------------------- files

FORMAT_VERSION = 1

_ATOMS_SCHEMA = {
    "type": "object",
    "required": ["d", "h", "atoms"],
    "properties": {
        "d": {"type": "integer", "minimum": 1},
        "h": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "atoms": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["z", "re", "im"],
                "properties": {
                    "z": {"type": "array", "items": {"type": "integer"}},
                    "re": {"type": "number"},
                    "im": {"type": "number"},
                },
                "additionalProperties": False,
            },
        },
    },
}

_ATOMS_OR_NULL = {"oneOf": [{"type": "null"}, _ATOMS_SCHEMA]}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["format", "d", "h", "s", "alpha", "beta", "M", "f"],
    "properties": {
        "format": {"type": "integer"},
        "d": {"type": "integer", "minimum": 1},
        "h": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "s": {"type": "number", "minimum": 0},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"type": "array", "items": {"type": "number"}},
        "M": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "E": {
            "oneOf": [
                {"type": "null"},
                {"type": "array", "items": {"type": "array", "items": _ATOMS_OR_NULL}},
            ]
        },
        "v": {"oneOf": [{"type": "null"}, {"type": "array", "items": _ATOMS_OR_NULL}]},
        "w": _ATOMS_OR_NULL,
        "f": _ATOMS_SCHEMA,
        "solver": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["combined", "nested"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "prune_tau_frac": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "max_iters": {"type": "integer", "minimum": 1},
                "residual_points": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
}


def _pointer(path_parts) -> str:
    return "/" + "/".join(str(part) for part in path_parts)


def _atoms_at(obj, lattice: Lattice, pointer: str) -> AtomMap:
    if obj is None:
        return AtomMap.zero(lattice)
    try:
        return AtomMap.from_json_obj(obj, lattice)
    except (LatticeMismatchError, ConjugateSymmetryError, ValueError) as exc:
        raise SchemaError(str(exc), pointer) from exc


def problem_from_json_obj(obj: dict):
    """Parse a problem file object; returns (problem, solver_options_dict).

    Schema violations raise `SchemaError` carrying a JSON pointer to the
    offending field.
    """
    try:
        jsonschema.validate(obj, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        best = jsonschema.exceptions.best_match([exc])
        raise SchemaError(best.message, _pointer(best.absolute_path)) from exc
    if obj["format"] != FORMAT_VERSION:
        raise SchemaError(
            f"unsupported format {obj['format']}; this reader understands {FORMAT_VERSION}",
            "/format",
        )
    d = obj["d"]
    if len(obj["h"]) != d:
        raise SchemaError(f"h must have {d} entries", "/h")
    if len(obj["beta"]) != d:
        raise SchemaError(f"beta must have {d} entries", "/beta")
    if len(obj["M"]) != d or any(len(row) != d for row in obj["M"]):
        raise SchemaError(f"M must be a {d}x{d} matrix", "/M")
    lattice = Lattice(d, tuple(float(v) for v in obj["h"]))

    E_obj = obj.get("E")
    if E_obj is None:
        E = None
    else:
        if len(E_obj) != d or any(len(row) != d for row in E_obj):
            raise SchemaError(f"E must be a {d}x{d} grid", "/E")
        E = [
            [_atoms_at(E_obj[i][j], lattice, f"/E/{i}/{j}") for j in range(d)]
            for i in range(d)
        ]
    v_obj = obj.get("v")
    if v_obj is None:
        v = None
    else:
        if len(v_obj) != d:
            raise SchemaError(f"v must have {d} components", "/v")
        v = [_atoms_at(v_obj[i], lattice, f"/v/{i}") for i in range(d)]
    w = _atoms_at(obj.get("w"), lattice, "/w")
    f = _atoms_at(obj["f"], lattice, "/f")

    p = EllipticProblem(
        lattice,
        s=float(obj["s"]),
        alpha=float(obj["alpha"]),
        beta=[float(x) for x in obj["beta"]],
        M=[[float(x) for x in row] for row in obj["M"]],
        E=E,
        v=v,
        w=w,
        f=f,
    )
    return p, dict(obj.get("solver", {}))


def problem_to_json_obj(p: EllipticProblem, solver: dict | None = None) -> dict:
    def opt(g: AtomMap):
        return None if g.is_zero else g.to_json_obj()

    obj = {
        "format": FORMAT_VERSION,
        "d": p.lattice.d,
        "h": list(p.lattice.h),
        "s": p.s,
        "alpha": p.alpha,
        "beta": [float(x) for x in p.beta],
        "M": [[float(x) for x in row] for row in p.M],
        "E": None
        if all(e.is_zero for row in p.E for e in row)
        else [[opt(e) for e in row] for row in p.E],
        "v": None if all(vi.is_zero for vi in p.v) else [opt(vi) for vi in p.v],
        "w": opt(p.w),
        "f": p.f.to_json_obj(),
    }
    if solver:
        obj["solver"] = dict(solver)
    return obj
