"""Exact arithmetic and norm calculus for finite Fourier-atom sums.

A real-valued function is stored as a finite, conjugate-symmetric map from
integer indices z on a scaled frequency lattice to complex amplitudes c(z):

    g(x) = sum_z c(z) * exp(i * x . xi_z),    xi_z = (h_1 z_1, ..., h_d z_d).

Because supports live on the integer lattice, sums and convolutions merge
amplitudes by integer key with no floating-point tolerance.  An amplitude is
deleted only when it is exactly 0.0; every deliberate approximation flows
through `prune`, which returns the discarded l1 mass exactly.

l1 norm sums use `math.fsum` (exactly rounded compensated summation), so the
norm-accounting identities hold to the last ulp.  All values are immutable
and operations are pure functions, safe to call from any number of threads.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .errors import (
    AtomBudgetError,
    ConjugateSymmetryError,
    LatticeMismatchError,
)

Index = tuple[int, ...]

#: Hard default on stored amplitudes per map and on amplitude products per
#: convolution.  Blowups fail loudly instead of thrashing.
DEFAULT_ATOM_CAP = 2_000_000

_atom_cap = DEFAULT_ATOM_CAP

# i**k for k = 0..3, used by `partial`
_I_POWERS = (complex(1, 0), complex(0, 1), complex(-1, 0), complex(0, -1))


def set_atom_cap(cap: int) -> None:
    """Set the global atom cap (amplitudes per map, products per convolution)."""
    global _atom_cap
    if cap < 1:
        raise ValueError("atom cap must be positive")
    _atom_cap = int(cap)


def get_atom_cap() -> int:
    return _atom_cap


@dataclass(frozen=True)
class Lattice:
    """Scaled integer frequency lattice: index z carries frequency (h_i * z_i)."""

    d: int
    h: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        h = tuple(float(v) for v in self.h)
        if len(h) != self.d:
            raise ValueError(f"expected {self.d} frequency steps, got {len(h)}")
        if not all(math.isfinite(v) and v > 0 for v in h):
            raise ValueError(f"frequency steps must be positive and finite, got {h}")
        object.__setattr__(self, "h", h)

    def frequency(self, z: Index) -> tuple[float, ...]:
        return tuple(hi * zi for hi, zi in zip(self.h, z))

    def freq_norm_sq(self, z: Index) -> float:
        return sum((hi * zi) ** 2 for hi, zi in zip(self.h, z))

    @property
    def zero_index(self) -> Index:
        return (0,) * self.d


def is_canonical(z: Index) -> bool:
    """True if z is in the canonical half-space (first nonzero coordinate > 0) or zero."""
    for v in z:
        if v > 0:
            return True
        if v < 0:
            return False
    return True


def _neg(z: Index) -> Index:
    return tuple(-v for v in z)


class AtomMap:
    """A real-valued function as a finite conjugate-symmetric set of Fourier atoms.

    Construct through the classmethods (`zero`, `constant`, `cosine`,
    `from_atoms`, `from_half_atoms`); the raw constructor validates a full
    index->amplitude mapping.  Instances are immutable value objects.
    """

    __slots__ = ("lattice", "_atoms", "_cache")

    def __init__(self, lattice: Lattice, atoms: Mapping[Index, complex], *, _trusted=False):
        self.lattice = lattice
        if not _trusted:
            atoms = {tuple(int(v) for v in z): complex(c) for z, c in atoms.items()}
            _check_symmetry(lattice, atoms)
        # canonical storage order makes every downstream reduction deterministic
        self._atoms = dict(sorted(atoms.items()))
        self._cache = None

    # ------------------------------------------------------------------ build

    @classmethod
    def zero(cls, lattice: Lattice) -> "AtomMap":
        return cls(lattice, {}, _trusted=True)

    @classmethod
    def constant(cls, lattice: Lattice, value: float) -> "AtomMap":
        value = float(value)
        if not math.isfinite(value):
            raise ValueError("constant value must be finite")
        return cls._from_half(lattice, {lattice.zero_index: complex(value, 0.0)})

    @classmethod
    def cosine(cls, lattice: Lattice, z: Index, r: float = 1.0, phase: float = 0.0) -> "AtomMap":
        """The function r*cos(x.xi_z + phase) for a canonical nonzero index z."""
        z = tuple(int(v) for v in z)
        if len(z) != lattice.d or z == lattice.zero_index or not is_canonical(z):
            raise ValueError(f"index must be canonical and nonzero, got {z}")
        c = 0.5 * r * complex(math.cos(phase), math.sin(phase))
        return cls._from_half(lattice, {z: c})

    @classmethod
    def from_atoms(cls, lattice: Lattice, atoms: Mapping[Index, complex]) -> "AtomMap":
        """Validating constructor from a full (both half-spaces) mapping."""
        return cls(lattice, atoms)

    @classmethod
    def from_half_atoms(cls, lattice: Lattice, half: Mapping[Index, complex]) -> "AtomMap":
        """Build from canonical half-space amplitudes; mirrors conjugates."""
        out = {}
        for z, c in half.items():
            z = tuple(int(v) for v in z)
            if len(z) != lattice.d or not is_canonical(z):
                raise ValueError(f"index {z} is not canonical for d={lattice.d}")
            c = complex(c)
            if not (math.isfinite(c.real) and math.isfinite(c.imag)):
                raise ValueError(f"amplitude at {z} is not finite")
            if z == lattice.zero_index and c.imag != 0.0:
                raise ConjugateSymmetryError("zero-mode amplitude must be real")
            out[z] = c
        return cls._from_half(lattice, out)

    @classmethod
    def _from_half(cls, lattice: Lattice, half: Mapping[Index, complex]) -> "AtomMap":
        # Trusted internal path: mirror canonical amplitudes bit-exactly, so
        # conjugate symmetry holds by construction in every operation.
        zero_key = lattice.zero_index
        full = {}
        for z, c in half.items():
            if z == zero_key:
                # imaginary residue at the zero mode is the projection back to
                # real-valued functions; mathematically it is exactly zero
                re = c.real
                if re != 0.0:
                    full[z] = complex(re, 0.0)
            elif c != 0:
                full[z] = c
                full[_neg(z)] = c.conjugate()
        return cls(lattice, full, _trusted=True)

    # ------------------------------------------------------------------ views

    @property
    def atoms(self) -> Mapping[Index, complex]:
        return dict(self._atoms)

    def half_items(self) -> Iterator[tuple[Index, complex]]:
        """Canonical half-space (plus zero-mode) atoms in sorted order."""
        for z, c in self._atoms.items():
            if is_canonical(z):
                yield z, c

    def __len__(self) -> int:
        return len(self._atoms)

    @property
    def is_zero(self) -> bool:
        return not self._atoms

    def __eq__(self, other) -> bool:
        if not isinstance(other, AtomMap):
            return NotImplemented
        return self.lattice == other.lattice and self._atoms == other._atoms

    __hash__ = None

    def __repr__(self) -> str:
        return f"AtomMap(d={self.lattice.d}, atoms={len(self._atoms)})"

    def check_symmetry(self) -> None:
        """Bit-exact re-verification of the conjugate-symmetry invariant."""
        _check_symmetry(self.lattice, self._atoms)

    # ------------------------------------------------------------------ norms

    def barron_norm(self, s: float) -> float:
        """2^{s/2} * sum_z |c(z)| (1 + |xi_z|^2)^{s/2}, exactly-rounded sum."""
        s = _check_order(s)
        half = 0.5 * s
        lat = self.lattice
        terms = [abs(c) * (1.0 + lat.freq_norm_sq(z)) ** half for z, c in self._atoms.items()]
        return (2.0**half) * math.fsum(terms)

    # ------------------------------------------------------------- evaluation

    def _arrays(self):
        # Lazy, idempotent; benign under concurrent first use.
        if self._cache is None:
            n = len(self._atoms)
            zi = np.array(list(self._atoms.keys()), dtype=float).reshape(n, self.lattice.d)
            xi = zi * np.asarray(self.lattice.h)
            amps = np.array(list(self._atoms.values()), dtype=complex)
            self._cache = (xi, amps)
        return self._cache

    def eval(self, x) -> float:
        """Real part of sum_z c(z) exp(i x.xi_z)."""
        x = np.asarray(x, dtype=float).reshape(self.lattice.d)
        if not np.all(np.isfinite(x)):
            raise ValueError("evaluation point must be finite")
        return float(self.eval_many(x[None, :])[0])

    def eval_many(self, points) -> np.ndarray:
        """Vectorized evaluation at an array of points with shape (P, d)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.lattice.d:
            raise ValueError(f"expected points of shape (P, {self.lattice.d})")
        if not self._atoms:
            return np.zeros(pts.shape[0])
        xi, amps = self._arrays()
        out = np.empty(pts.shape[0])
        block = max(1, 4_000_000 // max(1, len(self._atoms)))
        for i in range(0, pts.shape[0], block):
            ph = pts[i : i + block] @ xi.T
            out[i : i + block] = np.cos(ph) @ amps.real - np.sin(ph) @ amps.imag
        return out

    # ------------------------------------------------------------ vector ops

    def _require_same_lattice(self, other: "AtomMap") -> None:
        if self.lattice != other.lattice:
            raise LatticeMismatchError(
                f"lattices differ: {self.lattice} vs {other.lattice}"
            )

    def __add__(self, other: "AtomMap") -> "AtomMap":
        if not isinstance(other, AtomMap):
            return NotImplemented
        self._require_same_lattice(other)
        half = {z: c for z, c in self.half_items()}
        for z, c in other.half_items():
            half[z] = half.get(z, 0j) + c
        return AtomMap._from_half(self.lattice, half)

    def __sub__(self, other: "AtomMap") -> "AtomMap":
        if not isinstance(other, AtomMap):
            return NotImplemented
        return self + other.scale(-1.0)

    def __neg__(self) -> "AtomMap":
        return self.scale(-1.0)

    def scale(self, lam: float) -> "AtomMap":
        lam = float(lam)
        if not math.isfinite(lam):
            raise ValueError("scale factor must be finite")
        if lam == 0.0:
            return AtomMap.zero(self.lattice)
        half = {z: c * lam for z, c in self.half_items()}
        return AtomMap._from_half(self.lattice, half)

    def __mul__(self, other):
        if isinstance(other, AtomMap):
            return multiply(self, other)
        if isinstance(other, (int, float)):
            return self.scale(other)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(other)
        return NotImplemented

    # ------------------------------------------------------------ derivatives

    def partial(self, a) -> "AtomMap":
        """Multi-index derivative: c(z) -> c(z) * prod_i (i xi_{z,i})^{a_i}."""
        a = tuple(int(v) for v in a)
        if len(a) != self.lattice.d or any(v < 0 for v in a):
            raise ValueError(f"invalid multi-index {a} for d={self.lattice.d}")
        order = sum(a)
        if order == 0:
            return self
        iu = _I_POWERS[order % 4]
        half = {}
        for z, c in self.half_items():
            xi = self.lattice.frequency(z)
            fac = 1.0
            for xv, av in zip(xi, a):
                if av:
                    fac *= xv**av
            if fac != 0.0:
                half[z] = c * (iu * fac)
        return AtomMap._from_half(self.lattice, half)

    # ---------------------------------------------------------------- pruning

    def prune(self, s_acct: float, tau: float) -> tuple["AtomMap", float]:
        """Drop the smallest-contribution atom pairs within an l1 budget.

        Removes conjugate pairs (greedy, smallest contribution to the order
        `s_acct` norm first) while the removed mass stays <= tau.  Returns the
        pruned map and the discarded mass, which equals the norm of the
        difference exactly by l1 additivity.
        """
        s_acct = _check_order(s_acct)
        tau = float(tau)
        if tau < 0 or not math.isfinite(tau):
            raise ValueError("prune budget must be finite and nonnegative")
        if tau == 0.0 or not self._atoms:
            return self, 0.0
        scale2 = 2.0 ** (0.5 * s_acct)
        half = 0.5 * s_acct
        lat = self.lattice
        pairs = []
        for z, c in self.half_items():
            t = abs(c) * (1.0 + lat.freq_norm_sq(z)) ** half
            if z != lat.zero_index:
                t = 2.0 * t
            pairs.append((t, z))
        pairs.sort()
        vals = [t for t, _ in pairs]
        running, cum = 0.0, []
        for t in vals:
            running += t
            cum.append(running * scale2)
        cut = bisect_right(cum, tau)
        # the running sum is approximate; settle the boundary with exact sums
        while cut > 0 and scale2 * math.fsum(vals[:cut]) > tau:
            cut -= 1
        while cut < len(vals) and scale2 * math.fsum(vals[: cut + 1]) <= tau:
            cut += 1
        if cut == 0:
            return self, 0.0
        discarded = scale2 * math.fsum(vals[:cut])
        removed = {z for _, z in pairs[:cut]}
        kept = {z: c for z, c in self.half_items() if z not in removed}
        return AtomMap._from_half(self.lattice, kept), discarded

    # ---------------------------------------------------------------- folding

    def fold_real(self) -> "RealAtomList":
        """Fold conjugate pairs into real cosine entries (z, r, phase)."""
        self.check_symmetry()
        entries = []
        for z, c in self.half_items():
            if z == self.lattice.zero_index:
                c0 = c.real
                r = abs(c0)
                phi = 0.0 if c0 > 0 else math.pi
            else:
                r = 2.0 * abs(c)
                phi = math.atan2(c.imag, c.real)
                if phi <= -math.pi:
                    phi = math.pi
            entries.append((z, r, phi))
        return RealAtomList(self.lattice, tuple(entries))

    # ------------------------------------------------------------------- json

    def to_json_obj(self) -> dict:
        """Half-space serialization: {"d", "h", "atoms": [{"z", "re", "im"}...]}."""
        return {
            "d": self.lattice.d,
            "h": list(self.lattice.h),
            "atoms": [
                {"z": list(z), "re": c.real, "im": c.imag} for z, c in self.half_items()
            ],
        }

    @classmethod
    def from_json_obj(cls, obj: dict, lattice: Lattice | None = None) -> "AtomMap":
        lat = Lattice(int(obj["d"]), tuple(float(v) for v in obj["h"]))
        if lattice is not None and lat != lattice:
            raise LatticeMismatchError(
                f"file lattice {lat} does not match expected {lattice}"
            )
        half = {}
        for entry in obj["atoms"]:
            z = tuple(int(v) for v in entry["z"])
            half[z] = complex(float(entry["re"]), float(entry["im"]))
        return cls.from_half_atoms(lat, half)


@dataclass(frozen=True)
class RealAtomList:
    """Folded real form: g(x) = sum_j r_j cos(x.xi_{z_j} + phi_j).

    Indices are distinct and canonical; the zero index contributes the
    constant r*cos(phi).  `eval` runs a plain scalar loop, giving a code path
    independent of the complex-exponential evaluator in `AtomMap`.
    """

    lattice: Lattice
    entries: tuple[tuple[Index, float, float], ...]

    def __post_init__(self):
        seen = set()
        for z, r, phi in self.entries:
            if not is_canonical(z) or z in seen:
                raise ValueError(f"entries must have distinct canonical indices, got {z}")
            seen.add(z)
            if r < 0 or not (-math.pi < phi <= math.pi):
                raise ValueError(f"bad magnitude/phase ({r}, {phi}) at {z}")

    def eval(self, x) -> float:
        total = 0.0
        for z, r, phi in self.entries:
            dot = 0.0
            for hi, zi, xv in zip(self.lattice.h, z, x):
                dot += hi * zi * xv
            total += r * math.cos(dot + phi)
        return total


def multiply(g: AtomMap, h: AtomMap, cap: int | None = None) -> AtomMap:
    """Exact discrete convolution: amplitude at z is sum_{z'} c_g(z') c_h(z - z').

    Realizes the pointwise product g*h.  Raises `AtomBudgetError` when the
    amplitude-product count or the result size exceeds the atom cap.
    """
    g._require_same_lattice(h)
    cap = _atom_cap if cap is None else int(cap)
    n_products = len(g) * len(h)
    if n_products > cap:
        raise AtomBudgetError(
            f"convolution needs {n_products} amplitude products, above the atom cap {cap}"
        )
    if len(h) < len(g):
        g, h = h, g
    # accumulate canonical output keys only; conjugate mirror supplies the rest
    acc: dict[Index, complex] = {}
    items_h = list(h._atoms.items())
    for z1, c1 in g._atoms.items():
        for z2, c2 in items_h:
            w = tuple(a + b for a, b in zip(z1, z2))
            if is_canonical(w):
                acc[w] = acc.get(w, 0j) + c1 * c2
    if 2 * len(acc) > cap:
        raise AtomBudgetError(
            f"convolution would store about {2 * len(acc)} atoms, above the atom cap {cap}"
        )
    return AtomMap._from_half(g.lattice, acc)


def _check_order(s) -> float:
    s = float(s)
    if not math.isfinite(s) or s < 0:
        raise ValueError(f"norm order must be finite and nonnegative, got {s}")
    return s


def _check_symmetry(lattice: Lattice, atoms: Mapping[Index, complex]) -> None:
    for z, c in atoms.items():
        if len(z) != lattice.d:
            raise ValueError(f"index {z} has wrong length for d={lattice.d}")
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError(f"amplitude at {z} is not finite")
        if c == 0:
            raise ValueError(f"zero amplitude stored at {z}")
        m = _neg(z)
        cm = atoms.get(m)
        if cm is None or cm != c.conjugate():
            raise ConjugateSymmetryError(
                f"missing or non-conjugate mirror amplitude for index {z}"
            )
