"""Shared fixture builders for the test suite."""

import math

import numpy as np

from barronpde import AtomMap, EllipticProblem, Lattice, apply_L
from barronpde.atoms import is_canonical


def random_atom_map(rng, d=1, h=None, n_pairs=8, max_index=3, amp=1.0, zero_mode=True):
    """Random conjugate-symmetric atom map with about n_pairs cosine pairs."""
    lattice = Lattice(d, tuple(h) if h is not None else (1.0,) * d)
    half = {}
    guard = 0
    while len(half) < n_pairs and guard < 50 * n_pairs:
        guard += 1
        z = tuple(int(v) for v in rng.integers(-max_index, max_index + 1, size=d))
        if all(v == 0 for v in z):
            continue
        if not is_canonical(z):
            z = tuple(-v for v in z)
        half[z] = amp * complex(rng.normal(), rng.normal())
    if zero_mode and rng.random() < 0.5:
        half[(0,) * d] = complex(amp * rng.normal(), 0.0)
    half = {z: c for z, c in half.items() if c != 0}
    return AtomMap.from_half_atoms(lattice, half)


def pair_amp(target_norm, s, lattice, z):
    """Half-amplitude making the +-z cosine pair have the given order-s norm."""
    w = (1.0 + lattice.freq_norm_sq(z)) ** (0.5 * s)
    return target_norm / (2.0 * 2.0 ** (0.5 * s) * w)


def axis_problem(d, *, s=0.0, norm_e=0.25, norm_w=0.125, norm_v=0.125, f_norm=1.0,
                 beta_ones=True, phases=(0.0, 0.0, 0.0, 0.0)):
    """Problem family with all data on the first axis; norms are d-independent.

    alpha = m = 1 and K = norm_e + norm_w + norm_v by construction, so the
    same family across dimensions has identical contraction numbers.
    """
    lattice = Lattice(d, (1.0,) * d)
    e1 = tuple(1 if i == 0 else 0 for i in range(d))
    zero = AtomMap.zero(lattice)

    E = None
    if norm_e:
        a = pair_amp(norm_e, s + 1.0, lattice, e1)
        E = [[zero] * d for _ in range(d)]
        E[0][0] = AtomMap.from_half_atoms(
            lattice, {e1: a * complex(math.cos(phases[0]), math.sin(phases[0]))}
        )
    w = None
    if norm_w:
        a = pair_amp(norm_w, s, lattice, e1)
        w = AtomMap.from_half_atoms(
            lattice, {e1: a * complex(math.cos(phases[1]), math.sin(phases[1]))}
        )
    v = None
    if norm_v:
        a = pair_amp(norm_v, s, lattice, e1)
        v = [zero] * d
        v[0] = AtomMap.from_half_atoms(
            lattice, {e1: a * complex(math.cos(phases[2]), math.sin(phases[2]))}
        )
    a = pair_amp(f_norm, s, lattice, e1)
    f = AtomMap.from_half_atoms(
        lattice, {e1: a * complex(math.cos(phases[3]), math.sin(phases[3]))}
    )
    beta = [1.0] * d if beta_ones else [0.0] * d
    return EllipticProblem(
        lattice, s=s, alpha=1.0, beta=beta, M=np.eye(d), E=E, v=v, w=w, f=f
    )


def appendix_style_problem(d):
    """alpha = m = 1, K = 1/2 split as 1/4 + 1/8 + 1/8, |f|_{B^0} = 1."""
    return axis_problem(d, phases=(0.4, -0.9, 1.3, 0.0))


def inner_contraction_fixture():
    """d = 2 problem with q_inner = 1/2 plus a manufactured inner solution."""
    lattice = Lattice(2, (1.0, 1.0))
    zero = AtomMap.zero(lattice)
    a = pair_amp(0.5, 1.0, lattice, (1, 0))
    e11 = AtomMap.from_half_atoms(lattice, {(1, 0): complex(a, 0.0)})
    E = [[e11, zero], [zero, zero]]
    u_exact = (
        AtomMap.cosine(lattice, (1, 0), r=0.4)
        + AtomMap.cosine(lattice, (0, 1), r=0.3, phase=0.8)
        + AtomMap.cosine(lattice, (1, 1), r=0.2, phase=-0.4)
        + AtomMap.cosine(lattice, (2, -1), r=0.1, phase=1.7)
        + AtomMap.constant(lattice, 0.05)
    )
    p = EllipticProblem(
        lattice, s=0.0, alpha=1.0, beta=[0.2, -0.1], M=np.eye(2), E=E, f=u_exact
    )
    g = apply_L(u_exact, p)
    p = EllipticProblem(
        lattice, s=0.0, alpha=1.0, beta=[0.2, -0.1], M=np.eye(2), E=E, f=g
    )
    return p, u_exact


def manufactured_problem():
    """d = 1 problem with all perturbation slots filled and a known solution."""
    lattice = Lattice(1, (1.0,))
    e11 = AtomMap.cosine(lattice, (1,), r=1 / 8, phase=0.7)
    w = AtomMap.cosine(lattice, (2,), r=0.1, phase=-0.3)
    v1 = AtomMap.cosine(lattice, (1,), r=0.1, phase=1.2)
    u_exact = (
        AtomMap.cosine(lattice, (1,), r=0.3)
        + AtomMap.cosine(lattice, (2,), r=0.2, phase=0.5)
        + AtomMap.constant(lattice, 0.1)
    )
    p = EllipticProblem(
        lattice, s=0.0, alpha=1.0, beta=[0.3], M=[[1.0]], E=[[e11]], v=[v1], w=w,
        f=u_exact,
    )
    f = apply_L(u_exact, p)
    p = EllipticProblem(
        lattice, s=0.0, alpha=1.0, beta=[0.3], M=[[1.0]], E=[[e11]], v=[v1], w=w, f=f
    )
    return p, u_exact


def random_trig_function(rng, d, n_entries, max_index=3, amp=0.25, h=None):
    """Random atom map without a zero mode (handy for extraction tests)."""
    lattice = Lattice(d, tuple(h) if h is not None else (1.0,) * d)
    half = {}
    while len(half) < n_entries:
        z = tuple(int(v) for v in rng.integers(-max_index, max_index + 1, size=d))
        if all(v == 0 for v in z):
            continue
        if not is_canonical(z):
            z = tuple(-v for v in z)
        half[z] = amp * complex(rng.normal(), rng.normal())
    return AtomMap.from_half_atoms(lattice, half)
