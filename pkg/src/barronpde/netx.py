"""Two-layer cosine network extraction and exact H^k error metrics on boxes.

`extract` realizes a function u as the expectation of single-cosine draws:
folding u to entries (xi_j, r_j, phi_j), sampling index j with probability
proportional to the order-k norm integrand r_j 2^{k/2} (1+|xi_j|^2)^{k/2},
and weighting each draw so its contribution is unbiased,

    u_n(x) = (1/n) sum_i a_i cos(w_i . x + b_i),
    a_i = |u|_{B^k} 2^{-k/2} (1 + |w_i|^2)^{-k/2},  w_i = xi_{j(i)},  b_i = phi_{j(i)}.

Every neuron then has the same weighted magnitude |a_i| 2^{k/2}
(1+|w_i|^2)^{k/2} = |u|_{B^k}, which keeps the mean-square H^k error at most
|box| |u|_{B^k}^2 / n.

`hk_error_box` integrates the squared difference exactly: each derivative
pair expands by product-to-sum into cosines of frequency sums/differences,
and a box integral of cos(v.x + c) factorizes per axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atoms import AtomMap


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with positive volume."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lo and hi must be nonempty and of equal length")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise ValueError(f"need lo < hi per axis, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def vol(self) -> float:
        out = 1.0
        for a, b in zip(self.lo, self.hi):
            out *= b - a
        return out


@dataclass(frozen=True)
class CosineNetwork:
    """u_n(x) = (1/n) sum_i a_i cos(w_i . x + b_i)."""

    n: int
    neurons: tuple[tuple[float, tuple[float, ...], float], ...]
    meta: dict

    def __post_init__(self):
        if self.n < 1 or len(self.neurons) != self.n:
            raise ValueError("n must match the number of neurons and be positive")

    @property
    def d(self) -> int:
        return len(self.neurons[0][1])

    def eval_many(self, points) -> np.ndarray:
        X = np.asarray(points, dtype=float)
        a, W, b = self.term_arrays()
        return np.cos(X @ W.T + b) @ a

    def term_arrays(self):
        """(a/n, W, b) arrays so that u_n(x) = sum_t a_t cos(W_t . x + b_t)."""
        a = np.array([nr[0] for nr in self.neurons]) / self.n
        W = np.array([nr[1] for nr in self.neurons], dtype=float).reshape(self.n, self.d)
        b = np.array([nr[2] for nr in self.neurons])
        return a, W, b

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "k": self.meta["k"],
            "source_norm": self.meta["source_norm"],
            "seed": self.meta["seed"],
            "neurons": [{"a": a, "w": list(w), "b": b} for a, w, b in self.neurons],
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "CosineNetwork":
        neurons = tuple(
            (float(nr["a"]), tuple(float(v) for v in nr["w"]), float(nr["b"]))
            for nr in obj["neurons"]
        )
        meta = {"k": int(obj["k"]), "source_norm": float(obj["source_norm"]), "seed": obj["seed"]}
        return cls(n=int(obj["n"]), neurons=neurons, meta=meta)


def extract(u: AtomMap, k: int, n: int, seed) -> CosineNetwork:
    """Importance-sample an n-neuron cosine network from the atoms of u.

    Deterministic per seed; unbiased pointwise: averaging u_n(x) over seeds
    converges to u(x).  A zero u yields the single zero neuron.
    """
    if not isinstance(k, int) or k < 0:
        raise ValueError(f"weight exponent k must be a nonnegative integer, got {k!r}")
    if n < 1:
        raise ValueError("n must be positive")
    d = u.lattice.d
    if u.is_zero:
        return CosineNetwork(
            n=1,
            neurons=((0.0, (0.0,) * d, 0.0),),
            meta={"k": k, "source_norm": 0.0, "seed": seed},
        )
    folded = u.fold_real()
    freqs = []
    phases = []
    contribs = []
    half_k = 0.5 * k
    for z, r, phi in folded.entries:
        wgt = (1.0 + u.lattice.freq_norm_sq(z)) ** half_k
        freqs.append(u.lattice.frequency(z))
        phases.append(phi)
        contribs.append((2.0**half_k) * r * wgt)
    source_norm = math.fsum(contribs)
    probs = np.asarray(contribs)
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(contribs), size=n, p=probs)
    neurons = []
    for j in draws:
        w = freqs[j]
        amp = source_norm * (2.0**-half_k) * (1.0 + u.lattice.freq_norm_sq(folded.entries[j][0])) ** (-half_k)
        neurons.append((amp, w, phases[j]))
    return CosineNetwork(
        n=n, neurons=tuple(neurons), meta={"k": k, "source_norm": source_norm, "seed": seed}
    )


def _difference_terms(g: AtomMap, net: CosineNetwork):
    """Difference g - u_n as one cosine list: arrays (A, W, Theta)."""
    if net.d != g.lattice.d:
        raise ValueError("network and atom map dimensions differ")
    amps = []
    freqs = []
    phases = []
    for z, r, phi in g.fold_real().entries:
        amps.append(r)
        freqs.append(g.lattice.frequency(z))
        phases.append(phi)
    na, nW, nb = net.term_arrays()
    for a, w, b in zip(na, nW, nb):
        if a != 0.0:
            amps.append(-a)
            freqs.append(tuple(w))
            phases.append(b)
    A = np.asarray(amps, dtype=float)
    W = np.asarray(freqs, dtype=float).reshape(len(amps), g.lattice.d)
    TH = np.asarray(phases, dtype=float)
    return A, W, TH


def _axis_factor(V: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Per-axis factor of the box integral of exp(i v t): (e^{ivh}-e^{ivl})/(iv)."""
    out = np.empty(V.shape, dtype=complex)
    zero = V == 0.0
    Vs = np.where(zero, 1.0, V)
    out = (np.exp(1j * Vs * hi) - np.exp(1j * Vs * lo)) / (1j * Vs)
    out[zero] = hi - lo
    return out


def _homogeneous_sums(power_sums: list[np.ndarray], k: int) -> np.ndarray:
    """sum_{j<=k} h_j from power sums p_1..p_k via Newton's recurrence."""
    shape = power_sums[0].shape if power_sums else ()
    h = [np.ones(shape)]
    for j in range(1, k + 1):
        acc = np.zeros(shape)
        for i in range(1, j + 1):
            acc += power_sums[i - 1] * h[j - i]
        h.append(acc / j)
    return sum(h)


def hk_error_box(g: AtomMap, net: CosineNetwork, box: Box, k: int) -> float:
    """Exact H^k(box) norm of g - u_n by closed-form trigonometric integration.

    H^k uses the unweighted convention: sum over all multi-indices |a| <= k of
    the squared L2 norm of the corresponding derivative, each counted once.
    """
    if not isinstance(k, int) or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    if box.d != g.lattice.d:
        raise ValueError("box dimension does not match")
    A, W, TH = _difference_terms(g, net)
    T = len(A)
    if T == 0:
        return 0.0
    d = box.d

    Fm = np.ones((T, T), dtype=complex)
    Fp = np.ones((T, T), dtype=complex)
    for ax in range(d):
        col = W[:, ax]
        Fm *= _axis_factor(col[:, None] - col[None, :], box.lo[ax], box.hi[ax])
        Fp *= _axis_factor(col[:, None] + col[None, :], box.lo[ax], box.hi[ax])
    phase = np.exp(1j * TH)
    Gm = (phase[:, None] * phase.conj()[None, :] * Fm).real
    Gp = (phase[:, None] * phase[None, :] * Fp).real

    # derivative weights summed over multi-indices: with x_i = W_{t,i} W_{t',i},
    # P = sum_{|a|<=k} x^a and Q the same at -x (sign (-1)^{|a|})
    ps_pos = []
    ps_neg = []
    for mth in range(1, k + 1):
        Wm = W**mth
        pm = Wm @ Wm.T
        ps_pos.append(pm)
        ps_neg.append(pm if mth % 2 == 0 else -pm)
    P = _homogeneous_sums(ps_pos, k)
    Q = _homogeneous_sums(ps_neg, k)

    AA = np.outer(A, A)
    total = 0.5 * float(np.sum(AA * (P * Gm + Q * Gp)))
    return math.sqrt(max(total, 0.0))


def hk_error_mc(g: AtomMap, net: CosineNetwork, box: Box, k: int, points: int, seed):
    """Monte-Carlo estimate of the H^k(box) error with a delta-method stderr.

    Uniform sampling over the box; each derivative term is evaluated exactly
    per cosine (no finite differences).  Returns (estimate, stderr).
    """
    if points < 2:
        raise ValueError("points must be at least 2")
    if not isinstance(k, int) or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    A, W, TH = _difference_terms(g, net)
    d = box.d
    rng = np.random.default_rng(seed)
    multis = list(_multi_indices(d, k))
    ssq_sum = 0.0
    ssq_sqsum = 0.0
    block = max(1, 2_000_000 // max(1, len(A)))
    remaining = points
    while remaining > 0:
        m = min(block, remaining)
        X = rng.uniform(box.lo, box.hi, size=(m, d))
        if len(A) == 0:
            Y = np.zeros(m)
        else:
            base = X @ W.T + TH
            C = np.cos(base)
            S = np.sin(base)
            quarter = (C, -S, -C, S)
            Y = np.zeros(m)
            for a in multis:
                coeff = A.copy()
                for ax, av in enumerate(a):
                    if av:
                        coeff = coeff * W[:, ax] ** av
                vals = quarter[sum(a) % 4] @ coeff
                Y += vals**2
        ssq_sum += float(Y.sum())
        ssq_sqsum += float((Y**2).sum())
        remaining -= m
    mean = ssq_sum / points
    var = max(ssq_sqsum / points - mean * mean, 0.0) * points / (points - 1)
    est_sq = box.vol * mean
    se_sq = box.vol * math.sqrt(var / points)
    est = math.sqrt(max(est_sq, 0.0))
    stderr = se_sq / (2.0 * est) if est > 0 else 0.0
    return est, stderr


def _multi_indices(d: int, k: int):
    """All multi-indices a with |a| <= k, each exactly once."""

    def rec(prefix, budget, axes_left):
        if axes_left == 1:
            for v in range(budget + 1):
                yield prefix + (v,)
            return
        for v in range(budget + 1):
            yield from rec(prefix + (v,), budget - v, axes_left - 1)

    yield from rec((), k, d)


def rate_sweep(u: AtomMap, k: int, box: Box, n_list, seeds):
    """Extraction error versus width: rows (n, seed, err, bound) plus per-n stats.

    bound is the existential target sqrt(|box|) |u|_{B^k} / sqrt(n); the
    summary reports the mean-square error and the per-n minimum across seeds.
    """
    n_list = list(n_list)
    seeds = list(seeds)
    if not n_list or not seeds:
        raise ValueError("n_list and seeds must be nonempty")
    norm_k = u.barron_norm(float(k))
    rows = []
    summary = []
    sqrt_vol = math.sqrt(box.vol)
    for n in n_list:
        errs = []
        bound = sqrt_vol * norm_k / math.sqrt(n)
        for seed in seeds:
            net = extract(u, k, n, seed)
            err = hk_error_box(u, net, box, k)
            errs.append(err)
            rows.append({"n": n, "seed": seed, "err": err, "bound": bound})
        summary.append(
            {
                "n": n,
                "mean_sq_err": math.fsum(e * e for e in errs) / len(errs),
                "min_err": min(errs),
                "bound": bound,
            }
        )
    return rows, summary


def fit_rate_slope(summary) -> float:
    """Least-squares log-log slope of the per-n RMS error."""
    xs = [math.log(row["n"]) for row in summary]
    ys = [math.log(math.sqrt(row["mean_sq_err"])) for row in summary]
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)
