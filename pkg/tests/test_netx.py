import json
import math

import numpy as np
import pytest

from barronpde import (
    AtomMap,
    Box,
    CosineNetwork,
    Lattice,
    extract,
    fit_rate_slope,
    hk_error_box,
    hk_error_mc,
    rate_sweep,
)

from support import random_trig_function

EPS = np.finfo(float).eps


def lat1():
    return Lattice(1, (1.0,))


def zero_net(d):
    return CosineNetwork(1, ((0.0, (0.0,) * d, 0.0),), {"k": 0, "source_norm": 0.0, "seed": 0})


# ----------------------------------------------------------------------- types


def test_box_validation():
    b = Box((0.0, -1.0), (2.0, 1.5))
    assert b.vol == 5.0 and b.d == 2
    with pytest.raises(ValueError):
        Box((0.0,), (0.0,))
    with pytest.raises(ValueError):
        Box((1.0,), (0.5,))


def test_network_validation():
    with pytest.raises(ValueError):
        CosineNetwork(2, ((1.0, (0.0,), 0.0),), {})


def test_network_json_roundtrip(rng):
    u = random_trig_function(rng, 2, 6)
    net = extract(u, 1, 9, seed=4)
    blob = json.dumps(net.to_json_obj(), sort_keys=True)
    back = CosineNetwork.from_json_obj(json.loads(blob))
    assert back.n == net.n and back.neurons == net.neurons
    assert back.meta["source_norm"] == net.meta["source_norm"]


# --------------------------------------------------------------------- extract


def test_extract_single_entry_degenerate():
    u = AtomMap.cosine(lat1(), (2,), r=0.8, phase=0.3)
    net = extract(u, 2, 11, seed=5)
    assert len(set(net.neurons)) == 1
    box = Box((0.0,), (2 * math.pi,))
    for k in (0, 1, 2):
        assert hk_error_box(u, net, box, k) == pytest.approx(0.0, abs=1e-10)


def test_extract_zero_function():
    net = extract(AtomMap.zero(lat1()), 1, 5, seed=0)
    assert net.n == 1 and net.neurons == ((0.0, (0.0,), 0.0),)


def test_extract_rejects_bad_k():
    u = AtomMap.cosine(lat1(), (1,))
    with pytest.raises(ValueError):
        extract(u, -1, 4, seed=0)
    with pytest.raises(ValueError):
        extract(u, 1.5, 4, seed=0)


def test_extract_deterministic_per_seed(rng):
    u = random_trig_function(rng, 3, 8)
    n1 = extract(u, 2, 50, seed=123)
    n2 = extract(u, 2, 50, seed=123)
    n3 = extract(u, 2, 50, seed=124)
    assert n1.neurons == n2.neurons
    assert n1.neurons != n3.neurons


def test_extract_sampling_law_two_cosines():
    # equal order-0 weights: frequency split must be binomial(n, 1/2)
    u = AtomMap.cosine(lat1(), (1,)) + AtomMap.cosine(lat1(), (2,))
    n = 4000
    net = extract(u, 0, n, seed=11)
    count1 = sum(1 for a, w, b in net.neurons if w == (1.0,))
    sigma = math.sqrt(n * 0.25)
    assert abs(count1 - n / 2) <= 3 * sigma


def test_extract_uniform_magnitude_identity(rng):
    for k in (0, 1, 3):
        u = random_trig_function(rng, 2, 9)
        norm_k = u.barron_norm(float(k))
        net = extract(u, k, 64, seed=2)
        assert net.meta["source_norm"] == pytest.approx(norm_k, rel=4 * EPS)
        for a, w, b in net.neurons:
            weighted = abs(a) * 2 ** (0.5 * k) * (1 + sum(x * x for x in w)) ** (0.5 * k)
            assert abs(weighted - net.meta["source_norm"]) <= 8 * EPS * net.meta["source_norm"]


def test_extract_unbiased_pointwise(rng):
    u = random_trig_function(rng, 2, 7, amp=0.5)
    X = rng.uniform(-2, 2, size=(8, 2))
    truth = u.eval_many(X)
    samples = np.array([extract(u, 1, 16, seed=s).eval_many(X) for s in range(200)])
    mean = samples.mean(axis=0)
    sem = samples.std(axis=0, ddof=1) / math.sqrt(samples.shape[0])
    assert np.all(np.abs(mean - truth) <= 3 * sem + 1e-12)


# ------------------------------------------------------------------ H^k metric


def test_hk_error_box_l2_of_cosine():
    g = AtomMap.cosine(lat1(), (1,))
    box = Box((0.0,), (2 * math.pi,))
    assert hk_error_box(g, zero_net(1), box, 0) == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_hk_error_box_h1_of_cosine():
    # |cos|_{H^1[0,2pi]}^2 = pi + pi
    g = AtomMap.cosine(lat1(), (1,))
    box = Box((0.0,), (2 * math.pi,))
    assert hk_error_box(g, zero_net(1), box, 1) == pytest.approx(
        math.sqrt(2 * math.pi), rel=1e-12
    )


def test_hk_error_box_constant_on_box():
    g = AtomMap.constant(lat1(), 3.0)
    box = Box((0.0,), (0.5,))
    # derivatives vanish: every k gives |3|_{L2} = 3 sqrt(0.5)
    for k in (0, 1, 2):
        assert hk_error_box(g, zero_net(1), box, k) == pytest.approx(
            3 * math.sqrt(0.5), rel=1e-12
        )


def test_hk_error_box_monotone_in_k(rng):
    u = random_trig_function(rng, 2, 6)
    net = extract(u, 1, 5, seed=8)
    box = Box((-0.3, 0.1), (1.1, 1.4))
    vals = [hk_error_box(u, net, box, k) for k in range(4)]
    assert vals == sorted(vals)


def test_hk_error_box_matches_mc(rng):
    for trial in range(4):
        d = int(rng.integers(1, 4))
        u = random_trig_function(rng, d, 6)
        net = extract(u, 1, 5, seed=trial)
        box = Box(tuple(rng.uniform(-1, 0, d)), tuple(rng.uniform(0.5, 1.5, d)))
        k = int(rng.integers(0, 3))
        exact = hk_error_box(u, net, box, k)
        est, se = hk_error_mc(u, net, box, k, 200_000, seed=trial + 50)
        assert abs(exact - est) <= 3 * se


def test_hk_error_mc_exact_representation_is_zero():
    u = AtomMap.cosine(lat1(), (1,), r=0.7, phase=0.4)
    net = extract(u, 0, 3, seed=1)
    est, se = hk_error_mc(u, net, Box((0.0,), (1.0,)), 2, 1000, seed=0)
    assert est == 0.0 and se == 0.0


def test_hk_error_mc_stderr_scaling(rng):
    u = random_trig_function(rng, 1, 5)
    net = extract(u, 0, 4, seed=3)
    box = Box((0.0,), (2.0,))
    ses_small = [hk_error_mc(u, net, box, 1, 4000, seed=s)[1] for s in range(10)]
    ses_big = [hk_error_mc(u, net, box, 1, 8000, seed=s + 10)[1] for s in range(10)]
    ratio = np.mean(ses_big) / np.mean(ses_small)
    assert abs(ratio - 1 / math.sqrt(2)) < 0.2


# ------------------------------------------------------------------ rate sweep


def test_rate_sweep_single_entry_all_zero():
    u = AtomMap.cosine(lat1(), (1,), r=0.4)
    box = Box((0.0,), (1.0,))
    rows, summary = rate_sweep(u, 1, box, [2, 8], [0, 1, 2])
    assert all(row["err"] == pytest.approx(0.0, abs=1e-12) for row in rows)
    assert all(s["mean_sq_err"] == pytest.approx(0.0, abs=1e-20) for s in summary)


def test_rate_sweep_rows_and_bounds(rng):
    u = random_trig_function(rng, 2, 10)
    box = Box((0.0, 0.0), (1.0, 1.0))
    rows, summary = rate_sweep(u, 1, box, [16, 64], list(range(5)))
    assert len(rows) == 10 and len(summary) == 2
    norm = u.barron_norm(1)
    for s in summary:
        assert s["bound"] == pytest.approx(norm / math.sqrt(s["n"]), rel=1e-12)
    assert summary[1]["bound"] == pytest.approx(summary[0]["bound"] / 2, rel=1e-12)


def test_fit_rate_slope_on_synthetic_law():
    summary = [{"n": n, "mean_sq_err": 4.0 / n} for n in (16, 64, 256)]
    assert fit_rate_slope(summary) == pytest.approx(-0.5, abs=1e-12)
