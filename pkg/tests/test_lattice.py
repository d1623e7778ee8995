import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from syndec import oracles
from syndec.channel import ChannelSpec, transmit
from syndec.lattice import (
    UndecodableTraceError,
    branch_logp_table,
    branch_prob,
    build_drift_window,
    build_lattice,
    default_slack,
    prefix_lattice,
    suffix_lattice,
)

probs = st.floats(0.0, 0.2)


def test_branch_prob_examples():
    s = ChannelSpec(0.0, 0.1, 0.05)
    assert branch_prob([1], 1, 0, s) == pytest.approx(s.pt * 0.95)
    assert branch_prob([], 0, -1, s) == 0.1
    s = ChannelSpec(0.1, 0.05, 0.02)
    want = (0.05) ** 2 * 0.05 + 0.05 * s.pt * 0.98
    assert branch_prob([0, 1], 1, 1, s) == pytest.approx(want)
    with pytest.raises(ValueError):
        branch_prob([0], 1, 1, s)


def test_branch_prob_matches_event_enumeration():
    s = ChannelSpec(0.07, 0.04, 0.03)
    for x in (0, 1):
        agg = {}
        for emitted, p in oracles.bit_events(x, s):
            agg[emitted] = agg.get(emitted, 0.0) + p
        for emitted, p in agg.items():
            assert branch_prob(emitted, x, len(emitted) - 1, s) == pytest.approx(p, rel=1e-14)


def test_branch_normalisation():
    s = ChannelSpec(0.1, 0.08, 0.05)
    total = branch_prob([], 0, -1, s)
    total += sum(branch_prob([y], 0, 0, s) for y in (0, 1))
    total += sum(branch_prob([a, b], 0, 1, s) for a in (0, 1) for b in (0, 1))
    pi, pd, pt = s.pi, s.pd, s.pt
    assert total == pytest.approx(pd + pt + pi * pd + pi * pt + pi * pi * pd)
    assert total <= 1.0


def test_branch_prob_monte_carlo():
    # outcomes of the untruncated simulator with net drift -1..+1 have exactly these probabilities
    s = ChannelSpec(0.1, 0.08, 0.05)
    N = 1_000_000
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, N, dtype=np.uint8)
    t = transmit(x, s, rng, log_events=True)
    kept = t.terminal != 0
    lengths = t.n_ins + kept
    ends = np.cumsum(lengths)
    last = np.where(lengths > 0, t.bits[np.maximum(ends - 1, 0)], 0)
    dd = t.n_ins - (~kept)
    cases = {
        "del": (dd == -1, s.pd),
        "d0_match": ((dd == 0) & (last == x), branch_prob([0], 0, 0, s)),
        "d0_miss": ((dd == 0) & (last != x), branch_prob([1], 0, 0, s)),
        "d1_match": ((dd == 1) & (last == x), 2 * branch_prob([0, 0], 0, 1, s)),
        "d1_miss": ((dd == 1) & (last != x), 2 * branch_prob([0, 1], 0, 1, s)),
    }
    for name, (mask, p) in cases.items():
        sigma = math.sqrt(N * p * (1 - p))
        assert abs(mask.sum() - N * p) < 4 * sigma, name


def test_window_examples():
    w = build_drift_window(10, 10, slack=0)
    assert not w.dmin.any() and not w.dmax.any()
    w = build_drift_window(10, 9, slack=1)
    assert w.dmin[10] == w.dmax[10] == -1
    assert (w.dmin[5], w.dmax[5]) == (-2, 1)
    s = ChannelSpec(0.01, 0.01, 0)
    assert default_slack(139, s) == math.ceil(4 * math.sqrt(139 * 0.02)) + 1
    with pytest.raises(UndecodableTraceError):
        build_drift_window(5, 11, slack=1)
    with pytest.raises(ValueError):
        build_drift_window(5, 5, slack=-1)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 60), st.integers(-20, 20), st.integers(0, 10))
def test_window_corridor(N, D, slack):
    R = N + D
    if R < 0 or abs(D) > N:
        return
    w = build_drift_window(N, R, slack=slack)
    assert w.dmin[0] == w.dmax[0] == 0
    assert w.dmin[N] == w.dmax[N] == D
    assert np.all(w.dmin <= w.dmax)
    # every admissible drift has an admissible successor and predecessor
    for t in range(N):
        assert w.dmin[t + 1] <= w.dmax[t] + 1 and w.dmax[t + 1] >= w.dmin[t] - 1
        assert np.all(np.diff(w.dmin) >= -1) and np.all(np.diff(w.dmax) <= 1)


def test_prefix_examples():
    s = ChannelSpec(0.1, 0.05, 0.2)
    w0 = build_drift_window(0, 0, slack=0)
    assert prefix_lattice([], 0, np.zeros(0), w0, s)[0, 0] == 0.0
    w = build_drift_window(1, 0, slack=2)
    assert math.exp(prefix_lattice([], 1, [0.5], w, s)[1, 0]) == pytest.approx(s.pd)
    w = build_drift_window(1, 1, slack=2)
    F = prefix_lattice([1], 1, [0.5], w, s)
    assert math.exp(F[1, 1]) == pytest.approx(s.pt / 2 + s.pi / 2 * s.pd)


def _random_instance(rng):
    N = int(rng.integers(1, 9))
    spec = ChannelSpec(*rng.uniform(0, 0.2, size=3))
    R = int(rng.integers(max(0, N - 3), N + 4))
    R = min(max(R, 0), 2 * N)
    y = rng.integers(0, 2, R, dtype=np.uint8)
    return N, spec, y


def test_prefix_matches_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(40):
        N, spec, y = _random_instance(rng)
        p1 = rng.uniform(0, 1, N)
        w = build_drift_window(N, len(y), spec, slack=N + 2)
        got = prefix_lattice(y, N, p1, w, spec)[N, len(y)]
        want = oracles.marginal_likelihood(y, N, spec, p1)
        if want == 0:
            assert got == -np.inf
        else:
            assert math.exp(got) == pytest.approx(want, rel=1e-12)


def test_suffix_terminal_and_one_bit():
    rng = np.random.default_rng(2)
    spec = ChannelSpec(0.1, 0.1, 0.05)
    N = 6
    y = rng.integers(0, 2, 7, dtype=np.uint8)
    w = build_drift_window(N, len(y), spec, slack=N)
    B = suffix_lattice(y, N, np.full(N, 0.5), w, spec)
    assert B[N, len(y)] == 0.0
    for p in range(len(y) + 1):
        d = p - (N - 1)
        if not (w.dmin[N - 1] <= d <= w.dmax[N - 1]):
            continue
        seg = y[p:][::-1].copy()
        w1 = build_drift_window(1, len(seg), slack=2) if len(seg) <= 2 else None
        if w1 is None:
            assert B[N - 1, p] == -np.inf
            continue
        assert B[N - 1, p] == pytest.approx(prefix_lattice(seg, 1, [0.5], w1, spec)[1, len(seg)])


def test_noiseless_suffix():
    spec = ChannelSpec()
    y = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
    w = build_drift_window(5, 5, spec, slack=2)
    B = suffix_lattice(y, 5, np.full(5, 0.5), w, spec)
    for t in range(6):
        for p in range(6):
            if p == t:
                assert B[t, p] == pytest.approx(-(5 - t) * math.log(2))
            else:
                assert B[t, p] == -np.inf


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), probs, probs, probs, st.integers(0, 2**32 - 1))
def test_prefix_suffix_consistency(N, pi, pd, ps, seed):
    spec = ChannelSpec(pi, pd, ps)
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, N, dtype=np.uint8)
    y = transmit(x, spec, rng).bits
    if abs(len(y) - N) > N:
        return
    p1 = rng.uniform(0.05, 0.95, N)
    w = build_drift_window(N, len(y), spec, slack=int(rng.integers(0, 6)))
    lat = build_lattice(y, N, p1, w, spec)
    assert not np.isnan(lat.F).any() and not np.isnan(lat.B).any()
    total = lat.log_total
    assert lat.B[0, 0] == pytest.approx(total, rel=1e-9, abs=1e-9) or total == -np.inf
    if total == -np.inf:
        return
    for t in range(N + 1):
        d = np.arange(w.dmin[t], w.dmax[t] + 1)
        s = np.logaddexp.reduce(lat.F[t, t + d] + lat.B[t, t + d])
        assert s == pytest.approx(total, rel=1e-9, abs=1e-9)


def test_outside_window_is_neg_inf():
    spec = ChannelSpec(0.05, 0.05, 0)
    y = np.random.default_rng(3).integers(0, 2, 30, dtype=np.uint8)
    w = build_drift_window(30, 30, spec, slack=1)
    lat = build_lattice(y, 30, np.full(30, 0.5), w, spec)
    for t in range(31):
        for r in range(31):
            if not (w.dmin[t] <= r - t <= w.dmax[t]):
                assert lat.F[t, r] == -np.inf and lat.B[t, r] == -np.inf


def test_branch_table_edges():
    T = branch_logp_table([1, 0], ChannelSpec(0.1, 0.1, 0.1))
    assert T.shape == (3, 3, 2)
    assert np.isinf(T[1, 2]).all() and np.isinf(T[2, 1]).all()
    assert np.isfinite(T[2, 0]).all()
