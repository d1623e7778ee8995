import numpy as np
import pytest

from syndec.channel import (
    ChannelSpec,
    Role,
    apply_offset,
    draw_offset,
    read_traces,
    remove_offset,
    transmit,
    transmit_multi,
    trial_rng,
    write_traces,
)


def test_spec_validation():
    assert ChannelSpec(0.1, 0.2, 0.0).pt == pytest.approx(0.7)
    for bad in [(-0.1, 0, 0), (0.5, 0.5, 0), (0, 0, 1.0), (1.0, 0, 0)]:
        with pytest.raises(ValueError):
            ChannelSpec(*bad)


def test_noiseless_identity():
    x = np.random.default_rng(0).integers(0, 2, 500, dtype=np.uint8)
    t = transmit(x, ChannelSpec(), np.random.default_rng(1))
    assert np.array_equal(t.bits, x)


def test_event_frequencies():
    # per step of the channel loop: insert pi, delete pd, transmit pt(1-ps), flip pt*ps
    spec = ChannelSpec(0.05, 0.03, 0.1)
    N = 1_000_000
    t = transmit(np.zeros(N, dtype=np.uint8), spec, np.random.default_rng(2), log_events=True)
    steps = int(t.n_ins.sum()) + N
    observed = {
        "insert": t.n_ins.sum(),
        "delete": np.count_nonzero(t.terminal == 0),
        "transmit": np.count_nonzero(t.terminal == 1),
        "flip": np.count_nonzero(t.terminal == 2),
    }
    expected = {"insert": spec.pi, "delete": spec.pd, "transmit": spec.pt * (1 - spec.ps), "flip": spec.pt * spec.ps}
    for k, p in expected.items():
        sigma = np.sqrt(steps * p * (1 - p))
        assert abs(observed[k] - steps * p) < 4 * sigma, k


def test_deletion_fraction():
    N = 1_000_000
    t = transmit(np.ones(N, dtype=np.uint8), ChannelSpec(0, 0.01, 0), np.random.default_rng(3))
    deleted = N - t.R
    assert abs(deleted - 0.01 * N) < 3 * np.sqrt(N * 0.01 * 0.99)


def test_length_bookkeeping():
    x = np.random.default_rng(4).integers(0, 2, 300, dtype=np.uint8)
    t = transmit(x, ChannelSpec(0.1, 0.1, 0.05), np.random.default_rng(5), log_events=True)
    assert t.R == len(x) + t.n_ins.sum() - np.count_nonzero(t.terminal == 0)


def test_drift_moments():
    spec = ChannelSpec(0.01, 0.01, 0.0)
    N, trials = 100, 20_000
    rng = np.random.default_rng(6)
    x = np.zeros(N, dtype=np.uint8)
    drift = np.array([transmit(x, spec, rng).R - N for _ in range(trials)])
    q = spec.pd / (1 - spec.pi)
    per_bit_var = spec.pi / (1 - spec.pi) ** 2 + q * (1 - q)
    mean_se = np.sqrt(N * per_bit_var / trials)
    assert abs(drift.mean()) < 4 * mean_se
    assert drift.var() == pytest.approx(N * per_bit_var, rel=0.07)


def test_transmit_multi():
    x = np.random.default_rng(7).integers(0, 2, 200, dtype=np.uint8)
    same = transmit_multi(x, ChannelSpec(), 3, 1)
    assert all(np.array_equal(t.bits, x) for t in same)
    spec = ChannelSpec(0.05, 0.05, 0.05)
    a = transmit_multi(x, spec, 2, 9)
    b = transmit_multi(x, spec, 2, 9)
    assert all(np.array_equal(p.bits, q.bits) for p, q in zip(a, b))
    assert not np.array_equal(a[0].bits, a[1].bits)
    with pytest.raises(ValueError):
        transmit_multi(x, spec, 0, 1)


def test_offset():
    rng = np.random.default_rng(8)
    x = rng.integers(0, 2, 100_000, dtype=np.uint8)
    assert np.array_equal(apply_offset(x, np.zeros_like(x)), x)
    off = draw_offset(len(x), rng)
    assert np.array_equal(remove_offset(apply_offset(x, off), off), x)
    with pytest.raises(ValueError):
        apply_offset(x, off[:-1])
    biased = np.zeros(100_000, dtype=np.uint8)
    frac = apply_offset(biased, off).mean()
    assert abs(frac - 0.5) < 4 * np.sqrt(0.25 / len(biased))


def test_trial_streams_independent():
    a = trial_rng(1, 0, Role.INFO).integers(0, 2**32, 4)
    b = trial_rng(1, 0, Role.OFFSET).integers(0, 2**32, 4)
    c = trial_rng(1, 1, Role.INFO).integers(0, 2**32, 4)
    d = trial_rng(1, 0, Role.INFO).integers(0, 2**32, 4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, d)


def test_trace_file_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    recs = [(t, j, rng.integers(0, 2, int(rng.integers(0, 40)), dtype=np.uint8)) for t in range(3) for j in range(2)]
    path = tmp_path / "traces.txt"
    write_traces(path, recs)
    back = read_traces(path)
    assert [(t, j) for t, j, _ in back] == [(t, j) for t, j, _ in recs]
    assert all(np.array_equal(a[2], b[2]) for a, b in zip(back, recs))


def test_trace_file_malformed(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0, 0, 5\n")
    with pytest.raises(ValueError):
        read_traces(path)
