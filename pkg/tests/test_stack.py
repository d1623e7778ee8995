import numpy as np
import pytest

from syndec import oracles
from syndec.channel import ChannelSpec, transmit_multi
from syndec.code import encode, load_code_config
from syndec.metric import JointModel, codeword_score, root
from syndec.stack import StackParams, _random_gap, decode_bistack, decode_stack, visited_key

UNBOUNDED = StackParams(max_expansions=10**6)


def _cw(T, seed):
    return encode(T, np.random.default_rng(seed).integers(0, 2, T.K)).bits


def _one_deletion_instance(T, pos=4):
    x = encode(T, [1, 0, 1, 1]).bits
    spec = ChannelSpec(0.0, 0.02, 0.0)
    traces = [np.delete(x, pos), x.copy()]
    return x, JointModel.build(T, traces, spec, slack=2)


@pytest.mark.parametrize("name", ["example1", "cc2"])
def test_noiseless_recovery(name):
    T = load_code_config(name).trellis()
    x = _cw(T, 1)
    m = JointModel.build(T, transmit_multi(x, ChannelSpec(), 1, 0), ChannelSpec())
    r = decode_stack(m)
    assert not r.erasure and np.array_equal(r.codeword, x) and r.expansions == T.N
    b = decode_bistack(m)
    assert not b.erasure and np.array_equal(b.codeword, x) and b.expansions <= T.N + 1
    assert b.merge_level is not None


def test_single_deletion_matches_map(ex1):
    x, m = _one_deletion_instance(ex1)
    cws = oracles.all_codewords(ex1)
    best = cws[np.argmax([codeword_score(c, m) for c in cws])]
    assert np.array_equal(best, x)
    for dec in (decode_stack, decode_bistack):
        r = dec(m, UNBOUNDED)
        assert not r.erasure and np.array_equal(r.codeword, x)


def test_budget_one_erases(cc2):
    spec = ChannelSpec(0.03, 0.03, 0.0)
    x = _cw(cc2, 2)
    m = JointModel.build(cc2, transmit_multi(x, spec, 2, 5), spec)
    H = load_code_config("cc2").binary()
    for dec in (decode_stack, decode_bistack):
        r = dec(m, StackParams(max_expansions=1), np.random.default_rng(0))
        assert r.erasure and len(r.codeword) == cc2.N
    r = decode_stack(m, StackParams(max_expansions=1), np.random.default_rng(0))
    assert H.is_codeword(r.codeword)  # prefix plus a random trellis completion


def test_backward_budget_zero_is_forward_search(cc2):
    spec = ChannelSpec(0.01, 0.01, 0.0)
    for seed in range(5):
        m = JointModel.build(cc2, transmit_multi(_cw(cc2, seed), spec, 2, seed), spec)
        a = decode_stack(m)
        b = decode_bistack(m, StackParams(fwd_budget=400_000, bwd_budget=0))
        assert np.array_equal(a.codeword, b.codeword)
        assert a.expansions == b.expansions and a.metric_evals == b.metric_evals


def test_visited_key(ex1):
    x = encode(ex1, [1, 0, 1, 1]).bits
    m = JointModel.build(ex1, transmit_multi(x, ChannelSpec(), 2, 0), ChannelSpec())
    assert visited_key(root(m)) == (0, 0, (0, 0))
    assert visited_key(root(m, "backward")) == (ex1.N, 0, (0, 0))
    assert visited_key(root(m)) == visited_key(root(m))


def test_deterministic(cc2):
    spec = ChannelSpec(0.02, 0.02, 0.0)
    m = JointModel.build(cc2, transmit_multi(_cw(cc2, 3), spec, 2, 3), spec)
    for dec in (decode_stack, decode_bistack):
        a = dec(m, StackParams(max_expansions=5000), np.random.default_rng(1))
        b = dec(m, StackParams(max_expansions=5000), np.random.default_rng(1))
        assert np.array_equal(a.codeword, b.codeword)
        assert (a.expansions, a.inserted, a.evicted, a.metric_evals) == (b.expansions, b.inserted, b.evicted, b.metric_evals)


def test_pop_order(cc2):
    # every popped node is at least as good as everything left on the stack
    spec = ChannelSpec(0.02, 0.02, 0.0)
    for seed in range(5):
        m = JointModel.build(cc2, transmit_multi(_cw(cc2, seed), spec, 2, seed), spec)
        r = decode_stack(m, StackParams(max_expansions=20_000, record_pops=True))
        assert np.all(r.pops[:, 0] >= r.pops[:, 1])
        f, b = decode_bistack(m, StackParams(max_expansions=20_000, record_pops=True)).pops
        assert np.all(f[:, 0] >= f[:, 1]) and np.all(b[:, 0] >= b[:, 1])


def test_bounded_capacity_evicts(cc2):
    spec = ChannelSpec(0.02, 0.02, 0.0)
    m = JointModel.build(cc2, transmit_multi(_cw(cc2, 4), spec, 2, 4), spec)
    r = decode_stack(m, StackParams(capacity=50, max_expansions=5000))
    assert r.evicted > 0
    assert r.inserted - r.evicted - r.expansions <= 50 + 1
    assert len(r.codeword) == cc2.N


def test_erasures_monotone_in_budget(cc2):
    spec = ChannelSpec(0.015, 0.015, 0.0)
    models = [JointModel.build(cc2, transmit_multi(_cw(cc2, s), spec, 2, s), spec) for s in range(15)]
    for dec in (decode_stack, decode_bistack):
        prev = None
        for budget in (20, 100, 500, 2500):
            er = [dec(m, StackParams(max_expansions=budget)).erasure for m in models]
            if prev is not None:
                assert all(p or not e for p, e in zip(prev, er))  # erased now => erased before
            prev = er


@pytest.mark.parametrize("params", [
    StackParams(max_expansions=50_000),
    StackParams(max_expansions=50_000, alternation="expand-larger-top"),
    StackParams(max_expansions=50_000, meet="expanded"),
])
def test_merge_is_codeword(cc2, params):
    H = load_code_config("cc2").binary()
    spec = ChannelSpec(0.02, 0.02, 0.0)
    merged = 0
    for seed in range(25):
        m = JointModel.build(cc2, transmit_multi(_cw(cc2, seed), spec, 2, seed), spec)
        r = decode_bistack(m, params)
        if not r.erasure:
            assert H.is_codeword(r.codeword)
            merged += r.merge_level is not None
    assert merged > 0


def test_random_gap_joins_states(cc2):
    rng = np.random.default_rng(0)
    x = _cw(cc2, 7)
    st = cc2.path_states(x)
    for a, b in [(0, cc2.N), (10, 60), (70, 71), (80, 80)]:
        gap = _random_gap(cc2, a, int(st[a]), b, int(st[b]), rng)
        s = int(st[a])
        for l, bit in enumerate(gap):
            s = int(cc2.next_state[a + l, s, bit])
        assert s == st[b]


def test_scores_match_metric(ex1):
    # the reported score of a finished search is the complete-path score of its codeword and drifts
    spec = ChannelSpec(0.05, 0.05, 0.02)
    for seed in range(20):
        x = _cw(ex1, seed)
        m = JointModel.build(ex1, transmit_multi(x, spec, 1, seed), spec, slack=2)
        r = decode_stack(m, UNBOUNDED)
        cws, scores = oracles.max_path_scores(m)
        idx = [i for i, c in enumerate(cws) if np.array_equal(c, r.codeword)][0]
        assert r.score <= scores[idx] + 1e-9


def test_params_validation():
    with pytest.raises(ValueError):
        StackParams(capacity=0)
    with pytest.raises(ValueError):
        StackParams(alternation="random")
    with pytest.raises(ValueError):
        StackParams(meet="sometimes")
    assert StackParams(max_expansions=9).budgets() == (5, 4)
