"""Unidirectional and bidirectional stack decoding over the joint tree."""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import numpy as np

from . import _search as ks
from ._accel import new_int_map
from .metric import JointModel, SearchNode


@dataclass(frozen=True)
class StackParams:
    capacity: int = 300_000
    max_expansions: int = 400_000
    alternation: str = "strict"  # or "expand-larger-top"
    meet: str = "generated"  # check children too, or "expanded" for popped nodes only
    fwd_budget: int | None = None
    bwd_budget: int | None = None
    record_pops: bool = False

    def __post_init__(self):
        if self.capacity < 1 or self.max_expansions < 0:
            raise ValueError("capacity must be >= 1 and max_expansions >= 0")
        if self.alternation not in ("strict", "expand-larger-top"):
            raise ValueError(f"unknown alternation policy {self.alternation!r}")
        if self.meet not in ("generated", "expanded"):
            raise ValueError(f"unknown meet rule {self.meet!r}")

    def budgets(self) -> tuple[int, int]:
        half = self.max_expansions // 2
        f = self.fwd_budget if self.fwd_budget is not None else self.max_expansions - half
        b = self.bwd_budget if self.bwd_budget is not None else half
        return f, b


@dataclass
class DecodeResult:
    codeword: np.ndarray
    info_bits: np.ndarray
    erasure: bool
    expansions: int
    inserted: int = 0
    evicted: int = 0
    metric_evals: int = 0
    seconds: float = 0.0
    merge_level: int | None = None
    score: float | None = None
    pops: np.ndarray | None = None


class _Side:
    """Preallocated arrays for one search direction."""

    def __init__(self, cap: int, max_exp: int, M: int, record: bool):
        self.cap, self.M = cap, M
        self.sf = np.empty((cap + 1, 2))
        self.si = np.empty((cap + 1, ks.SI_DRIFT + M), dtype=np.int64)
        self.hmax = np.empty(cap + 1, dtype=np.int64)
        self.hmin = np.empty(cap + 1, dtype=np.int64)
        self.hpos = np.empty((cap + 1, 2), dtype=np.int64)
        self.free = np.empty(cap + 1, dtype=np.int64)
        self.cnt = np.zeros(ks.N_COUNTERS, dtype=np.int64)
        self.ef = np.empty(max_exp + 2)
        self.ei = np.empty((max_exp + 2, ks.EI_DRIFT + M), dtype=np.int64)
        self.poplog = np.empty((max_exp + 2 if record else 0, 2))
        self.visited = new_int_map()

    def reset(self, track: bool):
        ks.reset(self.cnt, self.free)
        if track or len(self.visited):
            self.visited = new_int_map()

    def push_root(self, prio: float, level: int, drifts):
        ks.push(self.sf, self.si, self.hmax, self.hmin, self.hpos, self.free, self.cnt,
                self.cap, self.M, prio, 0.0, 0, level, 0, -1, -1, np.asarray(drifts, dtype=np.int64))

    def heap_args(self):
        return (self.sf, self.si, self.hmax, self.hmin, self.hpos, self.free, self.cnt,
                self.ef, self.ei, self.visited)

    def prefix_bits(self, e: int) -> list[int]:
        bits = []
        while e >= 0 and self.ei[e, ks.EI_PARENT] >= 0:
            bits.append(int(self.ei[e, ks.EI_BIT]))
            e = int(self.ei[e, ks.EI_PARENT])
        return bits[::-1]

    def suffix_bits(self, e: int) -> list[int]:
        bits = []
        while e >= 0 and self.ei[e, ks.EI_PARENT] >= 0:
            bits.append(int(self.ei[e, ks.EI_BIT]))
            e = int(self.ei[e, ks.EI_PARENT])
        return bits

    def top(self):
        """(level, state, parent, bit) of the best node still on the stack, or None."""
        if self.cnt[ks.C_SIZE] == 0:
            return None
        slot = self.hmax[0]
        return tuple(int(self.si[slot, c]) for c in (ks.SI_LEVEL, ks.SI_STATE, ks.SI_PARENT, ks.SI_BIT))


_local = threading.local()


def _side(slot: int, cap: int, max_exp: int, M: int, record: bool) -> _Side:
    cache = getattr(_local, "sides", None)
    if cache is None:
        cache = _local.sides = {}
    side = cache.get(slot)
    if (side is None or side.cap != cap or side.M != M or len(side.ef) < max_exp + 2
            or (len(side.poplog) > 0) != record):
        side = cache[slot] = _Side(cap, max_exp, M, record)
    return side


def _model_args(model: JointModel):
    T = model.trellis
    pk = model.packed()
    return (
        T.next_state, T.prev_state, T.out_logp, T.in_logp, model.offset.astype(np.int64),
        pk["blp"], pk["tail"], pk["head"], pk["dmin"], pk["dmax"], pk["R"], model.N, T.max_states,
    )


def _check_key_range(model: JointModel):
    span = (model.N + 1) * model.trellis.max_states * (2 * model.N + 1) ** model.M
    if span >= 2**63:
        raise ValueError("node keys would overflow int64 for this (N, states, M)")


def visited_key(node: SearchNode) -> tuple:
    """Meeting key of a search node: level, syndrome state and drift vector.

    Backward states are partial syndromes of the suffix, which equal the
    forward partial syndrome at the same level for any codeword, so both
    directions share one coordinate system.
    """
    return (node.level, node.state, tuple(node.drifts))


def _random_gap(trellis, a: int, sa: int, b: int, sb: int, rng: np.random.Generator) -> np.ndarray:
    """Random bits for levels ``a..b-1`` joining state ``sa`` to ``sb`` when possible."""
    reach = [None] * (b - a + 1)
    reach[b - a] = {sb}
    for l in range(b - 1, a - 1, -1):
        tgt = reach[l - a + 1]
        reach[l - a] = {
            s for s in range(len(trellis.states[l]))
            if any(trellis.next_state[l, s, bit] in tgt for bit in (0, 1))
        }
    if sa not in reach[0]:
        return rng.integers(0, 2, size=b - a, dtype=np.uint8)
    out = np.zeros(b - a, dtype=np.uint8)
    s = sa
    for l in range(a, b):
        opts = [bit for bit in (0, 1) if trellis.next_state[l, s, bit] in reach[l - a + 1]]
        bit = opts[int(rng.integers(len(opts)))] if len(opts) > 1 else opts[0]
        out[l - a] = bit
        s = trellis.next_state[l, s, bit]
    return out


def _score(g: float, model: JointModel) -> float:
    # complete-path score: g minus the traces' normalisers
    return float(g - model.norms.sum())


def _result(model, bits, erasure, sides, t0, **kw) -> DecodeResult:
    x = np.asarray(bits, dtype=np.uint8)
    return DecodeResult(
        codeword=x,
        info_bits=model.trellis.info_bits(x),
        erasure=erasure,
        expansions=int(sum(s.cnt[ks.C_POPS] for s in sides)),
        inserted=int(sum(s.cnt[ks.C_INSERTED] for s in sides)),
        evicted=int(sum(s.cnt[ks.C_EVICTED] for s in sides)),
        metric_evals=int(sum(s.cnt[ks.C_METRICS] for s in sides)),
        seconds=time.perf_counter() - t0,
        **kw,
    )


def decode_stack(model: JointModel, params: StackParams = StackParams(), rng: np.random.Generator | None = None) -> DecodeResult:
    """Forward stack decoding; on budget exhaustion the best partial path is completed at random."""
    t0 = time.perf_counter()
    rng = rng if rng is not None else np.random.default_rng(0)
    _check_key_range(model)
    args = _model_args(model)
    tailn = args[6]
    side = _side(0, params.capacity, params.max_expansions, model.M, params.record_pops)
    side.reset(False)
    side.push_root(float(tailn[:, 0, 0].sum()), 0, np.zeros(model.M, dtype=np.int64))
    meet = np.full(3, -1, dtype=np.int64)
    meet_g = np.zeros(1)
    st = ks.run_single(True, *side.heap_args(), params.capacity, params.max_expansions,
                       side.visited, meet, meet_g, side.poplog, *args)
    pops = side.poplog[: side.cnt[ks.C_EXP]].copy() if params.record_pops else None
    if st == ks.ST_DONE:
        e = int(side.cnt[ks.C_EXP]) - 1
        return _result(model, side.prefix_bits(e), False, [side], t0, score=_score(side.ef[e], model), pops=pops)
    top = side.top()
    if top is None:
        bits = model.trellis.random_completion(0, 0, rng)
    else:
        level, state, parent, bit = top
        head = side.prefix_bits(parent) + [bit] if bit >= 0 else []
        bits = np.concatenate([np.asarray(head, dtype=np.uint8),
                               model.trellis.random_completion(level, state, rng)])
    return _result(model, bits, True, [side], t0, pops=pops)


def decode_bistack(model: JointModel, params: StackParams = StackParams(), rng: np.random.Generator | None = None) -> DecodeResult:
    """Forward and backward stack decoders expanding in turn until their paths meet.

    The first meeting ends the search; the merged path is the forward path to
    the common node followed by the backward path from it.
    """
    t0 = time.perf_counter()
    rng = rng if rng is not None else np.random.default_rng(0)
    _check_key_range(model)
    args = _model_args(model)
    tailn, headn = args[6], args[7]
    N, M = model.N, model.M
    fb, bb = params.budgets()
    fwd = _side(0, params.capacity, fb, M, params.record_pops)
    bwd = _side(1, params.capacity, bb, M, params.record_pops)
    fwd.reset(True)
    bwd.reset(True)
    fwd.push_root(float(tailn[:, 0, 0].sum()), 0, np.zeros(M, dtype=np.int64))
    end = model.R - N
    bwd.push_root(float(sum(headn[j, N, model.R[j]] for j in range(M))), N, end)
    # backward nodes count depth from level N
    meet = np.full(3, -1, dtype=np.int64)
    meet_g = np.zeros(1)
    st, side_id = ks.run_bidirectional(
        *fwd.heap_args(), *bwd.heap_args(), params.capacity, fb, bb,
        params.alternation == "expand-larger-top",
        2 if params.meet == "generated" else 1, meet, meet_g, fwd.poplog, bwd.poplog, *args)
    pops = None
    if params.record_pops:
        pops = (fwd.poplog[: fwd.cnt[ks.C_EXP]].copy(), bwd.poplog[: bwd.cnt[ks.C_EXP]].copy())
    sides = [fwd, bwd]

    if st == ks.ST_DONE:
        if side_id == 0:
            e = int(fwd.cnt[ks.C_EXP]) - 1
            return _result(model, fwd.prefix_bits(e), False, sides, t0, score=_score(fwd.ef[e], model), pops=pops)
        e = int(bwd.cnt[ks.C_EXP]) - 1
        return _result(model, bwd.suffix_bits(e), False, sides, t0, score=_score(bwd.ef[e], model), pops=pops)

    if st == ks.ST_MEET:
        e_this, bit, e_opp = (int(v) for v in meet)
        if side_id == 0:
            head = fwd.prefix_bits(e_this) + ([bit] if bit >= 0 else [])
            tail = bwd.suffix_bits(e_opp)
            score = _score(meet_g[0] + bwd.ef[e_opp], model)
            level = int(bwd.ei[e_opp, ks.EI_LEVEL])
        else:
            head = fwd.prefix_bits(e_opp)
            tail = ([bit] if bit >= 0 else []) + bwd.suffix_bits(e_this)
            score = _score(meet_g[0] + fwd.ef[e_opp], model)
            level = int(fwd.ei[e_opp, ks.EI_LEVEL])
        return _result(model, head + tail, False, sides, t0, merge_level=level, score=score, pops=pops)

    # erasure: best forward prefix, best backward suffix, random bits in between
    ftop, btop = fwd.top(), bwd.top()
    if ftop is None:
        a, sa, head = 0, 0, []
    else:
        a, sa, parent, bit = ftop
        head = fwd.prefix_bits(parent) + [bit] if bit >= 0 else []
    if btop is None:
        b, sb, tail = N, 0, []
    else:
        b, sb, parent, bit = btop
        tail = [bit] + bwd.suffix_bits(parent) if bit >= 0 else []
    if a <= b:
        gap = _random_gap(model.trellis, a, sa, b, sb, rng)
        bits = list(head) + [int(v) for v in gap] + list(tail)
    else:
        bits = list(head) + list(tail[a - b:])
    return _result(model, bits, True, sides, t0, pops=pops)
