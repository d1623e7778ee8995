"""Brute-force reference computations for small instances.

These enumerate explicitly instead of running the recursions the decoders
use, so agreement between the two is meaningful.  Everything here is
exponential in ``N`` and meant for ``N`` up to about 12.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .channel import ChannelSpec
from .code import SyndromeTrellis
from .lattice import DriftWindow


def all_codewords(trellis: SyndromeTrellis) -> np.ndarray:
    """Every codeword, by walking all trellis paths (rows in lexicographic order)."""
    out = []

    def walk(level, state, prefix):
        if level == trellis.N:
            if state == 0:
                out.append(list(prefix))
            return
        for b in (0, 1):
            s2 = trellis.next_state[level, state, b]
            if s2 >= 0:
                prefix.append(b)
                walk(level + 1, int(s2), prefix)
                prefix.pop()

    walk(0, 0, [])
    return np.array(out, dtype=np.uint8).reshape(len(out), trellis.N)


def bit_events(x: int, spec: ChannelSpec):
    """All outcomes for one input bit under the truncated model.

    Yields ``(emitted bits, probability)``: up to two inserted random bits
    followed by a delete, or up to one inserted bit followed by a
    (possibly flipped) transmission.  Net drift per bit stays in ``-1..+1``.
    """
    pi, pd, pt, ps = spec.pi, spec.pd, spec.pt, spec.ps
    for n_ins in range(3):
        for ins in itertools.product((0, 1), repeat=n_ins):
            base = (pi / 2) ** n_ins
            yield ins, base * pd
            if n_ins < 2:
                yield ins + (x,), base * pt * (1 - ps)
                yield ins + (1 - x,), base * pt * ps


def likelihood(x, y, spec: ChannelSpec, window: DriftWindow | None = None) -> float:
    """``P(y | x)`` summed over every per-bit event sequence, optionally inside ``window``."""
    x = tuple(int(v) for v in x)
    y = tuple(int(v) for v in y)
    N, R = len(x), len(y)
    events = {b: list(bit_events(b, spec)) for b in (0, 1)}

    @lru_cache(maxsize=None)
    def rec(i, r):
        if window is not None and not (window.dmin[i] <= r - i <= window.dmax[i]):
            return 0.0
        if i == N:
            return 1.0 if r == R else 0.0
        total = 0.0
        for emitted, p in events[x[i]]:
            k = len(emitted)
            if p > 0 and r + k <= R and y[r: r + k] == emitted:
                total += p * rec(i + 1, r + k)
        return total

    return rec(0, 0)


def marginal_likelihood(y, N: int, spec: ChannelSpec, p1=None) -> float:
    """``sum_x P(x) P(y | x)`` over all ``2**N`` inputs with independent bit priors ``p1``."""
    p1 = np.full(N, 0.5) if p1 is None else np.asarray(p1, dtype=np.float64)
    total = 0.0
    for x in itertools.product((0, 1), repeat=N):
        px = math.prod(p1[i] if b else 1.0 - p1[i] for i, b in enumerate(x))
        if px > 0:
            total += px * likelihood(x, y, spec)
    return total


def codeword_posteriors(trellis: SyndromeTrellis, y, spec: ChannelSpec, offset=None, window=None) -> np.ndarray:
    """``P(x_l = 1 | y)`` by weighting every codeword with its likelihood (uniform information bits)."""
    cws = all_codewords(trellis)
    offset = np.zeros(trellis.N, dtype=np.uint8) if offset is None else np.asarray(offset, dtype=np.uint8)
    w = np.array([likelihood(c ^ offset, y, spec, window) for c in cws])
    if w.sum() == 0:
        raise ValueError("no codeword explains y")
    return (w[:, None] * cws).sum(axis=0) / w.sum()


def _best_alignment(c, blp, window: DriftWindow) -> float:
    """Max over drift paths inside ``window`` of the summed branch log probabilities."""
    N, R = len(c), window.R
    a = np.full(R + 1, -np.inf)
    a[0] = 0.0
    for l in range(N):
        nxt = np.full(R + 1, -np.inf)
        for d in range(window.dmin[l], window.dmax[l] + 1):
            p = l + d
            if a[p] == -np.inf:
                continue
            for k in range(3):
                d2 = d + k - 1
                if window.dmin[l + 1] <= d2 <= window.dmax[l + 1] and p + k <= R:
                    nxt[p + k] = max(nxt[p + k], a[p] + blp[p, k, c[l]])
        a = nxt
    return float(a[R])


def max_path_scores(model) -> tuple[np.ndarray, np.ndarray]:
    """Best complete-path score of every codeword, maximised over drift paths.

    Returns ``(codewords, scores)`` where a score is the decoder's terminal
    priority ``g - sum_j log P(y_j)``.
    """
    T = model.trellis
    cws = all_codewords(T)
    scores = np.empty(len(cws))
    for i, x in enumerate(cws):
        states = T.path_states(x)
        s = float(sum(T.out_logp[l, states[l]] for l in range(model.N)))
        c = x ^ model.offset
        for lat, w in zip(model.lattices, model.windows):
            s += _best_alignment(c, lat.branch, w) - lat.log_total
        scores[i] = s
    return cws, scores
