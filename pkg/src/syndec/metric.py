"""Node metric for search over the joint channel-and-code tree.

A node at level ``t`` carries a syndrome state and one drift per trace.  Its
priority is ``g + h``:

* ``g`` sums, along the path, ``log P(s'|s)`` and every trace's branch log
  probability;
* ``h`` sums, over traces, the log probability of the unexplained part of the
  trace under random (prior-weighted) remaining bits, minus ``log P(y_j)``.

A backward node (level ``t``, explaining bits ``t+1..N``) uses the prefix
table as its ``h`` instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelSpec
from .code import SyndromeTrellis, bit_priors
from .lattice import (
    DriftLattice,
    DriftWindow,
    UndecodableTraceError,
    build_drift_window,
    build_lattice,
    transmitted_priors,
)


@dataclass(frozen=True, eq=False)
class JointModel:
    """Everything the decoders need about one received set of traces."""

    trellis: SyndromeTrellis
    spec: ChannelSpec
    traces: tuple
    windows: tuple
    lattices: tuple
    offset: np.ndarray
    priors: np.ndarray  # P(code bit = 1) per level used for tails and normalisers

    @property
    def M(self) -> int:
        return len(self.traces)

    @property
    def N(self) -> int:
        return self.trellis.N

    @property
    def R(self) -> np.ndarray:
        return np.array([len(y) for y in self.traces], dtype=np.int64)

    @property
    def norms(self) -> np.ndarray:
        return np.array([lat.log_total for lat in self.lattices])

    @classmethod
    def build(
        cls,
        trellis: SyndromeTrellis,
        traces: Sequence,
        spec: ChannelSpec,
        offset=None,
        slack: int | None = None,
        priors: str = "trellis",
        windows: Sequence[DriftWindow] | None = None,
    ) -> "JointModel":
        N = trellis.N
        ys = tuple(np.asarray(getattr(y, "bits", y), dtype=np.uint8) for y in traces)
        if not ys:
            raise ValueError("need at least one trace")
        offset = np.zeros(N, dtype=np.uint8) if offset is None else np.asarray(offset, dtype=np.uint8)
        if len(offset) != N:
            raise ValueError("offset length must equal N")
        if priors == "trellis":
            p1 = bit_priors(trellis)
        elif priors == "uniform":
            p1 = np.full(N, 0.5)
        else:
            raise ValueError(f"unknown prior mode {priors!r}")
        if windows is None:
            windows = tuple(build_drift_window(N, len(y), spec, slack) for y in ys)
        tx = transmitted_priors(p1, offset)
        lattices = tuple(build_lattice(y, N, tx, w, spec) for y, w in zip(ys, windows))
        for j, lat in enumerate(lattices):
            if lat.log_total == -np.inf:
                raise UndecodableTraceError(f"trace {j} has zero probability inside its drift window")
        return cls(trellis, spec, ys, tuple(windows), lattices, offset, p1)

    def packed(self) -> dict:
        """Stacked arrays for the search kernels (traces padded to the longest)."""
        M, N = self.M, self.N
        Rmax = int(self.R.max())
        blp = np.full((M, Rmax + 1, 3, 2), -np.inf)
        tail = np.full((M, N + 1, Rmax + 1), -np.inf)
        head = np.full((M, N + 1, Rmax + 1), -np.inf)
        dmin = np.zeros((M, N + 1), dtype=np.int64)
        dmax = np.zeros((M, N + 1), dtype=np.int64)
        for j, (lat, w) in enumerate(zip(self.lattices, self.windows)):
            R = w.R
            blp[j, : R + 1] = lat.branch
            tail[j, :, : R + 1] = lat.B - lat.log_total
            head[j, :, : R + 1] = lat.F - lat.log_total
            dmin[j], dmax[j] = w.dmin, w.dmax
        return dict(blp=blp, tail=tail, head=head, dmin=dmin, dmax=dmax, R=self.R)


@dataclass(frozen=True)
class SearchNode:
    level: int
    state: int
    drifts: tuple
    g: float
    h: float
    parent: "SearchNode | None" = field(default=None, repr=False)
    bit: int = -1
    direction: str = "forward"

    @property
    def priority(self) -> float:
        return self.g + self.h

    def bits(self) -> list[int]:
        """Code bits on the path from the root, in root-to-node order."""
        out, node = [], self
        while node.parent is not None:
            out.append(node.bit)
            node = node.parent
        return out[::-1]


def root(model: JointModel, direction: str = "forward") -> SearchNode:
    N, M = model.N, model.M
    if direction == "forward":
        h = sum(lat.B[0, 0] - lat.log_total for lat in model.lattices)
        return SearchNode(0, 0, (0,) * M, 0.0, float(h))
    drifts = tuple(int(r) - N for r in model.R)
    h = sum(lat.F[N, lat.window.R] - lat.log_total for lat in model.lattices)
    return SearchNode(N, 0, drifts, 0.0, float(h), direction="backward")


def extend(node: SearchNode, b: int, dds: Sequence[int], model: JointModel) -> SearchNode | None:
    """Child of ``node`` along code bit ``b`` with per-trace drift steps ``dds``.

    Returns None when the edge does not exist or the child falls outside a
    trace's window or past the end of a trace.
    """
    T = model.trellis
    t, s = node.level, node.state
    if node.direction == "forward":
        if t >= model.N:
            return None
        s2 = int(T.next_state[t, s, b])
        if s2 < 0:
            return None
        t2, lp, c = t + 1, T.out_logp[t, s], b ^ int(model.offset[t])
    else:
        if t <= 0:
            return None
        s2 = int(T.prev_state[t, s, b])
        if s2 < 0:
            return None
        t2, lp, c = t - 1, T.in_logp[t, s], b ^ int(model.offset[t - 1])
    g, h = node.g + lp, 0.0
    drifts = []
    for j, (lat, w, dd) in enumerate(zip(model.lattices, model.windows, dds)):
        if dd not in (-1, 0, 1):
            raise ValueError("drift step must be -1, 0 or +1")
        d = node.drifts[j]
        p = t + d
        if node.direction == "forward":
            d2 = d + dd
            seg_start, p2 = p, p + 1 + dd
        else:
            d2 = d - dd
            p2 = p - 1 - dd
            seg_start = p2
        if not (w.dmin[t2] <= d2 <= w.dmax[t2]) or p2 < 0 or p2 > w.R or seg_start + 1 + dd > w.R:
            return None
        g += lat.branch[seg_start, dd + 1, c]
        table = lat.B if node.direction == "forward" else lat.F
        h += table[t2, p2] - lat.log_total
        drifts.append(d2)
    if not np.isfinite(g + h):
        return None
    return SearchNode(t2, s2, tuple(drifts), float(g), float(h), node, b, node.direction)


def full_posterior_score(node: SearchNode, model: JointModel) -> float:
    """Score of a complete path: ``sum_j log P(path, y_j) - log P(y_j)``."""
    end = model.N if node.direction == "forward" else 0
    if node.level != end:
        raise ValueError("path is not complete")
    if node.direction == "forward":
        expect = tuple(int(r) - model.N for r in model.R)
    else:
        expect = (0,) * model.M
    if tuple(node.drifts) != expect:
        raise ValueError("path does not end at the traces' net drifts")
    return node.g + node.h


def path_score(x, drift_steps, model: JointModel) -> float:
    """Complete-path score for codeword ``x`` and per-level drift steps ``drift_steps[l][j]``."""
    node = root(model)
    for l, b in enumerate(x):
        node = extend(node, int(b), drift_steps[l], model)
        if node is None:
            return -np.inf
    return full_posterior_score(node, model)


def codeword_score(x, model: JointModel) -> float:
    """``log P(x) + sum_j [log P(y_j | x) - log P(y_j)]`` summed over all drift paths in the windows."""
    T = model.trellis
    x = np.asarray(x, dtype=np.uint8)
    states = T.path_states(x)
    if states is None or states[-1] != 0:
        return -np.inf
    logp = float(sum(T.out_logp[l, states[l]] for l in range(model.N)))
    c = x ^ model.offset
    for lat, w in zip(model.lattices, model.windows):
        a = np.full(w.R + 1, -np.inf)
        a[0] = 0.0
        for l in range(model.N):
            nxt = np.full(w.R + 1, -np.inf)
            for d in range(w.dmin[l], w.dmax[l] + 1):
                p = l + d
                if a[p] == -np.inf:
                    continue
                for k in range(3):
                    d2 = d + k - 1
                    if w.dmin[l + 1] <= d2 <= w.dmax[l + 1] and p + k <= w.R:
                        nxt[p + k] = np.logaddexp(nxt[p + k], a[p] + lat.branch[p, k, c[l]])
            a = nxt
        logp += a[w.R] - lat.log_total
    return logp
