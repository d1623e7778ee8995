"""Decoder-side channel model and receive-probability lattices.

The decoder only admits per-bit event sequences with net drift in
``{-1, 0, +1}``: a delete (``-1``), an insertion then delete or a plain
transmission (``0``), and two insertions then delete or one insertion then
transmission (``+1``).  All tables are natural logs.

``F[i, r]``  log P(first r received bits, i bits sent)
``B[t, p]``  log P(received bits p..R-1 | bits t+1..N sent)

Both are restricted to a drift window ``dmin(t) <= r - t <= dmax(t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._accel import kernel
from .channel import ChannelSpec

NEG_INF = -np.inf


class UndecodableTraceError(ValueError):
    """The received length or drift window leaves no admissible alignment."""


def branch_prob(y_seg, x_bit: int, dd: int, spec: ChannelSpec) -> float:
    """Probability of emitting ``y_seg`` for code bit ``x_bit`` with net drift ``dd``."""
    y_seg = list(y_seg)
    if dd not in (-1, 0, 1) or len(y_seg) != 1 + dd:
        raise ValueError(f"segment of length {len(y_seg)} does not match drift {dd}")
    pi, pd, pt, ps = spec.pi, spec.pd, spec.pt, spec.ps

    def q(y):
        return 1.0 - ps if y == x_bit else ps

    if dd == -1:
        return pd
    if dd == 0:
        return 0.5 * pi * pd + pt * q(y_seg[0])
    return 0.25 * pi * pi * pd + 0.5 * pi * pt * q(y_seg[1])


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


def branch_logp_table(y, spec: ChannelSpec) -> np.ndarray:
    """``T[p, dd + 1, c]``: log branch probability of ``y[p : p + 1 + dd]`` given sent bit ``c``.

    Entries whose segment runs past the end of ``y`` are ``-inf``.
    """
    y = np.asarray(y, dtype=np.int64)
    R = len(y)
    pi, pd, pt, ps = spec.pi, spec.pd, spec.pt, spec.ps
    T = np.full((R + 1, 3, 2), NEG_INF)
    T[:, 0, :] = _log(pd)
    c = np.arange(2)
    if R >= 1:
        q = np.where(y[:, None] == c[None, :], 1.0 - ps, ps)
        T[:R, 1, :] = _log(0.5 * pi * pd + pt * q)
    if R >= 2:
        q2 = np.where(y[1:, None] == c[None, :], 1.0 - ps, ps)
        T[: R - 1, 2, :] = _log(0.25 * pi * pi * pd + 0.5 * pi * pt * q2)
    return T


def marginal_logp_table(T: np.ndarray, p1) -> np.ndarray:
    """Branch table summed over the sent bit with ``P(bit = 1) = p1[level]``; shape ``(N, R+1, 3)``."""
    p1 = np.asarray(p1, dtype=np.float64)
    lp1 = _log(p1)[:, None, None]
    lp0 = _log(1.0 - p1)[:, None, None]
    return np.logaddexp(lp0 + T[None, :, :, 0], lp1 + T[None, :, :, 1])


def transmitted_priors(p1, offset=None) -> np.ndarray:
    """Per-level ``P(sent bit = 1)`` after XOR with a known offset."""
    p1 = np.asarray(p1, dtype=np.float64)
    if offset is None:
        return p1
    return np.where(np.asarray(offset, dtype=bool), 1.0 - p1, p1)


@dataclass(frozen=True)
class DriftWindow:
    dmin: np.ndarray
    dmax: np.ndarray
    R: int

    @property
    def N(self) -> int:
        return len(self.dmin) - 1

    @property
    def width(self) -> int:
        return int(self.dmax.max() - self.dmin.min() + 1)


def default_slack(N: int, spec: ChannelSpec) -> int:
    return int(math.ceil(4.0 * math.sqrt(N * (spec.pi + spec.pd)))) + 1


def build_drift_window(N: int, R: int, spec: ChannelSpec | None = None, slack: int | None = None) -> DriftWindow:
    """Drift corridor from ``0`` at ``t = 0`` to ``R - N`` at ``t = N``.

    Besides the ``+-1`` per-bit limit, the overall drift stays within
    ``slack`` of the band ``[min(0, R-N), max(0, R-N)]``.
    """
    if slack is None:
        slack = default_slack(N, spec if spec is not None else ChannelSpec())
    if slack < 0:
        raise ValueError("slack must be >= 0")
    D = R - N
    if abs(D) > N:
        raise UndecodableTraceError(f"received length {R} incompatible with N={N}")
    t = np.arange(N + 1)
    dmin = np.maximum.reduce([-t, np.full(N + 1, min(0, D) - slack), -(N - t) + D])
    dmax = np.minimum.reduce([t, np.full(N + 1, max(0, D) + slack), (N - t) + D])
    return DriftWindow(dmin.astype(np.int64), dmax.astype(np.int64), R)


@kernel
def _lae(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@kernel
def _prefix_kernel(lbm, dmin, dmax, N, R):
    F = np.full((N + 1, R + 1), -np.inf)
    F[0, 0] = 0.0
    for i in range(N):
        for d in range(dmin[i], dmax[i] + 1):
            r = i + d
            f = F[i, r]
            if f == -np.inf:
                continue
            for k in range(3):
                d2 = d + k - 1
                r2 = r + k
                if d2 < dmin[i + 1] or d2 > dmax[i + 1] or r2 > R:
                    continue
                F[i + 1, r2] = _lae(F[i + 1, r2], f + lbm[i, r, k])
    return F


@kernel
def _suffix_kernel(lbm, dmin, dmax, N, R):
    B = np.full((N + 1, R + 1), -np.inf)
    B[N, R] = 0.0
    for t in range(N - 1, -1, -1):
        for d in range(dmin[t], dmax[t] + 1):
            p = t + d
            acc = -np.inf
            for k in range(3):
                d2 = d + k - 1
                p2 = p + k
                if d2 < dmin[t + 1] or d2 > dmax[t + 1] or p2 > R:
                    continue
                b = B[t + 1, p2]
                if b == -np.inf:
                    continue
                acc = _lae(acc, lbm[t, p, k] + b)
            B[t, p] = acc
    return B


@dataclass(frozen=True)
class DriftLattice:
    F: np.ndarray
    B: np.ndarray
    window: DriftWindow
    branch: np.ndarray  # branch_logp_table of the trace

    @property
    def log_total(self) -> float:
        """``log P(y)`` for the full transmitted length."""
        return float(self.F[self.window.N, self.window.R])


def prefix_lattice(y, N: int, priors, window: DriftWindow, spec: ChannelSpec) -> np.ndarray:
    y = np.asarray(y, dtype=np.uint8)
    lbm = marginal_logp_table(branch_logp_table(y, spec), np.broadcast_to(priors, (N,)))
    return _prefix_kernel(lbm, window.dmin, window.dmax, N, len(y))


def suffix_lattice(y, N: int, priors, window: DriftWindow, spec: ChannelSpec) -> np.ndarray:
    y = np.asarray(y, dtype=np.uint8)
    lbm = marginal_logp_table(branch_logp_table(y, spec), np.broadcast_to(priors, (N,)))
    return _suffix_kernel(lbm, window.dmin, window.dmax, N, len(y))


def build_lattice(y, N: int, priors, window: DriftWindow, spec: ChannelSpec) -> DriftLattice:
    """Prefix and suffix tables for one trace.  ``priors`` are ``P(sent bit = 1)`` per level."""
    y = np.asarray(y, dtype=np.uint8)
    if window.R != len(y) or window.N != N:
        raise ValueError("window does not match (N, R)")
    T = branch_logp_table(y, spec)
    lbm = marginal_logp_table(T, np.broadcast_to(np.asarray(priors, dtype=np.float64), (N,)))
    F = _prefix_kernel(lbm, window.dmin, window.dmax, N, len(y))
    B = _suffix_kernel(lbm, window.dmin, window.dmax, N, len(y))
    return DriftLattice(F, B, window, T)
