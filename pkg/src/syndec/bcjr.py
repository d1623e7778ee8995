"""Separate-BCJR baseline.

Each trace is decoded on its own by forward-backward over (syndrome state,
drift) pairs; the per-bit posteriors are then multiplied across traces,
divided by the prior ``M - 1`` times and hard-decided.  The recursions run in
the linear domain with every level rescaled to sum to one; the log scale
factors are kept so likelihoods and the alpha/beta duality can be checked.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ._accel import kernel
from .code import SyndromeTrellis, bit_priors
from .lattice import DriftWindow, UndecodableTraceError, branch_logp_table
from .metric import JointModel
from .stack import DecodeResult


@dataclass
class BcjrOutput:
    p1: np.ndarray  # P(x_l = 1 | y) per level
    log_likelihood: float  # log P(y) under the code's uniform information bits
    branches: int
    level_logz: np.ndarray  # log sum_states alpha_t * beta_t, per level


class ConsistencyError(ValueError):
    pass


@kernel
def _forward_backward(nxt, outp, nstates, offset, bl, dmin, dmax, N, R, dlo, W):
    S = nxt.shape[1]
    alpha = np.zeros((N + 1, S, W))
    beta = np.zeros((N + 1, S, W))
    la = np.zeros(N + 1)
    lb = np.zeros(N + 1)
    post = np.zeros((N, 2))
    alpha[0, 0, -dlo] = 1.0
    for t in range(N):
        lo2 = dmin[t + 1]
        hi2 = dmax[t + 1]
        for s in range(nstates[t]):
            for b in range(2):
                s2 = nxt[t, s, b]
                if s2 < 0:
                    continue
                w = outp[t, s]
                c = b ^ offset[t]
                for d in range(dmin[t], dmax[t] + 1):
                    a = alpha[t, s, d - dlo]
                    if a == 0.0:
                        continue
                    a *= w
                    p = t + d
                    for k in range(3):
                        d2 = d + k - 1
                        if d2 < lo2 or d2 > hi2 or p + k > R:
                            continue
                        alpha[t + 1, s2, d2 - dlo] += a * bl[p, k, c]
        z = 0.0
        for s in range(nstates[t + 1]):
            for i in range(W):
                z += alpha[t + 1, s, i]
        if z == 0.0:
            return alpha, beta, la, lb, post, False
        inv = 1.0 / z
        for s in range(nstates[t + 1]):
            for i in range(W):
                alpha[t + 1, s, i] *= inv
        la[t + 1] = la[t] + np.log(z)

    # beta only where alpha > 0: a reachable state's successors along
    # nonzero branches are reachable too, so nothing else is ever read
    beta[N, 0, R - N - dlo] = 1.0
    for t in range(N - 1, -1, -1):
        lo2 = dmin[t + 1]
        hi2 = dmax[t + 1]
        z = 0.0
        for s in range(nstates[t]):
            w = outp[t, s]
            for d in range(dmin[t], dmax[t] + 1):
                a = alpha[t, s, d - dlo]
                if a == 0.0:
                    continue
                p = t + d
                acc = 0.0
                for b in range(2):
                    s2 = nxt[t, s, b]
                    if s2 < 0:
                        continue
                    c = b ^ offset[t]
                    part = 0.0
                    for k in range(3):
                        d2 = d + k - 1
                        if d2 < lo2 or d2 > hi2 or p + k > R:
                            continue
                        part += bl[p, k, c] * beta[t + 1, s2, d2 - dlo]
                    part *= w
                    acc += part
                    post[t, b] += a * part
                beta[t, s, d - dlo] = acc
                z += acc
        tot = post[t, 0] + post[t, 1]
        if tot > 0.0:
            post[t, 0] /= tot
            post[t, 1] /= tot
        if z > 0.0:
            inv = 1.0 / z
            for s in range(nstates[t]):
                for i in range(W):
                    beta[t, s, i] *= inv
            lb[t] = lb[t + 1] + np.log(z)
    return alpha, beta, la, lb, post, True


@kernel
def _branch_count(nxt, nstates, dmin, dmax, N, R):
    n = 0
    for t in range(N):
        for s in range(nstates[t]):
            for b in range(2):
                if nxt[t, s, b] < 0:
                    continue
                for d in range(dmin[t], dmax[t] + 1):
                    p = t + d
                    for k in range(3):
                        d2 = d + k - 1
                        if d2 < dmin[t + 1] or d2 > dmax[t + 1] or p + k > R:
                            continue
                        n += 1
    return n


def branch_count(trellis: SyndromeTrellis, window: DriftWindow) -> int:
    """Number of (state, drift) -> (state, drift) branches the trellis holds for one trace."""
    return int(_branch_count(trellis.next_state, trellis.n_states, window.dmin, window.dmax, trellis.N, window.R))


def bcjr_posteriors(trellis: SyndromeTrellis, y, spec, window: DriftWindow, offset=None, full: bool = False):
    """Per-level ``P(x_l = 1 | y)`` for one trace.

    With ``full=True`` the scaled alpha and beta tables are returned as well.
    """
    y = np.asarray(y, dtype=np.uint8)
    N = trellis.N
    offset = np.zeros(N, dtype=np.int64) if offset is None else np.asarray(offset, dtype=np.int64)
    bl = np.exp(branch_logp_table(y, spec))
    outdeg = trellis.out_degree.astype(np.float64)
    with np.errstate(divide="ignore"):
        outp = np.where(outdeg > 0, 1.0 / np.maximum(outdeg, 1), 0.0)
    dlo = int(window.dmin.min())
    alpha, beta, la, lb, post, ok = _forward_backward(
        trellis.next_state, outp, trellis.n_states, offset, bl,
        window.dmin, window.dmax, N, len(y), dlo, window.width)
    if not ok or alpha[N, 0, len(y) - N - dlo] == 0.0:
        raise UndecodableTraceError("trace has zero probability inside its drift window")
    loglik = la[N] + np.log(alpha[N, 0, len(y) - N - dlo])
    dots = np.einsum("tsw,tsw->t", alpha, beta)
    with np.errstate(divide="ignore"):
        level_logz = la + lb + np.log(dots)
    out = BcjrOutput(post[:, 1].copy(), float(loglik), branch_count(trellis, window), level_logz)
    if full:
        return out, alpha, beta
    return out


def combine_posteriors(posteriors, priors) -> np.ndarray:
    """Combine per-trace posteriors ``P(x_l=1|y_j)`` (shape ``(M, N)``) as ``prod_j P(x|y_j) / P(x)^(M-1)``."""
    post = np.atleast_2d(np.asarray(posteriors, dtype=np.float64))
    p1 = np.asarray(priors, dtype=np.float64)
    M = post.shape[0]
    if M == 1:
        return post[0].copy()
    out = np.empty(post.shape[1])
    for l in range(post.shape[1]):
        scores = []
        for a, prior in ((0, 1.0 - p1[l]), (1, p1[l])):
            ev = np.prod(post[:, l] if a else 1.0 - post[:, l])
            if prior <= 0.0:
                if ev > 0.0:
                    raise ConsistencyError(f"level {l}: evidence for value {a} which has prior 0")
                scores.append(0.0)
            else:
                scores.append(ev / prior ** (M - 1))
        tot = scores[0] + scores[1]
        if p1[l] >= 1.0 or p1[l] <= 0.0:
            out[l] = p1[l]
        elif tot == 0.0:
            out[l] = 0.5
        else:
            out[l] = scores[1] / tot
    return out


def decode_separate_bcjr(model: JointModel) -> DecodeResult:
    """Hard decisions on combined posteriors; ties go to 0.  The output need not be a codeword."""
    t0 = time.perf_counter()
    T = model.trellis
    outs = [bcjr_posteriors(T, y, model.spec, w, model.offset) for y, w in zip(model.traces, model.windows)]
    combined = combine_posteriors(np.array([o.p1 for o in outs]), bit_priors(T))
    x = (combined > 0.5).astype(np.uint8)
    return DecodeResult(
        codeword=x,
        info_bits=T.info_bits(x),
        erasure=False,
        expansions=0,
        metric_evals=int(sum(o.branches for o in outs)),
        seconds=time.perf_counter() - t0,
    )
