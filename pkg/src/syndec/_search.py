"""Best-first search kernels shared by the forward and backward stack decoders.

One search direction owns:

``sf[slot] = (priority, g)`` and
``si[slot] = (depth, level, state, parent, bit, seq, drift_0..drift_{M-1})``
    node slots; ``parent`` indexes the expanded-node table,
``hmax`` / ``hmin`` with ``hpos[slot] = (pos in hmax, pos in hmin)``
    two indexed binary heaps over the live slots, so the bounded stack can pop
    its best node and evict its worst one in ``O(log C)``,
``free``
    unused slot ids,
``ef[e] = g`` and ``ei[e] = (level, state, parent, bit, drift_0..)``
    nodes that have been popped,
``cnt``
    counters, indexed by the ``C_*`` constants below,
``visited``
    node key -> expanded index (only filled for bidirectional search).

``track`` selects the meeting test: 0 none, 1 popped nodes only, 2 popped
nodes and every generated child.

Ordering: higher priority first, then the deeper node, then the smaller drift
vector, then bit 0, then earlier insertion.
"""
import numpy as np

from ._accel import kernel

C_SIZE = 0
C_FREE = 1
C_EXP = 2
C_SEQ = 3
C_INSERTED = 4
C_EVICTED = 5
C_POPS = 6
C_METRICS = 7
N_COUNTERS = 8

SI_DEPTH = 0
SI_LEVEL = 1
SI_STATE = 2
SI_PARENT = 3
SI_BIT = 4
SI_SEQ = 5
SI_DRIFT = 6

EI_LEVEL = 0
EI_STATE = 1
EI_PARENT = 2
EI_BIT = 3
EI_DRIFT = 4

ST_RUNNING = 0
ST_DONE = 1
ST_MEET = 2
ST_EMPTY = 3
ST_BUDGET = 4


@kernel
def _better(sf, si, a, b, M):
    pa = sf[a, 0]
    pb = sf[b, 0]
    if pa != pb:
        return pa > pb
    if si[a, SI_DEPTH] != si[b, SI_DEPTH]:
        return si[a, SI_DEPTH] > si[b, SI_DEPTH]
    for j in range(M):
        if si[a, SI_DRIFT + j] != si[b, SI_DRIFT + j]:
            return si[a, SI_DRIFT + j] < si[b, SI_DRIFT + j]
    if si[a, SI_BIT] != si[b, SI_BIT]:
        return si[a, SI_BIT] < si[b, SI_BIT]
    return si[a, SI_SEQ] < si[b, SI_SEQ]


@kernel
def _above(sf, si, a, b, M, which):
    if which == 0:
        return _better(sf, si, a, b, M)
    return _better(sf, si, b, a, M)


@kernel
def _sift_up(heap, hpos, which, i, sf, si, M):
    x = heap[i]
    while i > 0:
        par = (i - 1) // 2
        y = heap[par]
        if _above(sf, si, x, y, M, which):
            heap[i] = y
            hpos[y, which] = i
            i = par
        else:
            break
    heap[i] = x
    hpos[x, which] = i


@kernel
def _sift_down(heap, hpos, which, i, n, sf, si, M):
    x = heap[i]
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and _above(sf, si, heap[c + 1], heap[c], M, which):
            c += 1
        if _above(sf, si, heap[c], x, M, which):
            heap[i] = heap[c]
            hpos[heap[c], which] = i
            i = c
        else:
            break
    heap[i] = x
    hpos[x, which] = i


@kernel
def _heap_delete(heap, hpos, which, i, n, sf, si, M):
    # n is the size before deletion
    last = heap[n - 1]
    if i == n - 1:
        return
    heap[i] = last
    hpos[last, which] = i
    _sift_down(heap, hpos, which, i, n - 1, sf, si, M)
    _sift_up(heap, hpos, which, hpos[last, which], sf, si, M)


@kernel
def reset(cnt, free):
    for c in range(cnt.shape[0]):
        cnt[c] = 0
    n = free.shape[0]
    for i in range(n):
        free[i] = n - 1 - i
    cnt[C_FREE] = n


@kernel
def _remove_slot(slot, sf, si, hmax, hmin, hpos, free, cnt, M):
    n = cnt[C_SIZE]
    _heap_delete(hmax, hpos, 0, hpos[slot, 0], n, sf, si, M)
    _heap_delete(hmin, hpos, 1, hpos[slot, 1], n, sf, si, M)
    cnt[C_SIZE] = n - 1
    free[cnt[C_FREE]] = slot
    cnt[C_FREE] += 1


@kernel
def push(sf, si, hmax, hmin, hpos, free, cnt, cap, M, prio, g, depth, level, state, parent, bit, drifts):
    """Insert a node; when the stack is full the worst node (possibly this one) is dropped."""
    cnt[C_FREE] -= 1
    slot = free[cnt[C_FREE]]
    sf[slot, 0] = prio
    sf[slot, 1] = g
    si[slot, SI_DEPTH] = depth
    si[slot, SI_LEVEL] = level
    si[slot, SI_STATE] = state
    si[slot, SI_PARENT] = parent
    si[slot, SI_BIT] = bit
    si[slot, SI_SEQ] = cnt[C_SEQ]
    cnt[C_SEQ] += 1
    for j in range(M):
        si[slot, SI_DRIFT + j] = drifts[j]
    cnt[C_INSERTED] += 1
    if cnt[C_SIZE] >= cap:
        worst = hmin[0]
        cnt[C_EVICTED] += 1
        if not _better(sf, si, slot, worst, M):
            free[cnt[C_FREE]] = slot
            cnt[C_FREE] += 1
            return
        _remove_slot(worst, sf, si, hmax, hmin, hpos, free, cnt, M)
    n = cnt[C_SIZE]
    hmax[n] = slot
    hmin[n] = slot
    hpos[slot, 0] = n
    hpos[slot, 1] = n
    cnt[C_SIZE] = n + 1
    _sift_up(hmax, hpos, 0, n, sf, si, M)
    _sift_up(hmin, hpos, 1, n, sf, si, M)


@kernel
def node_key(level, state, drifts, M, S, N):
    key = level * S + state
    base = 2 * N + 1
    for j in range(M):
        key = key * base + (drifts[j] + N)
    return key


@kernel
def _pop_to_expanded(sf, si, hmax, hmin, hpos, free, cnt, ef, ei, M):
    slot = hmax[0]
    e = cnt[C_EXP]
    ef[e] = sf[slot, 1]
    ei[e, EI_LEVEL] = si[slot, SI_LEVEL]
    ei[e, EI_STATE] = si[slot, SI_STATE]
    ei[e, EI_PARENT] = si[slot, SI_PARENT]
    ei[e, EI_BIT] = si[slot, SI_BIT]
    for j in range(M):
        ei[e, EI_DRIFT + j] = si[slot, SI_DRIFT + j]
    cnt[C_EXP] = e + 1
    _remove_slot(slot, sf, si, hmax, hmin, hpos, free, cnt, M)
    return e


@kernel
def step(
    forward, sf, si, hmax, hmin, hpos, free, cnt, ef, ei, visited, cap,
    opp_visited, track, meet, meet_g, poplog,
    nxt, prv, out_lp, in_lp, offset, blp, tailn, headn, dmin, dmax, R, N, S,
):
    """Pop the best node and push its children.

    Returns one of the ``ST_*`` codes.  On ``ST_DONE`` the finished node is the
    last expanded entry.  On ``ST_MEET`` ``meet`` holds (expanded index on this
    side, bit to the child or -1, expanded index on the other side) and
    ``meet_g`` the g of the meeting node on this side.
    """
    M = blp.shape[0]
    if cnt[C_SIZE] == 0:
        return ST_EMPTY
    prio = sf[hmax[0], 0]
    depth = si[hmax[0], SI_DEPTH]
    e = _pop_to_expanded(sf, si, hmax, hmin, hpos, free, cnt, ef, ei, M)
    if cnt[C_EXP] <= poplog.shape[0]:
        poplog[cnt[C_EXP] - 1, 0] = prio
        poplog[cnt[C_EXP] - 1, 1] = sf[hmax[0], 0] if cnt[C_SIZE] > 0 else -np.inf
    if depth == N:
        return ST_DONE
    cnt[C_POPS] += 1

    t = ei[e, EI_LEVEL]
    s = ei[e, EI_STATE]
    g = ef[e]
    d = np.empty(M, dtype=np.int64)
    for j in range(M):
        d[j] = ei[e, EI_DRIFT + j]
    if track:
        key = node_key(t, s, d, M, S, N)
        if key not in visited:
            visited[key] = e
        if key in opp_visited:
            meet[0] = e
            meet[1] = -1
            meet[2] = opp_visited[key]
            meet_g[0] = g
            return ST_MEET

    if forward:
        t2 = t + 1
    else:
        t2 = t - 1
    incg = np.empty((M, 3))
    inch = np.empty((M, 3))
    d2 = np.empty(M, dtype=np.int64)
    kk = np.zeros(M, dtype=np.int64)
    ncomb = 1
    for j in range(M):
        ncomb *= 3
    for b in range(2):
        if forward:
            s2 = nxt[t, s, b]
            if s2 < 0:
                continue
            c = b ^ offset[t]
            base = g + out_lp[t, s]
        else:
            s2 = prv[t, s, b]
            if s2 < 0:
                continue
            c = b ^ offset[t - 1]
            base = g + in_lp[t, s]
        for j in range(M):
            p = t + d[j]
            for k in range(3):
                if forward:
                    dj = d[j] + k - 1
                    p2 = p + k
                    seg = p
                else:
                    dj = d[j] - (k - 1)
                    p2 = p - k
                    seg = p2
                if dj < dmin[j, t2] or dj > dmax[j, t2] or p2 < 0 or p2 > R[j]:
                    incg[j, k] = -np.inf
                    inch[j, k] = -np.inf
                    continue
                incg[j, k] = blp[j, seg, k, c]
                if forward:
                    inch[j, k] = tailn[j, t2, p2]
                else:
                    inch[j, k] = headn[j, t2, p2]
        for comb in range(ncomb):
            rem = comb
            for j in range(M - 1, -1, -1):
                kk[j] = rem % 3
                rem //= 3
            gc = base
            hc = 0.0
            for j in range(M):
                gc += incg[j, kk[j]]
                hc += inch[j, kk[j]]
            cnt[C_METRICS] += 1
            pc = gc + hc
            if pc == -np.inf or np.isnan(pc):
                continue
            for j in range(M):
                if forward:
                    d2[j] = d[j] + kk[j] - 1
                else:
                    d2[j] = d[j] - (kk[j] - 1)
            push(sf, si, hmax, hmin, hpos, free, cnt, cap, M, pc, gc,
                 depth + 1, t2, s2, e, b, d2)
            if track == 2:
                key = node_key(t2, s2, d2, M, S, N)
                if track == 2 and key in opp_visited:
                    meet[0] = e
                    meet[1] = b
                    meet[2] = opp_visited[key]
                    meet_g[0] = gc
                    # the child's own drifts are recovered from the other side's record
                    return ST_MEET
    return ST_RUNNING


@kernel
def run_single(
    forward, sf, si, hmax, hmin, hpos, free, cnt, ef, ei, visited, cap, max_pops,
    opp_visited, meet, meet_g, poplog,
    nxt, prv, out_lp, in_lp, offset, blp, tailn, headn, dmin, dmax, R, N, S,
):
    while True:
        if cnt[C_POPS] >= max_pops:
            return ST_BUDGET
        st = step(forward, sf, si, hmax, hmin, hpos, free, cnt, ef, ei, visited, cap,
                  opp_visited, 0, meet, meet_g, poplog,
                  nxt, prv, out_lp, in_lp, offset, blp, tailn, headn, dmin, dmax, R, N, S)
        if st != ST_RUNNING:
            return st


@kernel
def run_bidirectional(
    fsf, fsi, fhmax, fhmin, fhpos, ffree, fcnt, fef, fei, fvis,
    bsf, bsi, bhmax, bhmin, bhpos, bfree, bcnt, bef, bei, bvis,
    cap, max_fwd, max_bwd, larger_top, track, meet, meet_g, fpoplog, bpoplog,
    nxt, prv, out_lp, in_lp, offset, blp, tailn, headn, dmin, dmax, R, N, S,
):
    """Alternate forward and backward expansions.

    Returns ``(status, side)`` where side 0/1 names the decoder that finished
    or detected the meeting, or -1 if both ran out of budget or nodes.
    """
    turn = 0
    fwd_live = True
    bwd_live = True
    while fwd_live or bwd_live:
        if fwd_live and (fcnt[C_POPS] >= max_fwd or fcnt[C_SIZE] == 0):
            fwd_live = False
        if bwd_live and (bcnt[C_POPS] >= max_bwd or bcnt[C_SIZE] == 0):
            bwd_live = False
        if not fwd_live and not bwd_live:
            break
        if larger_top and fwd_live and bwd_live:
            turn = 0 if fsf[fhmax[0], 0] >= bsf[bhmax[0], 0] else 1
        if turn == 0 and not fwd_live:
            turn = 1
        elif turn == 1 and not bwd_live:
            turn = 0
        if turn == 0:
            st = step(True, fsf, fsi, fhmax, fhmin, fhpos, ffree, fcnt, fef, fei, fvis, cap,
                      bvis, track, meet, meet_g, fpoplog,
                      nxt, prv, out_lp, in_lp, offset, blp, tailn, headn, dmin, dmax, R, N, S)
        else:
            st = step(False, bsf, bsi, bhmax, bhmin, bhpos, bfree, bcnt, bef, bei, bvis, cap,
                      fvis, track, meet, meet_g, bpoplog,
                      nxt, prv, out_lp, in_lp, offset, blp, tailn, headn, dmin, dmax, R, N, S)
        if st == ST_DONE or st == ST_MEET:
            return st, turn
        if st == ST_EMPTY:
            if turn == 0:
                fwd_live = False
            else:
                bwd_live = False
        turn = 1 - turn
    return ST_BUDGET, -1
