"""Compiled inner loops shared by the decoders."""

import numba as nb
import numpy as np

NEG_INF = -np.inf


@nb.njit(cache=True, nogil=True)
def parity(x):
    p = 0
    while x:
        p ^= 1
        x &= x - 1
    return p


@nb.njit(cache=True, nogil=True)
def branch_labels(gen_masks, mu):
    """labels[state, b]: output bits packed as sum(c_j << j)."""
    S = 1 << mu
    n = gen_masks.shape[0]
    labels = np.empty((S, 2), np.int64)
    for st in range(S):
        for b in range(2):
            reg = (b << mu) | st
            lab = 0
            for j in range(n):
                lab |= parity(reg & gen_masks[j]) << j
            labels[st, b] = lab
    return labels


@nb.njit(cache=True, nogil=True)
def _segment_bm(soft, r, n, bm):
    for lab in range(bm.shape[0]):
        m = 0.0
        for j in range(n):
            v = soft[r * n + j]
            if (lab >> j) & 1:
                m = m - v
            else:
                m = m + v
        bm[lab] = m


@nb.njit(cache=True, nogil=True)
def viterbi_forward(soft, labels, mu, n, info_len, keep_list):
    """Add-compare-select over the terminated trellis.

    Returns (decision, metric, delta). ``decision[r, s]`` is the dropped
    (oldest) register bit of the survivor entering state ``s`` after segment
    ``r``; ties keep 0. When ``keep_list`` is set, ``metric[t, s]`` holds the
    best prefix metric at time ``t`` and ``delta[r, s]`` the deficit of the
    non-surviving incoming edge (``inf`` if absent).
    """
    S = 1 << mu
    T = info_len + mu
    decision = np.zeros((T, S), np.uint8)
    if keep_list:
        metric = np.empty((T + 1, S))
        delta = np.empty((T, S))
    else:
        metric = np.empty((1, S))
        delta = np.empty((1, 1))
    cur = np.full(S, NEG_INF)
    cur[0] = 0.0
    nxt = np.empty(S)
    bm = np.empty(1 << n)
    if keep_list:
        metric[0, :] = cur
    for r in range(T):
        _segment_bm(soft, r, n, bm)
        for ns in range(S):
            b = ns >> (mu - 1)
            if r >= info_len and b == 1:
                nxt[ns] = NEG_INF
                decision[r, ns] = 0
                if keep_list:
                    delta[r, ns] = np.inf
                continue
            p0 = (ns << 1) & (S - 1)
            p1 = p0 | 1
            c0 = cur[p0] + bm[labels[p0, b]]
            c1 = cur[p1] + bm[labels[p1, b]]
            if c0 >= c1 or c1 == NEG_INF:
                nxt[ns] = c0
                decision[r, ns] = 0
                alt = c1
            else:
                nxt[ns] = c1
                decision[r, ns] = 1
                alt = c0
            if keep_list:
                if alt == NEG_INF or nxt[ns] == NEG_INF:
                    delta[r, ns] = np.inf
                else:
                    delta[r, ns] = nxt[ns] - alt
        for s in range(S):
            cur[s] = nxt[s]
        if keep_list:
            metric[r + 1, :] = cur
    if not keep_list:
        metric[0, :] = cur
    return decision, metric, delta


@nb.njit(cache=True, nogil=True)
def trace_path(decision, mu, sidetrack_seg, sidetrack_state):
    """Walk back from the terminal zero state.

    At segment ``r`` entering state ``s`` the survivor predecessor is taken,
    unless ``(r, s)`` is listed as a sidetrack, where the other one is used.
    Returns (input bits per segment, states per time index).
    """
    T, S = decision.shape
    bits = np.empty(T, np.uint8)
    states = np.empty(T + 1, np.int64)
    st = 0
    states[T] = 0
    k = 0
    nside = sidetrack_seg.shape[0]
    for r in range(T - 1, -1, -1):
        d = decision[r, st]
        if k < nside and sidetrack_seg[k] == r and sidetrack_state[k] == st:
            d = 1 - d
            k += 1
        bits[r] = st >> (mu - 1)
        st = ((st << 1) & (S - 1)) | d
        states[r] = st
    return bits, states


@nb.njit(cache=True, nogil=True)
def path_metric(soft, labels, mu, n, bits):
    """Correlation metric of the path driven by ``bits``, summed in trellis order."""
    T = bits.shape[0]
    st = 0
    total = 0.0
    for r in range(T):
        b = np.int64(bits[r])
        lab = labels[st, b]
        m = 0.0
        for j in range(n):
            v = soft[r * n + j]
            if (lab >> j) & 1:
                m = m - v
            else:
                m = m + v
        total = total + m
        st = (b << (mu - 1)) | (st >> 1)
    return total


@nb.njit(cache=True, nogil=True)
def _fano_children(state, d, info_len, mu, n, gen_masks, received, m_match, m_mismatch, out_bits, out_bm):
    count = 2 if d < info_len else 1
    for b in range(count):
        reg = (b << mu) | state
        m = 0.0
        for j in range(n):
            c = parity(reg & gen_masks[j])
            i = d * n + j
            if c == received[i]:
                m += m_match[i]
            else:
                m += m_mismatch[i]
        out_bits[b] = b
        out_bm[b] = m
    if count == 2 and out_bm[1] > out_bm[0]:
        t = out_bm[0]
        out_bm[0] = out_bm[1]
        out_bm[1] = t
        out_bits[0] = 1
        out_bits[1] = 0
    return count


@nb.njit(cache=True, nogil=True)
def fano_search(received, m_match, m_mismatch, gen_masks, mu, info_len, delta, threshold, max_visits):
    """Fano sequential search over the terminated code tree.

    Returns (ok, bits, visits, backtracks). ``visits`` counts forward moves.
    """
    n = gen_masks.shape[0]
    depth = info_len + mu
    path = np.zeros(depth, np.uint8)
    state = np.zeros(depth + 1, np.int64)
    metric = np.zeros(depth + 1)
    tried = np.zeros(depth + 1, np.int64)
    cb = np.empty(2, np.uint8)
    cm = np.empty(2)
    T = threshold
    d = 0
    visits = 0
    backtracks = 0
    while True:
        count = _fano_children(state[d], d, info_len, mu, n, gen_masks, received, m_match, m_mismatch, cb, cm)
        k = tried[d]
        moved = False
        if k < count:
            mf = metric[d] + cm[k]
            if mf >= T:
                b = np.int64(cb[k])
                path[d] = b
                state[d + 1] = (b << (mu - 1)) | (state[d] >> 1)
                metric[d + 1] = mf
                first = metric[d] < T + delta
                d += 1
                visits += 1
                tried[d] = 0
                if d == depth:
                    return True, path, visits, backtracks
                if first:
                    T = T + np.floor((mf - T) / delta) * delta
                if visits >= max_visits:
                    return False, path, visits, backtracks
                moved = True
        if moved:
            continue
        while True:
            if d == 0:
                T -= delta
                tried[0] = 0
                break
            if metric[d - 1] >= T:
                d -= 1
                backtracks += 1
                tried[d] += 1
                cnt = 2 if d < info_len else 1
                if tried[d] < cnt:
                    break
            else:
                T -= delta
                tried[d] = 0
                break
