"""numba implementations of the kernel surface in kernels.py.

Compiled without fastmath so float64 results match the numpy backend
bit-for-bit; cache=True persists compilations across processes.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, types
from numba.typed import Dict

PAIR_SHIFT = 21
_JIT = {"cache": True, "nogil": True}


@njit(**_JIT)
def _count_pairs_kernel(flat, weights):
    d = Dict.empty(types.int64, types.int64)
    for i in range(flat.size - 1):
        a = flat[i]
        b = flat[i + 1]
        if a >= 0 and b >= 0:
            key = (np.int64(a) << PAIR_SHIFT) | np.int64(b)
            if key in d:
                d[key] += weights[i]
            else:
                d[key] = weights[i]
    n = len(d)
    keys = np.empty(n, np.int64)
    counts = np.empty(n, np.int64)
    i = 0
    for k in d:
        keys[i] = k
        counts[i] = d[k]
        i += 1
    order = np.argsort(keys)
    return keys[order], counts[order]


@njit(**_JIT)
def _count_symbols_kernel(flat, weights, n_symbols):
    counts = np.zeros(n_symbols, np.int64)
    for i in range(flat.size):
        s = flat[i]
        if s >= 0:
            counts[s] += weights[i]
    return counts


@njit(**_JIT)
def _merge_pair_kernel(flat, weights, a, b, new_id):
    n = flat.size
    out = np.empty(n, np.int32)
    wout = np.empty(n, np.int64)
    w = 0
    i = 0
    merged = 0
    while i < n:
        if i + 1 < n and flat[i] == a and flat[i + 1] == b:
            out[w] = new_id
            wout[w] = weights[i]
            i += 2
            merged += 1
        else:
            out[w] = flat[i]
            wout[w] = weights[i]
            i += 1
        w += 1
    return out[:w].copy(), wout[:w].copy(), merged


@njit(**_JIT)
def _encode_bpe_kernel(ids, merge_keys, merge_ranks, merge_new):
    buf = ids.copy()
    n = buf.size
    if merge_keys.size == 0:
        return buf
    int_max = np.int32(2147483647)
    while n >= 2:
        best_rank = int_max
        best_at = -1
        best_new = np.int32(-1)
        for i in range(n - 1):
            key = (np.int64(buf[i]) << PAIR_SHIFT) | np.int64(buf[i + 1])
            j = np.searchsorted(merge_keys, key)
            if j < merge_keys.size and merge_keys[j] == key:
                r = merge_ranks[j]
                if r < best_rank:
                    best_rank = r
                    best_at = i
                    best_new = merge_new[j]
        if best_at < 0:
            break
        buf[best_at] = best_new
        for i in range(best_at + 1, n - 1):
            buf[i] = buf[i + 1]
        n -= 1
    return buf[:n].copy()


@njit(**_JIT)
def _match_edges_kernel(piece, offsets, cbytes, cnodes, node_token, max_len):
    n = piece.size
    cap = n * max_len
    starts = np.empty(cap, np.int32)
    ends = np.empty(cap, np.int32)
    toks = np.empty(cap, np.int32)
    cnt = 0
    for s in range(n):
        node = 0
        limit = min(max_len, n - s)
        for l in range(limit):
            b = piece[s + l]
            lo = offsets[node]
            hi = offsets[node + 1]
            found = -1
            while lo < hi:
                mid = (lo + hi) // 2
                cb = cbytes[mid]
                if cb == b:
                    found = mid
                    break
                elif cb < b:
                    lo = mid + 1
                else:
                    hi = mid
            if found < 0:
                break
            node = cnodes[found]
            t = node_token[node]
            if t >= 0:
                starts[cnt] = s
                ends[cnt] = s + l + 1
                toks[cnt] = t
                cnt += 1
    return starts[:cnt].copy(), ends[:cnt].copy(), toks[:cnt].copy()


@njit(**_JIT)
def _viterbi_kernel(length, starts, ends, toks, lp):
    best = np.full(length + 1, -np.inf)
    ntok = np.zeros(length + 1, np.int64)
    bp = np.full(length + 1, -1, np.int64)
    best[0] = 0.0
    for ei in range(starts.size):
        s = starts[ei]
        bs = best[s]
        if bs == -np.inf:
            continue
        lpt = lp[toks[ei]]
        if lpt == -np.inf:
            continue
        e = ends[ei]
        cand = bs + lpt
        if cand > best[e] or (cand == best[e] and ntok[s] + 1 < ntok[e]):
            best[e] = cand
            ntok[e] = ntok[s] + 1
            bp[e] = ei
    if best[length] == -np.inf:
        return -np.inf, np.empty(0, np.int64)
    path = np.empty(max(length, 1), np.int64)
    cnt = 0
    e = length
    while e > 0:
        ei = bp[e]
        path[cnt] = ei
        cnt += 1
        e = starts[ei]
    return best[length], path[:cnt][::-1].copy()


@njit(**_JIT)
def _viterbi_masked_kernel(length, starts, ends, toks, lp, banned):
    best = np.full(length + 1, -np.inf)
    best[0] = 0.0
    for ei in range(starts.size):
        t = toks[ei]
        if t == banned:
            continue
        s = starts[ei]
        bs = best[s]
        if bs == -np.inf:
            continue
        lpt = lp[t]
        if lpt == -np.inf:
            continue
        e = ends[ei]
        cand = bs + lpt
        if cand > best[e]:
            best[e] = cand
    return best[length]


@njit(**_JIT)
def _logaddexp(x, y):
    if x == -np.inf:
        return y
    if y == -np.inf:
        return x
    if x < y:
        x, y = y, x
    return x + math.log1p(math.exp(y - x))


@njit(**_JIT)
def _em_piece_kernel(length, starts, ends, toks, lp, freq, counts_out):
    n_edges = starts.size
    alpha = np.full(length + 1, -np.inf)
    alpha[0] = 0.0
    for ei in range(n_edges):
        s = starts[ei]
        if alpha[s] == -np.inf:
            continue
        lpt = lp[toks[ei]]
        if lpt == -np.inf:
            continue
        e = ends[ei]
        alpha[e] = _logaddexp(alpha[e], alpha[s] + lpt)
    z = alpha[length]
    if z == -np.inf:
        return -np.inf
    beta = np.full(length + 1, -np.inf)
    beta[length] = 0.0
    for ei in range(n_edges - 1, -1, -1):
        e = ends[ei]
        if beta[e] == -np.inf:
            continue
        lpt = lp[toks[ei]]
        if lpt == -np.inf:
            continue
        s = starts[ei]
        beta[s] = _logaddexp(beta[s], lpt + beta[e])
    for ei in range(n_edges):
        s = starts[ei]
        e = ends[ei]
        t = toks[ei]
        lpt = lp[t]
        if lpt == -np.inf or alpha[s] == -np.inf or beta[e] == -np.inf:
            continue
        counts_out[t] += freq * math.exp(alpha[s] + lpt + beta[e] - z)
    return freq * z


# --- python-side wrappers ----------------------------------------------------


def count_pairs(flat, weights):
    return _count_pairs_kernel(flat, weights)


def count_symbols(flat, weights, n_symbols):
    return _count_symbols_kernel(flat, weights, n_symbols)


def merge_pair(flat, weights, a, b, new_id):
    out, wout, merged = _merge_pair_kernel(
        flat, weights, np.int32(a), np.int32(b), np.int32(new_id)
    )
    return out, wout, int(merged)


def encode_bpe_piece(ids, merge_keys, merge_ranks, merge_new):
    return _encode_bpe_kernel(ids, merge_keys, merge_ranks, merge_new)


class _TrieMatcher:
    __slots__ = ("offsets", "cbytes", "cnodes", "node_token", "max_len")

    def __init__(self, tokens):
        children = [{}]
        node_token = [-1]
        for ti, tok in enumerate(tokens):
            node = 0
            for byte in tok:
                nxt = children[node].get(byte)
                if nxt is None:
                    nxt = len(children)
                    children.append({})
                    node_token.append(-1)
                    children[node][byte] = nxt
                node = nxt
            node_token[node] = ti
        offsets = np.empty(len(children) + 1, np.int64)
        offsets[0] = 0
        cbytes = []
        cnodes = []
        for i, d in enumerate(children):
            for byte in sorted(d):
                cbytes.append(byte)
                cnodes.append(d[byte])
            offsets[i + 1] = len(cbytes)
        self.offsets = offsets
        self.cbytes = np.asarray(cbytes, np.uint8)
        self.cnodes = np.asarray(cnodes, np.int64)
        self.node_token = np.asarray(node_token, np.int64)
        self.max_len = max((len(t) for t in tokens), default=0)


def build_matcher(tokens):
    return _TrieMatcher(tokens)


def match_edges(matcher, piece_bytes):
    piece = np.frombuffer(piece_bytes, np.uint8)
    if piece.size == 0 or matcher.max_len == 0:
        return (np.empty(0, np.int32), np.empty(0, np.int32), np.empty(0, np.int32))
    return _match_edges_kernel(
        piece,
        matcher.offsets,
        matcher.cbytes,
        matcher.cnodes,
        matcher.node_token,
        matcher.max_len,
    )


def viterbi_piece(length, starts, ends, toks, lp):
    best, path = _viterbi_kernel(length, starts, ends, toks, lp)
    return float(best), path


def viterbi_masked(length, starts, ends, toks, lp, banned):
    return float(_viterbi_masked_kernel(length, starts, ends, toks, lp, np.int32(banned)))


def em_piece(length, starts, ends, toks, lp, freq, counts_out):
    return float(_em_piece_kernel(length, starts, ends, toks, lp, freq, counts_out))
