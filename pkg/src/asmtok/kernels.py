"""Hot trainer/encoder loops with two interchangeable backends.

The numba backend JIT-compiles the inner loops; the numpy backend is a
dependency-light fallback that mirrors the same arithmetic (identical
float64 operation order, so discrete decisions agree between backends).
Selection: ASMTOK_KERNELS = auto | numba | numpy (default auto = numba
when importable). `use("numpy")` overrides per-process, mainly for tests
and benchmarks.

Data conventions shared by both backends:
  - working sequences are int32 token ids in one flat array, pieces
    separated by -1 sentinels; weights carry the owning piece frequency
    per position
  - an adjacent pair (a, b) is keyed as (a << PAIR_SHIFT) | b
  - unigram lattices are edge lists (start, end, token) per piece, sorted
    by (start, end); dead tokens are excluded by log-prob = -inf
"""

from __future__ import annotations

import math
import os
from contextlib import contextmanager

import numpy as np

PAIR_SHIFT = 21  # ids stay below 2**21; pair key fits comfortably in int64
_NEG_INF = float("-inf")


def pair_key(a: int, b: int) -> int:
    return (int(a) << PAIR_SHIFT) | int(b)


def split_key(key: int) -> tuple[int, int]:
    return key >> PAIR_SHIFT, key & ((1 << PAIR_SHIFT) - 1)


# --- numpy / pure-python backend --------------------------------------------


def _np_count_pairs(flat, weights):
    a = flat[:-1]
    b = flat[1:]
    valid = (a >= 0) & (b >= 0)
    if not valid.any():
        return np.empty(0, np.int64), np.empty(0, np.int64)
    a64 = a[valid].astype(np.int64)
    keys = (a64 << PAIR_SHIFT) | b[valid].astype(np.int64)
    w = weights[:-1][valid]
    uniq, inv = np.unique(keys, return_inverse=True)
    # float64 bincount is exact for integer weights below 2**53
    counts = np.bincount(inv, weights=w.astype(np.float64)).astype(np.int64)
    return uniq, counts


def _np_count_symbols(flat, weights, n_symbols):
    valid = flat >= 0
    counts = np.bincount(
        flat[valid], weights=weights[valid].astype(np.float64), minlength=n_symbols
    )
    return counts.astype(np.int64)


def _np_merge_positions(flat, a, b):
    m = np.nonzero((flat[:-1] == a) & (flat[1:] == b))[0]
    if m.size == 0 or a != b:
        return m
    # overlapping matches (a == b): keep even offsets within each run,
    # i.e. greedy left-to-right
    starts = np.ones(m.size, bool)
    starts[1:] = np.diff(m) != 1
    start_idx = np.maximum.accumulate(np.where(starts, np.arange(m.size), 0))
    return m[((m - m[start_idx]) % 2) == 0]


def _np_merge_pair(flat, weights, a, b, new_id):
    pos = _np_merge_positions(flat, a, b)
    if pos.size == 0:
        return flat, weights, 0
    keep = np.ones(flat.size, bool)
    keep[pos + 1] = False
    out = flat.copy()
    out[pos] = new_id
    return out[keep], weights[keep], int(pos.size)


def _np_encode_bpe_piece(ids, merge_keys, merge_ranks, merge_new):
    buf = ids.astype(np.int32, copy=True)
    if merge_keys.size == 0:
        return buf
    last = merge_keys.size - 1
    while buf.size >= 2:
        keys = (buf[:-1].astype(np.int64) << PAIR_SHIFT) | buf[1:].astype(np.int64)
        pos = np.minimum(np.searchsorted(merge_keys, keys), last)
        hit = merge_keys[pos] == keys
        if not hit.any():
            break
        ranks = np.where(hit, merge_ranks[pos], np.iinfo(np.int32).max)
        best_rank = ranks.min()
        at = int(np.nonzero(ranks == best_rank)[0][0])
        new_id = merge_new[pos[at]]
        buf = np.concatenate((buf[:at], np.array([new_id], np.int32), buf[at + 2 :]))
    return buf


class _PyMatcher:
    __slots__ = ("table", "max_len")

    def __init__(self, tokens):
        self.table = {tok: i for i, tok in enumerate(tokens)}
        self.max_len = max((len(t) for t in tokens), default=0)


def _np_build_matcher(tokens):
    return _PyMatcher(tokens)


def _np_match_edges(matcher, piece_bytes):
    table = matcher.table
    max_len = matcher.max_len
    n = len(piece_bytes)
    starts, ends, toks = [], [], []
    for s in range(n):
        limit = min(max_len, n - s)
        for l in range(1, limit + 1):
            tok = table.get(piece_bytes[s : s + l])
            if tok is not None:
                starts.append(s)
                ends.append(s + l)
                toks.append(tok)
    return (
        np.asarray(starts, np.int32),
        np.asarray(ends, np.int32),
        np.asarray(toks, np.int32),
    )


def _np_viterbi_piece(length, starts, ends, toks, lp):
    best = [_NEG_INF] * (length + 1)
    ntok = [0] * (length + 1)
    bp = [-1] * (length + 1)
    best[0] = 0.0
    for ei in range(starts.size):
        s = starts[ei]
        if best[s] == _NEG_INF:
            continue
        lpt = lp[toks[ei]]
        if lpt == _NEG_INF:
            continue
        e = ends[ei]
        cand = best[s] + lpt
        if cand > best[e] or (cand == best[e] and ntok[s] + 1 < ntok[e]):
            best[e] = cand
            ntok[e] = ntok[s] + 1
            bp[e] = ei
    if best[length] == _NEG_INF:
        return _NEG_INF, np.empty(0, np.int64)
    path = []
    e = length
    while e > 0:
        ei = bp[e]
        path.append(ei)
        e = starts[ei]
    path.reverse()
    return best[length], np.asarray(path, np.int64)


def _np_viterbi_masked(length, starts, ends, toks, lp, banned):
    best = [_NEG_INF] * (length + 1)
    best[0] = 0.0
    for ei in range(starts.size):
        t = toks[ei]
        if t == banned:
            continue
        s = starts[ei]
        if best[s] == _NEG_INF:
            continue
        lpt = lp[t]
        if lpt == _NEG_INF:
            continue
        e = ends[ei]
        cand = best[s] + lpt
        if cand > best[e]:
            best[e] = cand
    return best[length]


def _logaddexp(x, y):
    if x == _NEG_INF:
        return y
    if y == _NEG_INF:
        return x
    if x < y:
        x, y = y, x
    return x + math.log1p(math.exp(y - x))


def _np_em_piece(length, starts, ends, toks, lp, freq, counts_out):
    n_edges = starts.size
    alpha = [_NEG_INF] * (length + 1)
    alpha[0] = 0.0
    for ei in range(n_edges):
        s = starts[ei]
        if alpha[s] == _NEG_INF:
            continue
        lpt = lp[toks[ei]]
        if lpt == _NEG_INF:
            continue
        e = ends[ei]
        alpha[e] = _logaddexp(alpha[e], alpha[s] + lpt)
    z = alpha[length]
    if z == _NEG_INF:
        return _NEG_INF
    beta = [_NEG_INF] * (length + 1)
    beta[length] = 0.0
    for ei in range(n_edges - 1, -1, -1):
        e = ends[ei]
        if beta[e] == _NEG_INF:
            continue
        lpt = lp[toks[ei]]
        if lpt == _NEG_INF:
            continue
        s = starts[ei]
        beta[s] = _logaddexp(beta[s], lpt + beta[e])
    for ei in range(n_edges):
        s = starts[ei]
        e = ends[ei]
        t = toks[ei]
        lpt = lp[t]
        if lpt == _NEG_INF or alpha[s] == _NEG_INF or beta[e] == _NEG_INF:
            continue
        counts_out[t] += freq * math.exp(alpha[s] + lpt + beta[e] - z)
    return freq * z


class _Backend:
    def __init__(self, name, fns):
        self.name = name
        for key, fn in fns.items():
            setattr(self, key, fn)


_NUMPY_BACKEND = _Backend(
    "numpy",
    {
        "count_pairs": _np_count_pairs,
        "count_symbols": _np_count_symbols,
        "merge_pair": _np_merge_pair,
        "encode_bpe_piece": _np_encode_bpe_piece,
        "build_matcher": _np_build_matcher,
        "match_edges": _np_match_edges,
        "viterbi_piece": _np_viterbi_piece,
        "viterbi_masked": _np_viterbi_masked,
        "em_piece": _np_em_piece,
    },
)

_numba_backend = None
_active = None
_ENV_VAR = "ASMTOK_KERNELS"


def _load_numba_backend():
    global _numba_backend
    if _numba_backend is None:
        from . import _numba_kernels as nk

        _numba_backend = _Backend(
            "numba",
            {
                "count_pairs": nk.count_pairs,
                "count_symbols": nk.count_symbols,
                "merge_pair": nk.merge_pair,
                "encode_bpe_piece": nk.encode_bpe_piece,
                "build_matcher": nk.build_matcher,
                "match_edges": nk.match_edges,
                "viterbi_piece": nk.viterbi_piece,
                "viterbi_masked": nk.viterbi_masked,
                "em_piece": nk.em_piece,
            },
        )
    return _numba_backend


def backend(name: str | None = None) -> _Backend:
    """Resolve a backend by name; None resolves the configured default."""
    if name is None:
        global _active
        if _active is None:
            _active = backend(os.environ.get(_ENV_VAR, "auto").strip().lower() or "auto")
        return _active
    if name == "numpy":
        return _NUMPY_BACKEND
    if name == "numba":
        return _load_numba_backend()
    if name == "auto":
        try:
            return _load_numba_backend()
        except ImportError:
            return _NUMPY_BACKEND
    raise ValueError(f"unknown kernel backend {name!r} (expected auto, numba or numpy)")


@contextmanager
def use(name: str):
    """Temporarily force a backend (tests and benchmarks)."""
    global _active
    previous = _active
    _active = backend(name)
    try:
        yield _active
    finally:
        _active = previous
