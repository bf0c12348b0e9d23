"""Unigram language-model tokenizer: seed, EM fit, prune, Viterbi segment.

Training seeds a large candidate vocabulary (all frequent substrings up to
a length cap, plus every single byte), fits token probabilities with EM
over per-piece segmentation lattices, then repeatedly drops the fraction
of tokens whose removal costs the least Viterbi likelihood until the
vocabulary fits. Single-byte tokens are never pruned, so any input stays
segmentable. Segmentation maximizes path log-probability; ties prefer
fewer tokens, then the leftmost-longest token.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .corpus import Corpus, record_text
from .errors import UnsegmentableError, VocabTooSmallError
from .tokcore import (
    ALGO_UNIGRAM,
    BYTE_TO_CHAR,
    UNIGRAM_SPECIALS,
    NormalizerConfig,
    PreTokenizerConfig,
    SpecialTokenSet,
    TokenizerModel,
    Vocabulary,
    normalize,
    pretokenize,
    unmap_to_bytes,
)

DEFAULT_PRUNE_FRACTION = 0.2
DEFAULT_EM_ITERS = 2
DEFAULT_SEED_MAX_LEN = 16
DEFAULT_SEED_MIN_COUNT = 2
DEFAULT_SEED_MULTIPLIER = 4

_NEG_INF = float("-inf")


def _piece_byte_counts(corpus: Corpus, normalizer, pretokenizer) -> dict[bytes, int]:
    counts: dict[bytes, int] = {}
    for record in corpus:
        for piece in pretokenize(normalize(record_text(record), normalizer), pretokenizer):
            raw = unmap_to_bytes(piece)
            counts[raw] = counts.get(raw, 0) + 1
    return counts


def _seed_multiunits(pieces: dict[bytes, int], max_len: int, min_count: int) -> dict[bytes, int]:
    """Frequent substrings of length 2..max_len, counted with multiplicity.

    Level-by-level growth keeps memory bounded: a length-L substring is only
    counted when its length-(L-1) prefix already met the frequency cutoff.
    """
    found: dict[bytes, int] = {}
    prev: dict[bytes, int] | None = None
    for length in range(2, max_len + 1):
        cur: dict[bytes, int] = {}
        for piece, freq in pieces.items():
            n = len(piece)
            for s in range(n - length + 1):
                if prev is not None and piece[s : s + length - 1] not in prev:
                    continue
                sub = piece[s : s + length]
                cur[sub] = cur.get(sub, 0) + freq
        cur = {k: v for k, v in cur.items() if v >= min_count}
        if not cur:
            break
        found.update(cur)
        prev = cur
    return found


def _unit_counts(pieces: dict[bytes, int]) -> np.ndarray:
    counts = np.zeros(256, np.float64)
    for piece, freq in pieces.items():
        if piece:
            counts += np.bincount(np.frombuffer(piece, np.uint8), minlength=256) * float(freq)
    return counts


def _normalized_logprobs(counts: np.ndarray, alive: np.ndarray) -> np.ndarray:
    """log(count/total) over alive tokens, flooring zeros so every alive
    token keeps a finite log-probability; dead tokens get -inf."""
    lp = np.full(counts.size, _NEG_INF)
    vals = counts[alive].astype(np.float64)
    total = vals.sum()
    floor = total * 1e-12 if total > 0 else 1.0
    vals = np.maximum(vals, floor)
    lp[alive] = np.log(vals / vals.sum())
    return lp


def _renormalize(lp: np.ndarray, alive: np.ndarray) -> np.ndarray:
    vals = lp[alive]
    m = vals.max()
    lse = m + np.log(np.exp(vals - m).sum())
    out = lp.copy()
    out[alive] = vals - lse
    return out


def _em_step(lattices, lp, alive, n_tokens, backend):
    """One EM iteration; returns (new lp, corpus log-likelihood under lp)."""
    counts = np.zeros(n_tokens, np.float64)
    ll = 0.0
    for length, starts, ends, toks, freq in lattices:
        ll += backend.em_piece(length, starts, ends, toks, lp, freq, counts)
    return _normalized_logprobs(counts, alive), ll


def _loss_increases(lattices, lp, n_tokens, backend):
    """Viterbi-approximate loss increase per token if it were removed.

    Only tokens on a piece's best path matter for that piece: removing any
    other token leaves the best segmentation unchanged.
    """
    delta = np.zeros(n_tokens, np.float64)
    for length, starts, ends, toks, freq in lattices:
        best, path = backend.viterbi_piece(length, starts, ends, toks, lp)
        if best == _NEG_INF:
            continue
        path_toks = sorted({int(toks[e]) for e in path} - set(range(256)))
        for t in path_toks:
            masked = backend.viterbi_masked(length, starts, ends, toks, lp, t)
            delta[t] += freq * (best - masked)
    return delta


def train_unigram_from_pieces(
    piece_counts,
    vocab_size: int,
    specials: SpecialTokenSet = UNIGRAM_SPECIALS,
    prune_fraction: float = DEFAULT_PRUNE_FRACTION,
    em_iters_per_round: int = DEFAULT_EM_ITERS,
    seed_max_len: int = DEFAULT_SEED_MAX_LEN,
    seed_min_count: int = DEFAULT_SEED_MIN_COUNT,
    seed_multiplier: int = DEFAULT_SEED_MULTIPLIER,
    normalizer: NormalizerConfig | None = None,
    pretokenizer: PreTokenizerConfig | None = None,
) -> TokenizerModel:
    """Trainer core over byte-mapped pieces (or raw bytes) with counts."""
    if not (0 < prune_fraction < 1):
        raise ValueError(f"prune_fraction must be in (0,1), got {prune_fraction}")
    pieces: dict[bytes, int] = {}
    for piece, freq in piece_counts.items():
        raw = piece if isinstance(piece, bytes) else unmap_to_bytes(piece)
        pieces[raw] = pieces.get(raw, 0) + freq

    special_tokens = list(specials.ordered())
    n_specials = len(special_tokens)
    if vocab_size < n_specials + 256:
        raise VocabTooSmallError(
            f"vocab_size {vocab_size} < {n_specials} specials + 256 byte alphabet"
        )

    seed_counts = _seed_multiunits(pieces, seed_max_len, seed_min_count)
    budget = max(0, seed_multiplier * vocab_size - 256)
    ranked = sorted(seed_counts.items(), key=lambda kv: (-(kv[1] * len(kv[0])), kv[0]))
    multis = [tok for tok, _ in ranked[:budget]]

    tokens_bytes = [bytes([b]) for b in range(256)] + multis
    n_tokens = len(tokens_bytes)
    init = np.zeros(n_tokens, np.float64)
    init[:256] = _unit_counts(pieces)
    for i, tok in enumerate(multis):
        init[256 + i] = seed_counts[tok]

    alive = np.ones(n_tokens, bool)
    lp = _normalized_logprobs(init, alive)

    backend = kernels.backend()
    matcher = backend.build_matcher(tokens_bytes)
    lattices = []
    for piece, freq in pieces.items():
        starts, ends, toks = backend.match_edges(matcher, piece)
        lattices.append((len(piece), starts, ends, toks, float(freq)))

    target = vocab_size - n_specials
    while int(alive.sum()) > target:
        for _ in range(em_iters_per_round):
            lp, _ = _em_step(lattices, lp, alive, n_tokens, backend)
        delta = _loss_increases(lattices, lp, n_tokens, backend)
        prunable = [i for i in range(256, n_tokens) if alive[i]]
        drop_needed = int(alive.sum()) - target
        drop_n = min(max(1, int(len(prunable) * prune_fraction)), drop_needed, len(prunable))
        order = sorted(prunable, key=lambda i: (delta[i], tokens_bytes[i]))
        for i in order[:drop_n]:
            alive[i] = False
        lp = lp.copy()
        lp[~alive] = _NEG_INF

    # fit the surviving inventory, then renormalize exactly
    for _ in range(em_iters_per_round):
        lp, _ = _em_step(lattices, lp, alive, n_tokens, backend)
    lp = _renormalize(lp, alive)

    unit_entries = [(BYTE_TO_CHAR[b], float(lp[b])) for b in range(256)]
    multi_entries = sorted(
        (
            ("".join(BYTE_TO_CHAR[x] for x in tokens_bytes[i]), float(lp[i]))
            for i in range(256, n_tokens)
            if alive[i]
        ),
        key=lambda kv: (-kv[1], kv[0]),
    )
    vocab_tokens = special_tokens + [t for t, _ in unit_entries] + [t for t, _ in multi_entries]
    logprobs = dict(unit_entries)
    logprobs.update(multi_entries)

    return TokenizerModel(
        algorithm=ALGO_UNIGRAM,
        vocabulary=Vocabulary(vocab_tokens),
        specials=specials,
        normalizer=normalizer or NormalizerConfig(),
        pretokenizer=pretokenizer or PreTokenizerConfig(),
        unigram_logprobs=logprobs,
    )


def train_unigram(
    corpus: Corpus,
    vocab_size: int,
    specials: SpecialTokenSet = UNIGRAM_SPECIALS,
    prune_fraction: float = DEFAULT_PRUNE_FRACTION,
    em_iters_per_round: int = DEFAULT_EM_ITERS,
    seed_max_len: int = DEFAULT_SEED_MAX_LEN,
    seed_min_count: int = DEFAULT_SEED_MIN_COUNT,
    seed_multiplier: int = DEFAULT_SEED_MULTIPLIER,
    normalizer: NormalizerConfig | None = None,
    pretokenizer: PreTokenizerConfig | None = None,
) -> TokenizerModel:
    normalizer = normalizer or NormalizerConfig()
    pretokenizer = pretokenizer or PreTokenizerConfig()
    pieces = _piece_byte_counts(corpus, normalizer, pretokenizer)
    return train_unigram_from_pieces(
        pieces,
        vocab_size,
        specials,
        prune_fraction,
        em_iters_per_round,
        seed_max_len,
        seed_min_count,
        seed_multiplier,
        normalizer,
        pretokenizer,
    )


# --- segmentation -------------------------------------------------------------


def _lp_table(model: TokenizerModel):
    cached = model.__dict__.get("_unigram_table")
    if cached is None:
        table = {unmap_to_bytes(tok): lp for tok, lp in model.unigram_logprobs.items()}
        max_len = max((len(t) for t in table), default=0)
        cached = (table, max_len)
        model.__dict__["_unigram_table"] = cached
    return cached


def _path_token_lengths(back, pos):
    lens = []
    while pos > 0:
        start = back[pos]
        lens.append(pos - start)
        pos = start
    lens.reverse()
    return lens


def best_segmentation(raw: bytes, table: dict[bytes, float], max_len: int) -> list[bytes]:
    """Maximum log-probability split of raw into vocabulary tokens.

    Exact ties prefer fewer tokens, then the path whose token at the first
    divergence is longer (leftmost-longest).
    """
    n = len(raw)
    if n == 0:
        return []
    best = [_NEG_INF] * (n + 1)
    ntok = [0] * (n + 1)
    back = [-1] * (n + 1)
    best[0] = 0.0
    for end in range(1, n + 1):
        for start in range(max(0, end - max_len), end):
            if best[start] == _NEG_INF:
                continue
            lp = table.get(raw[start:end])
            if lp is None:
                continue
            cand = best[start] + lp
            take = False
            if cand > best[end]:
                take = True
            elif cand == best[end]:
                cand_ntok = ntok[start] + 1
                if cand_ntok < ntok[end]:
                    take = True
                elif cand_ntok == ntok[end]:
                    cand_path = _path_token_lengths(back, start) + [end - start]
                    if cand_path > _path_token_lengths(back, end):
                        take = True
            if take:
                best[end] = cand
                ntok[end] = ntok[start] + 1
                back[end] = start
    if best[n] == _NEG_INF:
        raise UnsegmentableError("piece contains a unit outside the vocabulary")
    spans = []
    pos = n
    while pos > 0:
        start = back[pos]
        spans.append(raw[start:pos])
        pos = start
    spans.reverse()
    return spans


def segment_unigram(model: TokenizerModel, piece: str) -> list[str]:
    """Token strings (byte-mapped form) for one pre-tokenized piece."""
    if not piece:
        return []
    table, max_len = _lp_table(model)
    spans = best_segmentation(unmap_to_bytes(piece), table, max_len)
    return ["".join(BYTE_TO_CHAR[b] for b in span) for span in spans]


def segment_ids(model: TokenizerModel, piece: str) -> list[int]:
    vocab = model.vocabulary
    return [vocab.id_of(t) for t in segment_unigram(model, piece)]
