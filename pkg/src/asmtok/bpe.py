"""Byte-pair-encoding trainer and segmenter.

Training counts adjacent token pairs over the working corpus (weighted by
piece frequency), merges the most frequent pair, and repeats until the
vocabulary is full or no pair occurs at least twice. Ties on count go to
the lexicographically smallest (first, second) token pair so training is
reproducible. Segmentation replays merges lowest rank first.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .corpus import Corpus, record_text
from .errors import VocabTooSmallError
from .tokcore import (
    ALGO_BPE,
    BYTE_TO_CHAR,
    BPE_SPECIALS,
    NormalizerConfig,
    PreTokenizerConfig,
    SpecialTokenSet,
    TokenizerModel,
    Vocabulary,
    normalize,
    pretokenize,
    unmap_to_bytes,
)

MIN_MERGE_FREQUENCY = 2


def _piece_counts(corpus: Corpus, normalizer, pretokenizer) -> dict[str, int]:
    counts: dict[str, int] = {}
    for record in corpus:
        for piece in pretokenize(normalize(record_text(record), normalizer), pretokenizer):
            counts[piece] = counts.get(piece, 0) + 1
    return counts


def _build_flat(piece_counts: dict[str, int], n_specials: int):
    """Flatten pieces to byte-alphabet ids with -1 separators."""
    chunks = []
    weights = []
    for piece, freq in piece_counts.items():
        ids = np.frombuffer(unmap_to_bytes(piece), np.uint8).astype(np.int32) + n_specials
        chunks.append(ids)
        chunks.append(np.full(1, -1, np.int32))
        weights.append(np.full(ids.size + 1, freq, np.int64))
    if not chunks:
        return np.empty(0, np.int32), np.empty(0, np.int64)
    return np.concatenate(chunks), np.concatenate(weights)


def _select_merge(keys, counts, tokens, banned, min_frequency):
    """Highest count wins; ties go to the smallest (first, second) strings."""
    eligible = counts >= min_frequency
    if banned:
        eligible &= ~np.isin(keys, np.fromiter(banned, np.int64, len(banned)))
    if not eligible.any():
        return None
    top = counts[eligible].max()
    candidates = keys[eligible & (counts == top)]
    best_key = None
    best_pair = None
    for key in candidates.tolist():
        a, b = kernels.split_key(key)
        pair = (tokens[a], tokens[b])
        if best_pair is None or pair < best_pair:
            best_pair = pair
            best_key = key
    return best_key, best_pair, int(top)


def train_bpe_from_pieces(
    piece_counts: dict[str, int],
    vocab_size: int,
    specials: SpecialTokenSet = BPE_SPECIALS,
    normalizer: NormalizerConfig | None = None,
    pretokenizer: PreTokenizerConfig | None = None,
) -> TokenizerModel:
    """Train on byte-mapped pieces with multiplicities (trainer core)."""
    special_tokens = list(specials.ordered())
    base = len(special_tokens) + 256
    if vocab_size < base:
        raise VocabTooSmallError(
            f"vocab_size {vocab_size} < {len(special_tokens)} specials + 256 byte alphabet"
        )
    tokens = special_tokens + [BYTE_TO_CHAR[b] for b in range(256)]
    token_ids = {t: i for i, t in enumerate(tokens)}
    special_set = set(special_tokens)

    flat, weights = _build_flat(piece_counts, len(special_tokens))
    backend = kernels.backend()
    merges: list[tuple[str, str]] = []
    banned: set[int] = set()

    while len(tokens) < vocab_size:
        keys, counts = backend.count_pairs(flat, weights)
        picked = _select_merge(keys, counts, tokens, banned, MIN_MERGE_FREQUENCY)
        if picked is None:
            break
        key, (a_str, b_str), _ = picked
        merged = a_str + b_str
        if merged in special_set:
            banned.add(key)
            continue
        new_id = token_ids.get(merged)
        if new_id is None:
            new_id = len(tokens)
            tokens.append(merged)
            token_ids[merged] = new_id
        merges.append((a_str, b_str))
        a, b = kernels.split_key(key)
        flat, weights, _ = backend.merge_pair(flat, weights, a, b, new_id)

    return TokenizerModel(
        algorithm=ALGO_BPE,
        vocabulary=Vocabulary(tokens),
        specials=specials,
        normalizer=normalizer or NormalizerConfig(),
        pretokenizer=pretokenizer or PreTokenizerConfig(),
        bpe_merges=merges,
    )


def train_bpe(
    corpus: Corpus,
    vocab_size: int,
    specials: SpecialTokenSet = BPE_SPECIALS,
    normalizer: NormalizerConfig | None = None,
    pretokenizer: PreTokenizerConfig | None = None,
) -> TokenizerModel:
    normalizer = normalizer or NormalizerConfig()
    pretokenizer = pretokenizer or PreTokenizerConfig()
    pieces = _piece_counts(corpus, normalizer, pretokenizer)
    return train_bpe_from_pieces(pieces, vocab_size, specials, normalizer, pretokenizer)


def _merge_tables(model: TokenizerModel):
    """Cached (sorted pair keys, ranks, produced ids, byte id table)."""
    cached = model.__dict__.get("_bpe_tables")
    if cached is not None:
        return cached
    vocab = model.vocabulary
    byte_ids = np.asarray([vocab.id_of(BYTE_TO_CHAR[b]) for b in range(256)], np.int32)
    by_key: dict[int, tuple[int, int]] = {}
    for rank, (a, b) in enumerate(model.bpe_merges):
        key = kernels.pair_key(vocab.id_of(a), vocab.id_of(b))
        if key not in by_key:
            by_key[key] = (rank, vocab.id_of(a + b))
    keys = np.fromiter(by_key.keys(), np.int64, len(by_key))
    order = np.argsort(keys)
    keys = keys[order]
    ranks = np.asarray([by_key[k][0] for k in keys.tolist()], np.int32)
    new_ids = np.asarray([by_key[k][1] for k in keys.tolist()], np.int32)
    tables = (keys, ranks, new_ids, byte_ids)
    model.__dict__["_bpe_tables"] = tables
    return tables


def segment_ids(model: TokenizerModel, piece: str) -> list[int]:
    """Vocabulary ids for one byte-mapped piece."""
    if not piece:
        return []
    keys, ranks, new_ids, byte_ids = _merge_tables(model)
    raw = np.frombuffer(unmap_to_bytes(piece), np.uint8)
    ids = byte_ids[raw]
    out = kernels.backend().encode_bpe_piece(ids, keys, ranks, new_ids)
    return out.tolist()


def segment_bpe(model: TokenizerModel, piece: str) -> list[str]:
    """Token strings for one byte-mapped piece, lowest-rank merges first."""
    vocab = model.vocabulary
    return [vocab.token_of(i) for i in segment_ids(model, piece)]
