"""WordPiece trainer (pair-score merging) and greedy longest-match segmenter.

The initial alphabet is character level: word-initial characters plus the
other characters carrying the "##" continuation prefix. Merging picks the
pair maximizing count(pair) / (count(first) * count(second)); counts are
weighted by word frequency. Encoding takes the longest vocabulary prefix
repeatedly; a word with no matching prefix becomes one unknown token.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .corpus import Corpus, record_text
from .errors import VocabTooSmallError
from .tokcore import (
    ALGO_WORDPIECE,
    WORDPIECE_PREFIX,
    WORDPIECE_SPECIALS,
    NormalizerConfig,
    PreTokenizerConfig,
    PRETOK_BERT_STYLE,
    SpecialTokenSet,
    TokenizerModel,
    Vocabulary,
    normalize,
    pretokenize,
)


def _word_counts(corpus: Corpus, normalizer, pretokenizer) -> dict[str, int]:
    counts: dict[str, int] = {}
    for record in corpus:
        for word in pretokenize(normalize(record_text(record), normalizer), pretokenizer):
            counts[word] = counts.get(word, 0) + 1
    return counts


def _alphabet(word_counts) -> list[str]:
    symbols = set()
    for word in word_counts:
        symbols.add(word[0])
        for ch in word[1:]:
            symbols.add(WORDPIECE_PREFIX + ch)
    return sorted(symbols)


def _build_flat(word_counts, token_ids):
    chunks = []
    weights = []
    for word, freq in word_counts.items():
        ids = np.asarray(
            [token_ids[word[0]]] + [token_ids[WORDPIECE_PREFIX + c] for c in word[1:]],
            np.int32,
        )
        chunks.append(ids)
        chunks.append(np.full(1, -1, np.int32))
        weights.append(np.full(ids.size + 1, freq, np.int64))
    if not chunks:
        return np.empty(0, np.int32), np.empty(0, np.int64)
    return np.concatenate(chunks), np.concatenate(weights)


def _train_core(
    word_counts: dict[str, int],
    vocab_size: int,
    specials: SpecialTokenSet,
    normalizer: NormalizerConfig,
    pretokenizer: PreTokenizerConfig,
):
    special_tokens = list(specials.ordered())
    alphabet = _alphabet(word_counts)
    base = len(special_tokens) + len(alphabet)
    if vocab_size < base:
        raise VocabTooSmallError(
            f"vocab_size {vocab_size} < {len(special_tokens)} specials "
            f"+ {len(alphabet)} alphabet symbols"
        )
    tokens = special_tokens + alphabet
    token_ids = {t: i for i, t in enumerate(tokens)}
    special_set = set(special_tokens)

    flat, weights = _build_flat(word_counts, token_ids)
    backend = kernels.backend()
    merges: list[tuple[str, str]] = []
    banned: set[int] = set()

    while len(tokens) < vocab_size:
        keys, pair_counts = backend.count_pairs(flat, weights)
        if keys.size == 0:
            break
        sym_counts = backend.count_symbols(flat, weights, len(tokens))
        a_ids = (keys >> kernels.PAIR_SHIFT).astype(np.int64)
        b_ids = (keys & ((1 << kernels.PAIR_SHIFT) - 1)).astype(np.int64)
        scores = pair_counts.astype(np.float64) / (
            sym_counts[a_ids].astype(np.float64) * sym_counts[b_ids].astype(np.float64)
        )
        if banned:
            scores[np.isin(keys, np.fromiter(banned, np.int64, len(banned)))] = -1.0
        best_score = scores.max()
        if best_score <= 0:
            break
        best_key = None
        best_pair = None
        for key in keys[scores == best_score].tolist():
            a, b = kernels.split_key(key)
            pair = (tokens[a], tokens[b])
            if best_pair is None or pair < best_pair:
                best_pair = pair
                best_key = key
        a_str, b_str = best_pair
        # the right element of an in-word pair always carries the prefix
        merged = a_str + b_str[len(WORDPIECE_PREFIX):]
        if merged in special_set:
            banned.add(best_key)
            continue
        new_id = token_ids.get(merged)
        if new_id is None:
            new_id = len(tokens)
            tokens.append(merged)
            token_ids[merged] = new_id
        merges.append((a_str, b_str))
        a, b = kernels.split_key(best_key)
        flat, weights, _ = backend.merge_pair(flat, weights, a, b, new_id)

    model = TokenizerModel(
        algorithm=ALGO_WORDPIECE,
        vocabulary=Vocabulary(tokens),
        specials=specials,
        normalizer=normalizer,
        pretokenizer=pretokenizer,
        wordpiece_prefix=WORDPIECE_PREFIX,
    )
    return model, merges


def train_wordpiece_from_pieces(
    word_counts: dict[str, int],
    vocab_size: int,
    specials: SpecialTokenSet = WORDPIECE_SPECIALS,
) -> TokenizerModel:
    model, _ = _train_core(
        word_counts,
        vocab_size,
        specials,
        NormalizerConfig(),
        PreTokenizerConfig(kind=PRETOK_BERT_STYLE),
    )
    return model


def train_wordpiece(
    corpus: Corpus,
    vocab_size: int,
    specials: SpecialTokenSet = WORDPIECE_SPECIALS,
    normalizer: NormalizerConfig | None = None,
    pretokenizer: PreTokenizerConfig | None = None,
) -> TokenizerModel:
    normalizer = normalizer or NormalizerConfig()
    pretokenizer = pretokenizer or PreTokenizerConfig(kind=PRETOK_BERT_STYLE)
    words = _word_counts(corpus, normalizer, pretokenizer)
    model, _ = _train_core(words, vocab_size, specials, normalizer, pretokenizer)
    return model


def _vocab_set(model: TokenizerModel) -> set[str]:
    cached = model.__dict__.get("_wordpiece_set")
    if cached is None:
        cached = set(model.vocabulary.tokens)
        model.__dict__["_wordpiece_set"] = cached
    return cached


def segment_wordpiece(model: TokenizerModel, word: str) -> list[str]:
    """Greedy longest prefix match; unmatched words become one unk token."""
    if not word:
        return []
    vocab = _vocab_set(model)
    prefix = model.wordpiece_prefix or WORDPIECE_PREFIX
    tokens = []
    i = 0
    n = len(word)
    while i < n:
        end = n
        found = None
        while end > i:
            cand = word[i:end] if i == 0 else prefix + word[i:end]
            if cand in vocab:
                found = cand
                break
            end -= 1
        if found is None:
            return [model.specials.unk]
        tokens.append(found)
        i = end
    return tokens


def segment_ids(model: TokenizerModel, word: str) -> list[int]:
    vocab = model.vocabulary
    return [vocab.id_of(t) for t in segment_wordpiece(model, word)]
