"""Masked-token and function-signature dataset emission.

Masking replaces round(rate * n) token positions (at least one, drawn
uniformly without replacement from a seeded generator) with the mask
token; labels carry the original ids at masked positions and -100
elsewhere. Signature examples pair a function's disassembly with the
canonical "return_type(param, ...)" rendering.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from fractions import Fraction

from .corpus import Corpus, FunctionRecord, record_text, render_signature
from .errors import EmptyEncodingError
from .rng import derive_seed, permutation
from .tokcore import TokenizerModel, encode

IGNORE_INDEX = -100


@dataclass
class MaskedExample:
    input_ids: list[int]
    labels: list[int]
    mask_positions: list[int]


@dataclass
class SignatureExample:
    input_text: str
    target_text: str


def mask_count(n: int, rate) -> int:
    """round-half-up(rate * n) with a floor of one, in exact arithmetic."""
    frac = Fraction(str(rate)) if isinstance(rate, float) else Fraction(rate)
    if not (0 < frac < 1):
        raise ValueError(f"rate must be in (0,1), got {rate}")
    count = (2 * frac.numerator * n + frac.denominator) // (2 * frac.denominator)
    return max(1, min(int(count), n))


def mask_function(
    model: TokenizerModel, record: FunctionRecord, rate=0.15, seed: int = 0
) -> MaskedExample:
    ids = encode(model, record_text(record))
    n = len(ids)
    if n == 0:
        raise EmptyEncodingError(f"function {record.name!r} encodes to zero tokens")
    k = mask_count(n, rate)
    positions = sorted(permutation(n, seed)[:k])
    mask_id = model.mask_id
    input_ids = list(ids)
    labels = [IGNORE_INDEX] * n
    for p in positions:
        labels[p] = ids[p]
        input_ids[p] = mask_id
    return MaskedExample(input_ids=input_ids, labels=labels, mask_positions=positions)


def emit_mlm_dataset(model: TokenizerModel, corpus: Corpus, rate, seed: int, path) -> int:
    """One JSONL line per function; per-record seeds derive from (seed, index)."""
    written = 0
    with open(path, "w", encoding="utf-8") as fh:
        for index, record in enumerate(corpus):
            example = mask_function(model, record, rate, derive_seed(seed, index))
            fh.write(
                json.dumps(
                    {
                        "input_ids": example.input_ids,
                        "labels": example.labels,
                        "mask_positions": example.mask_positions,
                    },
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            written += 1
    return written


def emit_signature_dataset(corpus: Corpus, path) -> tuple[int, int]:
    """JSONL of {input_text, target_text}; signatureless records are skipped
    and counted in a summary line on standard error."""
    written = 0
    skipped = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus:
            if record.signature is None:
                skipped += 1
                continue
            fh.write(
                json.dumps(
                    {
                        "input_text": record.disassembly,
                        "target_text": render_signature(record.signature),
                    },
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
            fh.write("\n")
            written += 1
    print(
        f"signature dataset: wrote {written} example(s), skipped {skipped} without signatures",
        file=sys.stderr,
    )
    return written, skipped
