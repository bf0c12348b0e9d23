"""Corpora of disassembled functions: parsing, filtering, dedup, splitting, JSONL io.

One record is one disassembled function. The wire format is line-delimited
JSON (see FORMATS.md): {"name": ..., "signature": null | {"return_type":
..., "param_types": [...]}, "disassembly": "ins1\nins2...", "variant":
"default" | "preprocessed"}.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator

from .errors import (
    CorpusFormatError,
    CorpusTooSmallError,
    EmptyFunctionError,
    InvalidRecordError,
)
from .rng import permutation

VARIANT_DEFAULT = "default"
VARIANT_PREPROCESSED = "preprocessed"
VARIANTS = (VARIANT_DEFAULT, VARIANT_PREPROCESSED)


@dataclass(frozen=True)
class SignatureSpec:
    return_type: str
    param_types: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.return_type:
            raise InvalidRecordError("signature return_type must be non-empty")
        object.__setattr__(self, "param_types", tuple(self.param_types))


@dataclass(frozen=True)
class FunctionRecord:
    name: str
    instructions: tuple[str, ...]
    signature: SignatureSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        if not self.name:
            raise InvalidRecordError("record name must be non-empty")
        if not self.instructions:
            raise EmptyFunctionError(f"function {self.name!r} has no instructions")
        for ins in self.instructions:
            if not ins:
                raise InvalidRecordError(f"{self.name!r}: empty instruction line")
            if "\n" in ins or "\r" in ins:
                raise InvalidRecordError(f"{self.name!r}: instruction contains a line break")

    @property
    def disassembly(self) -> str:
        return "\n".join(self.instructions)


@dataclass(frozen=True)
class Corpus:
    records: tuple[FunctionRecord, ...]
    variant: str = VARIANT_DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if self.variant not in VARIANTS:
            raise InvalidRecordError(f"unknown corpus variant {self.variant!r}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[FunctionRecord]:
        return iter(self.records)


def record_text(record: FunctionRecord) -> str:
    """Text form handed to tokenizers: lines joined and terminated by a newline."""
    return record.disassembly + "\n"


def parse_function(raw_text: str, name: str, signature: SignatureSpec | None = None) -> FunctionRecord:
    """Split raw disassembly text at line breaks into a FunctionRecord.

    Empty lines are dropped; each kept line loses trailing whitespace only,
    so internal spacing survives byte-for-byte.
    """
    lines = []
    for line in raw_text.split("\n"):
        line = line.rstrip()
        if line:
            lines.append(line)
    if not lines:
        raise EmptyFunctionError(f"function {name!r} has no instruction lines")
    return FunctionRecord(name=name, instructions=tuple(lines), signature=signature)


def filter_by_length(corpus: Corpus, min_instr: int = 30, max_instr: int = 100) -> Corpus:
    """Keep records with min_instr <= |instructions| <= max_instr, order preserved."""
    if not (1 <= min_instr <= max_instr):
        raise ValueError(f"bad bounds: ({min_instr}, {max_instr})")
    kept = tuple(r for r in corpus if min_instr <= len(r.instructions) <= max_instr)
    return Corpus(records=kept, variant=corpus.variant)


_SPACE_RUN = re.compile(r" +")


def dedup_key(record: FunctionRecord) -> str:
    """Hash of the instruction list after space-run collapse and lowercasing."""
    norm = "\n".join(_SPACE_RUN.sub(" ", ins).lower() for ins in record.instructions)
    return hashlib.sha256(norm.encode("utf-8")).hexdigest()


def dedup(corpus: Corpus) -> Corpus:
    """Drop records whose normalized content already occurred; first wins."""
    seen: set[str] = set()
    kept = []
    for record in corpus:
        key = dedup_key(record)
        if key not in seen:
            seen.add(key)
            kept.append(record)
    return Corpus(records=tuple(kept), variant=corpus.variant)


def _as_fraction(value) -> Fraction:
    # str() of a float recovers the decimal the caller wrote (0.8 -> 4/5),
    # keeping floor arithmetic exact.
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def split(corpus: Corpus, train_fraction=Fraction(4, 5), seed: int = 0) -> tuple[Corpus, Corpus]:
    """Deterministic disjoint split: |train| = floor(train_fraction * n).

    Record indices are shuffled with the SplitMix64 Fisher-Yates permutation
    (FORMATS.md) and the permuted prefix becomes the training set.
    """
    frac = _as_fraction(train_fraction)
    if not (0 < frac < 1):
        raise ValueError(f"train_fraction must be in (0,1), got {frac}")
    n = len(corpus)
    if n < 2:
        raise CorpusTooSmallError(f"cannot split a corpus of {n} record(s)")
    n_train = (frac.numerator * n) // frac.denominator
    perm = permutation(n, seed)
    train = tuple(corpus.records[i] for i in perm[:n_train])
    test = tuple(corpus.records[i] for i in perm[n_train:])
    return (
        Corpus(records=train, variant=corpus.variant),
        Corpus(records=test, variant=corpus.variant),
    )


# --- JSONL io ---------------------------------------------------------------


def record_to_json(record: FunctionRecord, variant: str) -> str:
    sig = None
    if record.signature is not None:
        sig = {
            "return_type": record.signature.return_type,
            "param_types": list(record.signature.param_types),
        }
    obj = {
        "name": record.name,
        "signature": sig,
        "disassembly": record.disassembly,
        "variant": variant,
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def record_from_json(line: str, line_number: int | None = None) -> tuple[FunctionRecord, str]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"line {line_number}: invalid JSON: {exc}", line_number) from exc
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"line {line_number}: expected an object", line_number)
    try:
        name = obj["name"]
        disassembly = obj["disassembly"]
    except KeyError as exc:
        raise CorpusFormatError(f"line {line_number}: missing field {exc}", line_number) from exc
    sig_obj = obj.get("signature")
    signature = None
    if sig_obj is not None:
        try:
            signature = SignatureSpec(
                return_type=sig_obj["return_type"],
                param_types=tuple(sig_obj.get("param_types", ())),
            )
        except (KeyError, TypeError, InvalidRecordError) as exc:
            raise CorpusFormatError(f"line {line_number}: bad signature: {exc}", line_number) from exc
    variant = obj.get("variant", VARIANT_DEFAULT)
    if variant not in VARIANTS:
        raise CorpusFormatError(f"line {line_number}: unknown variant {variant!r}", line_number)
    try:
        record = parse_function(disassembly, name, signature)
    except (EmptyFunctionError, InvalidRecordError) as exc:
        raise CorpusFormatError(f"line {line_number}: {exc}", line_number) from exc
    return record, variant


def load_corpus(path) -> Corpus:
    records = []
    variant = None
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusFormatError(f"{path}: not valid UTF-8: {exc}") from exc
    for i, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        record, line_variant = record_from_json(line, i)
        if variant is None:
            variant = line_variant
        elif line_variant != variant:
            raise CorpusFormatError(
                f"line {i}: mixed variants ({line_variant!r} after {variant!r})", i
            )
        records.append(record)
    return Corpus(records=tuple(records), variant=variant or VARIANT_DEFAULT)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in corpus:
            fh.write(record_to_json(record, corpus.variant))
            fh.write("\n")


# --- signature rendering ----------------------------------------------------


def render_signature(sig: SignatureSpec) -> str:
    """Canonical text form: return_type(param1, param2, ...)."""
    return f"{sig.return_type}({', '.join(sig.param_types)})"


def parse_signature(text: str) -> SignatureSpec:
    """Inverse of render_signature for signatures it produced.

    Parameters are split at depth-0 commas so types like "void(*)(int)"
    survive as single parameters; the return type must not itself contain
    parentheses.
    """
    open_idx = text.find("(")
    if open_idx <= 0 or not text.endswith(")"):
        raise InvalidRecordError(f"unparseable signature {text!r}")
    ret = text[:open_idx]
    inner = text[open_idx + 1 : -1]
    params = []
    depth = 0
    buf = []
    for ch in inner:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            params.append("".join(buf).strip())
            buf = []
        else:
            buf.append(ch)
    if buf or params:
        params.append("".join(buf).strip())
    return SignatureSpec(return_type=ret, param_types=tuple(params))
