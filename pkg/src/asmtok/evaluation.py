"""Intrinsic tokenizer metrics: fertility, vocabulary overlap, OOV rate.

Fertility divides total emitted tokens by total instructions. Overlap
compares vocabularies in raw byte-string form so byte-level and word-level
models are comparable; special tokens are excluded everywhere (they are
shared by construction). Reports serialize to JSON, CSV, or an SVG heatmap
with deterministic bytes.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .corpus import Corpus, record_text
from .errors import EmptyCorpusError, TooFewModelsError
from .tokcore import PRETOK_BYTE_LEVEL, TokenizerModel, encode, unmap_to_text


@dataclass
class FertilityReport:
    algorithm: str
    vocab_size: int
    variant: str
    total_tokens: int
    total_instructions: int
    fertility: float


@dataclass
class OverlapReport:
    tokenizer_ids: list[str]
    intersection_size: int
    union_size: int
    jaccard_percent: float
    pairwise: list[list[float]] = field(default_factory=list)


@dataclass
class OovReport:
    algorithm: str
    vocab_size: int
    variant: str
    unk_token_count: int
    total_token_count: int
    oov_rate: float
    empty_corpus: bool = False


def fertility(
    model: TokenizerModel,
    corpus: Corpus,
    *,
    vocab_size: int | None = None,
    count_special_tokens: bool = False,
) -> FertilityReport:
    """Tokens per instruction over the corpus; higher means worse compression."""
    if len(corpus) == 0:
        raise EmptyCorpusError("fertility needs a non-empty corpus")
    special = model.special_ids
    total_tokens = 0
    total_instructions = 0
    for record in corpus:
        ids = encode(model, record_text(record))
        if count_special_tokens:
            total_tokens += len(ids)
        else:
            total_tokens += sum(1 for i in ids if i not in special)
        total_instructions += len(record.instructions)
    return FertilityReport(
        algorithm=model.algorithm,
        vocab_size=vocab_size if vocab_size is not None else len(model.vocabulary),
        variant=corpus.variant,
        total_tokens=total_tokens,
        total_instructions=total_instructions,
        fertility=total_tokens / total_instructions,
    )


def canonical_vocab(model: TokenizerModel) -> set[str]:
    """Content tokens in raw (unmapped) form, comparable across model kinds."""
    tokens = model.content_tokens()
    if model.pretokenizer.kind == PRETOK_BYTE_LEVEL:
        return {unmap_to_text(t) for t in tokens}
    return set(tokens)


def _jaccard_percent(a: set, b_inter: set, union: set) -> float:
    return 100.0 * len(b_inter) / len(union) if union else 0.0


def vocab_overlap(models: list[TokenizerModel], ids: list[str] | None = None) -> OverlapReport:
    """Shared vocabulary across all models plus the pairwise percent matrix."""
    if len(models) < 2:
        raise TooFewModelsError(f"overlap needs at least 2 models, got {len(models)}")
    if ids is None:
        ids = [f"{m.algorithm}-{len(m.vocabulary)}" for m in models]
    if len(ids) != len(models):
        raise ValueError("ids must match models one to one")
    vocabs = [canonical_vocab(m) for m in models]
    intersection = set.intersection(*vocabs)
    union = set.union(*vocabs)
    pairwise = []
    for va in vocabs:
        row = []
        for vb in vocabs:
            inter = va & vb
            uni = va | vb
            row.append(round(_jaccard_percent(va, inter, uni), 6))
        pairwise.append(row)
    return OverlapReport(
        tokenizer_ids=list(ids),
        intersection_size=len(intersection),
        union_size=len(union),
        jaccard_percent=_jaccard_percent(vocabs[0], intersection, union),
        pairwise=pairwise,
    )


def oov_rate(model: TokenizerModel, corpus: Corpus, *, vocab_size: int | None = None) -> OovReport:
    """Fraction of emitted tokens that are the unknown token."""
    unk = model.unk_id
    unk_count = 0
    total = 0
    for record in corpus:
        ids = encode(model, record_text(record))
        total += len(ids)
        unk_count += sum(1 for i in ids if i == unk)
    empty = total == 0
    return OovReport(
        algorithm=model.algorithm,
        vocab_size=vocab_size if vocab_size is not None else len(model.vocabulary),
        variant=corpus.variant,
        unk_token_count=unk_count,
        total_token_count=total,
        oov_rate=0.0 if empty else unk_count / total,
        empty_corpus=empty,
    )


# --- emission ------------------------------------------------------------------

FORMAT_JSON = "json"
FORMAT_CSV = "csv"
FORMAT_SVG = "svg-heatmap"
FORMATS = (FORMAT_JSON, FORMAT_CSV, FORMAT_SVG)


def _fnum(value: float) -> str:
    return format(value, ".6g")


def _fertility_csv(reports) -> str:
    lines = ["algorithm,vocab_size,variant,fertility"]
    for r in reports:
        lines.append(f"{r.algorithm},{r.vocab_size},{r.variant},{_fnum(r.fertility)}")
    return "\n".join(lines) + "\n"


def _oov_csv(reports) -> str:
    lines = ["algorithm,vocab_size,variant,unk_token_count,total_token_count,oov_rate,empty_corpus"]
    for r in reports:
        lines.append(
            f"{r.algorithm},{r.vocab_size},{r.variant},{r.unk_token_count},"
            f"{r.total_token_count},{_fnum(r.oov_rate)},{str(r.empty_corpus).lower()}"
        )
    return "\n".join(lines) + "\n"


def _overlap_csv(report: OverlapReport) -> str:
    lines = ["," + ",".join(report.tokenizer_ids)]
    for tid, row in zip(report.tokenizer_ids, report.pairwise):
        lines.append(tid + "," + ",".join(_fnum(v) for v in row))
    return "\n".join(lines) + "\n"


def _overlap_svg(report: OverlapReport) -> str:
    ids = report.tokenizer_ids
    n = len(ids)
    cell = 56
    left = 150
    top = 120
    width = left + n * cell + 10
    height = top + n * cell + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        '<style>text{font-family:monospace;font-size:10px;}</style>',
    ]
    for j, tid in enumerate(ids):
        x = left + j * cell + cell // 2
        parts.append(f'<text x="{x}" y="{top - 8}" text-anchor="middle">{tid}</text>')
    for i, tid in enumerate(ids):
        y = top + i * cell + cell // 2 + 4
        parts.append(f'<text x="{left - 8}" y="{y}" text-anchor="end">{tid}</text>')
    for i in range(n):
        for j in range(n):
            val = report.pairwise[i][j]
            shade = 255 - int(round(2.55 * val))
            x = left + j * cell
            y = top + i * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="rgb({shade},{shade},255)" stroke="black"/>'
            )
            parts.append(
                f'<text x="{x + cell // 2}" y="{y + cell // 2 + 4}" '
                f'text-anchor="middle">{_fnum(val)}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def report_to_text(report, fmt: str) -> str:
    reports = report if isinstance(report, list) else [report]
    if not reports:
        raise ValueError("nothing to emit")
    kind = type(reports[0])
    if any(type(r) is not kind for r in reports):
        raise ValueError("cannot mix report types in one emission")
    if fmt == FORMAT_JSON:
        payload = [asdict(r) for r in reports]
        obj = payload[0] if not isinstance(report, list) and len(payload) == 1 else payload
        return json.dumps(obj, indent=1, ensure_ascii=True) + "\n"
    if fmt == FORMAT_CSV:
        if kind is FertilityReport:
            return _fertility_csv(reports)
        if kind is OovReport:
            return _oov_csv(reports)
        if kind is OverlapReport:
            if len(reports) != 1:
                raise ValueError("overlap CSV emits one report at a time")
            return _overlap_csv(reports[0])
        raise ValueError(f"no CSV emitter for {kind.__name__}")
    if fmt == FORMAT_SVG:
        if kind is OverlapReport and len(reports) == 1:
            return _overlap_svg(reports[0])
        raise ValueError("svg-heatmap is only available for a single overlap report")
    raise ValueError(f"unknown format {fmt!r} (expected {', '.join(FORMATS)})")


def emit_report(report, fmt: str, path) -> None:
    """Write a report deterministically: same report, same bytes."""
    text = report_to_text(report, fmt)
    Path(path).write_text(text, encoding="utf-8")
