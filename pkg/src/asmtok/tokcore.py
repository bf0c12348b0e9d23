"""Shared tokenizer infrastructure.

Covers text normalization, the two pre-tokenizers (lossless byte-level
mapping and BERT-style word/punctuation splitting), vocabularies with
reserved special-token slots, the TokenizerModel container, the
encode/decode driver, and the JSON model format.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidUtf8Error, SchemaError, UnknownIdError

ALGO_BPE = "bpe"
ALGO_WORDPIECE = "wordpiece"
ALGO_UNIGRAM = "unigram"
ALGORITHMS = (ALGO_BPE, ALGO_WORDPIECE, ALGO_UNIGRAM)

PRETOK_BYTE_LEVEL = "byte_level"
PRETOK_BERT_STYLE = "bert_style"

FORMAT_VERSION = 1

WORDPIECE_PREFIX = "##"


# --- byte <-> printable character bijection ----------------------------------


def _build_byte_maps():
    # Bytes that are already printable, non-space characters map to
    # themselves; the rest are shifted into U+0100.. in byte order.
    keep = set(range(0x21, 0x7F)) | set(range(0xA1, 0xAD)) | set(range(0xAE, 0x100))
    byte_to_char = []
    shifted = 0
    for b in range(256):
        if b in keep:
            byte_to_char.append(chr(b))
        else:
            byte_to_char.append(chr(256 + shifted))
            shifted += 1
    char_to_byte = {c: b for b, c in enumerate(byte_to_char)}
    return byte_to_char, char_to_byte


BYTE_TO_CHAR, CHAR_TO_BYTE = _build_byte_maps()


def map_bytes(text: str) -> str:
    """Map text, byte by UTF-8 byte, into the printable alphabet."""
    try:
        raw = text.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise InvalidUtf8Error(str(exc)) from exc
    return "".join(BYTE_TO_CHAR[b] for b in raw)


def unmap_to_bytes(mapped: str) -> bytes:
    try:
        return bytes(CHAR_TO_BYTE[c] for c in mapped)
    except KeyError as exc:
        raise SchemaError(f"character {exc} is not in the byte-level alphabet") from exc


def unmap_to_text(mapped: str) -> str:
    """Raw-string view of a byte-level token (one chr per byte)."""
    return "".join(chr(b) for b in unmap_to_bytes(mapped))


# --- configs ------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizerConfig:
    unicode_form: str = "NFD"
    lowercase: bool = True

    def __post_init__(self):
        if self.unicode_form != "NFD":
            raise SchemaError(f"unsupported unicode form {self.unicode_form!r}")


@dataclass(frozen=True)
class PreTokenizerConfig:
    kind: str = PRETOK_BYTE_LEVEL
    add_prefix_space: bool = False
    use_regex: bool = False

    def __post_init__(self):
        if self.kind not in (PRETOK_BYTE_LEVEL, PRETOK_BERT_STYLE):
            raise SchemaError(f"unknown pre-tokenizer kind {self.kind!r}")
        if self.use_regex:
            raise SchemaError("regex pre-splitting is not supported (use_regex must be false)")


@dataclass(frozen=True)
class SpecialTokenSet:
    unk: str
    bos: str
    eos: str
    pad: str
    mask: str
    cls: str | None = None
    sep: str | None = None
    nln: str | None = None

    def ordered(self) -> tuple[str, ...]:
        """Declaration order; these occupy the lowest vocabulary ids."""
        out = [self.unk, self.eos, self.bos]
        for extra in (self.cls, self.sep, self.nln):
            if extra is not None:
                out.append(extra)
        out.extend([self.pad, self.mask])
        return tuple(out)

    def __post_init__(self):
        toks = self.ordered()
        if len(set(toks)) != len(toks):
            raise SchemaError("special tokens must be distinct")
        if any(not t for t in toks):
            raise SchemaError("special tokens must be non-empty")


BPE_SPECIALS = SpecialTokenSet(unk="<unk>", bos="<s>", eos="</s>", pad="[PAD]", mask="[MASK]")
UNIGRAM_SPECIALS = SpecialTokenSet(
    unk="<unk>", bos="<s>", eos="</s>", pad="[PAD]", mask="[MASK]", cls="<cls>", sep="<sep>"
)
WORDPIECE_SPECIALS = SpecialTokenSet(
    unk="[UNK]", bos="<s>", eos="</s>", pad="[PAD]", mask="[MASK]",
    cls="<cls>", sep="<sep>", nln="<nln>",
)


def default_specials(algorithm: str) -> SpecialTokenSet:
    return {
        ALGO_BPE: BPE_SPECIALS,
        ALGO_UNIGRAM: UNIGRAM_SPECIALS,
        ALGO_WORDPIECE: WORDPIECE_SPECIALS,
    }[algorithm]


def default_pretokenizer(algorithm: str) -> PreTokenizerConfig:
    kind = PRETOK_BERT_STYLE if algorithm == ALGO_WORDPIECE else PRETOK_BYTE_LEVEL
    return PreTokenizerConfig(kind=kind)


# --- vocabulary ---------------------------------------------------------------


class Vocabulary:
    """Bijective token <-> id map with ids dense in 0..size-1."""

    def __init__(self, tokens):
        self._id_to_token = list(tokens)
        self._token_to_id = {}
        for i, tok in enumerate(self._id_to_token):
            if not isinstance(tok, str) or not tok:
                raise SchemaError(f"bad vocabulary token at id {i}: {tok!r}")
            if tok in self._token_to_id:
                raise SchemaError(f"duplicate vocabulary token {tok!r}")
            self._token_to_id[tok] = i

    def __len__(self):
        return len(self._id_to_token)

    def __contains__(self, token):
        return token in self._token_to_id

    def id_of(self, token: str) -> int:
        try:
            return self._token_to_id[token]
        except KeyError:
            raise UnknownIdError(f"token {token!r} not in vocabulary") from None

    def token_of(self, token_id: int) -> str:
        if 0 <= token_id < len(self._id_to_token):
            return self._id_to_token[token_id]
        raise UnknownIdError(f"id {token_id} outside vocabulary of size {len(self)}")

    @property
    def tokens(self) -> list[str]:
        return list(self._id_to_token)

    def get(self, token: str, default=None):
        return self._token_to_id.get(token, default)


# --- model --------------------------------------------------------------------


@dataclass(eq=False)
class TokenizerModel:
    """Trained tokenizer artifact. Immutable after training/loading."""

    algorithm: str
    vocabulary: Vocabulary
    specials: SpecialTokenSet
    normalizer: NormalizerConfig = field(default_factory=NormalizerConfig)
    pretokenizer: PreTokenizerConfig = field(default_factory=PreTokenizerConfig)
    bpe_merges: list[tuple[str, str]] | None = None
    unigram_logprobs: dict[str, float] | None = None
    wordpiece_prefix: str | None = None

    def __post_init__(self):
        validate_model(self)

    @property
    def special_ids(self) -> frozenset[int]:
        cached = self.__dict__.get("_special_ids")
        if cached is None:
            cached = frozenset(self.vocabulary.id_of(t) for t in self.specials.ordered())
            self.__dict__["_special_ids"] = cached
        return cached

    @property
    def unk_id(self) -> int:
        return self.vocabulary.id_of(self.specials.unk)

    @property
    def mask_id(self) -> int:
        return self.vocabulary.id_of(self.specials.mask)

    def content_tokens(self) -> list[str]:
        """Vocabulary tokens minus special tokens, in id order."""
        special = set(self.specials.ordered())
        return [t for t in self.vocabulary.tokens if t not in special]


UNIGRAM_SUM_TOLERANCE = 1e-6


def validate_model(model: TokenizerModel) -> None:
    if model.algorithm not in ALGORITHMS:
        raise SchemaError(f"unknown algorithm {model.algorithm!r}")
    for tok in model.specials.ordered():
        if tok not in model.vocabulary:
            raise SchemaError(f"special token {tok!r} missing from vocabulary")
    state = {
        ALGO_BPE: model.bpe_merges is not None,
        ALGO_WORDPIECE: model.wordpiece_prefix is not None,
        ALGO_UNIGRAM: model.unigram_logprobs is not None,
    }
    for algo, present in state.items():
        if (algo == model.algorithm) != present:
            raise SchemaError(
                f"{model.algorithm} model must carry exactly its own state block "
                f"(offending: {algo})"
            )
    if model.algorithm == ALGO_BPE:
        for a, b in model.bpe_merges:
            if a not in model.vocabulary or b not in model.vocabulary:
                raise SchemaError(f"merge ({a!r}, {b!r}) references a token outside the vocabulary")
            if a + b not in model.vocabulary:
                raise SchemaError(f"merged token {(a + b)!r} missing from vocabulary")
    elif model.algorithm == ALGO_UNIGRAM:
        special = set(model.specials.ordered())
        for tok in model.unigram_logprobs:
            if tok not in model.vocabulary:
                raise SchemaError(f"log-prob token {tok!r} missing from vocabulary")
            if tok in special:
                raise SchemaError(f"special token {tok!r} must not carry a log-prob")
        for tok in model.vocabulary.tokens:
            if tok not in special and tok not in model.unigram_logprobs:
                raise SchemaError(f"vocabulary token {tok!r} missing a log-prob")
        total = float(np.sum(np.exp(np.fromiter(model.unigram_logprobs.values(), float))))
        if abs(total - 1.0) > UNIGRAM_SUM_TOLERANCE:
            raise SchemaError(f"unigram probabilities sum to {total}, expected 1")
    elif model.algorithm == ALGO_WORDPIECE:
        if not model.wordpiece_prefix:
            raise SchemaError("wordpiece prefix must be non-empty")


# --- normalization and pre-tokenization ---------------------------------------


def normalize(text: str, config: NormalizerConfig | None = None) -> str:
    """Unicode NFD decomposition, then lowercasing when configured."""
    config = config or NormalizerConfig()
    out = unicodedata.normalize("NFD", text)
    if config.lowercase:
        out = out.lower()
    return out


def _is_punctuation(ch: str) -> bool:
    cp = ord(ch)
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def pretokenize(text: str, config: PreTokenizerConfig | None = None) -> list[str]:
    """Cut normalized text into pieces for the subword model.

    byte_level performs no splitting at all: the entire text becomes one
    byte-mapped piece, so learned tokens may span spaces and line breaks.
    bert_style splits on whitespace and isolates each punctuation character.
    """
    config = config or PreTokenizerConfig()
    if config.kind == PRETOK_BYTE_LEVEL:
        if config.add_prefix_space and text and not text.startswith(" "):
            text = " " + text
        return [map_bytes(text)] if text else []
    pieces = []
    buf = []
    for ch in text:
        if ch.isspace():
            if buf:
                pieces.append("".join(buf))
                buf = []
        elif _is_punctuation(ch):
            if buf:
                pieces.append("".join(buf))
                buf = []
            pieces.append(ch)
        else:
            buf.append(ch)
    if buf:
        pieces.append("".join(buf))
    return pieces


# --- encode / decode ----------------------------------------------------------


def encode(model: TokenizerModel, text: str) -> list[int]:
    """normalize -> pretokenize -> per-piece segmentation -> ids."""
    norm = normalize(text, model.normalizer)
    pieces = pretokenize(norm, model.pretokenizer)
    ids: list[int] = []
    if model.algorithm == ALGO_BPE:
        from .bpe import segment_ids as seg
    elif model.algorithm == ALGO_UNIGRAM:
        from .unigram import segment_ids as seg
    else:
        from .wordpiece import segment_ids as seg
    for piece in pieces:
        ids.extend(seg(model, piece))
    return ids


def decode(model: TokenizerModel, ids) -> str:
    """Inverse of encode up to normalization for byte-level models.

    WordPiece decoding strips the continuation prefix and restores single
    spaces between words, which is lossy by construction.
    """
    tokens = [model.vocabulary.token_of(i) for i in ids]
    if model.pretokenizer.kind == PRETOK_BYTE_LEVEL:
        raw = unmap_to_bytes("".join(tokens))
        return raw.decode("utf-8", errors="replace")
    prefix = model.wordpiece_prefix or WORDPIECE_PREFIX
    parts = []
    for tok in tokens:
        if tok.startswith(prefix) and parts:
            parts.append(tok[len(prefix):])
        else:
            if parts:
                parts.append(" ")
            parts.append(tok)
    return "".join(parts)


# --- serialization ------------------------------------------------------------


def _specials_to_json(specials: SpecialTokenSet) -> dict:
    out = {"unk": specials.unk, "eos": specials.eos, "bos": specials.bos}
    for key in ("cls", "sep", "nln"):
        value = getattr(specials, key)
        if value is not None:
            out[key] = value
    out["pad"] = specials.pad
    out["mask"] = specials.mask
    return out


def model_to_json(model: TokenizerModel) -> str:
    obj = {
        "format_version": FORMAT_VERSION,
        "algorithm": model.algorithm,
        "normalizer": {
            "unicode_form": model.normalizer.unicode_form,
            "lowercase": model.normalizer.lowercase,
        },
        "pretokenizer": {
            "kind": model.pretokenizer.kind,
            "add_prefix_space": model.pretokenizer.add_prefix_space,
            "use_regex": model.pretokenizer.use_regex,
        },
        "special_tokens": _specials_to_json(model.specials),
        "vocab": [[tok, i] for i, tok in enumerate(model.vocabulary.tokens)],
    }
    if model.bpe_merges is not None:
        obj["merges"] = [[a, b] for a, b in model.bpe_merges]
    if model.unigram_logprobs is not None:
        obj["logprobs"] = [[tok, lp] for tok, lp in model.unigram_logprobs.items()]
    if model.wordpiece_prefix is not None:
        obj["wordpiece_prefix"] = model.wordpiece_prefix
    return json.dumps(obj, ensure_ascii=True, indent=1)


def save_model(model: TokenizerModel, path) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def _require(obj, key, kind, where):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(f"{where}: field {key!r} has wrong type")
    return value


def model_from_json(text: str) -> TokenizerModel:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"model file is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("model file must hold a JSON object")
    version = _require(obj, "format_version", int, "model")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version}")
    algorithm = _require(obj, "algorithm", str, "model")
    if algorithm not in ALGORITHMS:
        raise SchemaError(f"unknown algorithm {algorithm!r}")
    norm_obj = _require(obj, "normalizer", dict, "model")
    normalizer = NormalizerConfig(
        unicode_form=_require(norm_obj, "unicode_form", str, "normalizer"),
        lowercase=bool(_require(norm_obj, "lowercase", bool, "normalizer")),
    )
    pre_obj = _require(obj, "pretokenizer", dict, "model")
    pretokenizer = PreTokenizerConfig(
        kind=_require(pre_obj, "kind", str, "pretokenizer"),
        add_prefix_space=bool(pre_obj.get("add_prefix_space", False)),
        use_regex=bool(pre_obj.get("use_regex", False)),
    )
    sp = _require(obj, "special_tokens", dict, "model")
    specials = SpecialTokenSet(
        unk=_require(sp, "unk", str, "special_tokens"),
        bos=_require(sp, "bos", str, "special_tokens"),
        eos=_require(sp, "eos", str, "special_tokens"),
        pad=_require(sp, "pad", str, "special_tokens"),
        mask=_require(sp, "mask", str, "special_tokens"),
        cls=sp.get("cls"),
        sep=sp.get("sep"),
        nln=sp.get("nln"),
    )
    vocab_entries = _require(obj, "vocab", list, "model")
    slots: dict[int, str] = {}
    for entry in vocab_entries:
        if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str)):
            raise SchemaError(f"bad vocab entry {entry!r}")
        tok, tid = entry
        if not isinstance(tid, int) or tid in slots:
            raise SchemaError(f"bad or duplicate vocab id in entry {entry!r}")
        slots[tid] = tok
    if sorted(slots) != list(range(len(slots))):
        raise SchemaError("vocabulary ids are not dense in 0..size-1")
    vocabulary = Vocabulary([slots[i] for i in range(len(slots))])

    merges = None
    if "merges" in obj:
        merges = []
        for entry in obj["merges"]:
            if not (isinstance(entry, list) and len(entry) == 2):
                raise SchemaError(f"bad merge entry {entry!r}")
            merges.append((entry[0], entry[1]))
    logprobs = None
    if "logprobs" in obj:
        logprobs = {}
        for entry in obj["logprobs"]:
            if not (isinstance(entry, list) and len(entry) == 2 and isinstance(entry[0], str)):
                raise SchemaError(f"bad logprob entry {entry!r}")
            logprobs[entry[0]] = float(entry[1])
    return TokenizerModel(
        algorithm=algorithm,
        vocabulary=vocabulary,
        specials=specials,
        normalizer=normalizer,
        pretokenizer=pretokenizer,
        bpe_merges=merges,
        unigram_logprobs=logprobs,
        wordpiece_prefix=obj.get("wordpiece_prefix"),
    )


def load_model(path) -> TokenizerModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidUtf8Error(f"{path}: {exc}") from exc
    return model_from_json(text)
