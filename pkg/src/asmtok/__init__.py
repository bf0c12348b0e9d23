"""Tokenization toolkit for disassembled binary code.

Trains and applies BPE, WordPiece and Unigram subword tokenizers over
disassembly corpora, provides the address-to-identifier preprocessing
variant, computes intrinsic metrics (fertility, vocabulary overlap, OOV),
and emits masked-token and function-signature datasets.
"""

from .corpus import (
    Corpus,
    FunctionRecord,
    SignatureSpec,
    dedup,
    filter_by_length,
    load_corpus,
    parse_function,
    record_text,
    save_corpus,
    split,
)
from .evaluation import (
    FertilityReport,
    OovReport,
    OverlapReport,
    emit_report,
    fertility,
    oov_rate,
    vocab_overlap,
)
from .bpe import segment_bpe, train_bpe
from .masking import MaskedExample, emit_mlm_dataset, emit_signature_dataset, mask_function
from .preprocess import PreprocessConfig, classify_hex_literal, hex_to_decimal, normalize_function
from .tokcore import (
    NormalizerConfig,
    PreTokenizerConfig,
    SpecialTokenSet,
    TokenizerModel,
    Vocabulary,
    decode,
    encode,
    load_model,
    normalize,
    pretokenize,
    save_model,
)
from .unigram import segment_unigram, train_unigram
from .wordpiece import segment_wordpiece, train_wordpiece

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "FunctionRecord",
    "SignatureSpec",
    "dedup",
    "filter_by_length",
    "load_corpus",
    "parse_function",
    "record_text",
    "save_corpus",
    "split",
    "FertilityReport",
    "OovReport",
    "OverlapReport",
    "emit_report",
    "fertility",
    "oov_rate",
    "vocab_overlap",
    "MaskedExample",
    "emit_mlm_dataset",
    "emit_signature_dataset",
    "mask_function",
    "PreprocessConfig",
    "classify_hex_literal",
    "hex_to_decimal",
    "normalize_function",
    "NormalizerConfig",
    "PreTokenizerConfig",
    "SpecialTokenSet",
    "TokenizerModel",
    "Vocabulary",
    "decode",
    "encode",
    "load_model",
    "normalize",
    "pretokenize",
    "save_model",
    "segment_bpe",
    "segment_unigram",
    "segment_wordpiece",
    "train_bpe",
    "train_unigram",
    "train_wordpiece",
    "__version__",
]
