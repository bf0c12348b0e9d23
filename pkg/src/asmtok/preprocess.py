"""Disassembly preprocessing: addresses to sequential identifiers, hex to decimal.

Address classification has no universal rule in x86 text, so the one used
here is: a 0x-literal is an address when it is the operand of a control
flow mnemonic (jmp, call, j*), or when it sits inside a memory-reference
bracket and its value clears address_threshold. Everything else is a plain
number and is rewritten in decimal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .corpus import Corpus, FunctionRecord, VARIANT_PREPROCESSED
from .errors import MalformedHexError

CONTEXT_CONTROL_FLOW = "control_flow_target"
CONTEXT_MEMORY = "memory_reference"
CONTEXT_IMMEDIATE = "immediate"

ADDRESS = "address"
NUMERIC = "numeric"

HEX_LITERAL = re.compile(r"0x[0-9a-fA-F]+")

_MAX_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class PreprocessConfig:
    id_prefix: str = "addr"
    id_base: int = 0
    address_threshold: int = 0x1000

    def __post_init__(self):
        if not self.id_prefix or any(c.isdigit() for c in self.id_prefix):
            raise ValueError("id_prefix must be non-empty and contain no digits")
        if self.id_base not in (0, 1):
            raise ValueError("id_base must be 0 or 1")


class AddressMap:
    """First-occurrence-ordered map from address literal to dense index.

    Scope is a single function: equal literals share one index, distinct
    literals get 0, 1, 2, ... in the order they first appear.
    """

    def __init__(self):
        self._indices: dict[str, int] = {}

    def index_of(self, literal: str) -> int:
        if literal not in self._indices:
            self._indices[literal] = len(self._indices)
        return self._indices[literal]

    def __len__(self) -> int:
        return len(self._indices)

    def items(self):
        return self._indices.items()


def hex_to_decimal(literal: str) -> str:
    """Render a 0x-literal in decimal; values must fit unsigned 64 bits."""
    if not HEX_LITERAL.fullmatch(literal):
        raise MalformedHexError(f"not a hex literal: {literal!r}")
    value = int(literal, 16)
    if value > _MAX_U64:
        raise OverflowError(f"{literal} exceeds 64 bits")
    return str(value)


def classify_hex_literal(
    mnemonic: str,
    operand_context: str,
    literal: str,
    *,
    address_threshold: int = 0x1000,
) -> str:
    """Decide whether a hex literal denotes an address or a plain number."""
    if operand_context == CONTEXT_CONTROL_FLOW:
        return ADDRESS
    if operand_context == CONTEXT_MEMORY and int(literal, 16) >= address_threshold:
        return ADDRESS
    return NUMERIC


def _mnemonic_of(instruction: str) -> str:
    parts = instruction.split(None, 1)
    return parts[0] if parts else ""


def _is_control_flow(mnemonic: str) -> bool:
    m = mnemonic.lower()
    return m == "call" or m.startswith("j")


def _literal_context(instruction: str, start: int, control_flow: bool) -> str:
    depth = 0
    for ch in instruction[:start]:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
    if depth > 0:
        return CONTEXT_MEMORY
    if control_flow:
        return CONTEXT_CONTROL_FLOW
    return CONTEXT_IMMEDIATE


def normalize_function(record: FunctionRecord, config: PreprocessConfig | None = None) -> FunctionRecord:
    """Rewrite one record: address literals -> prefixN, other hex -> decimal.

    All non-literal text is preserved byte-for-byte and the instruction
    count never changes. The identifier map is fresh per function.
    """
    config = config or PreprocessConfig()
    addresses = AddressMap()
    out_lines = []
    for instruction in record.instructions:
        mnemonic = _mnemonic_of(instruction)
        control_flow = _is_control_flow(mnemonic)
        rebuilt = []
        cursor = 0
        for match in HEX_LITERAL.finditer(instruction):
            literal = match.group(0)
            context = _literal_context(instruction, match.start(), control_flow)
            kind = classify_hex_literal(
                mnemonic, context, literal, address_threshold=config.address_threshold
            )
            if kind == ADDRESS:
                replacement = f"{config.id_prefix}{addresses.index_of(literal) + config.id_base}"
            else:
                try:
                    replacement = hex_to_decimal(literal)
                except OverflowError as exc:
                    raise MalformedHexError(
                        f"{record.name!r}: cannot convert {literal}: {exc}"
                    ) from exc
            rebuilt.append(instruction[cursor : match.start()])
            rebuilt.append(replacement)
            cursor = match.end()
        rebuilt.append(instruction[cursor:])
        out_lines.append("".join(rebuilt))
    return FunctionRecord(
        name=record.name, instructions=tuple(out_lines), signature=record.signature
    )


def preprocess_corpus(corpus: Corpus, config: PreprocessConfig | None = None) -> Corpus:
    config = config or PreprocessConfig()
    records = tuple(normalize_function(r, config) for r in corpus)
    return Corpus(records=records, variant=VARIANT_PREPROCESSED)
