#!/usr/bin/env python3
"""Generate the bundled fixture corpus of disassembled functions.

Produces data/fixture_default.jsonl: 520+ functions of Ghidra-flavoured
x86-64 disassembly, 30-100 instructions each, mixing synthetic bodies with
hand-written real-world snippets (string copy loop, dispatch ladders,
accumulator loops). Deterministic for a fixed seed.

Usage: python scripts/make_fixture.py [--out data/fixture_default.jsonl]
        [--count 520] [--seed 13]
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from pathlib import Path

REG64 = ["RAX", "RBX", "RCX", "RDX", "RSI", "RDI", "RBP", "R8", "R9", "R10", "R11", "R12", "R13", "R14", "R15"]
REG32 = ["EAX", "EBX", "ECX", "EDX", "ESI", "EDI", "R8D", "R9D", "R10D", "R11D", "R12D", "R13D", "R14D", "R15D"]
REG16 = ["AX", "BX", "CX", "DX", "SI", "DI", "R8W", "R9W"]
REG8 = ["AL", "BL", "CL", "DL", "SIL", "DIL", "R8B", "R9B"]

ALU = ["ADD", "SUB", "AND", "OR", "XOR", "CMP", "TEST"]
JCC = ["JZ", "JNZ", "JLE", "JGE", "JG", "JL", "JA", "JB", "JAE", "JBE", "JNC", "JC", "JS", "JNS"]
PTR = ["byte ptr", "word ptr", "dword ptr", "qword ptr"]

RETURN_TYPES = ["int", "void", "long", "char *", "unsigned int", "size_t", "double", "short"]
PARAM_TYPES = ["int", "char *", "void *", "long", "unsigned int", "size_t", "double", "unsigned char"]

# real-world flavoured fragments (glibc-style idioms); addresses get
# rewritten per function so every embedding stays unique
STRCPY_LOOP = [
    "MOVZX ECX,byte ptr [RSI]",
    "ADD RSI,0x1",
    "MOV byte ptr [RDI],CL",
    "ADD RDI,0x1",
    "TEST CL,CL",
    "JNZ {local0}",
]
COUNT_LOOP = [
    "XOR EAX,EAX",
    "CMP byte ptr [RDI],0x0",
    "JZ {local1}",
    "ADD RAX,0x1",
    "ADD RDI,0x1",
    "JMP {local0}",
]
TABLE_SNIPPET = [
    "MOVZX R9D,word ptr [{glob0}]",
    "MOVZX R8D,word ptr [{glob1}]",
    "LEA RDI,[RBX + RAX*1 + 0x1]",
]
PAPER_SNIPPET = [
    "ENDBR64",
    "CMP EDI,ESI",
    "JGE {local0}",
    "PUSH R13",
    "MOV R8D,EDI",
]
FRAGMENTS = [STRCPY_LOOP, COUNT_LOOP, TABLE_SNIPPET, PAPER_SNIPPET]


def _hexaddr(value: int) -> str:
    return f"0x{value:08x}"


class FunctionSynth:
    def __init__(self, rng: random.Random, base: int):
        self.rng = rng
        self.base = base
        self.locals_pool = [base + rng.randrange(0x8, 0x400, 4) for _ in range(rng.randint(2, 6))]
        self.globals_pool = [0x00302000 + rng.randrange(0, 0x2000, 8) for _ in range(rng.randint(1, 4))]
        self.call_pool = [0x00101000 + rng.randrange(0, 0xF000, 16) for _ in range(rng.randint(1, 5))]

    def local(self) -> str:
        return _hexaddr(self.rng.choice(self.locals_pool))

    def glob(self) -> str:
        return _hexaddr(self.rng.choice(self.globals_pool))

    def callee(self) -> str:
        return _hexaddr(self.rng.choice(self.call_pool))

    def imm(self) -> str:
        r = self.rng.random()
        if r < 0.55:
            return f"0x{self.rng.randint(0, 0xF):x}"
        if r < 0.85:
            return f"0x{self.rng.randint(0x10, 0xFF):x}"
        return f"0x{self.rng.randint(0x100, 0xFFFF):x}"

    def mem(self) -> str:
        r = self.rng.random()
        if r < 0.35:
            off = self.rng.randrange(4, 0x40, 4)
            return f"[RBP + -0x{off:x}]"
        if r < 0.55:
            return f"[{self.rng.choice(REG64)}]"
        if r < 0.75:
            off = self.rng.randrange(0, 0x30, 8)
            return f"[RSP + 0x{off:x}]"
        if r < 0.9:
            return f"[{self.glob()}]"
        scale = self.rng.choice([1, 2, 4, 8])
        return f"[{self.rng.choice(REG64)} + {self.rng.choice(REG64)}*{scale}]"

    def body_instruction(self) -> str:
        rng = self.rng
        roll = rng.random()
        if roll < 0.28:
            kind = rng.random()
            if kind < 0.4:
                return f"MOV {rng.choice(REG64)},{rng.choice(REG64)}"
            if kind < 0.6:
                return f"MOV {rng.choice(REG32)},{self.imm()}"
            if kind < 0.8:
                return f"MOV {rng.choice(REG64)},qword ptr {self.mem()}"
            return f"MOV {rng.choice(PTR)} {self.mem()},{rng.choice(REG32)}"
        if roll < 0.48:
            op = rng.choice(ALU)
            if rng.random() < 0.5:
                return f"{op} {rng.choice(REG32)},{rng.choice(REG32)}"
            return f"{op} {rng.choice(REG32)},{self.imm()}"
        if roll < 0.56:
            return f"LEA {rng.choice(REG64)},{self.mem()}"
        if roll < 0.64:
            width = rng.choice(["byte ptr", "word ptr"])
            return f"MOVZX {rng.choice(REG32)},{width} {self.mem()}"
        if roll < 0.70:
            return f"CALL {self.callee()}"
        if roll < 0.78:
            return f"{rng.choice(JCC)} {self.local()}"
        if roll < 0.82:
            return f"JMP {self.local()}"
        if roll < 0.86:
            return f"PUSH {rng.choice(REG64)}" if rng.random() < 0.5 else f"POP {rng.choice(REG64)}"
        if roll < 0.90:
            return f"CMP {rng.choice(REG8)},{self.imm()}"
        if roll < 0.94:
            return f"MOVSXD {rng.choice(REG64)},{rng.choice(REG32)}"
        if roll < 0.97:
            return f"SHL {rng.choice(REG32)},{rng.choice(['0x1','0x2','0x3'])}"
        return rng.choice(["NOP", "CDQE", "CWDE"])

    def fragment(self) -> list[str]:
        frag = self.rng.choice(FRAGMENTS)
        mapping = {
            "local0": self.local(),
            "local1": self.local(),
            "glob0": self.glob(),
            "glob1": self.glob(),
        }
        return [line.format(**mapping) for line in frag]

    def build(self, n_instr: int) -> list[str]:
        rng = self.rng
        lines = ["ENDBR64", "PUSH RBP", "MOV RBP,RSP"]
        if rng.random() < 0.6:
            lines.append(f"SUB RSP,0x{rng.randrange(0x10, 0x80, 0x10):x}")
        if rng.random() < 0.4:
            lines.append(f"PUSH {rng.choice(['RBX', 'R12', 'R13', 'R14'])}")
        tail = ["LEAVE" if rng.random() < 0.5 else "POP RBP", "RET"]
        budget = n_instr - len(lines) - len(tail)
        body: list[str] = []
        while len(body) < budget:
            if rng.random() < 0.18 and budget - len(body) >= 6:
                body.extend(self.fragment())
            else:
                body.append(self.body_instruction())
        lines.extend(body[:budget])
        lines.extend(tail)
        return lines


def _signature(rng: random.Random):
    if rng.random() < 0.3:
        return None
    return {
        "return_type": rng.choice(RETURN_TYPES),
        "param_types": [rng.choice(PARAM_TYPES) for _ in range(rng.randint(0, 4))],
    }


def paper_example_function() -> list[str]:
    """A real published-shape function: string transliteration loop with
    absolute local jump targets and two global word loads."""
    return [
        "ENDBR64",
        "PUSH RBP",
        "MOV RBP,RDI",
        "MOV RDI,RSI",
        "PUSH RBX",
        "MOV RBX,RSI",
        "SUB RSP,0x8",
        "CALL 0x00101050",
        "TEST EAX,EAX",
        "JLE 0x001013a9",
        "SUB EAX,0x1",
        "MOVZX R9D,word ptr [0x00302010]",
        "MOV RSI,RBX",
        "XOR EDX,EDX",
        "MOVZX R8D,word ptr [0x00302012]",
        "LEA RDI,[RBX + RAX*1 + 0x1]",
        "JMP 0x00101358",
        "CMP CL,0xa",
        "JNZ 0x00101380",
        "MOV word ptr [RAX],R8W",
        "ADD EDX,0x2",
        "ADD RSI,0x1",
        "CMP RDI,RSI",
        "JZ 0x00101390",
        "MOVZX ECX,byte ptr [RSI]",
        "MOVSXD RAX,EDX",
        "ADD RAX,RBP",
        "CMP CL,0x9",
        "JNZ 0x00101340",
        "ADD RSI,0x1",
        "MOV word ptr [RAX],R9W",
        "ADD EDX,0x2",
        "CMP RDI,RSI",
        "JNZ 0x00101358",
        "MOVSXD RDX,EDX",
        "ADD RBP,RDX",
        "MOV byte ptr [RBP],0x0",
        "ADD RSP,0x8",
        "POP RBX",
        "POP RBP",
        "RET",
        "MOV byte ptr [RAX],CL",
        "ADD EDX,0x1",
        "JMP 0x00101348",
    ]


def make_records(count: int, seed: int) -> list[dict]:
    rng = random.Random(seed)
    records = []

    body = paper_example_function()
    records.append(
        {
            "name": "transliterate_pair",
            "signature": {"return_type": "int", "param_types": ["char *", "char *"]},
            "disassembly": "\n".join(body),
            "variant": "default",
        }
    )

    for i in range(count - 1):
        base = 0x00101000 + 0x480 * i
        synth = FunctionSynth(rng, base)
        # skew lengths low so the corpus stays quick to train on
        n_instr = 30 + int(rng.betavariate(1.3, 2.2) * 70)
        lines = synth.build(n_instr)
        assert 30 <= len(lines) <= 100
        name = f"FUN_{base:08x}" if rng.random() < 0.7 else rng.choice(
            ["parse_header", "hash_update", "copy_block", "emit_token", "scan_table",
             "read_varint", "flush_buffer", "index_lookup", "pack_fields", "next_record"]
        ) + f"_{i:03d}"
        records.append(
            {
                "name": name,
                "signature": _signature(rng),
                "disassembly": "\n".join(lines),
                "variant": "default",
            }
        )
    return records


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/fixture_default.jsonl")
    ap.add_argument("--count", type=int, default=520)
    ap.add_argument("--seed", type=int, default=13)
    args = ap.parse_args(argv)
    records = make_records(args.count, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
    total = sum(rec["disassembly"].count("\n") + 1 for rec in records)
    print(f"wrote {len(records)} functions, {total} instructions to {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
