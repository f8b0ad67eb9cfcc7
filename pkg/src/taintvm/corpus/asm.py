"""Line-oriented EVM assembler and linear-sweep disassembler.

Syntax, one item per line::

    ; comment
    name:                 label (may prefix an instruction on the same line)
    PUSH1 0x2a            explicit-width push
    PUSH 300              auto-sized push (PUSH2 0x012c)
    PUSH @name            label reference, always PUSH2
    PUSH @end-@start      label difference, always PUSH2
    JUMPI @name           any other mnemonic with an operand pushes it first
    .db 0xfe 0x0102       raw bytes
    .include "child.asm"  embed another file's assembled bytes
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

from ..evm.code import decode
from ..evm.opcodes import BY_NAME

_ALIASES = {"SHA3": "KECCAK256"}
_LABEL_RE = re.compile(r"^([A-Za-z_][\w.]*):")
_IDENT_RE = re.compile(r"^[A-Za-z_][\w.]*$")


class AsmError(ValueError):
    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownMnemonic(AsmError):
    pass


class DuplicateLabel(AsmError):
    pass


class UndefinedLabel(AsmError):
    pass


class ImmediateTooWide(AsmError):
    pass


@dataclass
class _Operand:
    value: Optional[int] = None
    label: Optional[str] = None
    minus: Optional[str] = None  # ``@a-@b``

    @property
    def symbolic(self) -> bool:
        return self.label is not None


@dataclass
class _Item:
    line: int
    opcode: Optional[int]  # None for raw bytes
    width: int  # push width; 0 for non-push
    operand: Optional[_Operand] = None
    raw: bytes = b""
    then: Optional[int] = None  # opcode emitted after an implicit push

    @property
    def size(self) -> int:
        if self.opcode is None:
            return len(self.raw)
        return 1 + self.width + (1 if self.then is not None else 0)


def _byte_width(value: int) -> int:
    return max(1, (value.bit_length() + 7) // 8)


def _parse_number(tok: str, line: int) -> int:
    try:
        if tok.lower().startswith("0x"):
            return int(tok, 16)
        return int(tok, 10)
    except ValueError:
        raise AsmError(f"bad immediate {tok!r}", line) from None


def _parse_operand(tok: str, line: int) -> _Operand:
    if tok.startswith("@"):
        left, sep, right = tok[1:].partition("-")
        if sep:
            if not right.startswith("@"):
                raise AsmError(f"bad label difference {tok!r}", line)
            return _Operand(label=left, minus=right[1:])
        return _Operand(label=left)
    value = _parse_number(tok, line)
    if value < 0 or value >= 1 << 256:
        raise ImmediateTooWide(f"immediate {tok} does not fit in 32 bytes", line)
    return _Operand(value=value)


def _parse_raw(tokens: List[str], line: int) -> bytes:
    out = bytearray()
    for tok in tokens:
        if tok.lower().startswith("0x"):
            digits = tok[2:]
            if len(digits) % 2:
                raise AsmError(f"odd-length hex {tok!r}", line)
            try:
                out += bytes.fromhex(digits)
            except ValueError:
                raise AsmError(f"bad hex {tok!r}", line) from None
        else:
            value = _parse_number(tok, line)
            if value > 0xFF:
                raise ImmediateTooWide(f"raw byte {tok} exceeds 0xff", line)
            out.append(value)
    return bytes(out)


def _parse(text: str, base: Optional[Path]) -> Tuple[List[_Item], dict]:
    items: List[_Item] = []
    labels: dict = {}
    pending: List[Tuple[str, int]] = []
    offset = 0
    for lineno, raw_line in enumerate(text.splitlines(), 1):
        line = raw_line.split(";", 1)[0].strip()
        while True:
            m = _LABEL_RE.match(line)
            if not m:
                break
            name = m.group(1)
            if name in labels or any(name == p for p, _ in pending):
                raise DuplicateLabel(f"label {name!r} defined twice", lineno)
            pending.append((name, lineno))
            line = line[m.end():].strip()
        if not line:
            continue
        for name, _ in pending:
            labels[name] = offset
        pending.clear()
        tokens = line.split()
        head = tokens[0]
        if head.lower() == ".db":
            item = _Item(lineno, None, 0, raw=_parse_raw(tokens[1:], lineno))
        elif head.lower() == ".include":
            if len(tokens) != 2:
                raise AsmError(".include takes one path", lineno)
            path = Path(tokens[1].strip("\"'"))
            if base is not None and not path.is_absolute():
                path = base / path
            item = _Item(lineno, None, 0, raw=assemble_file(path))
        else:
            item = _instruction(tokens, lineno)
        items.append(item)
        offset += item.size
    for name, _ in pending:
        labels[name] = offset
    return items, labels


def _instruction(tokens: List[str], lineno: int) -> _Item:
    mnemonic = tokens[0].upper()
    mnemonic = _ALIASES.get(mnemonic, mnemonic)
    if len(tokens) > 2:
        raise AsmError(f"too many operands for {mnemonic}", lineno)
    operand = _parse_operand(tokens[1], lineno) if len(tokens) == 2 else None
    if mnemonic == "PUSH":
        if operand is None:
            raise AsmError("PUSH needs an operand", lineno)
        width = 2 if operand.symbolic else _byte_width(operand.value)
        return _Item(lineno, 0x5F + width, width, operand)
    info = BY_NAME.get(mnemonic)
    if info is None:
        raise UnknownMnemonic(f"unknown mnemonic {tokens[0]!r}", lineno)
    if info.immediate:
        if operand is None:
            raise AsmError(f"{mnemonic} needs an operand", lineno)
        if not operand.symbolic and _byte_width(operand.value) > info.immediate:
            raise ImmediateTooWide(
                f"{tokens[1]} does not fit in {info.immediate} byte(s)", lineno)
        return _Item(lineno, info.code, info.immediate, operand)
    if operand is None:
        return _Item(lineno, info.code, 0)
    width = 2 if operand.symbolic else _byte_width(operand.value)
    return _Item(lineno, 0x5F + width, width, operand, then=info.code)


def _resolve(op: _Operand, labels: dict, line: int) -> int:
    if not op.symbolic:
        return op.value
    for name in (op.label, op.minus):
        if name is not None and name not in labels:
            raise UndefinedLabel(f"undefined label {name!r}", line)
    value = labels[op.label]
    if op.minus is not None:
        value -= labels[op.minus]
        if value < 0:
            raise AsmError(f"negative label difference @{op.label}-@{op.minus}", line)
    return value


def _emit(items: List[_Item], labels: dict) -> bytes:
    out = bytearray()
    for item in items:
        if item.opcode is None:
            out += item.raw
            continue
        out.append(item.opcode)
        if item.width:
            value = _resolve(item.operand, labels, item.line)
            if _byte_width(value) > item.width:
                raise ImmediateTooWide(
                    f"value {value:#x} does not fit in {item.width} byte(s)", item.line)
            out += value.to_bytes(item.width, "big")
        if item.then is not None:
            out.append(item.then)
    return bytes(out)


def assemble(text: str, base: Union[str, Path, None] = None) -> bytes:
    """Assemble ``text``; ``base`` resolves relative ``.include`` paths."""
    items, labels = _parse(text, Path(base) if base is not None else None)
    return _emit(items, labels)


def assemble_file(path: Union[str, Path]) -> bytes:
    path = Path(path)
    return assemble(path.read_text(), path.parent)


def labels_of(text: str, base: Union[str, Path, None] = None) -> dict:
    """Label name to code offset, for tests and tooling."""
    return _parse(text, Path(base) if base is not None else None)[1]


def disassemble(code: bytes, offsets: bool = False) -> str:
    """Render ``code`` one instruction per line.

    Bytes outside the supported opcode set, and a PUSH cut short by the end
    of code, come out as ``.db`` so the text reassembles to the same bytes.
    """
    lines = []
    for ins in decode(code):
        if ins.name is None:
            text = f".db 0x{ins.opcode:02x}"
        elif ins.name.startswith("PUSH"):
            width = int(ins.name[4:])
            if len(ins.immediate) < width:
                text = f".db 0x{bytes([ins.opcode]).hex()}{ins.immediate.hex()}"
            else:
                text = f"{ins.name} 0x{ins.immediate.hex()}"
        else:
            text = ins.name
        lines.append(f"{text:<24}; {ins.offset:#06x}" if offsets else text)
    return "\n".join(lines)
