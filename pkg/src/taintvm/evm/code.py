from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import FrozenSet, Iterator, Optional, Union

from .. import kernels
from .opcodes import OPCODES


@dataclass(frozen=True)
class Instruction:
    offset: int
    opcode: int
    name: Optional[str]  # None for bytes outside the supported subset
    immediate: bytes = b""

    @property
    def size(self) -> int:
        return 1 + len(self.immediate)


@dataclass(frozen=True)
class CodeAnalysis:
    code: bytes
    valid_jumpdests: FrozenSet[int]


@lru_cache(maxsize=4096)
def analyze_code(code: bytes) -> CodeAnalysis:
    """Find valid jump destinations with one linear scan over ``code``.

    Unknown opcode bytes are treated as single-byte instructions; they only
    fault when executed.
    """
    code = bytes(code)
    return CodeAnalysis(code, frozenset(kernels.scan_jumpdests(code)))


def decode(code: bytes) -> Iterator[Instruction]:
    """Linear sweep decoder. A truncated trailing PUSH keeps its short immediate."""
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        info = OPCODES.get(op)
        width = info.immediate if info is not None else 0
        yield Instruction(i, op, info.name if info else None, bytes(code[i + 1 : i + 1 + width]))
        i += 1 + width


def parse_bytecode(data: Union[str, bytes, bytearray]) -> bytes:
    """Accept raw bytes or hex text with an optional ``0x`` prefix."""
    if isinstance(data, (bytes, bytearray)):
        return bytes(data)
    text = "".join(data.split())
    if text[:2].lower() == "0x":
        text = text[2:]
    if len(text) % 2:
        raise ValueError("hex bytecode has an odd number of digits")
    return bytes.fromhex(text)
