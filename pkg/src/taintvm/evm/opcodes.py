"""Supported opcode subset with stack arity and the flat gas schedule."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional


@dataclass(frozen=True)
class OpInfo:
    code: int
    name: str
    pops: int
    pushes: int
    immediate: int = 0


def _build() -> Dict[int, OpInfo]:
    table: Dict[int, OpInfo] = {}

    def add(code: int, name: str, pops: int, pushes: int, immediate: int = 0) -> None:
        table[code] = OpInfo(code, name, pops, pushes, immediate)

    add(0x00, "STOP", 0, 0)
    add(0x01, "ADD", 2, 1)
    add(0x02, "MUL", 2, 1)
    add(0x03, "SUB", 2, 1)
    add(0x04, "DIV", 2, 1)
    add(0x06, "MOD", 2, 1)
    add(0x0A, "EXP", 2, 1)
    add(0x10, "LT", 2, 1)
    add(0x11, "GT", 2, 1)
    add(0x14, "EQ", 2, 1)
    add(0x15, "ISZERO", 1, 1)
    add(0x16, "AND", 2, 1)
    add(0x17, "OR", 2, 1)
    add(0x18, "XOR", 2, 1)
    add(0x19, "NOT", 1, 1)
    add(0x1A, "BYTE", 2, 1)
    add(0x1B, "SHL", 2, 1)
    add(0x1C, "SHR", 2, 1)
    add(0x20, "KECCAK256", 2, 1)
    add(0x30, "ADDRESS", 0, 1)
    add(0x31, "BALANCE", 1, 1)
    add(0x33, "CALLER", 0, 1)
    add(0x34, "CALLVALUE", 0, 1)
    add(0x35, "CALLDATALOAD", 1, 1)
    add(0x36, "CALLDATASIZE", 0, 1)
    add(0x37, "CALLDATACOPY", 3, 0)
    add(0x38, "CODESIZE", 0, 1)
    add(0x39, "CODECOPY", 3, 0)
    add(0x3D, "RETURNDATASIZE", 0, 1)
    add(0x3E, "RETURNDATACOPY", 3, 0)
    add(0x50, "POP", 1, 0)
    add(0x51, "MLOAD", 1, 1)
    add(0x52, "MSTORE", 2, 0)
    add(0x53, "MSTORE8", 2, 0)
    add(0x54, "SLOAD", 1, 1)
    add(0x55, "SSTORE", 2, 0)
    add(0x56, "JUMP", 1, 0)
    add(0x57, "JUMPI", 2, 0)
    add(0x58, "PC", 0, 1)
    add(0x59, "MSIZE", 0, 1)
    add(0x5A, "GAS", 0, 1)
    add(0x5B, "JUMPDEST", 0, 0)
    for n in range(1, 33):
        add(0x5F + n, f"PUSH{n}", 0, 1, immediate=n)
    for n in range(1, 17):
        add(0x7F + n, f"DUP{n}", n, n + 1)
    for n in range(1, 17):
        add(0x8F + n, f"SWAP{n}", n + 1, n + 1)
    for n in range(5):
        add(0xA0 + n, f"LOG{n}", 2 + n, 0)
    add(0xF0, "CREATE", 3, 1)
    add(0xF1, "CALL", 7, 1)
    add(0xF2, "CALLCODE", 7, 1)
    add(0xF3, "RETURN", 2, 0)
    add(0xF4, "DELEGATECALL", 6, 1)
    add(0xFA, "STATICCALL", 6, 1)
    add(0xFD, "REVERT", 2, 0)
    add(0xFF, "SELFDESTRUCT", 1, 0)
    return table


OPCODES: Dict[int, OpInfo] = _build()
BY_NAME: Dict[str, OpInfo] = {info.name: info for info in OPCODES.values()}

BINARY_OPS = ("ADD", "MUL", "SUB", "DIV", "MOD", "EXP", "LT", "GT", "EQ",
              "AND", "OR", "XOR", "BYTE", "SHL", "SHR")
CALL_OPS = ("CALL", "CALLCODE", "DELEGATECALL", "STATICCALL")


@dataclass
class GasSchedule:
    """Flat per-instruction cost with optional per-opcode overrides.

    EXP is flat like every other opcode. ``memory_limit`` bounds frame memory;
    touching bytes beyond it faults with OutOfGas.
    """

    default_cost: int = 1
    overrides: Dict[str, int] = field(default_factory=dict)
    call_stipend: int = 2300
    memory_limit: int = 1 << 20

    def __post_init__(self) -> None:
        unknown = set(self.overrides) - set(BY_NAME)
        if unknown:
            raise ValueError(f"gas overrides for unknown opcodes: {sorted(unknown)}")
        costs = [self.default_cost] * 256
        for name, cost in self.overrides.items():
            costs[BY_NAME[name].code] = cost
        self._costs = costs

    def cost(self, opcode: int) -> int:
        return self._costs[opcode]

    @property
    def costs(self) -> list:
        return self._costs


def opcode_table(schedule: Optional[GasSchedule] = None) -> Mapping[str, object]:
    """Machine-readable opcode, arity and gas table."""
    schedule = schedule or GasSchedule()
    return {
        "gas": {
            "default_cost": schedule.default_cost,
            "call_stipend": schedule.call_stipend,
            "memory_limit": schedule.memory_limit,
            "notes": "flat cost per instruction; EXP is not size-dependent",
        },
        "opcodes": [
            {
                "opcode": f"0x{info.code:02x}",
                "name": info.name,
                "pops": info.pops,
                "pushes": info.pushes,
                "immediate_bytes": info.immediate,
                "gas": schedule.cost(info.code),
            }
            for info in sorted(OPCODES.values(), key=lambda i: i.code)
        ],
    }


def opcode_table_json(schedule: Optional[GasSchedule] = None) -> str:
    return json.dumps(opcode_table(schedule), indent=2)
