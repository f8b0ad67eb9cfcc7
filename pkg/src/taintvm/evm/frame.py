from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, List, Optional, Set, Tuple

from .code import CodeAnalysis, analyze_code

MASK256 = (1 << 256) - 1
MASK160 = (1 << 160) - 1
STACK_LIMIT = 1024


class FaultReason(str, Enum):
    STACK_UNDERFLOW = "StackUnderflow"
    STACK_OVERFLOW = "StackOverflow"
    INVALID_JUMP = "InvalidJump"
    INVALID_OPCODE = "InvalidOpcode"
    OUT_OF_GAS = "OutOfGas"
    WRITE_PROTECTION = "WriteProtection"
    RETURNDATA_OUT_OF_BOUNDS = "ReturnDataOutOfBounds"


class VMFault(Exception):
    def __init__(self, reason: FaultReason) -> None:
        super().__init__(reason.value)
        self.reason = reason


class CallKind(str, Enum):
    CALL = "Call"
    CALLCODE = "CallCode"
    DELEGATECALL = "DelegateCall"
    STATICCALL = "StaticCall"
    CREATE = "Create"


class OutcomeKind(str, Enum):
    CONTINUE = "Continue"
    STOP = "Stop"
    RETURN = "Return"
    REVERT = "Revert"
    SUBCALL = "SubCall"
    SUBCREATE = "SubCreate"
    FAULT = "Fault"


@dataclass(frozen=True)
class CallRequest:
    kind: CallKind
    target: Optional[int]  # None for CREATE
    value: int
    data: bytes  # call input, or init code for CREATE
    gas: int
    out_offset: int = 0
    out_size: int = 0
    stipend: int = 0  # granted on top of the caller's gas, never refunded


@dataclass(frozen=True)
class StepOutcome:
    kind: OutcomeKind
    output: bytes = b""
    request: Optional[CallRequest] = None
    reason: Optional[FaultReason] = None

    @property
    def terminal(self) -> bool:
        return self.kind in _TERMINAL


_TERMINAL = {OutcomeKind.STOP, OutcomeKind.RETURN, OutcomeKind.REVERT, OutcomeKind.FAULT}

CONTINUE = StepOutcome(OutcomeKind.CONTINUE)
STOPPED = StepOutcome(OutcomeKind.STOP)


@dataclass
class CallResult:
    """What a finished child frame hands back to its caller."""

    success: bool
    output: bytes = b""
    gas_left: int = 0
    address: Optional[int] = None  # deployed address for creates
    outcome: OutcomeKind = OutcomeKind.STOP
    reason: Optional[str] = None
    output_taint: Optional[List[Tuple[int, int, Any]]] = None


class CallFrame:
    """Machine state of one contract invocation."""

    __slots__ = (
        "code", "analysis", "code_address", "context_address", "caller",
        "call_value", "calldata", "pc", "stack", "memory", "return_data",
        "static", "gas", "depth", "kind", "mem_limit", "node_id", "shadow",
        "influences", "pending", "snapshot", "faulted",
    )

    def __init__(
        self,
        code: bytes,
        *,
        code_address: int,
        context_address: int,
        caller: int,
        call_value: int = 0,
        calldata: bytes = b"",
        gas: int = 10_000_000,
        static: bool = False,
        depth: int = 0,
        kind: CallKind = CallKind.CALL,
        mem_limit: int = 1 << 20,
    ) -> None:
        self.code = bytes(code)
        self.analysis: CodeAnalysis = analyze_code(self.code)
        self.code_address = code_address
        self.context_address = context_address
        self.caller = caller
        self.call_value = call_value
        self.calldata = bytes(calldata)
        self.pc = 0
        self.stack: List[int] = []
        self.memory = bytearray()
        self.return_data = b""
        self.static = static
        self.gas = gas
        self.depth = depth
        self.kind = kind
        self.mem_limit = mem_limit
        self.node_id: Optional[int] = None
        self.shadow: Any = None
        self.influences: Set[Tuple[int, int]] = set()
        self.pending: Optional[CallRequest] = None
        self.snapshot: Optional[int] = None
        self.faulted = False

    def __repr__(self) -> str:
        return (f"CallFrame(ctx=0x{self.context_address:040x}, pc={self.pc}, "
                f"depth={self.depth}, stack={len(self.stack)})")
