from .code import CodeAnalysis, Instruction, analyze_code, decode, parse_bytecode
from .frame import (
    MASK160,
    MASK256,
    STACK_LIMIT,
    CallFrame,
    CallKind,
    CallRequest,
    CallResult,
    FaultReason,
    OutcomeKind,
    StepOutcome,
    VMFault,
)
from .interpreter import execute_frame, resume, step
from .opcodes import BY_NAME, OPCODES, GasSchedule, OpInfo, opcode_table, opcode_table_json

__all__ = [
    "BY_NAME", "CallFrame", "CallKind", "CallRequest", "CallResult",
    "CodeAnalysis", "FaultReason", "GasSchedule", "Instruction", "MASK160",
    "MASK256", "OPCODES", "OpInfo", "OutcomeKind", "STACK_LIMIT",
    "StepOutcome", "VMFault", "analyze_code", "decode", "execute_frame",
    "opcode_table", "opcode_table_json", "parse_bytecode", "resume", "step",
]
