"""Bytecode interpreter.

Opcode handlers take ``(frame, host)``. The host supplies world access, the
gas schedule, optional taint and trace hooks, and frame management for
sub-calls; ``taintvm.harness.Executor`` is the production host.

Handlers return ``None`` to continue, or a ``StepOutcome`` that ends or
suspends the frame. Faults are raised as ``VMFault`` and converted to a
Fault outcome at the frame boundary.
"""

from __future__ import annotations

from typing import Callable, List, Optional, Tuple

from ..hashing import keccak256
from .frame import (
    CONTINUE,
    MASK160,
    MASK256,
    STACK_LIMIT,
    STOPPED,
    CallFrame,
    CallKind,
    CallRequest,
    CallResult,
    FaultReason,
    OutcomeKind,
    StepOutcome,
    VMFault,
)
from .opcodes import OPCODES

Handler = Callable[[CallFrame, object], Optional[StepOutcome]]

_ZERO32 = bytes(32)


def _touch(f: CallFrame, offset: int, size: int) -> None:
    if size == 0:
        return
    end = offset + size
    if end > f.mem_limit:
        raise VMFault(FaultReason.OUT_OF_GAS)
    mem = f.memory
    if end > len(mem):
        mem.extend(bytes(((end + 31) >> 5 << 5) - len(mem)))


def _padded(data: bytes, offset: int, size: int) -> bytes:
    chunk = data[offset:offset + size]
    if len(chunk) < size:
        chunk = chunk + bytes(size - len(chunk))
    return chunk


# -- arithmetic and logic -------------------------------------------------

def _stop(f, h):
    return STOPPED


def _add(f, h):
    s = f.stack
    a = s.pop()
    s[-1] = (a + s[-1]) & MASK256


def _mul(f, h):
    s = f.stack
    a = s.pop()
    s[-1] = (a * s[-1]) & MASK256


def _sub(f, h):
    s = f.stack
    a = s.pop()
    s[-1] = (a - s[-1]) & MASK256


def _div(f, h):
    s = f.stack
    a = s.pop()
    b = s[-1]
    s[-1] = a // b if b else 0


def _mod(f, h):
    s = f.stack
    a = s.pop()
    b = s[-1]
    s[-1] = a % b if b else 0


def _exp(f, h):
    s = f.stack
    a = s.pop()
    s[-1] = pow(a, s[-1], 1 << 256)


def _lt(f, h):
    s = f.stack
    a = s.pop()
    s[-1] = 1 if a < s[-1] else 0


def _gt(f, h):
    s = f.stack
    a = s.pop()
    s[-1] = 1 if a > s[-1] else 0


def _eq(f, h):
    s = f.stack
    a = s.pop()
    s[-1] = 1 if a == s[-1] else 0


def _iszero(f, h):
    s = f.stack
    s[-1] = 0 if s[-1] else 1


def _and(f, h):
    s = f.stack
    a = s.pop()
    s[-1] &= a


def _or(f, h):
    s = f.stack
    a = s.pop()
    s[-1] |= a


def _xor(f, h):
    s = f.stack
    a = s.pop()
    s[-1] ^= a


def _not(f, h):
    s = f.stack
    s[-1] ^= MASK256


def _byte(f, h):
    s = f.stack
    i = s.pop()
    s[-1] = (s[-1] >> (248 - 8 * i)) & 0xFF if i < 32 else 0


def _shl(f, h):
    s = f.stack
    shift = s.pop()
    s[-1] = (s[-1] << shift) & MASK256 if shift < 256 else 0


def _shr(f, h):
    s = f.stack
    shift = s.pop()
    s[-1] = s[-1] >> shift if shift < 256 else 0


def _keccak(f, h):
    s = f.stack
    off = s.pop()
    size = s[-1]
    _touch(f, off, size)
    s[-1] = int.from_bytes(keccak256(bytes(f.memory[off:off + size])), "big")


# -- environment ----------------------------------------------------------

def _address(f, h):
    f.stack.append(f.context_address)


def _balance(f, h):
    s = f.stack
    s[-1] = h.world.get_balance(s[-1] & MASK160)


def _caller(f, h):
    f.stack.append(f.caller)


def _callvalue(f, h):
    f.stack.append(f.call_value)


def _calldataload(f, h):
    s = f.stack
    s[-1] = int.from_bytes(_padded(f.calldata, s[-1], 32), "big")


def _calldatasize(f, h):
    f.stack.append(len(f.calldata))


def _copy_into_memory(f, source: bytes) -> None:
    s = f.stack
    dest = s.pop()
    off = s.pop()
    size = s.pop()
    _touch(f, dest, size)
    if size:
        f.memory[dest:dest + size] = _padded(source, off, size)


def _calldatacopy(f, h):
    _copy_into_memory(f, f.calldata)


def _codesize(f, h):
    f.stack.append(len(f.code))


def _codecopy(f, h):
    _copy_into_memory(f, f.code)


def _returndatasize(f, h):
    f.stack.append(len(f.return_data))


def _returndatacopy(f, h):
    s = f.stack
    if s[-2] + s[-3] > len(f.return_data):
        raise VMFault(FaultReason.RETURNDATA_OUT_OF_BOUNDS)
    _copy_into_memory(f, f.return_data)


# -- stack, memory, storage, flow -----------------------------------------

def _pop(f, h):
    f.stack.pop()


def _mload(f, h):
    s = f.stack
    off = s[-1]
    _touch(f, off, 32)
    s[-1] = int.from_bytes(f.memory[off:off + 32], "big")


def _mstore(f, h):
    s = f.stack
    off = s.pop()
    val = s.pop()
    _touch(f, off, 32)
    f.memory[off:off + 32] = val.to_bytes(32, "big")


def _mstore8(f, h):
    s = f.stack
    off = s.pop()
    val = s.pop()
    _touch(f, off, 1)
    f.memory[off] = val & 0xFF


def _sload(f, h):
    s = f.stack
    slot = s[-1]
    value = h.world.get_storage(f.context_address, slot)
    s[-1] = value
    h.events.append(("SLOAD", f.context_address, slot, value))


def _sstore(f, h):
    if f.static:
        raise VMFault(FaultReason.WRITE_PROTECTION)
    s = f.stack
    slot = s.pop()
    value = s.pop()
    h.world.set_storage(f.context_address, slot, value)
    h.events.append(("SSTORE", f.context_address, slot, value))


def _jump(f, h):
    dest = f.stack.pop()
    if dest not in f.analysis.valid_jumpdests:
        raise VMFault(FaultReason.INVALID_JUMP)
    f.pc = dest


def _jumpi(f, h):
    s = f.stack
    dest = s.pop()
    cond = s.pop()
    h.events.append(("JUMPI", f.context_address, f.pc - 1, 1 if cond else 0))
    if cond:
        if dest not in f.analysis.valid_jumpdests:
            raise VMFault(FaultReason.INVALID_JUMP)
        f.pc = dest


def _pc(f, h):
    f.stack.append(f.pc - 1)


def _msize(f, h):
    f.stack.append(len(f.memory))


def _gas(f, h):
    f.stack.append(f.gas)


def _jumpdest(f, h):
    return None


def _make_push(n: int) -> Handler:
    def push(f, h):
        start = f.pc
        chunk = f.code[start:start + n]
        value = int.from_bytes(chunk, "big")
        if len(chunk) < n:
            value <<= 8 * (n - len(chunk))
        f.stack.append(value)
        f.pc = start + n
    push.__name__ = f"_push{n}"
    return push


def _make_dup(n: int) -> Handler:
    def dup(f, h):
        s = f.stack
        s.append(s[-n])
    dup.__name__ = f"_dup{n}"
    return dup


def _make_swap(n: int) -> Handler:
    k = -n - 1

    def swap(f, h):
        s = f.stack
        s[-1], s[k] = s[k], s[-1]
    swap.__name__ = f"_swap{n}"
    return swap


def _make_log(n: int) -> Handler:
    def log(f, h):
        if f.static:
            raise VMFault(FaultReason.WRITE_PROTECTION)
        s = f.stack
        off = s.pop()
        size = s.pop()
        del s[len(s) - n:]
        _touch(f, off, size)
    log.__name__ = f"_log{n}"
    return log


# -- calls and termination -------------------------------------------------

def _call_common(f, h, kind: CallKind, has_value: bool):
    s = f.stack
    gas = s.pop()
    target = s.pop() & MASK160
    value = s.pop() if has_value else 0
    in_off = s.pop()
    in_size = s.pop()
    out_off = s.pop()
    out_size = s.pop()
    if f.static and kind is CallKind.CALL and value:
        raise VMFault(FaultReason.WRITE_PROTECTION)
    _touch(f, in_off, in_size)
    _touch(f, out_off, out_size)
    forwarded = gas if gas < f.gas else f.gas
    f.gas -= forwarded
    stipend = h.schedule.call_stipend if has_value and value else 0
    req = CallRequest(kind, target, value, bytes(f.memory[in_off:in_off + in_size]),
                      forwarded + stipend, out_off, out_size, stipend)
    f.pending = req
    return StepOutcome(OutcomeKind.SUBCALL, request=req)


def _call(f, h):
    return _call_common(f, h, CallKind.CALL, True)


def _callcode(f, h):
    return _call_common(f, h, CallKind.CALLCODE, True)


def _delegatecall(f, h):
    return _call_common(f, h, CallKind.DELEGATECALL, False)


def _staticcall(f, h):
    return _call_common(f, h, CallKind.STATICCALL, False)


def _create(f, h):
    if f.static:
        raise VMFault(FaultReason.WRITE_PROTECTION)
    s = f.stack
    value = s.pop()
    off = s.pop()
    size = s.pop()
    _touch(f, off, size)
    gas = f.gas
    f.gas = 0
    req = CallRequest(CallKind.CREATE, None, value, bytes(f.memory[off:off + size]), gas)
    f.pending = req
    return StepOutcome(OutcomeKind.SUBCREATE, request=req)


def _return(f, h):
    s = f.stack
    off = s.pop()
    size = s.pop()
    _touch(f, off, size)
    return StepOutcome(OutcomeKind.RETURN, bytes(f.memory[off:off + size]))


def _revert(f, h):
    s = f.stack
    off = s.pop()
    size = s.pop()
    _touch(f, off, size)
    return StepOutcome(OutcomeKind.REVERT, bytes(f.memory[off:off + size]))


def _selfdestruct(f, h):
    if f.static:
        raise VMFault(FaultReason.WRITE_PROTECTION)
    beneficiary = f.stack.pop() & MASK160
    h.selfdestruct(f, beneficiary)
    return STOPPED


_HANDLERS = {
    "STOP": _stop, "ADD": _add, "MUL": _mul, "SUB": _sub, "DIV": _div,
    "MOD": _mod, "EXP": _exp, "LT": _lt, "GT": _gt, "EQ": _eq,
    "ISZERO": _iszero, "AND": _and, "OR": _or, "XOR": _xor, "NOT": _not,
    "BYTE": _byte, "SHL": _shl, "SHR": _shr, "KECCAK256": _keccak,
    "ADDRESS": _address, "BALANCE": _balance, "CALLER": _caller,
    "CALLVALUE": _callvalue, "CALLDATALOAD": _calldataload,
    "CALLDATASIZE": _calldatasize, "CALLDATACOPY": _calldatacopy,
    "CODESIZE": _codesize, "CODECOPY": _codecopy,
    "RETURNDATASIZE": _returndatasize, "RETURNDATACOPY": _returndatacopy,
    "POP": _pop, "MLOAD": _mload, "MSTORE": _mstore, "MSTORE8": _mstore8,
    "SLOAD": _sload, "SSTORE": _sstore, "JUMP": _jump, "JUMPI": _jumpi,
    "PC": _pc, "MSIZE": _msize, "GAS": _gas, "JUMPDEST": _jumpdest,
    "CREATE": _create, "CALL": _call, "CALLCODE": _callcode,
    "RETURN": _return, "DELEGATECALL": _delegatecall,
    "STATICCALL": _staticcall, "REVERT": _revert,
    "SELFDESTRUCT": _selfdestruct,
}
for _n in range(1, 33):
    _HANDLERS[f"PUSH{_n}"] = _make_push(_n)
for _n in range(1, 17):
    _HANDLERS[f"DUP{_n}"] = _make_dup(_n)
    _HANDLERS[f"SWAP{_n}"] = _make_swap(_n)
for _n in range(5):
    _HANDLERS[f"LOG{_n}"] = _make_log(_n)

# opcode byte -> (pops, pushes - pops, handler), or None for unsupported bytes
DISPATCH: List[Optional[Tuple[int, int, Handler]]] = [None] * 256
for _code, _info in OPCODES.items():
    DISPATCH[_code] = (_info.pops, _info.pushes - _info.pops, _HANDLERS[_info.name])


def _run(f: CallFrame, h, single: bool = False) -> StepOutcome:
    if f.faulted:
        raise RuntimeError("frame already faulted")
    code = f.code
    n = len(code)
    stack = f.stack
    costs = h.schedule.costs
    taint = h.taint
    tpre = taint.handlers if taint is not None else None
    tracer = h.tracer
    count = 0
    try:
        while True:
            pc = f.pc
            if pc >= n:
                return STOPPED
            op = code[pc]
            count += 1
            if tracer is not None:
                tracer.begin(f, op)
            entry = DISPATCH[op]
            if entry is None:
                raise VMFault(FaultReason.INVALID_OPCODE)
            pops, net, handler = entry
            cost = costs[op]
            if f.gas < cost:
                raise VMFault(FaultReason.OUT_OF_GAS)
            f.gas -= cost
            depth = len(stack)
            if depth < pops:
                raise VMFault(FaultReason.STACK_UNDERFLOW)
            if depth + net > STACK_LIMIT:
                raise VMFault(FaultReason.STACK_OVERFLOW)
            if tpre is not None:
                tpre[op](f)
            f.pc = pc + 1
            out = handler(f, h)
            if out is not None:
                return out
            if single:
                return CONTINUE
    except VMFault as exc:
        f.faulted = True
        f.gas = 0
        return StepOutcome(OutcomeKind.FAULT, reason=exc.reason)
    finally:
        h.instructions += count


def step(frame: CallFrame, host) -> StepOutcome:
    """Apply exactly one instruction to ``frame``."""
    return _run(frame, host, single=True)


def resume(parent: CallFrame, result: CallResult, host) -> None:
    """Deliver a finished sub-call or create back into the suspended parent."""
    req = parent.pending
    assert req is not None, "resume without a pending call"
    parent.pending = None
    parent.gas += min(result.gas_left, req.gas - req.stipend)
    if req.kind is CallKind.CREATE:
        parent.stack.append(result.address if result.success else 0)
        parent.return_data = b"" if result.success else result.output
    else:
        parent.stack.append(1 if result.success else 0)
        parent.return_data = result.output
        n = min(req.out_size, len(result.output))
        if n:
            parent.memory[req.out_offset:req.out_offset + n] = result.output[:n]
    if host.taint is not None:
        host.taint.on_resume(parent, req, result)


def execute_frame(frame: CallFrame, host) -> CallResult:
    """Run ``frame`` and every nested frame it spawns to completion.

    Nested frames are kept on an explicit stack, so call depth is bounded
    only by the host's depth limit and not by Python recursion.
    """
    frames = [frame]
    while True:
        top = frames[-1]
        out = _run(top, host)
        if out.kind is OutcomeKind.SUBCALL or out.kind is OutcomeKind.SUBCREATE:
            child = host.open_frame(top, out.request)
            if isinstance(child, CallFrame):
                frames.append(child)
            else:
                resume(top, child, host)
            continue
        frames.pop()
        result = host.close_frame(top, out)
        if not frames:
            return result
        resume(frames[-1], result, host)
