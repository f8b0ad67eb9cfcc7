"""Storage-dependence taint tracking over shadow stack, memory and storage.

SLOAD is the only taint source: it labels the loaded value with a
``DependsOnStorage`` taint naming the (context, slot) it came from. JUMPI is
the only sink: every storage origin reaching a branch condition is added to
the running frame's influence set. Every other instruction gives all of its
outputs the union of its inputs' taints; constants are untainted.

The engine runs as a pre-instruction hook: ``handlers[op](frame)`` is called
after the interpreter has checked gas and stack arity but before the
instruction mutates anything, so operands can still be peeked on the data
stack.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from .evm.frame import CallFrame, CallKind, CallRequest, CallResult
from .evm.opcodes import OPCODES
from .kernels import IntervalMap

Ranges = List[Tuple[int, int, "TaintSet"]]


class TaintKind(str, Enum):
    DEPENDS_ON_STORAGE = "DependsOnStorage"


class Taint(NamedTuple):
    context: int
    slot: int
    kind: TaintKind = TaintKind.DEPENDS_ON_STORAGE

    def to_json(self) -> List[str]:
        return [f"0x{self.context:040x}", hex(self.slot)]


TaintSet = FrozenSet[Taint]
EMPTY: TaintSet = frozenset()
InfluenceSet = Set[Tuple[int, int]]


def union(taints: Iterable[TaintSet]) -> TaintSet:
    out = EMPTY
    for t in taints:
        if t:
            out = t if not out else out | t
    return out


class ShadowMemory:
    """Byte-addressed taint map stored as coalesced ranges."""

    __slots__ = ("_map",)

    def __init__(self, ranges: Optional[Ranges] = None) -> None:
        self._map = IntervalMap()
        for start, end, taint in ranges or ():
            self._map.assign(start, end, taint or None)

    def write(self, offset: int, length: int, taint: TaintSet) -> None:
        self._map.assign(offset, offset + length, taint or None)

    def read(self, offset: int, length: int) -> TaintSet:
        vals = self._map.values_in(offset, offset + length)
        if not vals:
            return EMPTY
        if len(vals) == 1:
            return vals[0]
        return frozenset().union(*vals)

    def slice(self, offset: int, length: int) -> Ranges:
        return self._map.slice(offset, offset + length)

    def paste(self, offset: int, length: int, ranges: Ranges) -> None:
        """Overwrite ``[offset, offset+length)`` with ``ranges`` (relative offsets)."""
        m = self._map
        m.assign(offset, offset + length, None)
        for start, end, taint in ranges:
            if start >= length:
                break
            m.assign(offset + start, offset + min(end, length), taint)

    def intervals(self) -> Ranges:
        return self._map.items()

    def __len__(self) -> int:
        return len(self._map)


class FrameShadow:
    __slots__ = ("stack", "memory", "calldata", "returndata", "output", "pending", "call_input")

    def __init__(self, calldata: Optional[Ranges] = None) -> None:
        self.stack: List[TaintSet] = []
        self.memory = ShadowMemory()
        self.calldata = ShadowMemory(calldata)
        self.returndata = ShadowMemory()
        self.output: Ranges = []
        self.pending: TaintSet = EMPTY
        self.call_input: Ranges = []


def propagate(opcode: int, inputs: Sequence[TaintSet]) -> List[TaintSet]:
    """Output taints of a purely computational instruction (general rule).

    PUSH outputs are untainted; DUP copies its source; SWAP exchanges slots
    unchanged. Inputs are ordered top of stack first, like the data stack.
    """
    info = OPCODES[opcode]
    assert len(inputs) == info.pops, f"{info.name} takes {info.pops} inputs"
    name = info.name
    if name.startswith("PUSH"):
        return [EMPTY]
    if name.startswith("DUP"):
        n = info.pops
        return [inputs[n - 1]] + list(inputs)
    if name.startswith("SWAP"):
        out = list(inputs)
        out[0], out[-1] = out[-1], out[0]
        return out
    merged = union(inputs)
    return [merged] * info.pushes


SStoreGuard = Callable[[CallFrame, int], None]


class TaintEngine:
    """Per-transaction taint state plus the interpreter hook table."""

    def __init__(self, sstore_guard: Optional[SStoreGuard] = None) -> None:
        self.storage: Dict[Tuple[int, int], TaintSet] = {}
        self.sstore_guard = sstore_guard
        self.handlers: List[Callable[[CallFrame], None]] = self._build_handlers()

    # -- operations with a direct contract -----------------------------------

    def on_sload(self, context: int, slot: int) -> TaintSet:
        fresh = frozenset((Taint(context, slot),))
        prior = self.storage.get((context, slot))
        return fresh | prior if prior else fresh

    def on_sstore(self, context: int, slot: int, value_taint: TaintSet) -> None:
        if value_taint:
            self.storage[(context, slot)] = value_taint
        else:
            self.storage.pop((context, slot), None)

    @staticmethod
    def on_jumpi(condition: TaintSet, sink: InfluenceSet) -> None:
        for t in condition:
            sink.add((t.context, t.slot))

    @staticmethod
    def frame_influences(frame: CallFrame) -> InfluenceSet:
        return frame.influences

    # -- frame lifecycle -------------------------------------------------------

    def enter_frame(self, child: CallFrame, parent: Optional[CallFrame] = None) -> None:
        calldata = None
        if parent is not None and child.kind is not CallKind.CREATE:
            calldata = parent.shadow.call_input
        child.shadow = FrameShadow(calldata)

    @staticmethod
    def frame_output(frame: CallFrame) -> Ranges:
        return frame.shadow.output if frame.shadow is not None else []

    def on_resume(self, parent: CallFrame, req: CallRequest, result: CallResult) -> None:
        sh = parent.shadow
        sh.stack.append(sh.pending)
        sh.pending = EMPTY
        ranges = result.output_taint or []
        if req.kind is CallKind.CREATE:
            sh.returndata = ShadowMemory(None if result.success else ranges)
            return
        sh.returndata = ShadowMemory(ranges)
        n = min(req.out_size, len(result.output))
        if n:
            sh.memory.paste(req.out_offset, n, ranges)

    # -- hook table ------------------------------------------------------------

    def _build_handlers(self) -> List[Callable[[CallFrame], None]]:
        table = list(_static_table())
        table[_SLOAD], table[_SSTORE], table[_JUMPI] = self._sload, self._sstore, self._jumpi
        return table

    def _sload(self, f: CallFrame) -> None:
        f.shadow.stack[-1] = self.on_sload(f.context_address, f.stack[-1])

    def _sstore(self, f: CallFrame) -> None:
        st = f.shadow.stack
        slot = f.stack[-1]
        value_taint = st[-2]
        if not f.static:
            if self.sstore_guard is not None:
                self.sstore_guard(f, slot)
            self.on_sstore(f.context_address, slot, value_taint)
        del st[-2:]

    def _jumpi(self, f: CallFrame) -> None:
        st = f.shadow.stack
        cond = st[-2]
        if cond:
            self.on_jumpi(cond, f.influences)
        del st[-2:]


# -- module-level hook functions (no engine state needed) -------------------

def _noop(f: CallFrame) -> None:
    return None


def _push_empty(f: CallFrame) -> None:
    f.shadow.stack.append(EMPTY)


def _generic(pops: int, pushes: int) -> Callable[[CallFrame], None]:
    if pops == pushes == 0 or (pops == 1 and pushes == 1):
        return _noop
    if pushes == 0:
        def drop(f: CallFrame) -> None:
            del f.shadow.stack[-pops:]
        return drop
    if pops == 0:
        return _push_empty
    if pops == 2 and pushes == 1:
        return _merge2

    def merge(f: CallFrame) -> None:
        st = f.shadow.stack
        merged = union(st[-pops:])
        del st[-pops:]
        st.append(merged)
    return merge


def _merge2(f: CallFrame) -> None:
    st = f.shadow.stack
    a = st.pop()
    if a:
        b = st[-1]
        st[-1] = a | b if b else a


def _make_dup(n: int) -> Callable[[CallFrame], None]:
    def dup(f: CallFrame) -> None:
        st = f.shadow.stack
        st.append(st[-n])
    return dup


def _make_swap(n: int) -> Callable[[CallFrame], None]:
    k = -n - 1

    def swap(f: CallFrame) -> None:
        st = f.shadow.stack
        st[-1], st[k] = st[k], st[-1]
    return swap


def _fits(f: CallFrame, offset: int, size: int) -> bool:
    # Out-of-range accesses fault in the interpreter right after this hook.
    return offset + size <= f.mem_limit


def _mload(f: CallFrame) -> None:
    off = f.stack[-1]
    sh = f.shadow
    sh.stack[-1] = sh.memory.read(off, 32) if _fits(f, off, 32) else EMPTY


def _mstore(f: CallFrame) -> None:
    off = f.stack[-1]
    sh = f.shadow
    if _fits(f, off, 32):
        sh.memory.write(off, 32, sh.stack[-2])
    del sh.stack[-2:]


def _mstore8(f: CallFrame) -> None:
    off = f.stack[-1]
    sh = f.shadow
    if _fits(f, off, 1):
        sh.memory.write(off, 1, sh.stack[-2])
    del sh.stack[-2:]


def _keccak(f: CallFrame) -> None:
    s = f.stack
    off, size = s[-1], s[-2]
    sh = f.shadow
    del sh.stack[-1]
    sh.stack[-1] = sh.memory.read(off, size) if size and _fits(f, off, size) else EMPTY


def _calldataload(f: CallFrame) -> None:
    off = f.stack[-1]
    sh = f.shadow
    n = len(f.calldata)
    sh.stack[-1] = sh.calldata.read(off, min(32, n - off)) if off < n else EMPTY


def _copy(f: CallFrame, source: Optional[ShadowMemory], source_len: int) -> None:
    s = f.stack
    dest, off, size = s[-1], s[-2], s[-3]
    sh = f.shadow
    del sh.stack[-3:]
    if not size or not _fits(f, dest, size):
        return
    ranges: Ranges = []
    if source is not None and off < source_len:
        ranges = source.slice(off, min(size, source_len - off))
    sh.memory.paste(dest, size, ranges)


def _calldatacopy(f: CallFrame) -> None:
    _copy(f, f.shadow.calldata, len(f.calldata))


def _codecopy(f: CallFrame) -> None:
    _copy(f, None, 0)


def _returndatacopy(f: CallFrame) -> None:
    _copy(f, f.shadow.returndata, len(f.return_data))


def _output(f: CallFrame) -> None:
    s = f.stack
    off, size = s[-1], s[-2]
    sh = f.shadow
    sh.output = sh.memory.slice(off, size) if size and _fits(f, off, size) else []
    del sh.stack[-2:]


def _call_hook(f: CallFrame, pops: int, in_index: int) -> None:
    s = f.stack
    in_off, in_size = s[in_index], s[in_index - 1]
    sh = f.shadow
    st = sh.stack
    sh.pending = union(st[-pops:])
    del st[-pops:]
    if in_size and _fits(f, in_off, in_size):
        sh.call_input = sh.memory.slice(in_off, in_size)
    else:
        sh.call_input = []


def _call7(f: CallFrame) -> None:
    _call_hook(f, 7, -4)


def _call6(f: CallFrame) -> None:
    _call_hook(f, 6, -3)


def _create(f: CallFrame) -> None:
    sh = f.shadow
    st = sh.stack
    sh.pending = union(st[-3:])
    del st[-3:]


_SLOAD, _SSTORE, _JUMPI = 0x54, 0x55, 0x57
_STATIC: List[Callable[[CallFrame], None]] = []


def _static_table() -> List[Callable[[CallFrame], None]]:
    """Hooks that need no engine state, built once per process."""
    if _STATIC:
        return _STATIC
    table: List[Callable[[CallFrame], None]] = [_noop] * 256
    special = {
        "MLOAD": _mload, "MSTORE": _mstore, "MSTORE8": _mstore8,
        "KECCAK256": _keccak, "CALLDATALOAD": _calldataload,
        "CALLDATACOPY": _calldatacopy, "CODECOPY": _codecopy,
        "RETURNDATACOPY": _returndatacopy, "RETURN": _output,
        "REVERT": _output, "CREATE": _create,
        "CALL": _call7, "CALLCODE": _call7,
        "DELEGATECALL": _call6, "STATICCALL": _call6,
    }
    for code, info in OPCODES.items():
        name = info.name
        if name in special:
            table[code] = special[name]
        elif name.startswith("PUSH"):
            table[code] = _push_empty
        elif name.startswith("DUP"):
            table[code] = _make_dup(info.pops)
        elif name.startswith("SWAP"):
            table[code] = _make_swap(info.pops - 1)
        else:
            table[code] = _generic(info.pops, info.pushes)
    _STATIC.extend(table)
    return _STATIC
