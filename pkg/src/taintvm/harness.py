"""Transaction execution over a ``WorldState``.

``Executor`` is the interpreter host for one transaction: it opens and
closes frames for sub-calls and creates, snapshots state at every call
boundary, and wires the taint engine and detector in when tainting is on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from .detector import AttackDetected, AttackReport, CallTree, Detector, Mode, NodeKind
from .evm.frame import (
    MASK160,
    STOPPED,
    CallFrame,
    CallKind,
    CallRequest,
    CallResult,
    OutcomeKind,
    StepOutcome,
)
from .evm.interpreter import execute_frame
from .evm.opcodes import OPCODES, GasSchedule
from .state import WorldState, derive_contract_address
from .taint import TaintEngine

MAX_DEPTH = 1024


class Status(str, Enum):
    SUCCESS = "Success"
    REVERTED = "Reverted"
    ATTACK_ABORTED = "AttackAborted"
    FAULT = "Fault"


@dataclass
class Transaction:
    sender: int
    to: Optional[int]  # None creates a contract from ``data``
    value: int = 0
    data: bytes = b""
    gas_limit: int = 10_000_000


@dataclass
class Config:
    mode: Mode = Mode.ENFORCE
    taint: bool = True
    lock_reverted: bool = True
    trace: bool = False
    max_depth: int = MAX_DEPTH
    schedule: GasSchedule = field(default_factory=GasSchedule)

    def __post_init__(self) -> None:
        self.mode = Mode(self.mode)


@dataclass
class Receipt:
    status: Status
    output: bytes = b""
    attacks: List[AttackReport] = field(default_factory=list)
    events: List[Tuple[Any, ...]] = field(default_factory=list)
    gas_used: int = 0
    error: Optional[str] = None
    contract_address: Optional[int] = None
    tree: Optional[CallTree] = None
    instructions: int = 0
    max_depth: int = 0
    trace: Optional[List[Dict[str, Any]]] = None

    @property
    def attack_report(self) -> Optional[AttackReport]:
        return self.attacks[0] if self.attacks else None

    @property
    def flagged_slots(self) -> set:
        return {r.slot for r in self.attacks}

    @property
    def call_tree(self) -> Optional[List[Dict[str, Any]]]:
        return self.tree.to_json() if self.tree is not None else None


class Tracer:
    """Collects one record per executed instruction."""

    def __init__(self) -> None:
        self.records: List[Dict[str, Any]] = []
        self.current: Optional[Dict[str, Any]] = None

    def begin(self, f: CallFrame, op: int) -> None:
        info = OPCODES.get(op)
        pops = info.pops if info else 0
        rec: Dict[str, Any] = {
            "depth": f.depth,
            "node": f.node_id,
            "pc": f.pc,
            "op": info.name if info else f"0x{op:02x}",
            "stack_top": hex(f.stack[-1]) if f.stack else None,
            "taints": None,
            "lock_check": None,
        }
        if f.shadow is not None and pops <= len(f.shadow.stack):
            operands = f.shadow.stack[len(f.shadow.stack) - pops:][::-1]
            rec["taints"] = [sorted(t.to_json() for t in ts) for ts in operands]
        self.records.append(rec)
        self.current = rec


_NODE_KIND = {
    CallKind.CALL: NodeKind.CALL,
    CallKind.CALLCODE: NodeKind.CALLCODE,
    CallKind.DELEGATECALL: NodeKind.DELEGATECALL,
    CallKind.STATICCALL: NodeKind.STATICCALL,
    CallKind.CREATE: NodeKind.CREATE,
}


class Executor:
    def __init__(self, world: WorldState, config: Optional[Config] = None,
                 transaction: int = 0) -> None:
        self.world = world
        self.config = config or Config()
        self.schedule = self.config.schedule
        self.events: List[Tuple[Any, ...]] = []
        self.instructions = 0
        self.max_depth_seen = 0
        self.tracer = Tracer() if self.config.trace else None
        if self.config.taint:
            self.detector: Optional[Detector] = Detector(
                self.config.mode, transaction, self.config.lock_reverted)
            self.taint: Optional[TaintEngine] = TaintEngine(self._guard_sstore)
        else:
            self.detector = None
            self.taint = None

    # -- detector hook ---------------------------------------------------------

    def _guard_sstore(self, f: CallFrame, slot: int) -> None:
        report = self.detector.check_sstore(f.node_id, f.context_address, slot, f.pc)
        if self.tracer is not None and self.tracer.current is not None:
            self.tracer.current["lock_check"] = "attack" if report else "allow"
        if report is not None and self.detector.mode is Mode.ENFORCE:
            raise AttackDetected(report)

    # -- frame management --------------------------------------------------------

    def _new_frame(self, code: bytes, *, kind: CallKind, code_address: int,
                   context: int, caller: int, value: int, data: bytes, gas: int,
                   static: bool, depth: int, parent: Optional[CallFrame]) -> CallFrame:
        frame = CallFrame(
            code, code_address=code_address, context_address=context, caller=caller,
            call_value=value, calldata=data, gas=gas, static=static, depth=depth,
            kind=kind, mem_limit=self.schedule.memory_limit,
        )
        if depth > self.max_depth_seen:
            self.max_depth_seen = depth
        if self.detector is not None:
            parent_node = parent.node_id if parent is not None else 0
            frame.node_id = self.detector.tree.enter_call(parent_node, context, _NODE_KIND[kind])
            self.taint.enter_frame(frame, parent)
        return frame

    def open_call(self, req: CallRequest, *, depth: int, sender: int,
                  parent: Optional[CallFrame] = None) -> Union[CallFrame, CallResult]:
        """Start a message call from a frame at call-stack ``depth``.

        Returns the callee frame, or a finished ``CallResult`` when the call
        fails up front or the target has no code.
        """
        world = self.world
        if depth >= self.config.max_depth:
            return CallResult(False, gas_left=req.gas, reason="DepthLimit")
        kind = req.kind
        target = req.target & MASK160
        static = parent.static if parent is not None else False
        if kind is CallKind.CALL:
            context, caller, value = target, sender, req.value
        elif kind is CallKind.CALLCODE:
            context, caller, value = sender, sender, req.value
        elif kind is CallKind.DELEGATECALL:
            assert parent is not None, "DELEGATECALL needs a calling frame"
            context, caller, value = parent.context_address, parent.caller, parent.call_value
        else:
            context, caller, value = target, sender, 0
            static = True
        moves_value = kind is CallKind.CALL or kind is CallKind.CALLCODE
        if moves_value and world.get_balance(sender) < req.value:
            return CallResult(False, gas_left=req.gas, reason="InsufficientBalance")
        snap = world.snapshot()
        if kind is CallKind.CALL:
            world.transfer(sender, target, value)
        self.events.append(("CALL", kind.value, sender, target, req.value))
        frame = self._new_frame(
            world.get_code(target), kind=kind, code_address=target, context=context,
            caller=caller, value=value, data=req.data, gas=req.gas, static=static,
            depth=depth + 1, parent=parent)
        frame.snapshot = snap
        if not frame.code:
            return self.close_frame(frame, STOPPED)
        return frame

    def open_create(self, creator: int, init_code: bytes, value: int, gas: int, *,
                    depth: int, parent: Optional[CallFrame] = None) -> Union[CallFrame, CallResult]:
        world = self.world
        if depth >= self.config.max_depth:
            return CallResult(False, gas_left=gas, reason="DepthLimit")
        if world.get_balance(creator) < value:
            return CallResult(False, gas_left=gas, reason="InsufficientBalance")
        address = derive_contract_address(creator, world.increment_nonce(creator))
        if world.get_code(address) or world.get_nonce(address):
            return CallResult(False, gas_left=0, reason="AddressCollision")
        snap = world.snapshot()
        world.set_nonce(address, 1)
        world.transfer(creator, address, value)
        self.events.append(("CREATE", creator, address, value))
        frame = self._new_frame(
            init_code, kind=CallKind.CREATE, code_address=address, context=address,
            caller=creator, value=value, data=b"", gas=gas, static=False,
            depth=depth + 1, parent=parent)
        frame.snapshot = snap
        if not frame.code:
            return self.close_frame(frame, STOPPED)
        return frame

    # interpreter host protocol

    def open_frame(self, parent: CallFrame, req: CallRequest) -> Union[CallFrame, CallResult]:
        if req.kind is CallKind.CREATE:
            return self.open_create(parent.context_address, req.data, req.value, req.gas,
                                    depth=parent.depth, parent=parent)
        return self.open_call(req, depth=parent.depth, sender=parent.context_address,
                              parent=parent)

    def close_frame(self, frame: CallFrame, outcome: StepOutcome) -> CallResult:
        world = self.world
        success = outcome.kind is OutcomeKind.STOP or outcome.kind is OutcomeKind.RETURN
        address = None
        if success and frame.kind is CallKind.CREATE:
            world.set_code(frame.context_address, outcome.output)
            address = frame.context_address
        if success:
            world.commit(frame.snapshot)
        else:
            world.revert_to(frame.snapshot)
        output_taint = None
        if self.detector is not None:
            self.detector.tree.exit_call(frame.node_id, frame.influences, reverted=not success)
            if outcome.kind is OutcomeKind.RETURN or outcome.kind is OutcomeKind.REVERT:
                output_taint = self.taint.frame_output(frame)
        output = b"" if (frame.kind is CallKind.CREATE and success) else outcome.output
        return CallResult(success, output, frame.gas, address, outcome.kind,
                          outcome.reason.value if outcome.reason else None, output_taint)

    def selfdestruct(self, frame: CallFrame, beneficiary: int) -> None:
        ctx = frame.context_address
        if beneficiary != ctx:
            self.world.transfer(ctx, beneficiary, self.world.get_balance(ctx))
        self.world.mark_destructed(ctx)

    # -- whole calls ---------------------------------------------------------------

    def run(self, opened: Union[CallFrame, CallResult]) -> CallResult:
        if isinstance(opened, CallFrame):
            return execute_frame(opened, self)
        return opened

    def message_call(self, req: CallRequest, *, depth: int, sender: int,
                     parent: Optional[CallFrame] = None) -> CallResult:
        return self.run(self.open_call(req, depth=depth, sender=sender, parent=parent))

    def create_contract(self, creator: int, init_code: bytes, value: int, *, depth: int,
                        gas: int = 10_000_000, parent: Optional[CallFrame] = None) -> CallResult:
        return self.run(self.open_create(creator, init_code, value, gas, depth=depth, parent=parent))


def _failed(error: str) -> Receipt:
    return Receipt(Status.FAULT, error=error)


def apply_transaction(world: WorldState, tx: Transaction, config: Optional[Config] = None,
                      transaction_id: int = 0) -> Receipt:
    """Execute ``tx`` against ``world``.

    Any failed outcome (revert, fault, aborted attack) leaves ``world``
    exactly as it was before the transaction, sender nonce included.
    """
    config = config or Config()
    if not world.exists(tx.sender):
        return _failed("SenderUnknown")
    if world.get_balance(tx.sender) < tx.value:
        return _failed("InsufficientBalance")
    ex = Executor(world, config, transaction_id)
    snap = world.snapshot()
    try:
        if tx.to is None:
            # the create path bumps the sender nonce itself
            result = ex.create_contract(tx.sender, tx.data, tx.value, depth=0, gas=tx.gas_limit)
        else:
            world.increment_nonce(tx.sender)
            req = CallRequest(CallKind.CALL, tx.to, tx.value, tx.data, tx.gas_limit)
            result = ex.message_call(req, depth=0, sender=tx.sender)
    except AttackDetected as exc:
        world.revert_to(snap)
        return _receipt(ex, tx, Status.ATTACK_ABORTED, b"", tx.gas_limit, attacks=[exc.report])

    if result.success:
        world.commit(snap)
        world.finalize()
        status = Status.SUCCESS
    else:
        world.revert_to(snap)
        status = Status.REVERTED if result.outcome is OutcomeKind.REVERT else Status.FAULT
    attacks = list(ex.detector.reports) if ex.detector is not None else []
    return _receipt(ex, tx, status, result.output, tx.gas_limit - result.gas_left,
                    attacks=attacks, error=result.reason, address=result.address)


def _receipt(ex: Executor, tx: Transaction, status: Status, output: bytes, gas_used: int, *,
             attacks: List[AttackReport], error: Optional[str] = None,
             address: Optional[int] = None) -> Receipt:
    return Receipt(
        status=status,
        output=output,
        attacks=attacks,
        events=ex.events,
        gas_used=gas_used,
        error=error,
        contract_address=address,
        tree=ex.detector.tree if ex.detector is not None else None,
        instructions=ex.instructions,
        max_depth=ex.max_depth_seen,
        trace=ex.tracer.records if ex.tracer is not None else None,
    )


def run_code(code: bytes, calldata: bytes = b"", *, config: Optional[Config] = None,
             world: Optional[WorldState] = None, address: int = 0xC0DE,
             sender: int = 0xE0A, value: int = 0, gas: int = 10_000_000) -> Tuple[Receipt, WorldState]:
    """Deploy ``code`` at ``address`` in a scratch world and call it once."""
    world = world if world is not None else WorldState()
    if not world.exists(sender):
        world.create_account(sender, balance=10**18)
    world.set_code(address, code)
    world.finalize()
    receipt = apply_transaction(world, Transaction(sender, address, value, calldata, gas), config)
    return receipt, world
