"""Dynamic call tree and write-lock based re-entrancy detection.

Each node records ``influence`` (the storage slots its own execution used
for branch decisions) when it exits. A node's lock set is the union of
influence sets of every finished node below it that ran in the same storage
context. An SSTORE to a locked slot means some re-entrant invocation made a
decision on a value that is now being changed underneath it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Set, Tuple

Slot = Tuple[int, int]  # (context address, storage slot)


class NodeKind(str, Enum):
    ROOT = "Root"
    CALL = "Call"
    CALLCODE = "CallCode"
    DELEGATECALL = "DelegateCall"
    STATICCALL = "StaticCall"
    CREATE = "Create"


class Mode(str, Enum):
    ENFORCE = "enforce"
    MONITOR = "monitor"


def _slots_json(slots: Set[Slot]) -> List[List[str]]:
    return [[f"0x{c:040x}", hex(s)] for c, s in sorted(slots)]


@dataclass
class CallTreeNode:
    id: int
    parent: Optional[int]
    context_address: Optional[int]
    kind: NodeKind
    depth: int
    children: List[int] = field(default_factory=list)
    influence: Set[Slot] = field(default_factory=set)
    locks: Set[Slot] = field(default_factory=set)
    open: bool = True
    reverted: bool = False

    def to_json(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "parent": self.parent,
            "context": None if self.context_address is None else f"0x{self.context_address:040x}",
            "kind": self.kind.value,
            "depth": self.depth,
            "children": list(self.children),
            "influence": _slots_json(self.influence),
            "locks": _slots_json(self.locks),
            "open": self.open,
            "reverted": self.reverted,
        }


class CallTree:
    """Call tree with lock sets kept current for every open node.

    ``lock_reverted`` controls whether a node that reverted still adds its
    influence set to its ancestors' locks (the conservative default).
    """

    def __init__(self, lock_reverted: bool = True) -> None:
        self.lock_reverted = lock_reverted
        self.nodes: List[CallTreeNode] = [CallTreeNode(0, None, None, NodeKind.ROOT, 0)]

    @property
    def root(self) -> CallTreeNode:
        return self.nodes[0]

    def enter_call(self, parent: int, context_address: int, kind: NodeKind) -> int:
        p = self.nodes[parent]
        assert p.open, f"parent node {parent} is closed"
        node = CallTreeNode(len(self.nodes), parent, context_address, kind, p.depth + 1)
        self.nodes.append(node)
        p.children.append(node.id)
        return node.id

    def exit_call(self, node_id: int, influences: Set[Slot], reverted: bool = False) -> None:
        node = self.nodes[node_id]
        assert node.open, f"node {node_id} already closed"
        assert not any(self.nodes[c].open for c in node.children), \
            f"node {node_id} closed before its children"
        node.influence = set(influences)
        node.open = False
        node.reverted = reverted
        if not node.influence or (reverted and not self.lock_reverted):
            return
        ctx = node.context_address
        p = node.parent
        while p is not None:
            anc = self.nodes[p]
            if anc.context_address == ctx:
                anc.locks |= node.influence
            p = anc.parent

    def subtree(self, node_id: int) -> Iterator[CallTreeNode]:
        todo = list(reversed(self.nodes[node_id].children))
        while todo:
            n = self.nodes[todo.pop()]
            yield n
            todo.extend(reversed(n.children))

    def _contributes(self, node: CallTreeNode) -> bool:
        return not node.open and (self.lock_reverted or not node.reverted)

    def recompute_locks(self, node_id: int) -> Set[Slot]:
        """Lock set of ``node_id`` computed from scratch over its subtree."""
        ctx = self.nodes[node_id].context_address
        out: Set[Slot] = set()
        for n in self.subtree(node_id):
            if n.context_address == ctx and self._contributes(n):
                out |= n.influence
        return out

    def locking_nodes(self, node_id: int, slot: Slot) -> List[int]:
        ctx = self.nodes[node_id].context_address
        return [n.id for n in self.subtree(node_id)
                if n.context_address == ctx and self._contributes(n) and slot in n.influence]

    def is_locked(self, node_id: int, context_address: int, slot: int) -> bool:
        return (context_address, slot) in self.nodes[node_id].locks

    def to_json(self) -> List[Dict[str, Any]]:
        return [n.to_json() for n in self.nodes]


@dataclass
class AttackReport:
    transaction: int
    node: int
    context_address: int
    slot: int
    pc: int
    locking_nodes: List[int]
    call_tree: List[Dict[str, Any]]

    def to_json(self) -> Dict[str, Any]:
        return {
            "transaction": self.transaction,
            "node": self.node,
            "context": f"0x{self.context_address:040x}",
            "slot": hex(self.slot),
            "pc": self.pc,
            "locking_nodes": list(self.locking_nodes),
            "call_tree": self.call_tree,
        }


class AttackDetected(Exception):
    """Raised in enforce mode to unwind the whole transaction."""

    def __init__(self, report: AttackReport) -> None:
        super().__init__(f"re-entrancy: write to locked slot {hex(report.slot)}")
        self.report = report


class Detector:
    def __init__(self, mode: Mode = Mode.ENFORCE, transaction: int = 0,
                 lock_reverted: bool = True) -> None:
        self.mode = Mode(mode)
        self.transaction = transaction
        self.tree = CallTree(lock_reverted)
        self.reports: List[AttackReport] = []

    def check_sstore(self, node_id: int, context_address: int, slot: int,
                     pc: int = 0) -> Optional[AttackReport]:
        """Return (and record) a report if the write hits a locked slot."""
        if not self.tree.is_locked(node_id, context_address, slot):
            return None
        report = AttackReport(
            self.transaction, node_id, context_address, slot, pc,
            self.tree.locking_nodes(node_id, (context_address, slot)),
            self.tree.to_json(),
        )
        self.reports.append(report)
        return report
