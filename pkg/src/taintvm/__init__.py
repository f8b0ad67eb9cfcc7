"""EVM interpreter with storage-dependence taint tracking and a write-lock
re-entrancy detector."""

from .detector import AttackDetected, AttackReport, CallTree, Detector, Mode, NodeKind
from .harness import Config, Executor, Receipt, Status, Transaction, apply_transaction, run_code
from .kernels import BACKEND
from .state import Account, WorldState, derive_contract_address
from .taint import EMPTY, ShadowMemory, Taint, TaintEngine

__version__ = "0.1.0"

__all__ = [
    "Account", "AttackDetected", "AttackReport", "BACKEND", "CallTree", "Config",
    "Detector", "EMPTY", "Executor", "Mode", "NodeKind", "Receipt", "ShadowMemory",
    "Status", "Taint", "TaintEngine", "Transaction", "WorldState",
    "apply_transaction", "derive_contract_address", "run_code",
]
