"""Accounts, storage and a journal for snapshot/rollback.

Every mutation appends ``(kind, address, key, old_value)`` to the journal.
A snapshot is a journal position; reverting pops entries back to it, which
restores all fields bit-exactly in O(writes).
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, Optional, Set, Tuple, Union

from .hashing import keccak256

MASK160 = (1 << 160) - 1


def addr_hex(address: int) -> str:
    return f"0x{address:040x}"


def word_hex(value: int) -> str:
    return hex(value)


def parse_int(value: Union[int, str]) -> int:
    if isinstance(value, bool):
        raise TypeError("booleans are not words")
    if isinstance(value, int):
        return value
    text = value.strip().lower()
    return int(text, 16) if text.startswith("0x") else int(text)


def derive_contract_address(creator: int, nonce: int) -> int:
    """First 20 bytes of Keccak-256(creator || nonce as 8-byte big-endian)."""
    blob = creator.to_bytes(20, "big") + nonce.to_bytes(8, "big")
    return int.from_bytes(keccak256(blob)[:20], "big")


@dataclass
class Account:
    balance: int = 0
    nonce: int = 0
    code: bytes = b""
    storage: Dict[int, int] = field(default_factory=dict)


class WorldState:
    def __init__(self) -> None:
        self.accounts: Dict[int, Account] = {}
        self._journal: List[Tuple[str, int, Any, Any]] = []
        self._snapshots: List[int] = []
        self._destructed: Set[int] = set()

    # -- reads ---------------------------------------------------------------

    def exists(self, address: int) -> bool:
        return address in self.accounts

    def get(self, address: int) -> Optional[Account]:
        return self.accounts.get(address)

    def get_balance(self, address: int) -> int:
        acct = self.accounts.get(address)
        return acct.balance if acct is not None else 0

    def get_nonce(self, address: int) -> int:
        acct = self.accounts.get(address)
        return acct.nonce if acct is not None else 0

    def get_code(self, address: int) -> bytes:
        acct = self.accounts.get(address)
        return acct.code if acct is not None else b""

    def get_storage(self, address: int, slot: int) -> int:
        acct = self.accounts.get(address)
        if acct is None:
            return 0
        return acct.storage.get(slot, 0)

    def total_balance(self) -> int:
        return sum(a.balance for a in self.accounts.values())

    # -- writes --------------------------------------------------------------

    def _ensure(self, address: int) -> Account:
        acct = self.accounts.get(address)
        if acct is None:
            acct = self.accounts[address] = Account()
            self._journal.append(("new", address, None, None))
        return acct

    def create_account(self, address: int, *, balance: int = 0, nonce: int = 0,
                       code: bytes = b"", storage: Optional[Mapping[int, int]] = None) -> Account:
        acct = self._ensure(address)
        self.set_balance(address, balance)
        self.set_nonce(address, nonce)
        self.set_code(address, code)
        for slot, value in (storage or {}).items():
            self.set_storage(address, slot, value)
        return acct

    def set_balance(self, address: int, value: int) -> None:
        acct = self._ensure(address)
        self._journal.append(("balance", address, None, acct.balance))
        acct.balance = value

    def set_nonce(self, address: int, value: int) -> None:
        acct = self._ensure(address)
        self._journal.append(("nonce", address, None, acct.nonce))
        acct.nonce = value

    def increment_nonce(self, address: int) -> int:
        old = self.get_nonce(address)
        self.set_nonce(address, old + 1)
        return old

    def set_code(self, address: int, code: bytes) -> None:
        acct = self._ensure(address)
        self._journal.append(("code", address, None, acct.code))
        acct.code = bytes(code)

    def set_storage(self, address: int, slot: int, value: int) -> None:
        acct = self._ensure(address)
        storage = acct.storage
        self._journal.append(("storage", address, slot, storage.get(slot, 0)))
        if value:
            storage[slot] = value
        else:
            storage.pop(slot, None)

    def transfer(self, src: int, dst: int, value: int) -> bool:
        """Move ``value`` wei; False (and no change) if ``src`` cannot cover it."""
        if self.get_balance(src) < value:
            return False
        if value == 0:
            return True
        self.set_balance(src, self.get_balance(src) - value)
        self.set_balance(dst, self.get_balance(dst) + value)
        return True

    def mark_destructed(self, address: int) -> None:
        if address not in self._destructed:
            self._destructed.add(address)
            self._journal.append(("destruct", address, None, None))

    # -- journal -------------------------------------------------------------

    def snapshot(self) -> int:
        self._snapshots.append(len(self._journal))
        return len(self._snapshots) - 1

    def revert_to(self, snapshot_id: int) -> None:
        assert 0 <= snapshot_id < len(self._snapshots), f"unknown snapshot {snapshot_id}"
        target = self._snapshots[snapshot_id]
        del self._snapshots[snapshot_id:]
        journal = self._journal
        accounts = self.accounts
        while len(journal) > target:
            kind, address, key, old = journal.pop()
            if kind == "storage":
                if old:
                    accounts[address].storage[key] = old
                else:
                    accounts[address].storage.pop(key, None)
            elif kind == "balance":
                accounts[address].balance = old
            elif kind == "nonce":
                accounts[address].nonce = old
            elif kind == "code":
                accounts[address].code = old
            elif kind == "new":
                del accounts[address]
            elif kind == "destruct":
                self._destructed.discard(address)
            elif kind == "delete":
                accounts[address] = old

    def commit(self, snapshot_id: int) -> None:
        """Drop ``snapshot_id`` (and newer ones) while keeping their changes."""
        assert 0 <= snapshot_id < len(self._snapshots), f"unknown snapshot {snapshot_id}"
        del self._snapshots[snapshot_id:]

    def finalize(self) -> None:
        """End-of-transaction housekeeping: remove self-destructed accounts."""
        for address in sorted(self._destructed):
            acct = self.accounts.pop(address, None)
            if acct is not None:
                self._journal.append(("delete", address, None, acct))
        self._destructed.clear()
        if not self._snapshots:
            self._journal.clear()

    @property
    def journal_length(self) -> int:
        return len(self._journal)

    # -- serialization -------------------------------------------------------

    def copy(self) -> "WorldState":
        other = WorldState()
        other.accounts = {
            a: Account(acct.balance, acct.nonce, acct.code, dict(acct.storage))
            for a, acct in self.accounts.items()
        }
        return other

    def deepcopy_accounts(self) -> Dict[int, Account]:
        return copy.deepcopy(self.accounts)

    def to_json(self) -> Dict[str, Any]:
        return {
            "accounts": {
                addr_hex(a): {
                    "balance": word_hex(acct.balance),
                    "nonce": acct.nonce,
                    "code": "0x" + acct.code.hex(),
                    "storage": {word_hex(k): word_hex(v)
                                for k, v in sorted(acct.storage.items()) if v},
                }
                for a, acct in sorted(self.accounts.items())
            }
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return "0x" + keccak256(self.canonical_json().encode()).hex()

    @classmethod
    def from_json(cls, doc: Mapping[str, Any]) -> "WorldState":
        world = cls()
        for key, raw in doc.get("accounts", {}).items():
            code = raw.get("code", "0x")
            code = bytes.fromhex(code[2:] if code.startswith("0x") else code)
            storage = {parse_int(k): parse_int(v) for k, v in raw.get("storage", {}).items()}
            world.accounts[parse_int(key) & MASK160] = Account(
                parse_int(raw.get("balance", 0)),
                int(raw.get("nonce", 0)),
                code,
                {k: v for k, v in storage.items() if v},
            )
        return world

    def __iter__(self) -> Iterator[int]:
        return iter(self.accounts)
