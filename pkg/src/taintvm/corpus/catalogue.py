"""Fixture manifests: loading, value resolution and replay.

A manifest is a JSON document::

    {
      "name": "classic-dao",
      "description": "...",
      "tags": ["attack"],
      "params": {"reentry_depth": 3},
      "accounts": {
        "victim": {"address": "0x7000", "code": "credit_bank.asm", "balance": 0},
        ...
      },
      "transactions": [
        {"from": "alice", "to": "victim", "value": 10, "calldata": [1],
         "expect": {"verdict": "Clean"}},
        ...
      ],
      "drain": {"account": "attacker", "entitlement": 2}
    }

Value expressions accepted wherever a word is expected: integers, decimal
or ``0x`` strings, ``@name`` for an account address, ``$param`` for a
parameter and ``map:<base>:<key>`` for the mapping slot
``keccak(key . base)``, where ``key`` is itself an expression.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from ..detector import Mode
from ..harness import Config, Receipt, Transaction, apply_transaction
from ..hashing import keccak_word
from ..state import WorldState, parse_int
from .asm import assemble_file

BUILTIN_ROOT = Path(__file__).with_name("fixtures")

Slot = Tuple[int, int]


class UnknownFixture(KeyError):
    pass


class ManifestError(ValueError):
    pass


class Verdict(str, Enum):
    ATTACK = "Attack"
    CLEAN = "Clean"


def corpus_root() -> Path:
    env = os.environ.get("TAINTVM_CORPUS_DIR")
    return Path(env) if env else BUILTIN_ROOT


@dataclass(frozen=True)
class Expectation:
    verdict: Verdict
    flagged_slots: FrozenSet[Slot] = frozenset()
    fp_class: Optional[str] = None
    status: Optional[str] = None


@dataclass(frozen=True)
class FixtureTx:
    label: str
    transaction: Transaction
    expect: Optional[Expectation]


@dataclass(frozen=True)
class Drain:
    """How to measure what an attack gained, and what was legitimately owed."""

    entitlement: int
    account: Optional[int] = None  # measure this account's balance
    storage_account: Optional[int] = None  # or the sum of these storage slots
    slots: Tuple[int, ...] = ()

    def measure(self, world: WorldState) -> int:
        if self.account is not None:
            return world.get_balance(self.account)
        return sum(world.get_storage(self.storage_account, s) for s in self.slots)


@dataclass(frozen=True)
class Fixture:
    name: str
    description: str
    tags: Tuple[str, ...]
    params: Mapping[str, int]
    addresses: Mapping[str, int]
    world_json: Mapping[str, Any]
    transactions: Tuple[FixtureTx, ...]
    drain: Optional[Drain] = None
    mode: Optional[str] = None
    source: Optional[str] = None

    def world(self) -> WorldState:
        """A fresh world with the fixture's initial accounts."""
        return WorldState.from_json(self.world_json)

    @property
    def is_attack(self) -> bool:
        return "attack" in self.tags

    @property
    def is_benign(self) -> bool:
        return "benign" in self.tags

    def name_of(self, address: int) -> str:
        for name, addr in self.addresses.items():
            if addr == address:
                return name
        return f"0x{address:040x}"


class _Resolver:
    def __init__(self, params: Mapping[str, int], addresses: Mapping[str, int]) -> None:
        self.params = params
        self.addresses = addresses

    def word(self, expr: Union[int, str]) -> int:
        if isinstance(expr, bool):
            raise ManifestError(f"boolean is not a word: {expr!r}")
        if isinstance(expr, int):
            return expr
        if not isinstance(expr, str):
            raise ManifestError(f"bad value expression {expr!r}")
        text = expr.strip()
        if text.startswith("@"):
            try:
                return self.addresses[text[1:]]
            except KeyError:
                raise ManifestError(f"unknown account {text[1:]!r}") from None
        if text.startswith("$"):
            try:
                return self.params[text[1:]]
            except KeyError:
                raise ManifestError(f"unknown parameter {text[1:]!r}") from None
        if text.startswith("map:"):
            _, base, key = text.split(":", 2)
            return keccak_word(self.word(key), self.word(base))
        try:
            return parse_int(text)
        except ValueError:
            raise ManifestError(f"bad value expression {expr!r}") from None

    def account(self, name: str) -> int:
        if name not in self.addresses:
            raise ManifestError(f"unknown account {name!r}")
        return self.addresses[name]


def _read_code(spec: str, base: Path) -> bytes:
    if spec.endswith(".asm"):
        path = base / spec
        if not path.is_file():
            raise ManifestError(f"assembly file not found: {path}")
        return assemble_file(path)
    text = spec[2:] if spec.startswith("0x") else spec
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise ManifestError(f"code is neither an .asm path nor hex: {spec!r}") from None


def _calldata(raw: Mapping[str, Any], r: _Resolver, base: Path) -> bytes:
    if "calldata" in raw:
        return b"".join(r.word(w).to_bytes(32, "big") for w in raw["calldata"])
    if "data" in raw:
        return _read_code(raw["data"], base)
    return b""


def _expectation(raw: Mapping[str, Any], r: _Resolver) -> Expectation:
    try:
        verdict = Verdict(raw["verdict"])
    except (KeyError, ValueError):
        raise ManifestError(f"expectation needs verdict Attack or Clean: {raw!r}") from None
    flagged = frozenset((r.account(ctx), r.word(slot)) for ctx, slot in raw.get("flagged_slots", []))
    return Expectation(verdict, flagged, raw.get("fp_class"), raw.get("status"))


def parse_manifest(doc: Mapping[str, Any], base: Path,
                   overrides: Optional[Mapping[str, int]] = None) -> Fixture:
    """Build a ``Fixture`` from a manifest document; ``base`` locates .asm files."""
    if not isinstance(doc, Mapping):
        raise ManifestError("manifest must be a JSON object")
    params = {k: int(v) for k, v in doc.get("params", {}).items()}
    for key, value in (overrides or {}).items():
        if key not in params:
            raise ManifestError(f"fixture has no parameter {key!r}")
        params[key] = int(value)
    accounts = doc.get("accounts")
    if not isinstance(accounts, Mapping) or not accounts:
        raise ManifestError("manifest lists no accounts")
    addresses: Dict[str, int] = {}
    for name, raw in accounts.items():
        try:
            addresses[name] = parse_int(raw["address"])
        except (KeyError, ValueError, TypeError, AttributeError):
            raise ManifestError(f"account {name!r} needs a valid address") from None
        if not 0 <= addresses[name] < 1 << 160:
            raise ManifestError(f"account {name!r} address out of range")
    r = _Resolver(params, addresses)

    world = WorldState()
    for name, raw in accounts.items():
        code = _read_code(raw["code"], base) if raw.get("code") else b""
        storage = {r.word(k): r.word(v) for k, v in raw.get("storage", {}).items()}
        world.create_account(
            addresses[name], balance=r.word(raw.get("balance", 0)),
            nonce=int(raw.get("nonce", 1 if code else 0)), code=code, storage=storage)

    txs: List[FixtureTx] = []
    for i, raw in enumerate(doc.get("transactions", [])):
        to = raw.get("to")
        tx = Transaction(
            sender=r.account(raw["from"]),
            to=None if to is None else r.account(to),
            value=r.word(raw.get("value", 0)),
            data=_calldata(raw, r, base),
            gas_limit=int(raw.get("gas_limit", 10_000_000)),
        )
        expect = _expectation(raw["expect"], r) if "expect" in raw else None
        txs.append(FixtureTx(raw.get("label", f"tx{i}"), tx, expect))

    drain = None
    if "drain" in doc:
        d = doc["drain"]
        if "account" in d:
            drain = Drain(r.word(d["entitlement"]), account=r.account(d["account"]))
        else:
            drain = Drain(r.word(d["entitlement"]), storage_account=r.account(d["storage_account"]),
                          slots=tuple(r.word(s) for s in d["slots"]))

    return Fixture(
        name=doc.get("name", "scenario"),
        description=doc.get("description", ""),
        tags=tuple(doc.get("tags", [])),
        params=params,
        addresses=addresses,
        world_json=world.to_json(),
        transactions=tuple(txs),
        drain=drain,
        mode=doc.get("mode"),
    )


def load_manifest(path: Union[str, Path], **params: int) -> Fixture:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from None
    fixture = parse_manifest(doc, path.parent, params)
    return _with_source(fixture, str(path))


def _with_source(fixture: Fixture, source: str) -> Fixture:
    return Fixture(**{**fixture.__dict__, "source": source})


def fixture_names(root: Optional[Path] = None) -> List[str]:
    root = root or corpus_root()
    return sorted(p.stem for p in root.glob("*.json"))


def load_fixture(name: str, **params: int) -> Fixture:
    """Load catalogue fixture ``name``; keyword arguments override its params."""
    path = corpus_root() / f"{name}.json"
    if not path.is_file():
        raise UnknownFixture(name)
    return load_manifest(path, **params)


def all_fixtures() -> List[Fixture]:
    return [load_fixture(n) for n in fixture_names()]


# -- replay -------------------------------------------------------------------


def verdict_of(receipt: Receipt) -> Verdict:
    return Verdict.ATTACK if receipt.attacks else Verdict.CLEAN


def flagged_of(receipt: Receipt) -> FrozenSet[Slot]:
    return frozenset((a.context_address, a.slot) for a in receipt.attacks)


@dataclass
class Outcome:
    fixture: Fixture
    receipts: List[Receipt]
    world: WorldState
    mismatches: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def check_expectation(ftx: FixtureTx, receipt: Receipt, fixture: Fixture,
                      mode: Mode = Mode.ENFORCE) -> List[str]:
    """Compare one receipt against its expectation.

    Expectations describe enforce mode, where the first hit aborts. In
    monitor mode execution continues, so the status is not checked and the
    expected slots need only be among those reported.
    """
    exp = ftx.expect
    if exp is None:
        return []
    out = []
    got = verdict_of(receipt)
    if got is not exp.verdict:
        out.append(f"{ftx.label}: expected {exp.verdict.value}, got {got.value}")
    flagged = flagged_of(receipt)
    if exp.verdict is Verdict.ATTACK and exp.flagged_slots:
        bad = flagged != exp.flagged_slots if mode is Mode.ENFORCE \
            else not exp.flagged_slots <= flagged
        if bad:
            shown = sorted((fixture.name_of(c), hex(s)) for c, s in flagged)
            out.append(f"{ftx.label}: flagged slots differ, got {shown}")
    if mode is Mode.ENFORCE and exp.status is not None and receipt.status.value != exp.status:
        out.append(f"{ftx.label}: expected status {exp.status}, got {receipt.status.value}")
    return out


def replay(fixture: Fixture, config: Optional[Config] = None,
           world: Optional[WorldState] = None, check: bool = True) -> Outcome:
    """Apply every transaction of ``fixture`` in order on a fresh world."""
    config = config or Config()
    world = world if world is not None else fixture.world()
    receipts = []
    mismatches: List[str] = []
    for i, ftx in enumerate(fixture.transactions):
        receipt = apply_transaction(world, ftx.transaction, config, transaction_id=i)
        receipts.append(receipt)
        if check and config.taint:
            mismatches += check_expectation(ftx, receipt, fixture, config.mode)
    return Outcome(fixture, receipts, world, mismatches)
