import copy

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import keccak256_reference
from taintvm.hashing import keccak256, keccak_word
from taintvm.state import Account, WorldState, derive_contract_address


def _reference_address(creator: int, nonce: int) -> int:
    blob = creator.to_bytes(20, "big") + nonce.to_bytes(8, "big")
    return int.from_bytes(keccak256_reference(blob)[:20], "big")


# values computed once with the reference sponge in tests/oracles.py
FROZEN_ADDRESSES = [
    (0xE0A, 0, 0x72B6B4575E0F99ECBF8DF233B547FFF7180B5516),
    (0x7000, 1, 0x173799EBA06CD113F9B9A9958F93B01802AC9874),
    (0xA11CE, 5, 0x1AFF9E6F4DDDD907BD97FE9397D66038CA4BD3AD),
]


@pytest.mark.parametrize("creator,nonce,expect", FROZEN_ADDRESSES)
def test_contract_address_matches_frozen_values(creator, nonce, expect):
    assert derive_contract_address(creator, nonce) == expect
    assert _reference_address(creator, nonce) == expect


def test_contract_address_depends_on_nonce():
    assert derive_contract_address(0xE0A, 0) != derive_contract_address(0xE0A, 1)
    assert derive_contract_address(0xE0A, 3) == derive_contract_address(0xE0A, 3)


@settings(max_examples=50, deadline=None)
@given(data=st.binary(max_size=400))
def test_keccak_matches_reference_sponge(data):
    assert keccak256(data) == keccak256_reference(data)


def test_mapping_slot_words():
    assert keccak_word(0xA77A, 0) == 0xB0768066164E1F3D1594C6CF094AB75E134FF8EA6783C790EFE40BCCFE5DF3BA
    assert keccak_word(0xC11E, 1) == 0x78CF3773B71B1E24666FAAA31582C72AB117FD9BCC245219EC160C1A60D9145F
    assert keccak256(b"").hex() == "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"


# -- journal -------------------------------------------------------------------


def test_snapshot_revert_single_write():
    w = WorldState()
    s = w.snapshot()
    w.set_storage(0xA, 1, 7)
    assert w.get_storage(0xA, 1) == 7
    w.revert_to(s)
    assert w.get_storage(0xA, 1) == 0
    assert not w.exists(0xA)


def test_nested_snapshots_unwind_innermost_first():
    w = WorldState()
    w.create_account(0xA, balance=5)
    outer = w.snapshot()
    w.set_balance(0xA, 6)
    inner = w.snapshot()
    w.set_balance(0xA, 7)
    w.revert_to(inner)
    assert w.get_balance(0xA) == 6
    w.revert_to(outer)
    assert w.get_balance(0xA) == 5
    with pytest.raises(AssertionError):
        w.revert_to(inner)


def test_commit_keeps_changes_but_outer_revert_still_undoes_them():
    w = WorldState()
    outer = w.snapshot()
    inner = w.snapshot()
    w.set_storage(0xA, 0, 1)
    w.commit(inner)
    assert w.get_storage(0xA, 0) == 1
    w.revert_to(outer)
    assert w.get_storage(0xA, 0) == 0


def test_writing_zero_reads_as_unset():
    w = WorldState()
    w.set_storage(0xA, 3, 9)
    w.set_storage(0xA, 3, 0)
    assert w.get_storage(0xA, 3) == 0
    assert 3 not in w.get(0xA).storage


def test_transfer_refuses_overdraft():
    w = WorldState()
    w.create_account(0xA, balance=3)
    assert not w.transfer(0xA, 0xB, 4)
    assert w.get_balance(0xA) == 3 and not w.exists(0xB)
    assert w.transfer(0xA, 0xB, 3)
    assert (w.get_balance(0xA), w.get_balance(0xB)) == (0, 3)


def test_destructed_accounts_vanish_at_finalize():
    w = WorldState()
    w.create_account(0xA, balance=1, code=b"\x00")
    s = w.snapshot()
    w.mark_destructed(0xA)
    assert w.exists(0xA)
    w.revert_to(s)
    w.finalize()
    assert w.exists(0xA)
    w.mark_destructed(0xA)
    w.finalize()
    assert not w.exists(0xA)


_ADDRS = st.sampled_from([0xA, 0xB, 0xC])
mutation = st.one_of(
    st.tuples(st.just("storage"), _ADDRS, st.integers(0, 4), st.integers(0, 3)),
    st.tuples(st.just("balance"), _ADDRS, st.integers(0, 100)),
    st.tuples(st.just("nonce"), _ADDRS),
    st.tuples(st.just("code"), _ADDRS, st.binary(max_size=4)),
    st.tuples(st.just("transfer"), _ADDRS, _ADDRS, st.integers(0, 50)),
    st.tuples(st.just("snapshot")),
    st.tuples(st.just("revert")),
    st.tuples(st.just("commit")),
)


def _apply(w: WorldState, m) -> None:
    kind = m[0]
    if kind == "storage":
        w.set_storage(m[1], m[2], m[3])
    elif kind == "balance":
        w.set_balance(m[1], m[2])
    elif kind == "nonce":
        w.increment_nonce(m[1])
    elif kind == "code":
        w.set_code(m[1], m[2])
    elif kind == "transfer":
        w.transfer(m[1], m[2], m[3])


@settings(max_examples=200, deadline=None)
@given(ops=st.lists(mutation, max_size=60))
def test_revert_equals_deep_copy_taken_at_snapshot(ops):
    w = WorldState()
    w.create_account(0xA, balance=50)
    open_snaps = []  # (snapshot id, deep copy of accounts)
    for m in ops:
        if m[0] == "snapshot":
            open_snaps.append((w.snapshot(), copy.deepcopy(w.accounts)))
        elif m[0] == "revert" and open_snaps:
            sid, saved = open_snaps.pop()
            w.revert_to(sid)
            assert w.accounts == saved
        elif m[0] == "commit" and open_snaps:
            sid, _ = open_snaps.pop()
            w.commit(sid)
        else:
            _apply(w, m)
    while open_snaps:
        sid, saved = open_snaps.pop()
        w.revert_to(sid)
        assert w.accounts == saved


# -- serialisation ------------------------------------------------------------------


def test_json_round_trip_and_digest():
    w = WorldState()
    w.create_account(0xABC, balance=10, nonce=2, code=b"\x60\x00", storage={1: 0xFF, 2: 0})
    doc = w.to_json()
    key = "0x" + "0" * 37 + "abc"
    assert doc["accounts"][key] == {
        "balance": "0xa", "nonce": 2, "code": "0x6000", "storage": {"0x1": "0xff"}}
    again = WorldState.from_json(doc)
    assert again.canonical_json() == w.canonical_json()
    assert again.digest() == w.digest()
    assert w.digest().startswith("0x") and len(w.digest()) == 66
    w.set_storage(0xABC, 1, 0xFE)
    assert w.digest() != again.digest()


def test_canonical_json_ignores_insertion_order():
    a, b = WorldState(), WorldState()
    a.create_account(1, balance=1)
    a.create_account(2, balance=2)
    b.create_account(2, balance=2)
    b.create_account(1, balance=1)
    assert a.canonical_json() == b.canonical_json()


def test_copy_is_independent():
    w = WorldState()
    w.create_account(0xA, storage={1: 1})
    c = w.copy()
    c.set_storage(0xA, 1, 2)
    assert w.get_storage(0xA, 1) == 1
    assert isinstance(c.get(0xA), Account)
