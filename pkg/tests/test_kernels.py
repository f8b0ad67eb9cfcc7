import random

from hypothesis import given, settings
from hypothesis import strategies as st

import taintvm.kernels as kernels
from oracles import expand_ranges, naive_jumpdests

LABELS = [None, frozenset({1}), frozenset({2}), frozenset({1, 2})]

op = st.tuples(
    st.sampled_from(["assign", "values", "slice"]),
    st.integers(0, 300),
    st.integers(0, 80),
    st.sampled_from(LABELS),
)


def _check_against_cells(m, cells):
    items = m.items()
    # canonical: sorted, disjoint, non-empty, no touching equal neighbours
    for (s1, e1, v1), (s2, e2, v2) in zip(items, items[1:]):
        assert e1 <= s2
        assert not (e1 == s2 and v1 == v2)
    assert all(s < e and v is not None for s, e, v in items)
    assert expand_ranges(items) == cells


@settings(max_examples=200, deadline=None)
@given(ops=st.lists(op, max_size=40))
def test_interval_map_matches_per_byte_cells(kernel, ops):
    m = kernel.IntervalMap()
    cells = {}
    for kind, start, length, value in ops:
        end = start + length
        if kind == "assign":
            m.assign(start, end, value)
            for i in range(start, end):
                if value is None:
                    cells.pop(i, None)
                else:
                    cells[i] = value
        elif kind == "values":
            want = {cells[i] for i in range(start, end) if i in cells}
            assert set(m.values_in(start, end)) == want
        else:
            got = expand_ranges(m.slice(start, end))
            assert got == {i - start: v for i, v in cells.items() if start <= i < end}
        _check_against_cells(m, cells)


def test_interval_map_merges_touching_equal_values(kernel):
    m = kernel.IntervalMap()
    a = frozenset({1})
    m.assign(0, 32, a)
    m.assign(32, 64, a)
    m.assign(64, 96, frozenset({1}))
    assert m.items() == [(0, 96, a)]
    m.assign(40, 50, None)
    assert m.items() == [(0, 40, a), (50, 96, a)]
    assert len(m) == 2


def test_empty_ranges_are_ignored(kernel):
    m = kernel.IntervalMap()
    m.assign(5, 5, frozenset({1}))
    m.assign(9, 3, frozenset({1}))
    assert m.items() == []
    assert m.values_in(0, 0) == []
    assert m.slice(4, 4) == []


@settings(max_examples=300, deadline=None)
@given(code=st.binary(max_size=300))
def test_jumpdest_scan_matches_naive_decoder(kernel, code):
    assert set(kernel.scan_jumpdests(code)) == naive_jumpdests(code)


def test_jumpdest_scan_skips_push_data(kernel):
    # PUSH2 0x5b5b; JUMPDEST; PUSH32 cut short by end of code with 0x5b inside
    code = bytes([0x61, 0x5B, 0x5B, 0x5B, 0x7F, 0x5B, 0x5B])
    assert list(kernel.scan_jumpdests(code)) == [3]


def test_backends_agree_on_large_random_code():
    rng = random.Random(11)
    backends = kernels.available_backends()
    for _ in range(20):
        code = bytes(rng.getrandbits(8) for _ in range(5000))
        results = {name: list(mod.scan_jumpdests(code)) for name, mod in backends.items()}
        assert len({tuple(r) for r in results.values()}) == 1


def test_selected_backend_is_reported():
    assert kernels.BACKEND in kernels.available_backends()
    assert kernels.IntervalMap is kernels.available_backends()[kernels.BACKEND].IntervalMap
