"""Pure-Python kernels.

This module is the reference for ``_ckernels.pyx`` and is used whenever the
compiled extension is missing or ``TAINTVM_PURE_PYTHON`` is set.
"""

from __future__ import annotations

from bisect import bisect_right
from typing import Any, List, Tuple

BACKEND = "python"

_JUMPDEST = 0x5B
_PUSH1 = 0x60
_PUSH32 = 0x7F


def scan_jumpdests(code: bytes) -> List[int]:
    """Offsets of JUMPDEST bytes that are not inside a PUSH immediate."""
    out = []
    i = 0
    n = len(code)
    while i < n:
        op = code[i]
        if op == _JUMPDEST:
            out.append(i)
        elif _PUSH1 <= op <= _PUSH32:
            i += op - _PUSH1 + 1
        i += 1
    return out


class IntervalMap:
    """Disjoint, sorted half-open intervals ``[start, end)`` mapped to values.

    Offsets outside every interval carry no value. Adjacent intervals holding
    equal values are always merged, so the representation is canonical.
    """

    __slots__ = ("_starts", "_ends", "_values")

    def __init__(self) -> None:
        self._starts: List[int] = []
        self._ends: List[int] = []
        self._values: List[Any] = []

    def __len__(self) -> int:
        return len(self._starts)

    def items(self) -> List[Tuple[int, int, Any]]:
        return list(zip(self._starts, self._ends, self._values))

    def assign(self, start: int, end: int, value: Any) -> None:
        """Set ``[start, end)`` to ``value``; ``None`` clears the range."""
        if end <= start:
            return
        starts, ends, values = self._starts, self._ends, self._values
        n = len(starts)
        i = bisect_right(ends, start)
        j = i
        while j < n and starts[j] < end:
            j += 1

        ps: List[int] = []
        pe: List[int] = []
        pv: List[Any] = []
        # Pull in touching neighbours so the merge pass can coalesce them.
        lo = i
        if lo > 0 and ends[lo - 1] == start:
            lo -= 1
        hi = j
        if hi < n and starts[hi] == end:
            hi += 1
        for k in range(lo, i):
            ps.append(starts[k])
            pe.append(ends[k])
            pv.append(values[k])
        if i < j and starts[i] < start:
            ps.append(starts[i])
            pe.append(start)
            pv.append(values[i])
        if value is not None:
            ps.append(start)
            pe.append(end)
            pv.append(value)
        if i < j and ends[j - 1] > end:
            ps.append(end)
            pe.append(ends[j - 1])
            pv.append(values[j - 1])
        for k in range(j, hi):
            ps.append(starts[k])
            pe.append(ends[k])
            pv.append(values[k])

        ms: List[int] = []
        me: List[int] = []
        mv: List[Any] = []
        for s, e, v in zip(ps, pe, pv):
            if ms and me[-1] == s and (mv[-1] is v or mv[-1] == v):
                me[-1] = e
            else:
                ms.append(s)
                me.append(e)
                mv.append(v)
        starts[lo:hi] = ms
        ends[lo:hi] = me
        values[lo:hi] = mv

    def values_in(self, start: int, end: int) -> List[Any]:
        """Values of every interval overlapping ``[start, end)``."""
        if end <= start:
            return []
        starts, ends = self._starts, self._ends
        i = bisect_right(ends, start)
        out = []
        n = len(starts)
        while i < n and starts[i] < end:
            out.append(self._values[i])
            i += 1
        return out

    def slice(self, start: int, end: int) -> List[Tuple[int, int, Any]]:
        """Intervals overlapping ``[start, end)``, clipped and rebased to 0."""
        if end <= start:
            return []
        starts, ends, values = self._starts, self._ends, self._values
        i = bisect_right(ends, start)
        out = []
        n = len(starts)
        while i < n and starts[i] < end:
            s = starts[i] if starts[i] > start else start
            e = ends[i] if ends[i] < end else end
            out.append((s - start, e - start, values[i]))
            i += 1
        return out
