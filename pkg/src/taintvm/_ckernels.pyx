# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled kernels; behaviour must match ``_kernels_py`` exactly."""

BACKEND = "cython"


def scan_jumpdests(const unsigned char[:] code):
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t n = code.shape[0]
    cdef unsigned char op
    out = []
    while i < n:
        op = code[i]
        if op == 0x5B:
            out.append(i)
        elif 0x60 <= op <= 0x7F:
            i += op - 0x5F
        i += 1
    return out


cdef inline bint _same(object a, object b):
    return a is b or a == b


cdef class IntervalMap:
    cdef list _starts
    cdef list _ends
    cdef list _values

    def __cinit__(self):
        self._starts = []
        self._ends = []
        self._values = []

    def __len__(self):
        return len(self._starts)

    def items(self):
        return list(zip(self._starts, self._ends, self._values))

    cdef Py_ssize_t _first_after(self, long long pos):
        # bisect_right over ends
        cdef Py_ssize_t lo = 0
        cdef Py_ssize_t hi = len(self._ends)
        cdef Py_ssize_t mid
        cdef list ends = self._ends
        while lo < hi:
            mid = (lo + hi) >> 1
            if pos < <long long>ends[mid]:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def assign(self, long long start, long long end, object value):
        if end <= start:
            return
        cdef list starts = self._starts
        cdef list ends = self._ends
        cdef list values = self._values
        cdef Py_ssize_t n = len(starts)
        cdef Py_ssize_t i = self._first_after(start)
        cdef Py_ssize_t j = i
        cdef Py_ssize_t lo, hi, k, m
        cdef long long s, e
        while j < n and <long long>starts[j] < end:
            j += 1

        lo = i
        if lo > 0 and <long long>ends[lo - 1] == start:
            lo -= 1
        hi = j
        if hi < n and <long long>starts[hi] == end:
            hi += 1

        cdef list ps = []
        cdef list pe = []
        cdef list pv = []
        for k in range(lo, i):
            ps.append(starts[k]); pe.append(ends[k]); pv.append(values[k])
        if i < j and <long long>starts[i] < start:
            ps.append(starts[i]); pe.append(start); pv.append(values[i])
        if value is not None:
            ps.append(start); pe.append(end); pv.append(value)
        if i < j and <long long>ends[j - 1] > end:
            ps.append(end); pe.append(ends[j - 1]); pv.append(values[j - 1])
        for k in range(j, hi):
            ps.append(starts[k]); pe.append(ends[k]); pv.append(values[k])

        cdef list ms = []
        cdef list me = []
        cdef list mv = []
        m = 0
        for k in range(len(ps)):
            s = ps[k]
            e = pe[k]
            if m and <long long>me[m - 1] == s and _same(mv[m - 1], pv[k]):
                me[m - 1] = e
            else:
                ms.append(s); me.append(e); mv.append(pv[k])
                m += 1
        starts[lo:hi] = ms
        ends[lo:hi] = me
        values[lo:hi] = mv

    def values_in(self, long long start, long long end):
        if end <= start:
            return []
        cdef list starts = self._starts
        cdef Py_ssize_t i = self._first_after(start)
        cdef Py_ssize_t n = len(starts)
        out = []
        while i < n and <long long>starts[i] < end:
            out.append(self._values[i])
            i += 1
        return out

    def slice(self, long long start, long long end):
        if end <= start:
            return []
        cdef list starts = self._starts
        cdef list ends = self._ends
        cdef Py_ssize_t i = self._first_after(start)
        cdef Py_ssize_t n = len(starts)
        cdef long long s, e
        out = []
        while i < n and <long long>starts[i] < end:
            s = starts[i]
            e = ends[i]
            if s < start:
                s = start
            if e > end:
                e = end
            out.append((s - start, e - start, self._values[i]))
            i += 1
        return out
