# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory kernel, mirror of qcond._ctmc_py.

Bit-identical contract: trajectory i consumes next_double() draws from
Philox(key=seed, counter=i<<128) in the same order and applies the same
IEEE-double arithmetic as the pure kernel, so both produce exactly the
same weights, finals, jump counts, and transit counters.

The Philox4x64-10 block cipher is inlined here (keyed counter mode, the
counter bumped before each 4-lane block, doubles from the top 53 bits)
and is verified against numpy's generator in the test suite, draw by
draw.  Keeping the generator native lets the whole batch run without
the GIL, so threads scale and per-trajectory overhead stays flat.
"""

import numpy as np

from libc.stdint cimport int64_t, uint32_t, uint64_t
from libc.math cimport exp, log

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    ctypedef unsigned long long uint128 "unsigned __int128"

DEF PHILOX_BUFFER = 4

cdef uint64_t M0 = 0xD2E7470EE14C6C93u
cdef uint64_t M1 = 0xCA5A826395121157u
cdef uint64_t W0 = 0x9E3779B97F4A7C15u
cdef uint64_t W1 = 0xBB67AE8584CAA73Bu
cdef double INV53 = 1.0 / 9007199254740992.0

cdef struct philox_state:
    uint64_t c0, c1, c2, c3
    uint64_t k0, k1
    uint64_t buffer[PHILOX_BUFFER]
    int buffer_pos


cdef inline void _philox_block(philox_state* st) nogil:
    cdef uint64_t x0 = st.c0, x1 = st.c1, x2 = st.c2, x3 = st.c3
    cdef uint64_t k0 = st.k0, k1 = st.k1
    cdef uint64_t hi0, lo0, hi1, lo1, t0, t2
    cdef int r
    for r in range(10):
        if r > 0:
            k0 += W0
            k1 += W1
        hi0 = <uint64_t> (((<uint128> M0) * x0) >> 64)
        lo0 = M0 * x0
        hi1 = <uint64_t> (((<uint128> M1) * x2) >> 64)
        lo1 = M1 * x2
        t0 = hi1 ^ x1 ^ k0
        t2 = hi0 ^ x3 ^ k1
        x0 = t0
        x1 = lo1
        x2 = t2
        x3 = lo0
    st.buffer[0] = x0
    st.buffer[1] = x1
    st.buffer[2] = x2
    st.buffer[3] = x3
    st.buffer_pos = 0


cdef inline double _next_double(philox_state* st) nogil:
    cdef uint64_t raw
    if st.buffer_pos >= PHILOX_BUFFER:
        st.c0 += 1
        if st.c0 == 0:
            st.c1 += 1
            if st.c1 == 0:
                st.c2 += 1
                if st.c2 == 0:
                    st.c3 += 1
        _philox_block(st)
    raw = st.buffer[st.buffer_pos]
    st.buffer_pos += 1
    return (raw >> 11) * INV53


def raw_doubles(seed, index, Py_ssize_t count):
    """Draws of trajectory stream (seed, index), for equivalence tests."""
    out = np.empty(count)
    cdef double[::1] mv = out
    cdef philox_state st
    st.k0 = <uint64_t> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    st.k1 = <uint64_t> ((int(seed) >> 64) & 0xFFFFFFFFFFFFFFFF)
    st.c0 = 0
    st.c1 = 0
    st.c2 = <uint64_t> (int(index) & 0xFFFFFFFFFFFFFFFF)
    st.c3 = <uint64_t> ((int(index) >> 64) & 0xFFFFFFFFFFFFFFFF)
    st.buffer_pos = PHILOX_BUFFER
    cdef Py_ssize_t i
    for i in range(count):
        mv[i] = _next_double(&st)
    return out


cdef inline bint _member(uint64_t x, const uint64_t* arr, Py_ssize_t size) nogil:
    cdef Py_ssize_t lo = 0, hi = size, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if arr[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo < size and arr[lo] == x


cdef inline double _potential(int vkind, uint64_t bits,
                              const uint64_t* u, Py_ssize_t usize,
                              const double* f) nogil:
    if vkind == 0:
        return f[<Py_ssize_t> bits]
    if vkind == 1:
        return f[0] if _member(bits, u, usize) else 0.0
    return f[0] + f[1] * __builtin_popcountll((bits ^ (bits >> 1)) & u[0])


def run_batch(seed, Py_ssize_t i0, Py_ssize_t n, int n_qubits, double gamma,
              double t, start_bits, int vkind, vu64, vf64, cond_bits,
              double[::1] weights, uint64_t[::1] finals, int64_t[::1] njumps,
              kt, lt, qt):
    """Sample trajectories i0 .. i0+n-1 into the first n output slots."""
    cdef const uint64_t[::1] u_mv = np.ascontiguousarray(vu64, dtype=np.uint64)
    cdef const double[::1] f_mv = np.ascontiguousarray(vf64, dtype=np.float64)
    cdef const uint64_t* u_ptr = NULL
    cdef Py_ssize_t u_size = u_mv.shape[0]
    if u_size > 0:
        u_ptr = &u_mv[0]
    cdef const double* f_ptr = &f_mv[0]

    cdef bint track = cond_bits is not None
    cdef const uint64_t[::1] cond_mv
    cdef const uint64_t* cond_ptr = NULL
    cdef Py_ssize_t cond_size = 0
    cdef int64_t[::1] kt_mv, lt_mv, qt_mv
    if track:
        cond_mv = np.ascontiguousarray(cond_bits, dtype=np.uint64)
        cond_size = cond_mv.shape[0]
        cond_ptr = &cond_mv[0]
        kt_mv = kt
        lt_mv = lt
        qt_mv = qt

    seed = int(seed)
    if not 0 <= seed < (1 << 128):
        raise ValueError("seed must be a nonnegative integer below 2**128")
    cdef uint64_t key0 = <uint64_t> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t key1 = <uint64_t> ((seed >> 64) & 0xFFFFFFFFFFFFFFFF)

    cdef double rate = gamma * n_qubits
    cdef uint64_t start = <uint64_t> int(start_bits)
    cdef philox_state st
    cdef Py_ssize_t local
    cdef uint64_t bits
    cdef double s, logw, u1, u2, dt, s_next
    cdef int64_t jumps, k, l, q
    cdef int j
    cdef bint in_cond, now_cond, cond_open, norm_open

    with nogil:
        for local in range(n):
            st.k0 = key0
            st.k1 = key1
            st.c0 = 0
            st.c1 = 0
            st.c2 = <uint64_t> (i0 + local)
            st.c3 = 0
            st.buffer_pos = PHILOX_BUFFER

            bits = start
            s = 0.0
            logw = 0.0
            jumps = 0
            k = 0
            l = 0
            q = 0
            in_cond = track and _member(bits, cond_ptr, cond_size)
            cond_open = False
            norm_open = False
            if rate > 0.0 and t > 0.0:
                while True:
                    u1 = _next_double(&st)
                    dt = -log(u1) / rate
                    s_next = s + dt
                    if s_next >= t:
                        break
                    logw += (rate - _potential(vkind, bits, u_ptr, u_size, f_ptr)) * dt
                    s = s_next
                    u2 = _next_double(&st)
                    j = <int> (u2 * n_qubits)
                    if j >= n_qubits:
                        j = n_qubits - 1
                    bits ^= (<uint64_t> 1) << j
                    jumps += 1
                    if track:
                        now_cond = _member(bits, cond_ptr, cond_size)
                        if now_cond != in_cond:
                            if now_cond:
                                q += 1
                                if norm_open:
                                    l += 1
                                    norm_open = False
                                cond_open = True
                            else:
                                if cond_open:
                                    k += 1
                                    cond_open = False
                                norm_open = True
                            in_cond = now_cond
            logw += (rate - _potential(vkind, bits, u_ptr, u_size, f_ptr)) * (t - s)
            weights[local] = exp(logw)
            finals[local] = bits
            njumps[local] = jumps
            if track:
                kt_mv[local] = k
                lt_mv[local] = l
                qt_mv[local] = q
