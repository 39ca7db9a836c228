# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; bit-identical to ``_pykernels``."""

from array import array

import xxhash

from libc.stdint cimport uint64_t, int64_t

cdef extern from *:
    """
    typedef unsigned __int128 habf_u128;
    """
    # declared narrower for Cython; C sees the 128-bit type
    ctypedef unsigned long long u128 "habf_u128"

NAME = "cython"

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

MODE_SEEDED = 0
MODE_DOUBLE = 1

_xxh = xxhash.xxh3_64_intdigest


cdef inline uint64_t _mix(uint64_t x) nogil:
    x ^= x >> 30
    x *= 0xBF58476D1CE4E5B9ULL
    x ^= x >> 27
    x *= 0x94D049BB133111EBULL
    x ^= x >> 31
    return x


cdef inline uint64_t _red(uint64_t h, uint64_t n) nogil:
    return <uint64_t>((<u128>h * n) >> 64)


cdef inline uint64_t _cred(uint64_t h, uint64_t n) nogil:
    return _red((h << 32) | (h >> 32), n)


cdef inline uint64_t _locate(uint64_t dg, int hid, uint64_t n, bint cell, int mode,
                             const uint64_t[:] seeds, int size) nogil:
    cdef uint64_t a, b, off
    if mode == 0:
        if cell:
            return _cred(_mix(dg ^ seeds[hid]), n)
        return _red(_mix(dg ^ seeds[hid]), n)
    if cell:
        a = _cred(_mix(dg ^ seeds[1]), n)
        b = _cred(_mix(dg ^ seeds[2]), n)
    else:
        a = _red(_mix(dg ^ seeds[1]), n)
        b = _red(_mix(dg ^ seeds[2]), n)
    off = <uint64_t>(hid - 1) if hid else <uint64_t>size
    return <uint64_t>((<u128>a + <u128>off * b) % n)


cdef inline int _get_cell(const unsigned char[:] cells, int width, uint64_t i) nogil:
    cdef uint64_t off = i * width
    cdef uint64_t b = off >> 3
    cdef unsigned int v = cells[b]
    if b + 1 < <uint64_t>cells.shape[0]:
        v |= (<unsigned int>cells[b + 1]) << 8
    return (v >> (off & 7)) & ((1u << width) - 1)


def mix64(x):
    return _mix(<uint64_t>(x & 0xFFFFFFFFFFFFFFFF))


def derive_seed(family_seed, index):
    return _mix(<uint64_t>((family_seed + GOLDEN * (index + 1)) & 0xFFFFFFFFFFFFFFFF))


def digest(key):
    return _xxh(key)


def digest_many(keys):
    return array("Q", [_xxh(k) for k in keys])


def reduce_range(uint64_t h, uint64_t n):
    return _red(h, n)


def cell_reduce(uint64_t h, uint64_t n):
    return _cred(h, n)


def hash_value(uint64_t dg, uint64_t seed):
    return _mix(dg ^ seed)


def locate(uint64_t dg, int hid, uint64_t n, bint cell, int mode,
           const uint64_t[:] seeds, int size):
    return _locate(dg, hid, n, cell, mode, seeds, size)


def positions(const uint64_t[:] digests, ids, uint64_t n, bint cell, int mode,
              const uint64_t[:] seeds, int size):
    cdef Py_ssize_t nd = digests.shape[0]
    cdef int[::1] hv = array("i", list(ids))
    cdef Py_ssize_t w = hv.shape[0]
    out = array("Q", bytes(8 * nd * w))
    cdef uint64_t[::1] o = out
    cdef Py_ssize_t r, j
    with nogil:
        for r in range(nd):
            for j in range(w):
                o[r * w + j] = _locate(digests[r], hv[j], n, cell, mode, seeds, size)
    return out


def get_bit(const unsigned char[:] bits, uint64_t i):
    return (bits[i >> 3] >> (i & 7)) & 1


def set_bits(unsigned char[:] bits, const uint64_t[:] pos):
    cdef Py_ssize_t i
    cdef uint64_t p
    with nogil:
        for i in range(pos.shape[0]):
            p = pos[i]
            bits[p >> 3] |= <unsigned char>(1 << (p & 7))


def test_rows(const unsigned char[:] bits, const uint64_t[:] pos, int width):
    cdef Py_ssize_t rows = pos.shape[0] // width
    out = bytearray(rows)
    cdef unsigned char[:] o = out
    cdef Py_ssize_t r, j
    cdef uint64_t p
    cdef unsigned char ok
    with nogil:
        for r in range(rows):
            ok = 1
            for j in range(r * width, r * width + width):
                p = pos[j]
                if not (bits[p >> 3] >> (p & 7)) & 1:
                    ok = 0
                    break
            o[r] = ok
    return out


def build_v(const uint64_t[:] pos, int width, unsigned char[:] single,
            int64_t[:] owner, unsigned char[:] bits):
    cdef Py_ssize_t rows = pos.shape[0] // width
    cdef Py_ssize_t r, j
    cdef uint64_t p
    with nogil:
        for r in range(rows):
            for j in range(r * width, r * width + width):
                p = pos[j]
                bits[p >> 3] |= <unsigned char>(1 << (p & 7))
                if single[p]:
                    if owner[p] < 0:
                        owner[p] = r
                    else:
                        single[p] = 0


def get_cell(const unsigned char[:] cells, int width, uint64_t i):
    return _get_cell(cells, width, i)


def put_cell(unsigned char[:] cells, int width, uint64_t i, int value):
    cdef uint64_t off = i * width
    cdef uint64_t b = off >> 3
    cdef int sh = off & 7
    cdef unsigned int mask = ((1u << width) - 1) << sh
    cdef bint two = b + 1 < <uint64_t>cells.shape[0]
    cdef unsigned int v = cells[b]
    if two:
        v |= (<unsigned int>cells[b + 1]) << 8
    v = (v & ~mask) | ((<unsigned int>value << sh) & mask)
    cells[b] = v & 0xFF
    if two:
        cells[b + 1] = (v >> 8) & 0xFF


cdef int _trace(uint64_t dg, int k, const unsigned char[:] cells, int width,
                uint64_t omega, int mode, const uint64_t[:] seeds, int size,
                int* got, uint64_t* stop) nogil:
    # 1 = complete walk (ids in got), 0 = incomplete (stop set)
    cdef int hmask = (1 << (width - 1)) - 1
    cdef uint64_t idx = _locate(dg, 0, omega, True, mode, seeds, size)
    cdef int step, v, h
    for step in range(k):
        v = _get_cell(cells, width, idx)
        if v == 0:
            stop[0] = idx
            return 0
        h = v & hmask
        got[step] = h
        if step == k - 1:
            if v >> (width - 1):
                return 1
            stop[0] = idx
            return 0
        idx = _locate(dg, h, omega, True, mode, seeds, size)
    stop[0] = idx
    return 0


def trace(uint64_t dg, int k, const unsigned char[:] cells, int width,
          uint64_t omega, int mode, const uint64_t[:] seeds, int size):
    cdef int got[64]
    cdef uint64_t stop = 0
    if k > 64:
        raise ValueError("k too large")
    if _trace(dg, k, cells, width, omega, mode, seeds, size, got, &stop):
        return tuple([got[i] for i in range(k)]), None
    return None, stop


def query_many(const uint64_t[:] digests, const unsigned char[:] bits, uint64_t m, h0,
               const unsigned char[:] cells, int width, uint64_t omega, int k,
               int mode, const uint64_t[:] seeds, int size):
    cdef int[::1] hz = array("i", list(h0))
    cdef Py_ssize_t nd = digests.shape[0]
    out = bytearray(nd)
    cdef unsigned char[:] o = out
    cdef Py_ssize_t r
    cdef int j, hit
    cdef uint64_t dg, p, stop
    cdef int got[64]
    if k > 64:
        raise ValueError("k too large")
    with nogil:
        for r in range(nd):
            dg = digests[r]
            hit = 1
            for j in range(k):
                p = _locate(dg, hz[j], m, False, mode, seeds, size)
                if not (bits[p >> 3] >> (p & 7)) & 1:
                    hit = 0
                    break
            if not hit and omega:
                if _trace(dg, k, cells, width, omega, mode, seeds, size, got, &stop):
                    hit = 1
                    for j in range(k):
                        p = _locate(dg, got[j], m, False, mode, seeds, size)
                        if not (bits[p >> 3] >> (p & 7)) & 1:
                            hit = 0
                            break
            o[r] = hit
    return out


def popcount(bits):
    return int.from_bytes(bits, "little").bit_count() if bits else 0
