"""Pure-Python implementation of the hot kernels.

Every function here has a bit-identical twin in ``_ckernels.pyx``.  The
package imports the compiled module when it is available and falls back to
this one otherwise (or when ``HABF_PURE_PYTHON`` is set).

Conventions shared by both backends:

* digests and seeds are unsigned 64-bit integers;
* ``mode`` 0 evaluates hash id ``h`` as ``mix64(digest ^ seeds[h])``,
  ``mode`` 1 simulates it by double hashing over ids 1 and 2;
* hash id 0 denotes the HashExpressor entry function ``f``;
* bit ``i`` of a bit array lives in byte ``i >> 3`` at bit ``i & 7``;
* cell ``i`` occupies bits ``[i*w, (i+1)*w)`` of the cell array, with the
  endbit in the most significant position of the cell.
"""

from array import array

import xxhash

NAME = "python"

MASK64 = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

MODE_SEEDED = 0
MODE_DOUBLE = 1

_xxh = xxhash.xxh3_64_intdigest


def mix64(x):
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def derive_seed(family_seed, index):
    return mix64((family_seed & MASK64) + GOLDEN * (index + 1))


def digest(key):
    return _xxh(key)


def digest_many(keys):
    return array("Q", [_xxh(k) for k in keys])


def reduce_range(h, n):
    return (h * n) >> 64


def cell_reduce(h, n):
    return ((((h << 32) | (h >> 32)) & MASK64) * n) >> 64


def hash_value(dg, seed):
    return mix64(dg ^ seed)


def locate(dg, hid, n, cell, mode, seeds, size):
    """Index in ``[0, n)`` of hash id ``hid`` applied to digest ``dg``."""
    red = cell_reduce if cell else reduce_range
    if mode == MODE_SEEDED:
        return red(mix64(dg ^ seeds[hid]), n)
    a = red(mix64(dg ^ seeds[1]), n)
    b = red(mix64(dg ^ seeds[2]), n)
    off = hid - 1 if hid else size
    return (a + off * b) % n


def positions(digests, ids, n, cell, mode, seeds, size):
    """Row-major ``len(digests) x len(ids)`` array of located indices."""
    out = array("Q", bytes(8 * len(digests) * len(ids)))
    ids = list(ids)
    red = cell_reduce if cell else reduce_range
    i = 0
    if mode == MODE_SEEDED:
        sds = [seeds[h] for h in ids]
        for dg in digests:
            for s in sds:
                x = (dg ^ s) & MASK64
                x ^= x >> 30
                x = (x * 0xBF58476D1CE4E5B9) & MASK64
                x ^= x >> 27
                x = (x * 0x94D049BB133111EB) & MASK64
                x ^= x >> 31
                out[i] = red(x, n)
                i += 1
    else:
        offs = [h - 1 if h else size for h in ids]
        s1, s2 = seeds[1], seeds[2]
        for dg in digests:
            a = red(mix64(dg ^ s1), n)
            b = red(mix64(dg ^ s2), n)
            for off in offs:
                out[i] = (a + off * b) % n
                i += 1
    return out


def get_bit(bits, i):
    return (bits[i >> 3] >> (i & 7)) & 1


def set_bits(bits, pos):
    for p in pos:
        bits[p >> 3] |= 1 << (p & 7)


def test_rows(bits, pos, width):
    """For each row of ``width`` positions, 1 iff every bit is set."""
    rows = len(pos) // width
    out = bytearray(rows)
    i = 0
    for r in range(rows):
        ok = 1
        for j in range(i, i + width):
            p = pos[j]
            if not (bits[p >> 3] >> (p & 7)) & 1:
                ok = 0
                break
        out[r] = ok
        i += width
    return out


def build_v(pos, width, single, owner, bits):
    """Insert rows of positions into the V index and the bit array.

    Row ``r`` belongs to positive key ``r``.  Each position is one insertion,
    so a key hitting the same unit twice clears its single flag.
    """
    rows = len(pos) // width
    i = 0
    for r in range(rows):
        for j in range(i, i + width):
            p = pos[j]
            bits[p >> 3] |= 1 << (p & 7)
            if single[p]:
                if owner[p] < 0:
                    owner[p] = r
                else:
                    single[p] = 0
        i += width


def get_cell(cells, width, i):
    off = i * width
    b = off >> 3
    v = cells[b]
    if b + 1 < len(cells):
        v |= cells[b + 1] << 8
    return (v >> (off & 7)) & ((1 << width) - 1)


def put_cell(cells, width, i, value):
    off = i * width
    b = off >> 3
    sh = off & 7
    mask = ((1 << width) - 1) << sh
    v = cells[b]
    if b + 1 < len(cells):
        v |= cells[b + 1] << 8
    v = (v & ~mask) | ((value << sh) & mask)
    cells[b] = v & 0xFF
    if b + 1 < len(cells):
        cells[b + 1] = (v >> 8) & 0xFF


def trace(dg, k, cells, width, omega, mode, seeds, size):
    """Walk the HashExpressor for one digest.

    Returns ``(ids, stop)``: ``ids`` is the tuple of collected hash ids when
    the walk completes with a terminal endbit, else None; ``stop`` is the
    cell index where an incomplete walk ended (None for complete walks).
    """
    hmask = (1 << (width - 1)) - 1
    idx = locate(dg, 0, omega, True, mode, seeds, size)
    got = []
    for step in range(k):
        v = get_cell(cells, width, idx)
        if v == 0:
            return None, idx
        h = v & hmask
        got.append(h)
        if step == k - 1:
            if v >> (width - 1):
                return tuple(got), None
            return None, idx
        idx = locate(dg, h, omega, True, mode, seeds, size)
    return None, idx


def query_many(digests, bits, m, h0, cells, width, omega, k, mode, seeds, size):
    """Two-round membership query for a batch of digests."""
    h0 = list(h0)
    out = bytearray(len(digests))
    for r, dg in enumerate(digests):
        hit = 1
        for h in h0:
            p = locate(dg, h, m, False, mode, seeds, size)
            if not (bits[p >> 3] >> (p & 7)) & 1:
                hit = 0
                break
        if not hit and omega:
            ids, _ = trace(dg, k, cells, width, omega, mode, seeds, size)
            if ids is not None:
                hit = 1
                for h in ids:
                    p = locate(dg, h, m, False, mode, seeds, size)
                    if not (bits[p >> 3] >> (p & 7)) & 1:
                        hit = 0
                        break
        out[r] = hit
    return out


def popcount(bits):
    return int.from_bytes(bits, "little").bit_count() if bits else 0
