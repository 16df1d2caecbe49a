# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stabilizer tableau kernel.

Same column-major bit-plane layout as the pure-Python kernel, with planes
packed into 64-bit words so the hot loops run at C speed.
"""

from libc.stdlib cimport calloc, free, malloc
from libc.string cimport memcpy, memset

cdef extern from *:
    """
    static inline int popcount64(unsigned long long v) {
        return __builtin_popcountll(v);
    }
    static inline int ctz64(unsigned long long v) {
        return __builtin_ctzll(v);
    }
    """
    int popcount64(unsigned long long v) nogil
    int ctz64(unsigned long long v) nogil

ctypedef unsigned long long u64


cdef class TableauKernel:
    """CHP tableau over a fixed qubit capacity."""

    cdef public int n
    cdef int W              # words per plane (rows = 2n)
    cdef u64 *xc            # n planes of W words each
    cdef u64 *zc
    cdef u64 *signs         # W words
    cdef u64 *scratch       # 4 planes of W words (lo, hi, sel, tmp)

    def __cinit__(self, int n, bint _raw=False):
        self.n = n
        self.W = (2 * n + 63) >> 6
        self.xc = <u64 *> calloc(n * self.W, sizeof(u64))
        self.zc = <u64 *> calloc(n * self.W, sizeof(u64))
        self.signs = <u64 *> calloc(self.W, sizeof(u64))
        self.scratch = <u64 *> calloc(4 * self.W, sizeof(u64))
        if not (self.xc and self.zc and self.signs and self.scratch):
            raise MemoryError
        cdef int i
        if not _raw:
            for i in range(n):
                self._set_bit(self.xc + i * self.W, i)
                self._set_bit(self.zc + i * self.W, n + i)

    def __dealloc__(self):
        if self.xc:
            free(self.xc)
        if self.zc:
            free(self.zc)
        if self.signs:
            free(self.signs)
        if self.scratch:
            free(self.scratch)

    cdef inline void _set_bit(self, u64 *plane, int bit) nogil:
        plane[bit >> 6] |= (<u64> 1) << (bit & 63)

    cdef inline int _get_bit(self, u64 *plane, int bit) nogil:
        return <int> ((plane[bit >> 6] >> (bit & 63)) & 1)

    def copy(self):
        cdef TableauKernel t = TableauKernel(self.n, _raw=True)
        memcpy(t.xc, self.xc, self.n * self.W * sizeof(u64))
        memcpy(t.zc, self.zc, self.n * self.W * sizeof(u64))
        memcpy(t.signs, self.signs, self.W * sizeof(u64))
        return t

    # -- gates -------------------------------------------------------------
    def h(self, int q):
        cdef u64 *xq = self.xc + q * self.W
        cdef u64 *zq = self.zc + q * self.W
        cdef u64 tmp
        cdef int w
        for w in range(self.W):
            self.signs[w] ^= xq[w] & zq[w]
            tmp = xq[w]
            xq[w] = zq[w]
            zq[w] = tmp

    def k(self, int q):
        cdef u64 *xq = self.xc + q * self.W
        cdef u64 *zq = self.zc + q * self.W
        cdef int w
        for w in range(self.W):
            self.signs[w] ^= xq[w] & zq[w]
            zq[w] ^= xq[w]

    def cx(self, int c, int t):
        cdef u64 *xcp = self.xc + c * self.W
        cdef u64 *zcp = self.zc + c * self.W
        cdef u64 *xtp = self.xc + t * self.W
        cdef u64 *ztp = self.zc + t * self.W
        cdef int w
        for w in range(self.W):
            self.signs[w] ^= xcp[w] & ztp[w] & ~(xtp[w] ^ zcp[w])
            xtp[w] ^= xcp[w]
            zcp[w] ^= ztp[w]

    def x(self, int q):
        cdef u64 *zq = self.zc + q * self.W
        cdef int w
        for w in range(self.W):
            self.signs[w] ^= zq[w]

    def y(self, int q):
        cdef u64 *xq = self.xc + q * self.W
        cdef u64 *zq = self.zc + q * self.W
        cdef int w
        for w in range(self.W):
            self.signs[w] ^= xq[w] ^ zq[w]

    def z(self, int q):
        cdef u64 *xq = self.xc + q * self.W
        cdef int w
        for w in range(self.W):
            self.signs[w] ^= xq[w]

    def apply_pauli(self, xmask, zmask):
        cdef int q = 0
        cdef object xm = xmask, zm = zmask
        cdef u64 *plane
        cdef int w
        while xm:
            if xm & 1:
                plane = self.zc + q * self.W
                for w in range(self.W):
                    self.signs[w] ^= plane[w]
            xm >>= 1
            q += 1
        q = 0
        while zm:
            if zm & 1:
                plane = self.xc + q * self.W
                for w in range(self.W):
                    self.signs[w] ^= plane[w]
            zm >>= 1
            q += 1

    # -- rows ----------------------------------------------------------------
    def _row_bits(self, int row):
        cdef object x = 0, z = 0
        cdef int j
        for j in range(self.n):
            if self._get_bit(self.xc + j * self.W, row):
                x |= <object> 1 << j
            if self._get_bit(self.zc + j * self.W, row):
                z |= <object> 1 << j
        return x, z, self._get_bit(self.signs, row)

    def stab_row(self, int i):
        return self._row_bits(self.n + i)

    def destab_row(self, int i):
        return self._row_bits(i)

    def set_row(self, int row, x, z, int sign):
        cdef int j
        cdef u64 bit = (<u64> 1) << (row & 63)
        cdef int w = row >> 6
        cdef u64 *plane
        for j in range(self.n):
            plane = self.xc + j * self.W
            if (x >> j) & 1:
                plane[w] |= bit
            else:
                plane[w] &= ~bit
            plane = self.zc + j * self.W
            if (z >> j) & 1:
                plane[w] |= bit
            else:
                plane[w] &= ~bit
        if sign:
            self.signs[w] |= bit
        else:
            self.signs[w] &= ~bit

    # -- measurement ---------------------------------------------------------
    cdef int _find_anti_stab(self, int q) nogil:
        """First stabilizer row with x-bit at q, or -1."""
        cdef u64 *xq = self.xc + q * self.W
        cdef int w, lo_row = self.n, hi_row = 2 * self.n
        cdef u64 word, mask
        for w in range(self.W):
            word = xq[w]
            if (w << 6) + 63 < lo_row or word == 0:
                continue
            mask = word
            if (w << 6) < lo_row:
                mask &= ~(((<u64> 1) << (lo_row - (w << 6))) - 1)
            if mask:
                return (w << 6) + ctz64(mask)
        return -1

    def peek(self, int q):
        cdef int p = self._find_anti_stab(q)
        if p >= 0:
            return True, 0
        return False, self._det_value(q)

    cdef int _det_value(self, int q) nogil:
        cdef u64 *sel = self.scratch + 2 * self.W
        cdef u64 *xq = self.xc + q * self.W
        cdef int w, j, n = self.n
        cdef long acc = 0
        cdef long zj, xj
        # sel = destabilizer x-bits at q, shifted into stabilizer row range
        for w in range(self.W):
            sel[w] = 0
        for j in range(n):
            if (xq[j >> 6] >> (j & 63)) & 1:
                sel[(n + j) >> 6] |= (<u64> 1) << ((n + j) & 63)
        for w in range(self.W):
            acc += 2 * popcount64(self.signs[w] & sel[w])
        cdef u64 *xp
        cdef u64 *zp
        for j in range(n):
            xp = self.xc + j * self.W
            zp = self.zc + j * self.W
            zj = 0
            xj = 0
            for w in range(self.W):
                zj += popcount64(zp[w] & sel[w])
                xj += popcount64(xp[w] & sel[w])
            acc += zj * xj
        return <int> ((acc >> 1) & 1)

    def measure(self, int q, int random_bit):
        cdef int p = self._find_anti_stab(q)
        if p < 0:
            return self._det_value(q), False
        cdef int n = self.n, W = self.W
        cdef int j, w
        cdef u64 *xq = self.xc + q * W
        cdef u64 *sel = self.scratch + 2 * W
        for w in range(W):
            sel[w] = xq[w]
        sel[p >> 6] &= ~((<u64> 1) << (p & 63))
        sel[(p - n) >> 6] &= ~((<u64> 1) << ((p - n) & 63))
        self._batched_rowsum(sel, p)
        # destabilizer p-n := old stabilizer row p; stabilizer p := Z_q
        cdef int dbit = p - n
        cdef u64 *plane
        for j in range(n):
            plane = self.xc + j * W
            if self._get_bit(plane, p):
                self._set_bit(plane, dbit)
            else:
                plane[dbit >> 6] &= ~((<u64> 1) << (dbit & 63))
            plane[p >> 6] &= ~((<u64> 1) << (p & 63))
            plane = self.zc + j * W
            if self._get_bit(plane, p):
                self._set_bit(plane, dbit)
            else:
                plane[dbit >> 6] &= ~((<u64> 1) << (dbit & 63))
            plane[p >> 6] &= ~((<u64> 1) << (p & 63))
        if self._get_bit(self.signs, p):
            self._set_bit(self.signs, dbit)
        else:
            self.signs[dbit >> 6] &= ~((<u64> 1) << (dbit & 63))
        self._set_bit(self.zc + q * W, p)
        if random_bit:
            self._set_bit(self.signs, p)
        else:
            self.signs[p >> 6] &= ~((<u64> 1) << (p & 63))
        return random_bit & 1, True

    cdef void _batched_rowsum(self, u64 *sel, int p) nogil:
        """row_i <- row_p * row_i for rows in sel (p is a full row index)."""
        cdef int n = self.n, W = self.W
        cdef u64 *lo = self.scratch
        cdef u64 *hi = self.scratch + W
        cdef int j, w, xpj, zpj
        cdef long c1 = 0
        cdef u64 b, nx, nz
        cdef u64 *xp
        cdef u64 *zp
        for w in range(W):
            lo[w] = 0
            hi[w] = 0
        for j in range(n):
            xp = self.xc + j * W
            zp = self.zc + j * W
            xpj = self._get_bit(xp, p)
            zpj = self._get_bit(zp, p)
            c1 += xpj & zpj
            for w in range(W):
                b = xp[w] & zp[w]
                hi[w] ^= lo[w] & b
                lo[w] ^= b
                if zpj:
                    hi[w] ^= xp[w]
                nx = xp[w] ^ (sel[w] if xpj else 0)
                nz = zp[w] ^ (sel[w] if zpj else 0)
                b = nx & nz
                hi[w] ^= lo[w] & b
                lo[w] ^= b
                hi[w] ^= b
                xp[w] = nx
                zp[w] = nz
        cdef int c = <int> ((c1 + 2 * self._get_bit(self.signs, p)) & 3)
        for w in range(W):
            if c & 1:
                hi[w] ^= lo[w]
                lo[w] = ~lo[w]
            if c & 2:
                hi[w] = ~hi[w]
            self.signs[w] ^= hi[w] & sel[w]

    def expand(self, int k):
        """Append k fresh qubits in |0> (rebuilds planes)."""
        cdef int n = self.n, n2 = self.n + k
        cdef int W2 = (2 * n2 + 63) >> 6
        cdef u64 *nxc = <u64 *> calloc(n2 * W2, sizeof(u64))
        cdef u64 *nzc = <u64 *> calloc(n2 * W2, sizeof(u64))
        cdef u64 *nsigns = <u64 *> calloc(W2, sizeof(u64))
        cdef u64 *nscratch = <u64 *> calloc(4 * W2, sizeof(u64))
        if not (nxc and nzc and nsigns and nscratch):
            raise MemoryError
        cdef int j, r, r2
        for j in range(n):
            for r in range(2 * n):
                r2 = r if r < n else r + k
                if self._get_bit(self.xc + j * self.W, r):
                    nxc[j * W2 + (r2 >> 6)] |= (<u64> 1) << (r2 & 63)
                if self._get_bit(self.zc + j * self.W, r):
                    nzc[j * W2 + (r2 >> 6)] |= (<u64> 1) << (r2 & 63)
        for r in range(2 * n):
            r2 = r if r < n else r + k
            if self._get_bit(self.signs, r):
                nsigns[r2 >> 6] |= (<u64> 1) << (r2 & 63)
        for j in range(k):
            nxc[(n + j) * W2 + ((n + j) >> 6)] |= (<u64> 1) << ((n + j) & 63)
            nzc[(n + j) * W2 + ((n2 + n + j) >> 6)] |= (<u64> 1) << ((n2 + n + j) & 63)
        free(self.xc)
        free(self.zc)
        free(self.signs)
        free(self.scratch)
        self.xc = nxc
        self.zc = nzc
        self.signs = nsigns
        self.scratch = nscratch
        self.n = n2
        self.W = W2
