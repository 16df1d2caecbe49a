"""Pure-Python stabilizer tableau kernel.

Column-major layout: for each qubit there is one X plane and one Z plane,
each a Python integer whose bit i is the row-i entry (rows 0..n-1 are
destabilizers, rows n..2n-1 stabilizers).  Row signs live in one integer
plane.  Single- and two-qubit gates are then O(1) big-integer operations and
the measurement row sums are bit-sliced, which keeps this fallback usable at
a few hundred qubits.

Row i represents the Pauli (-1)^{sign_i} * prod_j letter(x_ij, z_ij) with
letter(1,1) = Y.
"""

from __future__ import annotations


def _popcount(v: int) -> int:
    return bin(v).count("1")


class TableauKernel:
    """CHP-style tableau for |0...0> plus Clifford gates and measurement."""

    __slots__ = ("n", "xcols", "zcols", "signs")

    def __init__(self, n: int, _raw: bool = False):
        self.n = n
        if _raw:
            return
        # Destabilizer i = X_i (row i), stabilizer i = Z_i (row n+i).
        self.xcols = [1 << i for i in range(n)]
        self.zcols = [1 << (n + i) for i in range(n)]
        self.signs = 0

    def copy(self) -> "TableauKernel":
        t = TableauKernel(self.n, _raw=True)
        t.xcols = list(self.xcols)
        t.zcols = list(self.zcols)
        t.signs = self.signs
        return t

    # -- gates -------------------------------------------------------------
    def h(self, q: int) -> None:
        xq, zq = self.xcols[q], self.zcols[q]
        self.signs ^= xq & zq
        self.xcols[q], self.zcols[q] = zq, xq

    def k(self, q: int) -> None:
        xq = self.xcols[q]
        self.signs ^= xq & self.zcols[q]
        self.zcols[q] ^= xq

    def cx(self, c: int, t: int) -> None:
        xc, zc = self.xcols[c], self.zcols[c]
        xt, zt = self.xcols[t], self.zcols[t]
        full = (1 << (2 * self.n)) - 1
        self.signs ^= xc & zt & (full ^ xt ^ zc)
        self.xcols[t] = xt ^ xc
        self.zcols[c] = zc ^ zt

    def x(self, q: int) -> None:
        self.signs ^= self.zcols[q]

    def y(self, q: int) -> None:
        self.signs ^= self.xcols[q] ^ self.zcols[q]

    def z(self, q: int) -> None:
        self.signs ^= self.xcols[q]

    def apply_pauli(self, xmask: int, zmask: int) -> None:
        """Apply X^xmask Z^zmask (phases are global, not tracked here)."""
        flips = 0
        q = 0
        while xmask >> q:
            if (xmask >> q) & 1:
                flips ^= self.zcols[q]
            q += 1
        q = 0
        while zmask >> q:
            if (zmask >> q) & 1:
                flips ^= self.xcols[q]
            q += 1
        self.signs ^= flips

    # -- measurement -------------------------------------------------------
    def _row_bits(self, row: int) -> tuple[int, int, int]:
        x = z = 0
        for j in range(self.n):
            x |= ((self.xcols[j] >> row) & 1) << j
            z |= ((self.zcols[j] >> row) & 1) << j
        return x, z, (self.signs >> row) & 1

    def stab_row(self, i: int) -> tuple[int, int, int]:
        """Stabilizer generator i as (xmask, zmask, signbit)."""
        return self._row_bits(self.n + i)

    def destab_row(self, i: int) -> tuple[int, int, int]:
        return self._row_bits(i)

    def set_row(self, row: int, x: int, z: int, sign: int) -> None:
        bit = 1 << row
        for j in range(self.n):
            self.xcols[j] = (self.xcols[j] & ~bit) | (bit if (x >> j) & 1 else 0)
            self.zcols[j] = (self.zcols[j] & ~bit) | (bit if (z >> j) & 1 else 0)
        self.signs = (self.signs & ~bit) | (bit if sign else 0)

    def peek(self, q: int) -> tuple[bool, int]:
        """(is_random, value): value valid only when deterministic."""
        n = self.n
        stab_mask = ((1 << n) - 1) << n
        if self.xcols[q] & stab_mask:
            return True, 0
        return False, self._deterministic_value(q)

    def _deterministic_value(self, q: int) -> int:
        n = self.n
        # Select stabilizer rows indexed by destabilizer x-bits at q.
        sel = (self.xcols[q] & ((1 << n) - 1)) << n
        acc = 2 * _popcount(self.signs & sel)
        for j in range(n):
            acc += _popcount(self.zcols[j] & sel) * _popcount(self.xcols[j] & sel)
        return (acc >> 1) & 1

    def measure(self, q: int, random_bit: int) -> tuple[int, bool]:
        """Measure qubit q; random_bit is consumed only for random outcomes."""
        n = self.n
        stab_mask = ((1 << n) - 1) << n
        anti = self.xcols[q] & stab_mask
        if not anti:
            return self._deterministic_value(q), False
        p = (anti & -anti).bit_length() - 1  # first anticommuting stab row
        xp, zp, rp = self._row_bits(p)
        sel = (self.xcols[q] | 0) & ~(1 << p) & ~(1 << (p - n))
        self._batched_rowsum(sel, xp, zp, rp)
        # Destabilizer p-n := old stabilizer row p.
        dbit = 1 << (p - n)
        for j in range(n):
            self.xcols[j] = (self.xcols[j] & ~dbit) | (dbit if (xp >> j) & 1 else 0)
            self.zcols[j] = (self.zcols[j] & ~dbit) | (dbit if (zp >> j) & 1 else 0)
        self.signs = (self.signs & ~dbit) | (dbit if rp else 0)
        # Stabilizer row p := (-1)^{random_bit} Z_q.
        pbit = 1 << p
        for j in range(n):
            self.xcols[j] &= ~pbit
            self.zcols[j] &= ~pbit
        self.zcols[q] |= pbit
        self.signs = (self.signs & ~pbit) | (pbit if random_bit else 0)
        return random_bit & 1, True

    def _batched_rowsum(self, sel: int, xp: int, zp: int, rp: int) -> None:
        """row_i <- row_p * row_i for every row i in ``sel`` (bit-sliced)."""
        if not sel:
            return
        n = self.n
        # Two-bit accumulator per row of (|xi&zi| - |xi'&zi'| + 2|zp&xi|
        # + |xp&zp|) mod 4; the final result is 0 or 2 and bit 1 is the flip.
        lo = hi = 0
        c1 = 0  # |xp & zp| scalar
        for j in range(n):
            xq, zq = self.xcols[j], self.zcols[j]
            xpj, zpj = (xp >> j) & 1, (zp >> j) & 1
            c1 += xpj & zpj
            b = xq & zq                      # + |xi & zi|
            hi ^= lo & b
            lo ^= b
            if zpj:                          # + 2 |zp & xi|
                hi ^= xq
            nxq = xq ^ (sel if xpj else 0)   # - |xi' & zi'| == +3*|..| mod 4
            nzq = zq ^ (sel if zpj else 0)
            b = nxq & nzq
            # add 3*b: +b then +2b
            hi ^= lo & b
            lo ^= b
            hi ^= b
            # update columns for selected rows
            if xpj:
                self.xcols[j] = nxq
            else:
                self.xcols[j] = xq
            if zpj:
                self.zcols[j] = nzq
            else:
                self.zcols[j] = zq
        # add scalar (c1 + 2*rp) mod 4 over all rows
        c = (c1 + 2 * rp) & 3
        if c & 1:
            hi ^= lo
            lo = ~lo
        if c & 2:
            hi = ~hi
        self.signs ^= hi & sel

    # -- resizing ----------------------------------------------------------
    def expand(self, k: int) -> None:
        """Append k fresh qubits in |0>."""
        n, n2 = self.n, self.n + k
        dmask = (1 << n) - 1

        def remap(plane: int) -> int:
            return (plane & dmask) | ((plane >> n) << n2)

        self.xcols = [remap(p) for p in self.xcols]
        self.zcols = [remap(p) for p in self.zcols]
        self.signs = remap(self.signs)
        for i in range(k):
            self.xcols.append(1 << (n + i))
            self.zcols.append(1 << (n2 + n + i))
        self.n = n2
