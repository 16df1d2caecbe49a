"""GF(2) linear algebra on integer bitmasks.

Vectors over GF(2) are Python integers (bit j = coordinate j), matrices are
lists of row masks.  Everything here is exact and allocation-light; it backs
the symbolic code/trap classification paths.
"""

from __future__ import annotations


def parity(mask: int) -> int:
    return bin(mask).count("1") & 1


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def dot(a: int, b: int) -> int:
    return parity(a & b)


def rref(rows: list[int], ncols: int) -> tuple[list[int], list[int]]:
    """Reduced row echelon form.

    Returns (reduced nonzero rows, pivot column per row).
    """
    reduced: list[int] = []
    pivots: list[int] = []
    for row in rows:
        for r, p in zip(reduced, pivots):
            if (row >> p) & 1:
                row ^= r
        if row == 0:
            continue
        p = row.bit_length() - 1  # leading (highest) set bit as pivot
        keep_r, keep_p = [], []
        for r, q in zip(reduced, pivots):
            if (r >> p) & 1:
                r ^= row
            keep_r.append(r)
            keep_p.append(q)
        reduced = keep_r + [row]
        pivots = keep_p + [p]
    return reduced, pivots


def rank(rows: list[int], ncols: int) -> int:
    return len(rref(rows, ncols)[0])


def solve(rows: list[int], ncols: int, rhs: list[int]) -> int | None:
    """Solve A x = rhs for x (A given as row masks, rhs as a bit list).

    Returns one solution mask over the ``ncols`` unknowns, or None.
    """
    # Gaussian elimination on the augmented system.
    aug = [(rows[i], rhs[i] & 1) for i in range(len(rows))]
    pivots: list[tuple[int, int, int]] = []  # (row, rhs, pivot col)
    for row, b in aug:
        for r, rb, p in pivots:
            if (row >> p) & 1:
                row ^= r
                b ^= rb
        if row == 0:
            if b:
                return None
            continue
        p = row.bit_length() - 1
        pivots = [(r ^ row if (r >> p) & 1 else r,
                   rb ^ b if (r >> p) & 1 else rb, q) for r, rb, q in pivots]
        pivots.append((row, b, p))
    x = 0
    for r, b, p in pivots:
        if b:
            x |= 1 << p
    # Verify (free variables set to zero always satisfy reduced system).
    for row, b in [(rows[i], rhs[i] & 1) for i in range(len(rows))]:
        if dot(row, x) != b:
            return None
    return x


def nullspace(rows: list[int], ncols: int) -> list[int]:
    """Basis of {x : A x = 0} with A given as row masks over ncols unknowns."""
    reduced, pivots = rref(rows, ncols)
    pivot_set = set(pivots)
    basis = []
    for j in range(ncols):
        if j in pivot_set:
            continue
        vec = 1 << j
        for r, p in zip(reduced, pivots):
            if (r >> j) & 1:
                vec |= 1 << p
        basis.append(vec)
    return basis
