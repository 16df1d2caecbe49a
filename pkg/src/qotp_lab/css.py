"""CSS code machinery: Steane [[7,1,3]], self-concatenation, encoder
circuits, classical decoding, and symbolic classification of Paulis
relative to a code.

Conventions (fixed so fixtures are reproducible bit-for-bit):

- Parity checks are stored as integer bitmasks, qubit j = bit j.
- The Steane checks are the [7,4] Hamming rows 0001111, 0110011, 1010101
  (qubit 0 is the leftmost character) used for both hx and hz.
- The encoder acts on wires (D, Sx_1..Sx_kx, Sz_1..Sz_kz) in that order;
  measuring Sx after decoding reveals the X-error syndrome (Z-type checks)
  and Sz the Z-error syndrome.  It is built from the parity-check matrix by
  a fixed Gaussian-elimination schedule: route wires, fan out the logical-X
  support from the data wire, then H + fan out each reduced hx row from its
  pivot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .gf2 import dot, parity, popcount, rref, solve
from .paulis import CliffordUnitary, PauliOperator


def _mask_from_string(s: str) -> int:
    # "0001111" with qubit 0 leftmost
    m = 0
    for j, ch in enumerate(s):
        if ch == "1":
            m |= 1 << j
    return m


def _mask_to_string(m: int, n: int) -> str:
    return "".join("1" if (m >> j) & 1 else "0" for j in range(n))


@dataclass(frozen=True)
class DecodeResult:
    logical_bit: int
    error: int  # n-bit coset-leader pattern; 0 iff the record is clean

    @property
    def clean(self) -> bool:
        return self.error == 0


@dataclass(frozen=True)
class LogicalClass:
    """Classification of a Pauli relative to a code."""

    kind: str  # "trivial" | "logical" | "detected"
    logical: PauliOperator | None
    syndrome_x: tuple  # X-error syndrome bits (Z-type checks on x-part)
    syndrome_z: tuple  # Z-error syndrome bits (X-type checks on z-part)
    x_only_kind: str   # same partition ignoring the Z-error syndrome
    x_logical_bit: int  # X-component of the induced logical


@dataclass(frozen=True)
class CssCode:
    name: str
    n: int
    d: int
    hx: tuple          # X-type stabilizer generators (masks)
    hz: tuple          # Z-type stabilizer generators (masks)
    logical_x: int     # mask of the logical X representative
    logical_z: int
    self_dual: bool
    _decode: Callable[[int], tuple[int, int]] = field(compare=False)

    # -- derived -----------------------------------------------------------
    @property
    def n_physical(self) -> int:
        return self.n

    @property
    def k(self) -> int:
        return 1

    @property
    def logical_x_pauli(self) -> PauliOperator:
        return PauliOperator.from_masks(self.n, self.logical_x, 0)

    @property
    def logical_z_pauli(self) -> PauliOperator:
        return PauliOperator.from_masks(self.n, 0, self.logical_z)

    def __post_init__(self):
        for rx in self.hx:
            for rz in self.hz:
                if dot(rx, rz):
                    raise ValueError("hx and hz are not orthogonal")
        if dot(self.logical_x, self.logical_z) != 1:
            raise ValueError("logical X and Z must anticommute")

    # -- encoder -----------------------------------------------------------
    @property
    def encoder(self) -> CliffordUnitary:
        return build_encoder(self)

    def encoder_wires(self) -> tuple[int, list[int], list[int]]:
        """(data wire, X-syndrome wires, Z-syndrome wires) of the encoder."""
        kx = len(self.hx)
        kz = len(self.hz)
        return 0, list(range(1, 1 + kz)), list(range(1 + kz, 1 + kz + kx))

    # -- classical decoding --------------------------------------------------
    def classical_decode(self, c: int) -> DecodeResult:
        a, e = self._decode(c)
        return DecodeResult(a, e)

    def logical_indicator(self) -> int:
        """A functional phi with phi.c = logical bit for clean codewords."""
        rows = list(self.hx) + [self.logical_x]
        rhs = [0] * len(self.hx) + [1]
        # Solve phi over the column space: phi . hx_i = 0, phi . Lx = 1.
        phi = solve(rows, self.n, rhs)
        if phi is None:
            raise AssertionError("no logical indicator functional")
        return phi

    # -- symbolic classification ---------------------------------------------
    def syndromes_of(self, q: PauliOperator) -> tuple[tuple, tuple]:
        sx = tuple(dot(row, q.x) for row in self.hz)
        sz = tuple(dot(row, q.z) for row in self.hx)
        return sx, sz

    def logical_pauli_of(self, q: PauliOperator) -> LogicalClass:
        if q.n != self.n:
            raise ValueError("size mismatch")
        sx, sz = self.syndromes_of(q)
        a = dot(q.x, self.logical_z)  # anticommutation with logical Z
        b = dot(q.z, self.logical_x)
        if any(sx):
            x_only = "detected"
        elif a:
            x_only = "logical"
        else:
            x_only = "trivial"
        if any(sx) or any(sz):
            return LogicalClass("detected", None, sx, sz, x_only, a)
        induced = self._induced_logical(q, a, b)
        kind = "trivial" if induced.is_identity() else "logical"
        return LogicalClass(kind, induced, sx, sz, x_only, a)

    def _induced_logical(self, q: PauliOperator, a: int, b: int) -> PauliOperator:
        """Exact i^k X^a Z^b induced on the logical qubit (zero syndrome)."""
        lam = solve(
            [self._col(self.hx, j) for j in range(self.n)], len(self.hx),
            [((q.x >> j) & 1) ^ (a & (self.logical_x >> j) & 1)
             for j in range(self.n)])
        mu = solve(
            [self._col(self.hz, j) for j in range(self.n)], len(self.hz),
            [((q.z >> j) & 1) ^ (b & (self.logical_z >> j) & 1)
             for j in range(self.n)])
        if lam is None or mu is None:
            raise AssertionError("zero-syndrome Pauli failed stabilizer solve")
        ref = PauliOperator.identity(self.n)
        if a:
            ref = ref * self.logical_x_pauli
        if b:
            ref = ref * self.logical_z_pauli
        for i, row in enumerate(self.hx):
            if (lam >> i) & 1:
                ref = ref * PauliOperator.from_masks(self.n, row, 0)
        for i, row in enumerate(self.hz):
            if (mu >> i) & 1:
                ref = ref * PauliOperator.from_masks(self.n, 0, row)
        res = (q.phase_exp - ref.phase_exp) & 3
        return PauliOperator(1, a, b, res)

    def _col(self, rows: tuple, j: int) -> int:
        m = 0
        for i, row in enumerate(rows):
            m |= ((row >> j) & 1) << i
        return m

    # -- serialization ---------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "d": self.d,
            "hx": [_mask_to_string(r, self.n) for r in self.hx],
            "hz": [_mask_to_string(r, self.n) for r in self.hz],
            "logical_x": _mask_to_string(self.logical_x, self.n),
            "logical_z": _mask_to_string(self.logical_z, self.n),
        }


# ---------------------------------------------------------------------------
# encoder construction
# ---------------------------------------------------------------------------

def _routing_swaps(route: dict[int, int], n: int) -> list[tuple]:
    """SWAP network (as CNOT triples) realizing wire -> position routing."""
    gates = []
    current = list(range(n))  # current[w] = wire sitting at position w
    pos_of = {w: w for w in range(n)}
    for wire, target in sorted(route.items()):
        p = pos_of[wire]
        if p == target:
            continue
        other = current[target]
        gates.extend([("CNOT", p, target), ("CNOT", target, p),
                      ("CNOT", p, target)])
        current[p], current[target] = other, wire
        pos_of[wire], pos_of[other] = target, p
    return gates


def build_encoder(code: CssCode) -> CliffordUnitary:
    n = code.n
    reduced, pivots = rref(list(code.hx), n)
    lx = code.logical_x
    for row, p in zip(reduced, pivots):
        if (lx >> p) & 1:
            lx ^= row
    if lx == 0:
        raise AssertionError("logical X reduced to a stabilizer")
    d0 = (lx & -lx).bit_length() - 1
    sx_positions = [j for j in range(n) if j not in pivots and j != d0]
    data_wire, sx_wires, sz_wires = code.encoder_wires()
    route = {data_wire: d0}
    for w, p in zip(sx_wires, sx_positions):
        route[w] = p
    for w, p in zip(sz_wires, pivots):
        route[w] = p
    gates = _routing_swaps(route, n)
    for j in range(n):
        if j != d0 and (lx >> j) & 1:
            gates.append(("CNOT", d0, j))
    for row, p in zip(reduced, pivots):
        gates.append(("H", p))
        for j in range(n):
            if j != p and (row >> j) & 1:
                gates.append(("CNOT", p, j))
    return CliffordUnitary(n, tuple(gates))


# ---------------------------------------------------------------------------
# Steane, toy, and concatenated codes
# ---------------------------------------------------------------------------

_STEANE_ROWS = ("0001111", "0110011", "1010101")


def _hamming_decode(c: int) -> tuple[int, int]:
    rows = [_mask_from_string(s) for s in _STEANE_ROWS]
    syn = tuple(dot(r, c) for r in rows)
    e = 0
    if any(syn):
        for j in range(7):
            if all(((r >> j) & 1) == s for r, s in zip(rows, syn)):
                e = 1 << j
                break
        else:
            raise AssertionError("Hamming syndrome must match a column")
    word = c ^ e
    return parity(word), e


def build_steane() -> CssCode:
    rows = tuple(_mask_from_string(s) for s in _STEANE_ROWS)
    return CssCode(
        name="steane",
        n=7,
        d=3,
        hx=rows,
        hz=rows,
        logical_x=0b1111111,
        logical_z=0b1111111,
        self_dual=True,
        _decode=_hamming_decode,
    )


def build_toy_code() -> CssCode:
    """[[1,1,1]] identity code; security is vacuous but every flow runs."""
    return CssCode(
        name="toy",
        n=1,
        d=1,
        hx=(),
        hz=(),
        logical_x=1,
        logical_z=1,
        self_dual=True,
        _decode=lambda c: (c & 1, 0),
    )


def concatenate(code: CssCode, levels: int) -> CssCode:
    """Nest a code with itself; levels=1 returns the input unchanged."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if levels > 2:
        raise ValueError("capability bound: levels <= 2")
    if levels == 1:
        return code
    if code.logical_x != (1 << code.n) - 1 or code.logical_z != code.logical_x:
        raise ValueError("concatenation requires bitwise all-ones logicals")
    n, n2 = code.n, code.n * code.n
    inner_rows_x = []
    inner_rows_z = []
    for j in range(n):
        for r in code.hx:
            inner_rows_x.append(r << (n * j))
        for r in code.hz:
            inner_rows_z.append(r << (n * j))
    block_ones = (1 << n) - 1
    outer_rows_x = []
    outer_rows_z = []
    for r in code.hx:
        m = 0
        for j in range(n):
            if (r >> j) & 1:
                m |= block_ones << (n * j)
        outer_rows_x.append(m)
    for r in code.hz:
        m = 0
        for j in range(n):
            if (r >> j) & 1:
                m |= block_ones << (n * j)
        outer_rows_z.append(m)

    def decode2(c: int) -> tuple[int, int]:
        inner_bits = 0
        corrected_blocks = []
        for j in range(n):
            word = (c >> (n * j)) & block_ones
            res = code.classical_decode(word)
            inner_bits |= res.logical_bit << j
            corrected_blocks.append(word ^ res.error)
        outer = code.classical_decode(inner_bits)
        a = outer.logical_bit
        cword = 0
        for j in range(n):
            w = corrected_blocks[j]
            if (outer.error >> j) & 1:
                w ^= code.logical_x  # flip the block's logical value
            cword |= w << (n * j)
        return a, c ^ cword

    return CssCode(
        name=f"{code.name}^2",
        n=n2,
        d=code.d ** 2,
        hx=tuple(inner_rows_x + outer_rows_x),
        hz=tuple(inner_rows_z + outer_rows_z),
        logical_x=(1 << n2) - 1,
        logical_z=(1 << n2) - 1,
        self_dual=code.self_dual,
        _decode=decode2,
    )


def code_from_spec(name: str, levels: int = 1) -> CssCode:
    base = {"steane": build_steane, "toy": build_toy_code}[name]()
    return concatenate(base, levels) if levels > 1 else base
