"""Stabilizer tableau backend.

Wraps one of two interchangeable kernels: the compiled extension
(``_tableau_core``, Cython) or the pure-Python bit-plane kernel
(``_tableau_pure``).  Selection happens at import time; set
``QOTP_LAB_PURE=1`` to force the fallback.  ``benchmarks/bench_tableau.py``
compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from ..gf2 import nullspace, popcount
from ..paulis import PauliOperator

if os.environ.get("QOTP_LAB_PURE", "") == "1":
    from ._tableau_pure import TableauKernel
    KERNEL = "pure"
else:
    try:
        from ._tableau_core import TableauKernel  # type: ignore

        KERNEL = "compiled"
    except ImportError:
        from ._tableau_pure import TableauKernel

        KERNEL = "pure"

MAX_QUBITS = 4096

_PAR16 = np.zeros(1 << 16, dtype=np.int8)
for _v in range(1, 1 << 16):
    _PAR16[_v] = _PAR16[_v >> 1] ^ (_v & 1)


def _parity_of(arr: np.ndarray) -> np.ndarray:
    return _PAR16[arr & 0xFFFF] ^ _PAR16[(arr >> 16) & 0xFFFF]


class TableauState:
    """Stabilizer state on up to 4096 qubits (state modulo global phase)."""

    kind = "tab"

    def __init__(self, n: int = 0, capacity: int | None = None):
        if n > MAX_QUBITS:
            raise ValueError("tableau backend capped at 4096 qubits")
        cap = max(n, capacity or 0, 1)
        self._kernel = TableauKernel(cap)
        self._capacity = cap
        self.n = n

    # -- allocation ---------------------------------------------------------
    def append_qubits(self, k: int, state: str = "zero") -> list[int]:
        ids = list(range(self.n, self.n + k))
        if self.n + k > self._capacity:
            self._kernel.expand(self.n + k - self._capacity)
            self._capacity = self.n + k
        self.n += k
        if state == "plus":
            for q in ids:
                self._kernel.h(q)
        elif state != "zero":
            raise ValueError(f"unknown preparation {state!r}")
        return ids

    def discard(self, qubits) -> None:
        # Post-measurement qubits are product states; keeping them in the
        # tableau is free, so discard only sanity-checks collapse.
        for q in qubits:
            random, _ = self._kernel.peek(q)
            if random:
                raise ValueError("discard requires a collapsed qubit")

    def copy(self) -> "TableauState":
        t = TableauState.__new__(TableauState)
        t._kernel = self._kernel.copy()
        t._capacity = self._capacity
        t.n = self.n
        return t

    # -- operations ---------------------------------------------------------
    def apply_gate(self, name: str, *qubits: int) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise ValueError("gate target out of range")
        if len(set(qubits)) != len(qubits):
            raise ValueError("duplicate gate targets")
        k = self._kernel
        if name == "H":
            k.h(*qubits)
        elif name == "K":
            k.k(*qubits)
        elif name == "CNOT":
            k.cx(*qubits)
        elif name == "X":
            k.x(*qubits)
        elif name == "Y":
            k.y(*qubits)
        elif name == "Z":
            k.z(*qubits)
        else:
            raise ValueError(f"unknown gate {name!r}")

    def apply_pauli(self, p: PauliOperator, qubits) -> None:
        x = z = 0
        for j, q in enumerate(qubits):
            x |= ((p.x >> j) & 1) << q
            z |= ((p.z >> j) & 1) << q
        self._kernel.apply_pauli(x, z)

    def z_probabilities(self, qubit: int) -> tuple[float, float]:
        random, value = self._kernel.peek(qubit)
        if random:
            return 0.5, 0.5
        return (1.0, 0.0) if value == 0 else (0.0, 1.0)

    def measure(self, qubit: int, rng=None, forced: int | None = None):
        """Measure in the computational basis; returns (bit, probability)."""
        random, value = self._kernel.peek(qubit)
        if not random:
            bit = self._kernel.measure(qubit, 0)[0]
            if forced is not None and forced != bit:
                return forced, 0.0
            return bit, 1.0
        bit = forced if forced is not None else int(rng.integers(0, 2))
        self._kernel.measure(qubit, bit)
        return bit, 0.5

    # -- inspection ----------------------------------------------------------
    def stabilizer_rows(self) -> list[tuple[int, int, int]]:
        return [self._kernel.stab_row(i) for i in range(self.n)]

    def destabilizer_rows(self) -> list[tuple[int, int, int]]:
        return [self._kernel.destab_row(i) for i in range(self.n)]

    def density_of(self, qubits) -> np.ndarray:
        """Reduced density matrix on the listed qubits (<= 12).

        Sums the stabilizer-group elements supported inside the kept set:
        rho = 2^{-k} sum_{P in S_keep} P.
        """
        keep = list(qubits)
        k = len(keep)
        if k > 12:
            raise ValueError("dense reduction limited to 12 qubits")
        pos = {q: i for i, q in enumerate(keep)}
        keep_mask = 0
        for q in keep:
            keep_mask |= 1 << q
        rows = self.stabilizer_rows()
        # Generator combinations supported inside `keep`: nullspace of the
        # outside-support matrix (unknown = generator selection vector).
        cols = []
        for j in range(self.n):
            if (keep_mask >> j) & 1:
                continue
            colx = colz = 0
            for i, (x, z, _) in enumerate(rows):
                colx |= ((x >> j) & 1) << i
                colz |= ((z >> j) & 1) << i
            cols.append(colx)
            cols.append(colz)
        basis = nullspace(cols, len(rows))
        dim = 1 << k
        rho = np.zeros((dim, dim), dtype=complex)
        idx = np.arange(dim)
        for combo_bits in range(1 << len(basis)):
            combo = 0
            cb, bi = combo_bits, 0
            while cb:
                if cb & 1:
                    combo ^= basis[bi]
                cb >>= 1
                bi += 1
            x = z = 0
            phase = 0
            for i, (rx, rz, rs) in enumerate(rows):
                if (combo >> i) & 1:
                    phase += 2 * rs + popcount(rx & rz) + 2 * popcount(z & rx)
                    x ^= rx
                    z ^= rz
            phase = (phase - popcount(x & z)) % 4
            # Restrict to keep, with qubit i of keep at index bit k-1-i.
            xr = zr = 0
            ycount = 0
            for q in keep:
                if (x >> q) & 1:
                    xr |= 1 << (k - 1 - pos[q])
                if (z >> q) & 1:
                    zr |= 1 << (k - 1 - pos[q])
                ycount += (x >> q) & (z >> q) & 1
            scale = (-1) ** (phase // 2) * (1j) ** ycount
            signs = 1.0 - 2.0 * _parity_of(idx & zr)
            rho[idx ^ xr, idx] += scale * signs
        return rho / dim

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        def row_label(r):
            x, z, s = r
            return ("-" if s else "+") + "".join(
                "IXZY"[((x >> j) & 1) | (((z >> j) & 1) << 1)]
                for j in range(self.n))

        return {
            "backend": "tab",
            "n": self.n,
            "destabilizers": [row_label(r) for r in self.destabilizer_rows()],
            "stabilizers": [row_label(r) for r in self.stabilizer_rows()],
        }

    @staticmethod
    def from_json(data: dict) -> "TableauState":
        n = data["n"]
        state = TableauState(n)
        letters = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}

        def parse(label):
            sign = 1 if label[0] == "-" else 0
            x = z = 0
            for j, ch in enumerate(label[1:]):
                xb, zb = letters[ch]
                x |= xb << j
                z |= zb << j
            return x, z, sign

        for i, label in enumerate(data["destabilizers"]):
            state._kernel.set_row(i, *parse(label))
        for i, label in enumerate(data["stabilizers"]):
            state._kernel.set_row(n + i, *parse(label))
        return state
