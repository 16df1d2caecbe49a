"""Dense statevector backend (up to 24 live qubits).

Qubit ids are stable handles; discarding a collapsed qubit frees its axis so
long protocol runs can stay within the dense budget.  Axis order follows id
creation order, with the first live id as the most significant index bit.
"""

from __future__ import annotations

import numpy as np

from ..denseops import GATE_MATRICES
from ..paulis import PauliOperator

MAX_QUBITS = 24


class StateVector:
    kind = "sv"

    def __init__(self, n: int = 0):
        self._amps = np.ones((1,), dtype=complex)
        self._ids: list[int] = []
        self._next_id = 0
        if n:
            self.append_qubits(n)

    @property
    def n(self) -> int:
        return len(self._ids)

    @property
    def qubit_ids(self) -> list[int]:
        return list(self._ids)

    def _axis(self, qubit_id: int) -> int:
        return self._ids.index(qubit_id)

    # -- allocation ---------------------------------------------------------
    def append_qubits(self, k: int, state: str = "zero") -> list[int]:
        if self.n + k > MAX_QUBITS:
            raise ValueError("statevector backend capped at 24 qubits")
        new_ids = list(range(self._next_id, self._next_id + k))
        self._next_id += k
        if state == "zero":
            vec = np.zeros(1 << k, dtype=complex)
            vec[0] = 1.0
        elif state == "plus":
            vec = np.full(1 << k, 2.0 ** (-k / 2), dtype=complex)
        else:
            raise ValueError(f"unknown preparation {state!r}")
        self._amps = np.kron(self._amps, vec)
        self._ids.extend(new_ids)
        return new_ids

    def append_amplitudes(self, amps: np.ndarray) -> list[int]:
        k = int(np.log2(len(amps)))
        if self.n + k > MAX_QUBITS:
            raise ValueError("statevector backend capped at 24 qubits")
        new_ids = list(range(self._next_id, self._next_id + k))
        self._next_id += k
        self._amps = np.kron(self._amps, np.asarray(amps, dtype=complex))
        self._ids.extend(new_ids)
        return new_ids

    def discard(self, qubits) -> None:
        for q in list(qubits):
            ax = self._axis(q)
            n = self.n
            view = self._amps.reshape((1 << ax, 2, -1))
            w0 = float(np.sum(np.abs(view[:, 0, :]) ** 2))
            w1 = float(np.sum(np.abs(view[:, 1, :]) ** 2))
            if min(w0, w1) > 1e-9:
                raise ValueError("discard requires a collapsed qubit")
            keepbit = 0 if w0 >= w1 else 1
            self._amps = np.ascontiguousarray(view[:, keepbit, :]).reshape(-1)
            norm = np.linalg.norm(self._amps)
            self._amps = self._amps / norm
            self._ids.pop(ax)

    def copy(self) -> "StateVector":
        s = StateVector.__new__(StateVector)
        s._amps = self._amps.copy()
        s._ids = list(self._ids)
        s._next_id = self._next_id
        return s

    # -- operations ---------------------------------------------------------
    def apply_gate(self, name: str, *qubits: int) -> None:
        if len(set(qubits)) != len(qubits):
            raise ValueError("duplicate gate targets")
        if name == "CNOT":
            self._apply_cnot(*qubits)
            return
        ax = self._axis(qubits[0])
        view = self._amps.reshape((1 << ax, 2, -1))
        if name == "X":
            view[:, [0, 1], :] = view[:, [1, 0], :]
            return
        if name == "Z":
            view[:, 1, :] *= -1.0
            return
        if name == "K":
            view[:, 1, :] *= 1j
            return
        if name == "Y":
            view[:, [0, 1], :] = view[:, [1, 0], :]
            view[:, 0, :] *= -1j
            view[:, 1, :] *= 1j
            return
        m = GATE_MATRICES[name]
        a0 = view[:, 0, :].copy()
        a1 = view[:, 1, :].copy()
        view[:, 0, :] = m[0, 0] * a0 + m[0, 1] * a1
        view[:, 1, :] = m[1, 0] * a0 + m[1, 1] * a1

    def apply_t_gate(self, qubit: int) -> None:
        """Non-Clifford pi/8 phase; only the dense backend supports it."""
        ax = self._axis(qubit)
        view = self._amps.reshape((1 << ax, 2, -1))
        view[:, 1, :] *= np.exp(1j * np.pi / 4)

    def _apply_cnot(self, control: int, target: int) -> None:
        axc, axt = self._axis(control), self._axis(target)
        n = self.n
        view = self._amps.reshape((2,) * n)
        idx_on = [slice(None)] * n
        idx_on[axc] = 1
        block = view[tuple(idx_on)]
        view[tuple(idx_on)] = np.flip(block, axis=axt - (1 if axt > axc else 0))

    def apply_pauli(self, p: PauliOperator, qubits) -> None:
        self._amps = self._amps * (1j ** p.phase_exp)
        for j, q in enumerate(qubits):
            xb, zb = (p.x >> j) & 1, (p.z >> j) & 1
            if xb and zb:
                ax = self._axis(q)
                view = self._amps.reshape((1 << ax, 2, -1))
                view[:, 1, :] *= -1.0
                self.apply_gate("X", q)
            elif xb:
                self.apply_gate("X", q)
            elif zb:
                self.apply_gate("Z", q)

    def z_probabilities(self, qubit: int) -> tuple[float, float]:
        ax = self._axis(qubit)
        view = self._amps.reshape((1 << ax, 2, -1))
        p0 = float(np.sum(np.abs(view[:, 0, :]) ** 2))
        p1 = float(np.sum(np.abs(view[:, 1, :]) ** 2))
        tot = p0 + p1
        if tot < 1e-300:
            return 0.0, 0.0
        return p0 / tot, p1 / tot

    def measure(self, qubit: int, rng=None, forced: int | None = None):
        p0, p1 = self.z_probabilities(qubit)
        if forced is not None:
            bit = forced
        else:
            bit = 1 if rng.random() < p1 else 0
        prob = p1 if bit else p0
        ax = self._axis(qubit)
        view = self._amps.reshape((1 << ax, 2, -1))
        view[:, 1 - bit, :] = 0.0
        if prob > 1e-300:
            self._amps = self._amps / np.sqrt(prob)
        return bit, prob

    def joint_outcomes(self, qubits) -> list[tuple[int, float, "StateVector"]]:
        """All outcomes of measuring the listed qubits jointly.

        Returns (bits, probability, posterior) triples; ``bits`` has the
        first listed qubit as its most significant bit, and the posterior
        keeps only the unmeasured qubits (ids preserved).
        """
        axes = [self._axis(q) for q in qubits]
        rest_axes = [a for a in range(self.n) if a not in axes]
        rest_ids = [self._ids[a] for a in rest_axes]
        arr = self._amps.reshape((2,) * self.n)
        arr = arr.transpose(axes + rest_axes).reshape(1 << len(axes), -1)
        probs = np.sum(np.abs(arr) ** 2, axis=1)
        out = []
        for k in range(1 << len(axes)):
            p = float(probs[k])
            if p < 1e-14:
                continue
            post = StateVector.__new__(StateVector)
            post._amps = np.ascontiguousarray(arr[k]) / np.sqrt(p)
            post._ids = list(rest_ids)
            post._next_id = self._next_id
            out.append((k, p, post))
        return out

    # -- inspection ----------------------------------------------------------
    def amplitudes(self, order: list[int] | None = None) -> np.ndarray:
        """Statevector with the given qubit-id order (default: id order)."""
        if order is None or order == self._ids:
            return self._amps.copy()
        perm = [self._axis(q) for q in order]
        return np.ascontiguousarray(
            self._amps.reshape((2,) * self.n).transpose(perm)).reshape(-1)

    def density_of(self, qubits) -> np.ndarray:
        keep = list(qubits)
        if len(keep) > 12:
            raise ValueError("dense reduction limited to 12 qubits")
        perm = [self._axis(q) for q in keep] + \
               [ax for ax in range(self.n) if self._ids[ax] not in keep]
        arr = self._amps.reshape((2,) * self.n).transpose(perm)
        arr = arr.reshape((1 << len(keep), -1))
        return arr @ arr.conj().T

    def norm(self) -> float:
        return float(np.linalg.norm(self._amps))

    # -- serialization -------------------------------------------------------
    def to_json(self) -> dict:
        return {
            "backend": "sv",
            "n": self.n,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self._amps],
        }

    @staticmethod
    def from_json(data: dict) -> "StateVector":
        s = StateVector()
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        s.append_amplitudes(amps)
        return s
