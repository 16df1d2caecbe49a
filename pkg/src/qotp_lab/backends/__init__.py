"""Simulation backends with one contract.

Three interoperable state representations:

- ``StateVector`` - dense amplitudes, <= 24 qubits, supports the T gate.
- ``TableauState`` - stabilizer tableau, <= 4096 qubits (compiled kernel
  with a pure-Python fallback, see ``tableau.KERNEL``).
- ``StabilizerSum`` - amplitude-weighted stabilizer terms, <= 256 qubits,
  rank <= 1024; covers circuits with few injected T-type magic states.

All expose: append_qubits, apply_gate, apply_pauli, measure,
z_probabilities, density_of, copy, to_json/from_json.
"""

from __future__ import annotations

from .statevector import StateVector
from .stabsum import StabilizerSum
from .tableau import KERNEL, TableauState

__all__ = [
    "StateVector",
    "TableauState",
    "StabilizerSum",
    "KERNEL",
    "state_from_json",
    "measure_all",
    "apply_circuit",
    "make_backend",
]


def make_backend(kind: str, n: int = 0, capacity: int | None = None):
    if kind == "sv":
        s = StateVector()
        if n:
            s.append_qubits(n)
        return s
    if kind == "tab":
        return TableauState(n, capacity=capacity)
    if kind == "sum":
        return StabilizerSum(n)
    raise ValueError(f"unknown backend {kind!r}")


def state_from_json(data: dict):
    kind = data["backend"]
    if kind == "sv":
        return StateVector.from_json(data)
    if kind == "tab":
        return TableauState.from_json(data)
    if kind == "sum":
        return StabilizerSum.from_json(data)
    raise ValueError(f"unknown backend {kind!r}")


def apply_circuit(state, gates, qubit_map=None) -> None:
    """Apply a gate list; qubit_map translates circuit wires to qubit ids."""
    for g in gates:
        if qubit_map is None:
            state.apply_gate(g[0], *g[1:])
        else:
            state.apply_gate(g[0], *[qubit_map[w] for w in g[1:]])


def measure_all(state, qubits, rng=None, forced=None) -> tuple[list[int], float]:
    """Measure the listed qubits in order; returns (bits, joint probability)."""
    bits = []
    prob = 1.0
    for i, q in enumerate(qubits):
        f = None if forced is None else forced[i]
        b, p = state.measure(q, rng=rng, forced=f)
        bits.append(b)
        prob *= p
    return bits, prob
