"""The quantum one-time program: controlled-circuit compilation, sender
message preparation, the reactive-program verifier, the honest receiver,
the security simulator, and exact real-vs-simulated comparison.

Roles and register names (one protocol instance, |B| logical wires):

- ``At{i}``   authenticated sender-input qubits
- ``Bin{i}`` / ``Bt{i}``   teleport-through-authentication pair: a bare EPR
  half and the authenticated half the receiver's input teleports into
- ``Bout{i}`` group   teleport-through-de-authentication: 3n EPR pairs with
  decode-then-encrypt applied to one side, syndrome wires kept but ignored
- ``Et{j}`` / ``Ctl``   authenticated workspace |0> qubits and the control
  qubit (|1> in the real protocol, |0> for the simulator)
- ``M{i}``   authenticated magic registers, one per reactive round

The control qubit turns the whole compiled circuit into controlled-U; the
simulator runs it switched off and splices the one ideal evaluation in via
an extra teleportation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .backends import StabilizerSum, StateVector, TableauState
from .cotp import brotp_compile, brotp_query
from .css import CssCode, code_from_spec
from .gadgets import (AuthSession, MagicSlot, Register, ReplayDriver,
                      SamplingDriver, magic_requirements, magic_preparer,
                      new_t_magic_qubit, pauli_eigenstate_prep)
from .paulis import CliffordUnitary, PauliOperator
from .trap import TrapCode, random_pauli, sample_trap_code

UNIVERSAL_GATES = ("X", "Y", "Z", "CNOT", "K", "T", "H")


# ---------------------------------------------------------------------------
# controlled-gate decomposition table (verified densely once per process)
# ---------------------------------------------------------------------------

def _tdag(t):
    return [("Z", t), ("K", t), ("T", t)]


def _kdag(t):
    # K^dag = K Z: one magic gadget instead of three
    return [("Z", t), ("K", t)]


def _b(t):
    return [("H", t), ("K", t)]


def _bdag(t):
    return _kdag(t) + [("H", t)]


def _r(t):
    return _bdag(t) + [("T", t)] + _b(t)


def _rdag(t):
    return _bdag(t) + _tdag(t) + _b(t)


def _rccx(a, b, w):
    return ([("H", w), ("T", w), ("CNOT", b, w)] + _tdag(w)
            + [("CNOT", a, w), ("T", w), ("CNOT", b, w)] + _tdag(w)
            + [("H", w)])


def _invert(gates):
    out = []
    for g in reversed(gates):
        if g[0] == "K":
            out.extend(_kdag(g[1]))
        elif g[0] == "T":
            out.extend(_tdag(g[1]))
        else:
            out.append(g)
    return out


def controlled_gate(gate: tuple, control: int, workspace: int) -> list[tuple]:
    """Decomposition of controlled-``gate`` over the universal set.

    ``workspace`` is a |0>-initialized helper wire used (and returned to
    |0>) only by the controlled-T entry.
    """
    name = gate[0]
    if name == "X":
        return [("CNOT", control, gate[1])]
    if name == "Z":
        t = gate[1]
        return [("H", t), ("CNOT", control, t), ("H", t)]
    if name == "Y":
        t = gate[1]
        return _kdag(t) + [("CNOT", control, t), ("K", t)]
    if name == "K":
        t = gate[1]
        return ([("CNOT", control, t)] + _tdag(t)
                + [("CNOT", control, t), ("T", t), ("T", control)])
    if name == "H":
        t = gate[1]
        return _r(t) + [("CNOT", control, t)] + _rdag(t)
    if name == "T":
        t = gate[1]
        fwd = _rccx(control, t, workspace)
        return fwd + [("T", workspace)] + _invert(fwd)
    if name == "CNOT":
        a, b = gate[1], gate[2]
        w = b
        return ([("H", w), ("CNOT", gate[1], w)] + _tdag(w)
                + [("CNOT", control, w), ("T", w), ("CNOT", gate[1], w)]
                + _tdag(w)
                + [("CNOT", control, w), ("T", gate[1]), ("T", w), ("H", w),
                   ("CNOT", control, gate[1])] + _tdag(gate[1])
                + [("CNOT", control, gate[1]), ("T", control)])
    raise ValueError(f"gate {name!r} outside the universal set")


_TABLE_VERIFIED = False


def verify_controlled_table() -> None:
    """Dense unitary check of every decomposition entry (build-time gate)."""
    global _TABLE_VERIFIED
    if _TABLE_VERIFIED:
        return
    from . import denseops as dn

    def ctrl(u):
        d = u.shape[0]
        out = np.eye(2 * d, dtype=complex)
        out[d:, d:] = u
        return out

    for name in ("X", "Y", "Z", "K", "H"):
        gates = controlled_gate((name, 1), 0, 2)
        got = dn.circuit_matrix(2, gates)
        if not np.allclose(got, ctrl(dn.GATE_MATRICES[name]), atol=1e-10):
            raise AssertionError(f"controlled-{name} table entry is wrong")
    got = dn.circuit_matrix(3, controlled_gate(("CNOT", 1, 2), 0, None))
    if not np.allclose(got, ctrl(dn.cnot_matrix(2, 0, 1)), atol=1e-10):
        raise AssertionError("controlled-CNOT table entry is wrong")
    got = dn.circuit_matrix(3, controlled_gate(("T", 1), 0, 2))
    cols = [i for i in range(8) if i % 2 == 0]
    other = [i for i in range(8) if i % 2 == 1]
    want = np.eye(4, dtype=complex)
    want[3, 3] = np.exp(1j * np.pi / 4)
    if not (np.allclose(got[np.ix_(cols, cols)], want, atol=1e-10)
            and np.allclose(got[np.ix_(other, cols)], 0, atol=1e-10)):
        raise AssertionError("controlled-T table entry is wrong")
    _TABLE_VERIFIED = True


@dataclass(frozen=True)
class CompiledProgram:
    """Controlled form of a channel circuit, ready for encoded execution."""

    base_circuit: tuple      # U over wires (A, B, E-work)
    n_a: int
    n_b: int
    n_work: int              # declared workspace wires of U itself
    uses_t_helper: bool      # extra |0> wire appended for controlled-T
    controlled_circuit: tuple  # over wires (A, B, E-work [, helper], control)
    magic_kinds: tuple       # kind per magic register, in round order
    partition: tuple         # Clifford segments between magic gates
    magic_gates: tuple       # the magic-consuming gates, in order
    corrections: tuple       # correction descriptor per magic gate

    @property
    def r(self) -> int:
        """Count of K/T/H gates in the controlled circuit."""
        return sum(1 for g in self.controlled_circuit
                   if g[0] in ("K", "T", "H"))

    @property
    def n_e(self) -> int:
        return self.n_work + (1 if self.uses_t_helper else 0) + 1

    @property
    def wires(self) -> int:
        return self.n_a + self.n_b + self.n_e

    @property
    def control_wire(self) -> int:
        return self.wires - 1

    @property
    def rounds(self) -> int:
        """Reactive rounds: one per magic register, plus first and last."""
        return len(self.magic_kinds) + 2


def compile_controlled_program(circuit, n_a: int, n_b: int,
                               n_work: int = 0) -> CompiledProgram:
    """Replace every gate of U with its controlled decomposition."""
    verify_controlled_table()
    circuit = tuple(tuple(g) for g in circuit)
    for g in circuit:
        if g[0] not in UNIVERSAL_GATES:
            raise ValueError(f"gate {g[0]!r} outside the universal set")
    uses_helper = any(g[0] == "T" for g in circuit)
    data_wires = n_a + n_b + n_work
    helper = data_wires if uses_helper else None
    control = data_wires + (1 if uses_helper else 0)
    controlled = []
    for g in circuit:
        controlled.extend(controlled_gate(g, control, helper))
    controlled = tuple(controlled)
    kinds = tuple(magic_requirements(controlled))
    partition = []
    magic_gates = []
    corrections = []
    segment = []
    for g in controlled:
        if g[0] in ("K", "T", "H"):
            partition.append(tuple(segment))
            segment = []
            magic_gates.append(g)
            corrections.append(
                {"K": "Y", "T": "KX", "H": "XZ"}[g[0]])
        else:
            segment.append(g)
    partition.append(tuple(segment))
    return CompiledProgram(
        base_circuit=circuit, n_a=n_a, n_b=n_b, n_work=n_work,
        uses_t_helper=uses_helper, controlled_circuit=controlled,
        magic_kinds=kinds, partition=tuple(partition),
        magic_gates=tuple(magic_gates), corrections=tuple(corrections))


# ---------------------------------------------------------------------------
# Bell measurements and teleport resources
# ---------------------------------------------------------------------------

def bell_measure(session_or_state, data_ids, in_ids, driver,
                 prob_sink=None) -> tuple[int, int]:
    """Bell rotation + computational measurement on position-paired qubits.

    Returns (x_mask, z_mask): the teleport correction Pauli X^x Z^z, with
    the convention that the receiving half ends in X^x Z^z |psi> for a
    plain EPR resource.
    """
    state = getattr(session_or_state, "state", session_or_state)
    sink = prob_sink or (lambda p: None)
    xm = zm = 0
    for j, (d, i) in enumerate(zip(data_ids, in_ids)):
        state.apply_gate("CNOT", d, i)
        state.apply_gate("H", d)
        zbit, p1 = state.measure(d, rng=driver.get_rng(),
                                 forced=driver.choose(state, d))
        sink(p1)
        xbit, p2 = state.measure(i, rng=driver.get_rng(),
                                 forced=driver.choose(state, i))
        sink(p2)
        xm |= xbit << j
        zm |= zbit << j
    return xm, zm


def make_teleport_through(state, clifford_ops: list, n: int) -> tuple[list, list]:
    """n EPR pairs with the given operation applied to the receiving halves.

    Returns (in_ids, out_ids); ``clifford_ops`` is a gate list over the out
    wires 0..n-1 (applied after pairing).
    """
    in_ids = state.append_qubits(n)
    out_ids = state.append_qubits(n)
    for a, b in zip(in_ids, out_ids):
        state.apply_gate("H", a)
        state.apply_gate("CNOT", a, b)
    for g in clifford_ops:
        state.apply_gate(g[0], *[out_ids[w] for w in g[1:]])
    return in_ids, out_ids


# ---------------------------------------------------------------------------
# the reactive verifier behind the BR-OTP
# ---------------------------------------------------------------------------

def build_schedule(circuit) -> tuple[list, int]:
    """Step list shared by the verifier and the receiver's quantum runner."""
    steps = []
    slot = 0
    for g in circuit:
        if g[0] in ("X", "Y", "Z"):
            steps.append(("pauli", g[0], g[1]))
        elif g[0] == "CNOT":
            steps.append(("cnot", g[1], g[2]))
        elif g[0] == "K":
            steps.append(("round-K", g[1], slot))
            slot += 1
        elif g[0] == "T":
            steps.append(("round-T", g[1], slot))
            steps.append(("round-Tcorr", g[1], slot + 1))
            slot += 2
        elif g[0] == "H":
            steps.append(("round-H", g[1], slot))
            slot += 1
        else:
            raise ValueError(f"gate {g[0]!r} outside the universal set")
    return steps, slot


def bits_to_mask(bits) -> int:
    m = 0
    for i, b in enumerate(bits):
        m |= (b & 1) << i
    return m


def record_to_bytes(bits) -> bytes:
    return bytes([len(bits) & 0xFF, (len(bits) >> 8) & 0xFF]) + bytes(
        (bits_to_mask(bits) >> (8 * i)) & 0xFF
        for i in range((len(bits) + 7) // 8))


def bytes_to_record(data: bytes) -> list[int]:
    n = data[0] | (data[1] << 8)
    mask = int.from_bytes(data[2:], "little")
    return [(mask >> i) & 1 for i in range(n)]


class QotpVerifier:
    """The classical brain behind the reactive one-time program.

    Walks the same schedule as the receiver, holding the evolving Pauli
    keys; every round decodes one measurement record and replies with the
    decoded bit(s).  Cheating is remembered, never revealed mid-run.
    """

    def __init__(self, program: CompiledProgram, trap: TrapCode,
                 keys: dict[str, PauliOperator],
                 output_keys: list[PauliOperator], reject_key_seed: int):
        from .gadgets import VerifierState

        self.program = program
        self.trap = trap
        self.vs = VerifierState(trap, keys)
        self.output_keys = list(output_keys)
        self.reject_key_seed = reject_key_seed
        self.steps, self.num_rounds = build_schedule(
            program.controlled_circuit)
        self.data_map = {w: data_register_name(program, w)
                         for w in range(program.wires)}
        self.pc = 0
        self.round_cursor = 0
        self.pending_need_k = None
        self.e_pi = trap_encoder_clifford(trap)

    # -- helpers -------------------------------------------------------------
    def _advance_silent_steps(self):
        while self.pc < len(self.steps):
            step = self.steps[self.pc]
            if step[0] == "pauli":
                self.vs.update_pauli_gate(self.data_map[step[2]], step[1])
            elif step[0] == "cnot":
                self.vs.update_cnot(self.data_map[step[1]],
                                    self.data_map[step[2]])
            else:
                return step
            self.pc += 1
        return None

    def receive_t_in(self, labels: list[str]) -> None:
        for i, label in enumerate(labels):
            p = PauliOperator.from_label(label)
            reg = self.data_map[self.program.n_a + i]
            if p.x:
                self.vs.update_pauli_gate(reg, "X")
            if p.z:
                self.vs.update_pauli_gate(reg, "Z")

    def process_round(self, record: list[int]) -> list[int]:
        step = self._advance_silent_steps()
        if step is None:
            raise RuntimeError("no reactive round pending")
        kind, wire, slot = step
        data = self.data_map[wire]
        magic = magic_register_name(slot)
        self.pc += 1
        self.round_cursor += 1
        if kind == "round-K":
            self.vs.update_cnot(magic, data)
            rec = self.vs.decode(data, record)
            self.vs.rename(magic, data)
            if rec.logical_bit:
                self.vs.update_pauli_gate(data, "Y")
            return [rec.logical_bit]
        if kind == "round-T":
            self.vs.update_cnot(magic, data)
            rec = self.vs.decode(data, record)
            self.vs.rename(magic, data)
            need_k = bool(rec.logical_bit)
            if need_k:
                self.vs.update_pauli_gate(data, "X")
            self.pending_need_k = need_k
            return [rec.logical_bit]
        if kind == "round-Tcorr":
            need_k = self.pending_need_k
            self.pending_need_k = None
            if need_k:
                self.vs.update_cnot(magic, data)
                rec = self.vs.decode(data, record)
                self.vs.rename(magic, data)
                if rec.logical_bit:
                    self.vs.update_pauli_gate(data, "Y")
            else:
                rec = self.vs.decode(magic, record)
                del self.vs.keys[magic]
            return [rec.logical_bit]
        if kind == "round-H":
            n3 = self.trap.n
            c_data, c_pair = record[:n3], record[n3:]
            pair = magic_pair_names(slot)
            self.vs.update_cnot(data, pair[1])
            self.vs.update_bitwise_h(data)
            rec_x = self.vs.decode(data, c_data, hadamard=True)
            rec_z = self.vs.decode(pair[1], c_pair)
            del self.vs.keys[data]
            del self.vs.keys[pair[1]]
            self.vs.rename(pair[0], data)
            if rec_z.logical_bit:
                self.vs.update_pauli_gate(data, "Z")
            if rec_x.logical_bit:
                self.vs.update_pauli_gate(data, "X")
            return [rec_x.logical_bit, rec_z.logical_bit]
        raise AssertionError(kind)

    def finalize(self, t_out: list[tuple[int, int]]) -> tuple[list[str], bool]:
        """Final decryption keys for B_out, or uniform bits on cheating."""
        leftover = self._advance_silent_steps()
        if leftover is not None:
            self.vs.cheated = True
        if self.vs.cheated:
            gen = rngmod.stream(self.reject_key_seed, "reject-key")
            labels = [random_pauli(1, gen).to_label()
                      for _ in range(self.program.n_b)]
            return labels, True
        labels = []
        for i in range(self.program.n_b):
            xm, zm = t_out[i]
            t_pauli = PauliOperator.from_masks(self.trap.n, xm, zm)
            reg = self.data_map[self.program.n_a + i]
            q = self.output_keys[i] * t_pauli * self.vs.keys[reg]
            pulled = self.e_pi.conjugate(q)
            dpos = self.trap.pi(0)
            s_hat = PauliOperator.from_masks(
                1, (pulled.x >> dpos) & 1, (pulled.z >> dpos) & 1)
            labels.append(s_hat.to_label())
        return labels, False

    def recompute_final_key(self, t_out, i: int) -> PauliOperator:
        """The final-key formula, for audit against an independent path."""
        xm, zm = t_out[i]
        t_pauli = PauliOperator.from_masks(self.trap.n, xm, zm)
        reg = self.data_map[self.program.n_a + i]
        q = self.output_keys[i] * t_pauli * self.vs.keys[reg]
        pulled = self.e_pi.conjugate(q)
        dpos = self.trap.pi(0)
        return PauliOperator.from_masks(
            1, (pulled.x >> dpos) & 1, (pulled.z >> dpos) & 1)


def trap_encoder_clifford(trap: TrapCode) -> CliffordUnitary:
    gates = trap.encoding_ops(list(range(trap.n)))
    return CliffordUnitary(trap.n, tuple(gates))


def data_register_name(program: CompiledProgram, wire: int) -> str:
    if wire < program.n_a:
        return f"At{wire}"
    if wire < program.n_a + program.n_b:
        return f"Bt{wire - program.n_a}"
    if wire == program.control_wire:
        return "Ctl"
    return f"Et{wire - program.n_a - program.n_b}"


def magic_register_name(slot: int) -> str:
    return f"M{slot}"


def magic_pair_names(slot: int) -> tuple[str, str]:
    return f"M{slot}", f"M{slot}pair"


# ---------------------------------------------------------------------------
# oracles: the verifier behind a direct call or the real reactive transport
# ---------------------------------------------------------------------------

class DirectOracle:
    """In-process verifier access (used for exhaustive enumerations)."""

    def __init__(self, verifier: QotpVerifier):
        self.verifier = verifier

    def first_round(self, labels: list[str]) -> None:
        self.verifier.receive_t_in(labels)

    def round(self, record: list[int]) -> list[int]:
        return self.verifier.process_round(record)

    def final(self, t_out) -> tuple[list[str], bool]:
        return self.verifier.finalize(t_out)

    @property
    def audit(self) -> QotpVerifier:
        return self.verifier


class BrotpOracle:
    """The verifier wrapped into the reactive one-time program transport.

    Round payloads are byte strings; the verifier state is carried between
    rounds as the program's authenticated-encrypted internal state (it is
    re-serialized every round, exactly as the chained construction demands).
    """

    def __init__(self, verifier: QotpVerifier, kappa: int, rng):
        self.cell = {"verifier": verifier}
        ell = verifier.num_rounds + 2
        state0 = _serialize_verifier(verifier)
        state_len = len(state0) + 96
        cell = self.cell
        program = verifier.program
        trap = verifier.trap
        output_keys = verifier.output_keys
        reject_seed = verifier.reject_key_seed

        def restore(blob: bytes) -> QotpVerifier:
            v = _deserialize_verifier(blob, program, trap, output_keys,
                                      reject_seed)
            cell["verifier"] = v
            return v

        def g_first(a_state, b1):
            v = restore(a_state)
            v.receive_t_in(json.loads(b1.decode()))
            return b"", _serialize_verifier(v)

        def make_round(idx):
            def g(b_i, s_prev):
                v = restore(s_prev)
                reply = v.process_round(bytes_to_record(b_i))
                return bytes(reply), _serialize_verifier(v)
            return g

        def g_final(b_last, s_prev):
            v = restore(s_prev)
            t_out = [tuple(t) for t in json.loads(b_last.decode())]
            labels, cheated = v.finalize(t_out)
            return json.dumps(labels).encode(), b""

        rounds = [g_first] + [make_round(i)
                              for i in range(verifier.num_rounds)] + [g_final]
        self.program = brotp_compile(rounds, state0.ljust(state_len, b"\0"),
                                     kappa, state_len, rng)
        self.carried = b""
        self.cursor = 1

    def _query(self, payload: bytes) -> bytes:
        res = brotp_query(self.program, self.cursor, payload, self.carried)
        if res is None:
            raise RuntimeError("reactive program aborted")
        m, self.carried = res
        self.cursor += 1
        return m

    def first_round(self, labels: list[str]) -> None:
        self._query(json.dumps(labels).encode())

    def round(self, record: list[int]) -> list[int]:
        return list(self._query(record_to_bytes(record)))

    def final(self, t_out) -> tuple[list[str], bool]:
        reply = self._query(json.dumps([list(t) for t in t_out]).encode())
        labels = json.loads(reply.decode())
        return labels, self.audit.vs.cheated

    @property
    def audit(self) -> QotpVerifier:
        return self.cell["verifier"]


def _serialize_verifier(v: QotpVerifier) -> bytes:
    blob = {
        "keys": {name: [format(p.x, "x"), format(p.z, "x")]
                 for name, p in v.vs.keys.items()},
        "cheated": v.vs.cheated,
        "pc": v.pc,
        "round_cursor": v.round_cursor,
        "pending": v.pending_need_k,
    }
    return json.dumps(blob, sort_keys=True).encode()


def _deserialize_verifier(blob: bytes, program, trap, output_keys,
                          reject_seed) -> QotpVerifier:
    data = json.loads(blob.decode().rstrip("\0"))
    keys = {name: PauliOperator.from_masks(trap.n, int(x, 16), int(z, 16))
            for name, (x, z) in data["keys"].items()}
    v = QotpVerifier(program, trap, keys, output_keys, reject_seed)
    v.vs.cheated = data["cheated"]
    v.pc = data["pc"]
    v.round_cursor = data["round_cursor"]
    v.pending_need_k = data["pending"]
    return v


# ---------------------------------------------------------------------------
# adversaries (the environment's normal form, restricted to the callback
# family the experiments exercise: product Pauli attacks between rounds
# plus classical tampering of reports)
# ---------------------------------------------------------------------------

class DummyAdversary:
    """The honest receiver: prepares |0> inputs, never deviates."""

    b_labels = ("0",)

    def prepare_b_w(self, state):
        ids = []
        for label in self.b_labels:
            ids.append(pauli_eigenstate_prep(label)(state))
        return ids, []

    def before(self, attack, state, w_ids):
        pass

    def between_rounds(self, index, reply, attack, state, w_ids):
        pass

    def tamper_record(self, index, bits):
        return bits

    def tamper_t_in(self, labels):
        return labels

    def tamper_t_out(self, masks):
        return masks


class PauliAttackAdversary(DummyAdversary):
    """Applies fixed Pauli attacks to named registers at chosen times."""

    def __init__(self, initial_attacks=(), round_attacks=None,
                 b_labels=("0",), entangle_w=False):
        self.initial_attacks = list(initial_attacks)
        self.round_attacks = dict(round_attacks or {})
        self.b_labels = tuple(b_labels)
        self.entangle_w = entangle_w

    def prepare_b_w(self, state):
        if not self.entangle_w:
            return super().prepare_b_w(state)
        b = state.append_qubits(1)
        w = state.append_qubits(1)
        state.apply_gate("H", b[0])
        state.apply_gate("CNOT", b[0], w[0])
        return b, w

    def before(self, attack, state, w_ids):
        for reg, pauli in self.initial_attacks:
            attack(reg, pauli)

    def between_rounds(self, index, reply, attack, state, w_ids):
        for reg, pauli in self.round_attacks.get(index, ()):
            attack(reg, pauli)


class WOnlyAdversary(DummyAdversary):
    """Touches only its private workspace qubit."""

    def prepare_b_w(self, state):
        b = state.append_qubits(1)
        w = state.append_qubits(1)
        return b, w

    def before(self, attack, state, w_ids):
        state.apply_gate("H", w_ids[0])
        state.apply_gate("K", w_ids[0])


# ---------------------------------------------------------------------------
# the protocol instance: registers, both worlds, one runner
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    accepted: bool
    cheated: bool
    t_in: tuple
    records: tuple
    replies: tuple
    t_out: tuple
    s_hat: tuple          # labels, or ("random",) when the key was junk
    weight: float
    b_out_qubits: list
    w_ids: list
    session: AuthSession
    transcript: list


def one_time_pad_key_id(world: str) -> str:
    return world


class QotpInstance:
    """One prepared one-time program plus the runner for its receiver."""

    def __init__(self, program: CompiledProgram, base_code: CssCode,
                 seed: int, world: str = "real", backend: str = "auto",
                 a_labels=(), transport: str = "direct", kappa: int = 16,
                 trap: TrapCode | None = None,
                 key_overrides: dict | None = None,
                 driver=None, apply_final_key: bool = True):
        self.apply_final_key = apply_final_key
        self.program = program
        self.base_code = base_code
        self.world = world
        self.seed = seed
        key_rng = rngmod.stream(seed, "keys")
        self.trap = trap if trap is not None else \
            sample_trap_code(base_code, key_rng)
        n3 = self.trap.n
        reg_names = [data_register_name(program, w)
                     for w in range(program.wires)]
        self.num_rounds = build_schedule(program.controlled_circuit)[1]
        self.magic_names = []
        kinds = magic_requirements(program.controlled_circuit)
        for slot, kind in enumerate(kinds):
            if kind == "H":
                self.magic_names.extend(magic_pair_names(slot))
            else:
                self.magic_names.append(magic_register_name(slot))
        keys = {name: random_pauli(n3, key_rng)
                for name in reg_names + self.magic_names}
        self.output_keys = [random_pauli(n3, key_rng)
                            for _ in range(program.n_b)]
        for name, p in (key_overrides or {}).items():
            if name.startswith("__mul__"):
                target = name[len("__mul__"):]
                keys[target] = keys[target] * p
            else:
                keys[name] = p
        self.keys = keys
        # backend: Clifford-only controlled circuits run on the tableau;
        # T-bearing ones need the stabilizer-sum machinery, or the dense
        # backend at toy scale
        if backend == "auto":
            has_t = any(g[0] == "T" for g in program.controlled_circuit)
            if not has_t:
                backend = "tab"
            elif base_code.n == 1:
                backend = "sv"
            else:
                backend = "sum"
        total_qubits = (len(reg_names) + len(self.magic_names)) * n3 + \
            8 * n3 + 16
        if backend == "sv":
            state = StateVector(0)
        elif backend == "tab":
            state = TableauState(0, capacity=total_qubits)
        else:
            state = StabilizerSum(0)
        self.backend_kind = backend
        driver = driver or SamplingDriver(rngmod.stream(seed, "outcomes"))
        self.session = AuthSession(self.trap, dict(keys), state, driver,
                                   discard_measured=(backend in ("sv", "sum")))
        self.a_labels = tuple(a_labels)
        verifier = QotpVerifier(program, self.trap, dict(keys),
                                self.output_keys, seed)
        if transport == "direct":
            self.oracle = DirectOracle(verifier)
        else:
            self.oracle = BrotpOracle(verifier, kappa,
                                      rngmod.stream(seed, "brotp"))
        self._declare_registers()
        self.ideal_calls = 0

    # -- register declarations ------------------------------------------------
    def _declare_registers(self) -> None:
        ses = self.session
        prog = self.program
        trap = self.trap
        n3 = trap.n

        # sender input: real world authenticates the input labels; the
        # simulator authenticates dummy |0> states instead
        for i in range(prog.n_a):
            name = f"At{i}"
            label = "0" if self.world == "sim" else self.a_labels[i]
            ses.declare(name, _auth_prep(name, pauli_eigenstate_prep(label)))
        # workspace and control
        nw = prog.n_work + (1 if prog.uses_t_helper else 0)
        for j in range(nw):
            name = f"Et{j}"
            ses.declare(name, _auth_prep(name, pauli_eigenstate_prep("0")))
        ctl_label = "0" if self.world == "sim" else "1"
        ses.declare("Ctl", _auth_prep("Ctl", pauli_eigenstate_prep(ctl_label)))
        # teleport-through-authentication halves
        for i in range(prog.n_b):
            bare = f"Bin{i}" if self.world == "real" else f"Sout{i}"
            auth = f"Bt{i}"

            def prep(session, bare=bare, auth=auth):
                a, b = session.state.append_qubits(2)
                session.state.apply_gate("H", a)
                session.state.apply_gate("CNOT", a, b)
                from .gadgets import authenticate_into
                session.adopt(bare, [a])
                authenticate_into(session, auth, b)

            ses.declare(bare, prep, group=(bare, auth))
            ses.declare(auth, prep, group=(bare, auth))
        if self.world == "sim":
            for i in range(prog.n_b):
                name = f"Bin{i}"
                sin = f"Sin{i}"

                def prep(session, name=name, sin=sin):
                    a, b = session.state.append_qubits(2)
                    session.state.apply_gate("H", a)
                    session.state.apply_gate("CNOT", a, b)
                    session.adopt(name, [a])
                    session.adopt(sin, [b])

                ses.declare(name, prep, group=(name, sin))
                ses.declare(sin, prep, group=(name, sin))
        # de-authentication resource
        output_keys = self.output_keys
        for i in range(prog.n_b):
            name = f"BoutR{i}"

            def prep(session, i=i):
                st = session.state
                in_ids = st.append_qubits(n3)
                tmp_ids = st.append_qubits(n3)
                for a, b in zip(in_ids, tmp_ids):
                    st.apply_gate("H", a)
                    st.apply_gate("CNOT", a, b)
                st.apply_pauli(output_keys[i], tmp_ids)
                for g in trap.decoding_ops(tmp_ids):
                    st.apply_gate(*g)
                session.adopt(f"BoutR{i}", in_ids)
                dpos = trap.pi(0)
                session.aux[f"Bout{i}"] = {
                    "out": tmp_ids[dpos],
                    "syndromes": [q for p, q in enumerate(tmp_ids)
                                  if p != dpos],
                }

            ses.declare(name, prep)
        # magic registers
        kinds = magic_requirements(prog.controlled_circuit)
        for slot, kind in enumerate(kinds):
            names = magic_pair_names(slot) if kind == "H" \
                else (magic_register_name(slot),)
            prep = magic_preparer(kind, names)
            for nm in names:
                ses.declare(nm, prep, group=names)

    # -- cloning (snapshot for branch enumeration) ------------------------------
    def clone(self, state_override=None) -> "QotpInstance":
        inst = QotpInstance.__new__(QotpInstance)
        inst.__dict__.update(self.__dict__)
        ses = self.session
        new_ses = AuthSession.__new__(AuthSession)
        new_ses.__dict__.update(ses.__dict__)
        new_ses.state = state_override if state_override is not None \
            else ses.state.copy()
        new_ses.registers = {
            name: Register(r.name, r.status,
                           None if r.ids is None else list(r.ids),
                           list(r.pending))
            for name, r in ses.registers.items()}
        new_ses.log = list(ses.log)
        new_ses.aux = {k: dict(v) for k, v in ses.aux.items()}
        inst.session = new_ses
        if isinstance(self.oracle, DirectOracle):
            v = self.oracle.verifier
            nv = QotpVerifier.__new__(QotpVerifier)
            nv.__dict__.update(v.__dict__)
            nv.vs = type(v.vs)(v.trap, dict(v.vs.keys))
            nv.vs.cheated = v.vs.cheated
            inst.oracle = DirectOracle(nv)
        else:
            raise ValueError("only direct-transport instances are clonable")
        inst._phase1 = dict(getattr(self, "_phase1", {}))
        return inst

    def set_driver(self, driver) -> None:
        self.session.driver = driver

    # -- the run ---------------------------------------------------------------
    def run(self, adversary) -> RunResult:
        from .gadgets import BranchDead

        try:
            self.run_phase1(adversary)
            return self.run_phase2(adversary)
        except BranchDead:
            ses = self.session
            return RunResult(False, True, (), (), (), (), (), 0.0, [],
                             [], ses, list(ses.log))

    def run_phase1(self, adversary) -> None:
        ses = self.session
        prog = self.program
        driver = ses.driver
        state = ses.state
        n3 = self.trap.n

        b_ids, w_ids = adversary.prepare_b_w(state)
        if len(b_ids) != prog.n_b:
            raise ValueError("adversary must supply one qubit per B wire")
        if self.world == "sim":
            a_ids = [pauli_eigenstate_prep(label)(state)
                     for label in self.a_labels]
            e_ids = state.append_qubits(prog.n_work)
        adversary.before(ses.attack, state, w_ids)

        # teleport in
        t_in = []
        for i in range(prog.n_b):
            bare = f"Bin{i}"
            ses.materialize(bare)
            xm, zm = bell_measure(ses, [b_ids[i]],
                                  ses.registers[bare].ids, driver,
                                  prob_sink=lambda p: ses._weigh(p))
            t_in.append(PauliOperator.from_masks(1, xm, zm).to_label())
        t_in = adversary.tamper_t_in(t_in)
        if self.world == "real":
            self.oracle.first_round(t_in)
        else:
            # apply the reported Pauli to S_in, call the ideal channel once,
            # then teleport its output through the authentication
            for i, label in enumerate(t_in):
                p = PauliOperator.from_label(label)
                ses.materialize(f"Sin{i}")
                state.apply_pauli(p, ses.registers[f"Sin{i}"].ids)
            self.ideal_calls += 1
            if self.ideal_calls > 1:
                raise RuntimeError("ideal functionality is one-shot")
            wires = a_ids + [ses.registers[f"Sin{i}"].ids[0]
                             for i in range(prog.n_b)] + e_ids
            for g in prog.base_circuit:
                state.apply_gate(g[0], *[wires[w] for w in g[1:]])
            t_sim = []
            for i in range(prog.n_b):
                ses.materialize(f"Sout{i}")
                xm, zm = bell_measure(
                    ses, [ses.registers[f"Sin{i}"].ids[0]],
                    ses.registers[f"Sout{i}"].ids, driver,
                    prob_sink=lambda p: ses._weigh(p))
                t_sim.append(PauliOperator.from_masks(1, xm, zm).to_label())
            self.t_sim = tuple(t_sim)
            self.oracle.first_round(t_sim)

        # gadget rounds
        steps, _ = build_schedule(prog.controlled_circuit)
        data_map = {w: data_register_name(prog, w) for w in range(prog.wires)}
        records = []
        replies = []
        need_k = None
        round_index = 0
        for step in steps:
            kind = step[0]
            if kind == "pauli":
                continue
            if kind == "cnot":
                ses.transversal_cnot_physical(data_map[step[1]],
                                              data_map[step[2]])
                continue
            wire, slot = step[1], step[2]
            data = data_map[wire]
            if kind in ("round-K", "round-T"):
                magic = magic_register_name(slot)
                ses.transversal_cnot_physical(magic, data)
                bits = ses.measure_register(data)
                ses.take_over(data, magic)
            elif kind == "round-Tcorr":
                magic = magic_register_name(slot)
                if need_k:
                    ses.transversal_cnot_physical(magic, data)
                    bits = ses.measure_register(data)
                    ses.take_over(data, magic)
                else:
                    bits = ses.measure_register(magic)
            elif kind == "round-H":
                out_name, pair_name = magic_pair_names(slot)
                ses.materialize(out_name)
                ses.transversal_cnot_physical(data, pair_name)
                ses.bitwise_h_physical(data)
                bits = ses.measure_register(data) + \
                    ses.measure_register(pair_name)
                ses.take_over(data, out_name)
            bits = adversary.tamper_record(round_index, list(bits))
            reply = self.oracle.round(bits)
            records.append(tuple(bits))
            replies.append(tuple(reply))
            if kind == "round-T":
                need_k = bool(reply[0])
            adversary.between_rounds(round_index, reply, ses.attack, state,
                                     w_ids)
            round_index += 1

        # the de-authentication resource is outcome-independent; bring it
        # into the snapshot so phase-2 branches start from it
        for i in range(prog.n_b):
            ses.materialize(f"BoutR{i}")
        self._phase1 = {"t_in": tuple(t_in), "records": tuple(records),
                        "replies": tuple(replies), "w_ids": list(w_ids)}

    def run_phase2(self, adversary) -> RunResult:
        ses = self.session
        prog = self.program
        driver = ses.driver
        ph1 = self._phase1
        t_out = []
        for i in range(prog.n_b):
            bt = ses.registers[f"Bt{i}"]
            br = ses.registers[f"BoutR{i}"]
            xm, zm = bell_measure(ses, bt.ids, br.ids, driver,
                                  prob_sink=lambda p: ses._weigh(p))
            bt.status = "consumed"
            br.status = "consumed"
            t_out.append((xm, zm))
        t_out = adversary.tamper_t_out(t_out)
        s_hat, cheated = self.oracle.final(t_out)
        b_out_qubits = [ses.aux[f"Bout{i}"]["out"]
                        for i in range(prog.n_b)]
        if not cheated:
            if self.apply_final_key:
                for i, label in enumerate(s_hat):
                    ses.state.apply_pauli(PauliOperator.from_label(label),
                                          [b_out_qubits[i]])
            s_out = tuple(s_hat)
        else:
            s_out = ("random",)
        return RunResult(not cheated, cheated, ph1["t_in"], ph1["records"],
                         ph1["replies"], tuple(t_out), s_out,
                         ses.prob_weight, b_out_qubits, ph1["w_ids"], ses,
                         list(ses.log))


def _auth_prep(name: str, logical_prep: Callable) -> Callable:
    def prep(session):
        from .gadgets import authenticate_into

        q = logical_prep(session.state)
        authenticate_into(session, name, q)

    return prep


# ---------------------------------------------------------------------------
# high-level entry points
# ---------------------------------------------------------------------------

def honest_receiver_run(circuit, n_a: int, n_b: int, base_code: CssCode,
                        seed: int, a_labels=(), b_labels=("0",),
                        backend: str = "auto", transport: str = "brotp",
                        kappa: int = 16, n_work: int = 0):
    """Compile, prepare, and honestly evaluate the one-time program.

    Returns (result, instance); the output state sits on
    ``result.b_out_qubits`` of ``result.session.state``.
    """
    program = compile_controlled_program(circuit, n_a, n_b, n_work)
    inst = QotpInstance(program, base_code, seed, world="real",
                        backend=backend, a_labels=a_labels,
                        transport=transport, kappa=kappa)
    adversary = DummyAdversary()
    adversary.b_labels = tuple(b_labels)
    result = inst.run(adversary)
    return result, inst


def simulate_sender_run(circuit, n_a: int, n_b: int, base_code: CssCode,
                        seed: int, a_labels=(), adversary=None,
                        backend: str = "auto", transport: str = "direct",
                        kappa: int = 16, n_work: int = 0):
    """Protocol-5 simulator execution against the given adversary."""
    program = compile_controlled_program(circuit, n_a, n_b, n_work)
    inst = QotpInstance(program, base_code, seed, world="sim",
                        backend=backend, a_labels=a_labels,
                        transport=transport, kappa=kappa)
    result = inst.run(adversary or DummyAdversary())
    return result, inst


# ---------------------------------------------------------------------------
# exhaustive branch enumeration and the real-vs-simulated comparison
# ---------------------------------------------------------------------------

def enumerate_branches(run_fn, max_leaves: int = 1 << 22):
    """Depth-first replay enumeration over all measurement outcome paths.

    ``run_fn(driver)`` must rebuild the protocol deterministically and
    return (weight, leaf_payload); zero-weight paths are pruned.
    """
    leaves = []

    def recurse(prefix):
        driver = ReplayDriver(list(prefix))
        weight, payload = run_fn(driver)
        if weight == 0.0:
            return
        if driver.over_budget:
            if len(leaves) > max_leaves:
                raise RuntimeError("branch budget exceeded")
            recurse(prefix + [0])
            recurse(prefix + [1])
        else:
            leaves.append((weight, payload))

    recurse([])
    return leaves


def _clone_verifier(v: QotpVerifier) -> QotpVerifier:
    from .gadgets import VerifierState

    nv = QotpVerifier.__new__(QotpVerifier)
    nv.__dict__.update(v.__dict__)
    nv.vs = VerifierState(v.trap, dict(v.vs.keys))
    nv.vs.cheated = v.vs.cheated
    return nv


def enumerate_phase2_outcomes(inst: "QotpInstance",
                              adversary) -> list[RunResult]:
    """Every teleport-out outcome of a completed phase-1 instance.

    Applies the Bell rotations once, reads the joint outcome distribution
    directly from the dense state, and finalizes a verifier copy per
    surviving outcome.
    """
    from types import SimpleNamespace

    ses = inst.session
    prog = inst.program
    ph1 = inst._phase1
    pair_bits = []  # (wire, pair index, 'z'|'x') per measured qubit
    measured = []
    for i in range(prog.n_b):
        bt = ses.registers[f"Bt{i}"]
        br = ses.registers[f"BoutR{i}"]
        for j, (d, iq) in enumerate(zip(bt.ids, br.ids)):
            ses.state.apply_gate("CNOT", d, iq)
            ses.state.apply_gate("H", d)
            measured.extend([d, iq])
            pair_bits.extend([(i, j, "z"), (i, j, "x")])
        bt.status = "consumed"
        br.status = "consumed"
    results = []
    nbits = len(measured)
    b_out_qubits = [ses.aux[f"Bout{i}"]["out"] for i in range(prog.n_b)]
    for k, prob, post in ses.state.joint_outcomes(measured):
        t_out = [[0, 0] for _ in range(prog.n_b)]
        for pos, (i, j, kind) in enumerate(pair_bits):
            bit = (k >> (nbits - 1 - pos)) & 1
            if kind == "x":
                t_out[i][0] |= bit << j
            else:
                t_out[i][1] |= bit << j
        t_out = adversary.tamper_t_out([tuple(t) for t in t_out])
        verifier = _clone_verifier(inst.oracle.audit)
        s_hat, cheated = verifier.finalize(t_out)
        s_out = tuple(s_hat) if not cheated else ("random",)
        results.append(RunResult(
            not cheated, cheated, ph1["t_in"], ph1["records"],
            ph1["replies"], tuple(t_out), s_out,
            ses.prob_weight * prob, b_out_qubits, ph1["w_ids"],
            SimpleNamespace(state=post), list(ses.log)))
    return results


def _fan_measurement(inst: "QotpInstance", ids: list,
                     min_weight: float) -> list[tuple[list, "QotpInstance"]]:
    """Branch the instance over every joint outcome of measuring ``ids``.

    The parent's state is consumed; each child gets the posterior with the
    measured qubits dropped, an updated weight, and fresh register /
    verifier tables.
    """
    out = []
    parent_weight = inst.session.prob_weight
    for k, p, post in inst.session.state.joint_outcomes(ids):
        w = parent_weight * p
        if w < min_weight:
            continue
        child = inst.clone(state_override=post)
        child.session.prob_weight = w
        bits = [(k >> (len(ids) - 1 - i)) & 1 for i in range(len(ids))]
        out.append((bits, child))
    return out


def enumerate_protocol_runs(make_instance, adversary_factory,
                            min_weight: float = 1e-15):
    """All outcome branches of one protocol configuration, exactly.

    Instead of sampling, every measurement round fans out over the joint
    outcome distribution read directly from the dense state; branches carry
    cloned register and verifier tables.  Requires the direct oracle
    transport, the dense backend, and adversaries whose quantum actions do
    not depend on the replies (the Pauli-attack family used in tests).
    """
    results: list[RunResult] = []
    adv = adversary_factory()
    root = make_instance(None)
    ses = root.session
    prog = root.program
    state = ses.state
    b_ids, w_ids = adv.prepare_b_w(state)
    if len(b_ids) != prog.n_b:
        raise ValueError("adversary must supply one qubit per B wire")
    if root.world == "sim":
        a_ids = [pauli_eigenstate_prep(label)(state)
                 for label in root.a_labels]
        e_ids = state.append_qubits(prog.n_work)
    adv.before(ses.attack, state, w_ids)

    # teleport-in rotations, then fan over the Bell outcomes
    measured = []
    for i in range(prog.n_b):
        ses.materialize(f"Bin{i}")
        iq = ses.registers[f"Bin{i}"].ids[0]
        state.apply_gate("CNOT", b_ids[i], iq)
        state.apply_gate("H", b_ids[i])
        measured.extend([b_ids[i], iq])
        ses.registers[f"Bin{i}"].status = "consumed"

    steps, _ = build_schedule(prog.controlled_circuit)
    data_map = {w: data_register_name(prog, w) for w in range(prog.wires)}

    def after_t_in(inst, bits):
        t_in = []
        for i in range(prog.n_b):
            zb, xb = bits[2 * i], bits[2 * i + 1]
            t_in.append(PauliOperator.from_masks(1, xb, zb).to_label())
        t_in = adv.tamper_t_in(t_in)
        inst._phase1 = {"t_in": tuple(t_in), "records": (), "replies": (),
                        "w_ids": [w for w in w_ids]}
        if inst.world == "real":
            inst.oracle.first_round(t_in)
            start_rounds(inst)
            return
        # simulator: feed the reported Pauli into the extraction half,
        # call the ideal channel once, teleport through authentication
        st = inst.session.state
        for i, label in enumerate(t_in):
            p = PauliOperator.from_label(label)
            inst.session.materialize(f"Sin{i}")
            st.apply_pauli(p, inst.session.registers[f"Sin{i}"].ids)
        inst.ideal_calls += 1
        wires = a_ids + [inst.session.registers[f"Sin{i}"].ids[0]
                         for i in range(prog.n_b)] + e_ids
        for g in prog.base_circuit:
            st.apply_gate(g[0], *[wires[w] for w in g[1:]])
        sim_measured = []
        for i in range(prog.n_b):
            inst.session.materialize(f"Sout{i}")
            d = inst.session.registers[f"Sin{i}"].ids[0]
            iq = inst.session.registers[f"Sout{i}"].ids[0]
            st.apply_gate("CNOT", d, iq)
            st.apply_gate("H", d)
            sim_measured.extend([d, iq])
            inst.session.registers[f"Sin{i}"].status = "consumed"
            inst.session.registers[f"Sout{i}"].status = "consumed"
        for bits2, child in _fan_measurement(inst, sim_measured, min_weight):
            t_sim = []
            for i in range(prog.n_b):
                zb, xb = bits2[2 * i], bits2[2 * i + 1]
                t_sim.append(PauliOperator.from_masks(1, xb, zb).to_label())
            child.oracle.first_round(t_sim)
            start_rounds(child)

    def start_rounds(inst):
        walk(inst, 0, 0, None)

    def walk(inst, step_idx, round_idx, need_k):
        ses2 = inst.session
        while step_idx < len(steps):
            step = steps[step_idx]
            kind = step[0]
            if kind == "pauli":
                step_idx += 1
                continue
            if kind == "cnot":
                ses2.transversal_cnot_physical(data_map[step[1]],
                                               data_map[step[2]])
                step_idx += 1
                continue
            wire, slot = step[1], step[2]
            data = data_map[wire]
            if kind in ("round-K", "round-T"):
                magic = magic_register_name(slot)
                ses2.transversal_cnot_physical(magic, data)
                reg = ses2.materialize(data)
                ids = list(reg.ids)
                reg.status = "consumed"
                takeover = (data, magic)
            elif kind == "round-Tcorr":
                magic = magic_register_name(slot)
                if need_k:
                    ses2.transversal_cnot_physical(magic, data)
                    reg = ses2.materialize(data)
                    ids = list(reg.ids)
                    reg.status = "consumed"
                    takeover = (data, magic)
                else:
                    reg = ses2.materialize(magic)
                    ids = list(reg.ids)
                    reg.status = "consumed"
                    takeover = None
            elif kind == "round-H":
                out_name, pair_name = magic_pair_names(slot)
                ses2.materialize(out_name)
                ses2.transversal_cnot_physical(data, pair_name)
                ses2.bitwise_h_physical(data)
                rd = ses2.materialize(data)
                rp = ses2.materialize(pair_name)
                ids = list(rd.ids) + list(rp.ids)
                rd.status = "consumed"
                rp.status = "consumed"
                takeover = (data, out_name)
            for bits, child in _fan_measurement(inst, ids, min_weight):
                bits = adv.tamper_record(round_idx, bits)
                if takeover is not None:
                    child.session.take_over(*takeover)
                reply = child.oracle.round(bits)
                ph1 = child._phase1
                child._phase1 = {
                    "t_in": ph1["t_in"],
                    "records": ph1["records"] + (tuple(bits),),
                    "replies": ph1["replies"] + (tuple(reply),),
                    "w_ids": ph1["w_ids"],
                }
                adv.between_rounds(round_idx, reply, child.session.attack,
                                   child.session.state, w_ids)
                nk = bool(reply[0]) if kind == "round-T" else None
                walk(child, step_idx + 1, round_idx + 1, nk)
            return
        # all rounds done: teleport out
        for i in range(prog.n_b):
            inst.session.materialize(f"BoutR{i}")
        results.extend(enumerate_phase2_outcomes(inst, adv))

    for bits, child in _fan_measurement(root, measured, min_weight):
        after_t_in(child, bits)
    return results


def _world_density_map(world: str, program: CompiledProgram,
                       base_code: CssCode, seed: int, adversary_factory,
                       a_labels, perms, coset_letters, kappa: int = 16):
    """Exact classical-quantum output ensemble of one world.

    Returns {classical key: accumulated weighted density on (B_out, W)}.
    The ensemble enumerates the shared permutation key, the one-time-pad
    coset representative on the teleported-input register, and every
    measurement branch; the final-key register is expanded into its four
    values when the program rejected (uniform junk key).
    """
    from .paulis import Permutation

    out: dict = {}
    weight_scale = 1.0 / (len(perms) * len(coset_letters))
    for perm in perms:
        trap = TrapCode(base_code, perm)
        for letter in coset_letters:
            overrides = _coset_override(trap, letter, program)

            def make_instance(driver, trap=trap, overrides=overrides):
                return QotpInstance(
                    program, base_code, seed, world=world, backend="sv",
                    a_labels=a_labels, transport="direct", kappa=kappa,
                    trap=trap, driver=driver, apply_final_key=False,
                    key_overrides=overrides)

            for result in enumerate_protocol_runs(make_instance,
                                                  adversary_factory):
                if result.weight == 0.0:
                    continue
                keep = result.b_out_qubits + result.w_ids
                rho = result.session.state.density_of(keep)
                transcript = (result.t_in, result.records, result.replies,
                              tuple(result.t_out))
                w = result.weight * weight_scale
                if result.cheated:
                    # junk final key: uniform over the four Pauli labels
                    for label in ("+I", "+X", "+Y", "+Z"):
                        key = (transcript, label)
                        out[key] = out.get(key, 0) + (w / 4) * rho
                else:
                    key = (transcript, result.s_hat)
                    out[key] = out.get(key, 0) + w * rho
    return out


def _coset_override(trap: TrapCode, letter: str, program: CompiledProgram):
    """Multiply the teleported-input register's pad by a logical rep."""
    if letter == "I":
        return {}
    base = trap.base
    x = trap.embed_base_mask(base.logical_x) if letter in "XY" else 0
    z = trap.embed_base_mask(base.logical_z) if letter in "ZY" else 0
    rep = PauliOperator.from_masks(trap.n, x, z)
    # the override multiplies the sampled key, deterministically re-derived
    return {"__mul__Bt0": rep}


def compare_real_vs_sim(circuit, n_a: int, n_b: int, base_code: CssCode,
                        seed: int, adversary_factory, a_labels=(),
                        perms=None) -> float:
    """Exact trace distance between the environment's view of the real
    protocol and of the simulator, at toy scale with full enumeration."""
    from . import denseops as dn
    from .paulis import Permutation
    from itertools import permutations as iperms

    program = compile_controlled_program(circuit, n_a, n_b)
    if perms is None:
        perms = [Permutation(3 * base_code.n, p)
                 for p in iperms(range(3 * base_code.n))]
    coset_letters = ("I", "X", "Z", "Y")
    real = _world_density_map("real", program, base_code, seed,
                              adversary_factory, a_labels, perms,
                              coset_letters)
    sim = _world_density_map("sim", program, base_code, seed,
                             adversary_factory, a_labels, perms,
                             coset_letters)
    total = 0.0
    for key in set(real) | set(sim):
        dim = None
        a = real.get(key)
        b = sim.get(key)
        if a is None:
            a = np.zeros_like(b)
        if b is None:
            b = np.zeros_like(a)
        evals = np.linalg.eigvalsh(a - b)
        total += 0.5 * float(np.sum(np.abs(evals)))
    return total

