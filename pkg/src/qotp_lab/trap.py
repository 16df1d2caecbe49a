"""The trap authentication scheme.

A trap code on base code [[n,1,d]] appends n |0> trap qubits and n |+> trap
qubits to the encoded block and permutes all 3n positions.  Keys are the
shared permutation (code key) plus one uniform Pauli per authenticated
register (quantum one-time pad).

Role layout before permuting: positions 0..n-1 carry the encoded base block
(in base-encoder wire order), n..2n-1 the |0> traps, 2n..3n-1 the |+> traps.
Role r sits at physical position pi(r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .css import CssCode, LogicalClass
from .gf2 import dot, parity, popcount
from .paulis import PauliOperator, Permutation


@dataclass(frozen=True)
class TrapCode:
    base: CssCode
    pi: Permutation

    def __post_init__(self):
        if self.pi.size != 3 * self.base.n:
            raise ValueError("permutation must act on 3n qubits")

    @property
    def n(self) -> int:
        return 3 * self.base.n

    @property
    def d(self) -> int:
        return self.base.d

    # -- position bookkeeping ----------------------------------------------
    @property
    def base_positions(self) -> list[int]:
        return [self.pi(r) for r in range(self.base.n)]

    @property
    def zero_trap_positions(self) -> list[int]:
        return [self.pi(r) for r in range(self.base.n, 2 * self.base.n)]

    @property
    def plus_trap_positions(self) -> list[int]:
        return [self.pi(r) for r in range(2 * self.base.n, 3 * self.base.n)]

    def _mask(self, positions) -> int:
        m = 0
        for p in positions:
            m |= 1 << p
        return m

    def embed_base_mask(self, mask: int) -> int:
        out = 0
        for wire in range(self.base.n):
            if (mask >> wire) & 1:
                out |= 1 << self.pi(wire)
        return out

    # -- stabilizer structure ------------------------------------------------
    @property
    def hx(self) -> tuple:
        rows = [self.embed_base_mask(r) for r in self.base.hx]
        rows += [1 << p for p in self.plus_trap_positions]
        return tuple(rows)

    @property
    def hz(self) -> tuple:
        rows = [self.embed_base_mask(r) for r in self.base.hz]
        rows += [1 << p for p in self.zero_trap_positions]
        return tuple(rows)

    @property
    def logical_x(self) -> int:
        return self.embed_base_mask(self.base.logical_x)

    @property
    def logical_z(self) -> int:
        return self.embed_base_mask(self.base.logical_z)

    def as_css(self) -> CssCode:
        """The trap code is itself a [[3n,1,d]] CSS code."""
        trap = self

        def decode(c: int) -> tuple[int, int]:
            rec = trap.decode_record(c)
            err = 0  # coset-leader pattern: base error + fired zero-traps
            err |= trap.embed_base_mask(rec.base_error)
            for p in trap.zero_trap_positions:
                if (c >> p) & 1:
                    err |= 1 << p
            return rec.logical_bit, err

        return CssCode(
            name=f"trap({self.base.name})",
            n=self.n,
            d=self.d,
            hx=self.hx,
            hz=self.hz,
            logical_x=self.logical_x,
            logical_z=self.logical_z,
            self_dual=self.base.self_dual,
            _decode=decode,
        )

    # -- encoder as explicit operations ---------------------------------------
    def encoding_ops(self, ids: list[int]) -> list[tuple]:
        """Gate list realizing E_pi on the given 3n qubit ids.

        ``ids[p]`` is the qubit at physical position p; the logical data is
        expected on ``ids[self.pi(0)]`` (base encoder wire 0), syndrome and
        trap inputs must be |0>.
        """
        gates = []
        for p in self.plus_trap_positions:
            gates.append(("H", ids[p]))
        base_ids = [ids[p] for p in self.base_positions]
        for g in self.base.encoder.gates:
            gates.append((g[0], *[base_ids[w] for w in g[1:]]))
        return gates

    def decoding_ops(self, ids: list[int]) -> list[tuple]:
        gates = []
        base_ids = [ids[p] for p in self.base_positions]
        for g in self.base.encoder.inverse().gates:
            gates.append((g[0], *[base_ids[w] for w in g[1:]]))
        for p in self.plus_trap_positions:
            gates.append(("H", ids[p]))
        return gates

    def data_position(self) -> int:
        return self.pi(0)

    # -- classical record decoding ---------------------------------------------
    def decode_record(self, c: int, hadamard: bool = False) -> "RecordDecode":
        """Decode a 3n-bit computational-basis record (already key-unmasked).

        With ``hadamard`` set, the record was taken right after a bitwise H:
        the trap roles swap (|+> traps must now read 0, |0> traps are ignored)
        while the self-dual base decode is unchanged.
        """
        word = 0
        for wire in range(self.base.n):
            if (c >> self.pi(wire)) & 1:
                word |= 1 << wire
        res = self.base.classical_decode(word)
        checked = self.plus_trap_positions if hadamard else \
            self.zero_trap_positions
        traps_clean = all(((c >> p) & 1) == 0 for p in checked)
        return RecordDecode(
            logical_bit=res.logical_bit,
            accepted=res.clean and traps_clean,
            base_error=res.error,
            traps_clean=traps_clean,
        )


@dataclass(frozen=True)
class RecordDecode:
    logical_bit: int
    accepted: bool
    base_error: int
    traps_clean: bool


@dataclass(frozen=True)
class AttackClassification:
    verdict: str          # trivial_accept | nontrivial_accept | reject
    x_only_verdict: str   # same set, ignoring the Z-error syndrome
    induced_logical: PauliOperator | None

    def accepted(self) -> bool:
        return self.verdict != "reject"


class _ClassifyData:
    """Per-permutation masks hoisted out of the classification loop."""

    __slots__ = ("hz_rows", "hx_rows", "zero_mask", "plus_mask",
                 "logical_x", "logical_z")

    def __init__(self, trap: TrapCode):
        self.hz_rows = [trap.embed_base_mask(r) for r in trap.base.hz]
        self.hx_rows = [trap.embed_base_mask(r) for r in trap.base.hx]
        self.zero_mask = trap._mask(trap.zero_trap_positions)
        self.plus_mask = trap._mask(trap.plus_trap_positions)
        self.logical_x = trap.embed_base_mask(trap.base.logical_x)
        self.logical_z = trap.embed_base_mask(trap.base.logical_z)


def classify_masks(data: _ClassifyData, x: int, z: int) -> tuple[str, str]:
    """(verdict, x_only_verdict) for the attack X^x Z^z, masks only."""
    x_syn = bool(x & data.zero_mask) or \
        any(parity(r & x) for r in data.hz_rows)
    a = parity(x & data.logical_z)
    if x_syn:
        x_only = "reject"
    elif a:
        x_only = "nontrivial_accept"
    else:
        x_only = "trivial_accept"
    z_syn = bool(z & data.plus_mask) or \
        any(parity(r & z) for r in data.hx_rows)
    if x_syn or z_syn:
        return "reject", x_only
    b = parity(z & data.logical_x)
    verdict = "nontrivial_accept" if (a | b) else "trivial_accept"
    return verdict, x_only


def classify_pauli_attack(trap: TrapCode, q: PauliOperator) -> AttackClassification:
    """Exact symbolic classification of a Pauli attack on the trap code."""
    if q.n != trap.n:
        raise ValueError("size mismatch")
    verdict, x_only = classify_masks(_ClassifyData(trap), q.x, q.z)
    induced = None
    if verdict != "reject":
        induced = trap.as_css().logical_pauli_of(q).logical
    return AttackClassification(verdict, x_only, induced)


@dataclass
class AuthKey:
    """Verifier key material: shared code key plus per-register Pauli keys."""

    trap: TrapCode
    pauli_keys: dict[str, PauliOperator] = field(default_factory=dict)
    output_key: PauliOperator | None = None

    @property
    def code_id(self) -> Permutation:
        return self.trap.pi


def random_pauli(n: int, rng) -> PauliOperator:
    x = int.from_bytes(rng.bytes((n + 7) // 8), "little") & ((1 << n) - 1)
    z = int.from_bytes(rng.bytes((n + 7) // 8), "little") & ((1 << n) - 1)
    return PauliOperator.from_masks(n, x, z)


def sample_trap_code(base: CssCode, rng) -> TrapCode:
    return TrapCode(base, Permutation.random(3 * base.n, rng))


def sample_auth_key(base: CssCode, registers, rng,
                    with_output_key: bool = False) -> AuthKey:
    """Uniform permutation plus independent uniform Pauli key per register."""
    trap = sample_trap_code(base, rng)
    keys = {name: random_pauli(trap.n, rng) for name in registers}
    out = random_pauli(trap.n, rng) if with_output_key else None
    return AuthKey(trap, keys, out)


# ---------------------------------------------------------------------------
# state-level authenticate / verify
# ---------------------------------------------------------------------------

def authenticate_register(state, trap: TrapCode, key: PauliOperator,
                          data_qubit: int) -> list[int]:
    """Encode ``data_qubit`` plus fresh traps and apply the Pauli key.

    Returns the 3n register qubit ids in physical-position order; the data
    qubit is placed at position pi(0).
    """
    n3 = trap.n
    fresh = state.append_qubits(n3 - 1)
    ids: list[int] = []
    it = iter(fresh)
    dpos = trap.data_position()
    for p in range(n3):
        ids.append(data_qubit if p == dpos else next(it))
    for g in trap.encoding_ops(ids):
        state.apply_gate(*g)
    state.apply_pauli(key, ids)
    return ids


def verify_and_decode(state, trap: TrapCode, key: PauliOperator,
                      ids: list[int], rng) -> tuple[bool, int]:
    """Strip the key, decode, and measure every syndrome/trap qubit.

    Returns (accepted, data qubit id); acceptance requires every measured
    bit to be zero.
    """
    state.apply_pauli(key.adjoint(), ids)
    for g in trap.decoding_ops(ids):
        state.apply_gate(*g)
    accepted = True
    dpos = trap.data_position()
    for p in range(trap.n):
        if p == dpos:
            continue
        bit, _ = state.measure(ids[p], rng=rng)
        if bit:
            accepted = False
    return accepted, ids[dpos]


# ---------------------------------------------------------------------------
# security estimation
# ---------------------------------------------------------------------------

def wilson_interval(hits: int, trials: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 0.0, 1.0
    phat = hits / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(
        phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return phat, max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class SecurityEstimate:
    attack: str
    weight: int
    samples: int
    eps_hat: float
    ci_lo: float
    ci_hi: float
    bound: float


def estimate_attack_security(base: CssCode, attack: PauliOperator,
                             samples: int, rng,
                             traps: list[TrapCode] | None = None) -> SecurityEstimate:
    """Fraction of uniform permutations for which the fixed attack is a
    nontrivial accept, with a 95% Wilson CI, against (2/3)^{w/2}.

    ``traps`` may supply a pre-sampled shared permutation set so several
    attacks are estimated against identical code draws.
    """
    hits = 0
    if traps is not None:
        samples = len(traps)
        for trap in traps:
            data = trap if isinstance(trap, _ClassifyData) else _ClassifyData(trap)
            v, _ = classify_masks(data, attack.x, attack.z)
            hits += v == "nontrivial_accept"
    else:
        for _ in range(samples):
            trap = sample_trap_code(base, rng)
            v, _ = classify_masks(_ClassifyData(trap), attack.x, attack.z)
            hits += v == "nontrivial_accept"
    eps_hat, lo, hi = wilson_interval(hits, samples)
    w = attack.weight()
    return SecurityEstimate(attack.to_label(), w, samples, eps_hat, lo, hi,
                            (2 / 3) ** (w / 2))


def enumerate_attack_security(base: CssCode, attack: PauliOperator) -> float:
    """Exact Pr_pi[nontrivial accept] by enumeration (3n <= ~8 only)."""
    from itertools import permutations

    n3 = 3 * base.n
    total = 0
    hits = 0
    for perm in permutations(range(n3)):
        trap = TrapCode(base, Permutation(n3, perm))
        total += 1
        if classify_pauli_attack(trap, attack).verdict == "nontrivial_accept":
            hits += 1
    return hits / total


def exact_placement_probability(base: CssCode, positions: list[int]) -> float:
    """Exact probability that X on the given positions is a nontrivial accept.

    Counts role subsets combinatorially: the pulled-back X-pattern must avoid
    the |0> traps and its base part must be a zero-syndrome logical-X coset
    word; the remainder lands on |+> traps.
    """
    n = base.n
    w = len(positions)
    # enumerate zero-syndrome X-patterns in the logical-X coset by weight
    coset_words = []
    for bits in range(1 << len(base.hx)):
        word = base.logical_x
        for i, row in enumerate(base.hx):
            if (bits >> i) & 1:
                word ^= row
        coset_words.append(word)
    count = 0
    for word in coset_words:
        wb = popcount(word)
        rest = w - wb
        if 0 <= rest <= n:
            count += math.comb(n, rest)
    return count / math.comb(3 * n, w)


def security_sweep_rows(base: CssCode, weight: int, attacks: int,
                        samples: int, rng) -> list[SecurityEstimate]:
    """Monte-Carlo sweep over sampled X-type attacks of the given weight.

    All attacks are judged against one shared set of permutation draws.
    """
    n3 = 3 * base.n
    trap_data = [_ClassifyData(sample_trap_code(base, rng))
                 for _ in range(samples)]
    rows = []
    for _ in range(attacks):
        positions = rng.choice(n3, size=weight, replace=False)
        mask = 0
        for p in positions:
            mask |= 1 << int(p)
        attack = PauliOperator.from_masks(n3, mask, 0)
        rows.append(estimate_attack_security(
            base, attack, samples, rng, traps=trap_data))
    return rows


def sweep_to_csv(rows: list[SecurityEstimate], base: CssCode) -> str:
    lines = ["base_code,d,attack_weight,samples,eps_hat,ci_lo,ci_hi,bound"]
    for r in rows:
        lines.append(
            f"{base.name},{base.d},{r.weight},{r.samples},"
            f"{r.eps_hat:.17g},{r.ci_lo:.17g},{r.ci_hi:.17g},{r.bound:.17g}")
    return "\n".join(lines) + "\n"
