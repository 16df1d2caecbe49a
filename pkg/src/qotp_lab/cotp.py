"""Classical layer: one-time memories, one-time MAC, a trusted classical
one-time-program oracle, and the bounded-reactive OTP built on top of it.

The COTP is deliberately an ideal-functionality oracle (hybrid model), not a
garbled-circuit realization.  The BR-OTP chains one COTP per round: each
round function verifies then unpads the carried, authenticated-encrypted
state of the previous round; out-of-order or tampered queries abort, and
aborts are absorbing.

Wire encoding: payloads are length-prefixed byte strings; an abort is the
single byte 0xFF followed by a one-byte reason code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

# ---------------------------------------------------------------------------
# GF(2^kappa) arithmetic with fixed reduction polynomials
# ---------------------------------------------------------------------------

REDUCTION_POLY = {
    2: (1 << 2) | 0b11,                      # x^2 + x + 1
    8: (1 << 8) | 0b11011,                   # x^8 + x^4 + x^3 + x + 1
    16: (1 << 16) | (1 << 12) | 0b1011,      # x^16 + x^12 + x^3 + x + 1
    64: (1 << 64) | 0b11011,                 # x^64 + x^4 + x^3 + x + 1
}


def gf_mul(a: int, b: int, kappa: int) -> int:
    poly = REDUCTION_POLY[kappa]
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> kappa:
            a ^= poly
    return acc


class DoubleUseError(RuntimeError):
    """A one-time object was executed twice."""


# ---------------------------------------------------------------------------
# one-time memory and trusted COTP oracle
# ---------------------------------------------------------------------------

class OtmToken:
    """Stores two strings; reveals exactly one, then self-destructs."""

    def __init__(self, s0, s1):
        self._slots = (s0, s1)
        self.consumed = False

    def execute(self, c: int):
        if self.consumed:
            raise DoubleUseError("one-time memory already executed")
        self.consumed = True
        value = self._slots[c & 1]
        self._slots = (None, None)
        return value


class CotpInstance:
    """Trusted one-time program oracle for a classical two-party function."""

    def __init__(self, f: Callable, sender_input):
        self._f = f
        self._a = sender_input
        self.consumed = False

    def execute(self, receiver_input):
        if self.consumed:
            raise DoubleUseError("one-time program already executed")
        self.consumed = True
        out = self._f(self._a, receiver_input)
        self._f = None
        self._a = None
        return out


# ---------------------------------------------------------------------------
# one-time MAC: tag(m) = a*m + b over GF(2^kappa)
# ---------------------------------------------------------------------------

@dataclass
class MacKey:
    a: int
    b: int
    kappa: int
    used: bool = False

    @staticmethod
    def random(kappa: int, rng) -> "MacKey":
        return MacKey(_rand_bits(rng, kappa), _rand_bits(rng, kappa), kappa)


def _rand_bits(rng, bits: int) -> int:
    return int.from_bytes(rng.bytes((bits + 7) // 8), "little") & ((1 << bits) - 1)


def mac_tag(key: MacKey, m: int) -> int:
    if m >> key.kappa:
        raise ValueError("message length must equal kappa")
    if key.used:
        raise DoubleUseError("one-time MAC key already used")
    key.used = True
    return gf_mul(key.a, m, key.kappa) ^ key.b


def mac_verify(key: MacKey, m: int, tag: int) -> bool:
    if m >> key.kappa:
        raise ValueError("message length must equal kappa")
    return (gf_mul(key.a, m, key.kappa) ^ key.b) == tag


def mac_tag_blocks(key: MacKey, blocks: list[int]) -> int:
    """Polynomial extension of the one-time MAC to multi-block messages.

    Horner evaluation tag = b + a*(m_t + a*(m_{t-1} + ...)); collapses to
    a*m + b for a single block.  Needed because the reactive program's
    carried state exceeds one field element at protocol scale.
    """
    acc = 0
    for m in blocks:
        if m >> key.kappa:
            raise ValueError("block length must equal kappa")
        acc = gf_mul(acc ^ m, key.a, key.kappa)
    return acc ^ key.b


def mac_verify_blocks(key: MacKey, blocks: list[int], tag: int) -> bool:
    return mac_tag_blocks(MacKey(key.a, key.b, key.kappa), blocks) == tag


# ---------------------------------------------------------------------------
# byte helpers and wire encoding
# ---------------------------------------------------------------------------

ABORT_BYTE = 0xFF
ABORT_REASONS = {"mac": 0x01, "order": 0x02, "consumed": 0x03, "absorbed": 0x04}


def encode_payload(*parts: bytes) -> bytes:
    out = bytearray()
    for p in parts:
        out.extend(len(p).to_bytes(4, "big"))
        out.extend(p)
    return bytes(out)


def decode_payload(data: bytes) -> list[bytes]:
    parts = []
    i = 0
    while i < len(data):
        ln = int.from_bytes(data[i:i + 4], "big")
        i += 4
        parts.append(data[i:i + ln])
        i += ln
    return parts


def abort_message(reason: str) -> bytes:
    return bytes([ABORT_BYTE, ABORT_REASONS[reason]])


def is_abort(data: bytes) -> bool:
    return len(data) >= 1 and data[0] == ABORT_BYTE


def _bytes_to_blocks(data: bytes, kappa: int) -> list[int]:
    step = kappa // 8 if kappa >= 8 else 1
    blocks = []
    for i in range(0, len(data), step):
        blocks.append(int.from_bytes(data[i:i + step], "big") & ((1 << kappa) - 1))
    return blocks or [0]


def _xor_bytes(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# the bounded-reactive one-time program (Protocol-6-style construction)
# ---------------------------------------------------------------------------

@dataclass
class BrOtpProgram:
    """Receiver-side handle over the chained COTP instances.

    ``round_functions`` follow the reactive shape: g_1(a, b_1) -> (m_1, s_1),
    g_i(b_i, s_{i-1}) -> (m_i, s_i); states are byte strings padded to
    ``state_len`` bytes.
    """

    cotps: list
    ell: int
    kappa: int
    state_len: int
    current_round: int = 0
    aborted: bool = False

    def query(self, i: int, b_i: bytes, carried: bytes = b"") -> bytes:
        """Run round i; ``carried`` is the previous round's ciphertext+tag."""
        if self.aborted:
            return abort_message("absorbed")
        if i < 1 or i > self.ell:
            self.aborted = True
            return abort_message("order")
        cotp = self.cotps[i - 1]
        if cotp.consumed:
            self.aborted = True
            return abort_message("consumed")
        out = cotp.execute((b_i, carried))
        if is_abort(out):
            self.aborted = True
        return out


def brotp_compile(round_functions: list, sender_input, kappa: int,
                  state_len: int, rng) -> BrOtpProgram:
    """Wrap the round functions into one COTP per round with MAC chaining."""
    ell = len(round_functions)
    if ell < 1:
        raise ValueError("need at least one round")
    pads = [rng.bytes(state_len) for _ in range(ell - 1)]
    macs = [MacKey.random(kappa, rng) for _ in range(ell - 1)]

    def make_f(i: int):
        g = round_functions[i - 1]

        def f(sender, receiver):
            b_i, carried = receiver
            if i == 1:
                m, s = g(sender, b_i)
            else:
                parts = decode_payload(carried)
                if len(parts) != 2:
                    return abort_message("mac")
                c0, c1 = parts
                if len(c0) != state_len:
                    return abort_message("mac")
                tag = int.from_bytes(c1, "big")
                if not mac_verify_blocks(macs[i - 2],
                                         _bytes_to_blocks(c0, kappa), tag):
                    return abort_message("mac")
                s_prev = _xor_bytes(c0, pads[i - 2])
                m, s = g(b_i, s_prev)
            if i < ell:
                s = s.ljust(state_len, b"\0")
                if len(s) != state_len:
                    raise ValueError("state exceeds the declared length")
                c0 = _xor_bytes(s, pads[i - 1])
                tag = mac_tag_blocks(MacKey(macs[i - 1].a, macs[i - 1].b, kappa),
                                     _bytes_to_blocks(c0, kappa))
                tag_bytes = tag.to_bytes((kappa + 7) // 8, "big")
                return encode_payload(m, encode_payload(c0, tag_bytes))
            return encode_payload(m, b"")

        return f

    cotps = [CotpInstance(make_f(i), sender_input if i == 1 else None)
             for i in range(1, ell + 1)]
    return BrOtpProgram(cotps, ell, kappa, state_len)


def brotp_query(program: BrOtpProgram, i: int, b_i: bytes,
                carried: bytes = b"") -> tuple[bytes, bytes] | None:
    """Convenience wrapper: returns (m_i, carried') or None on abort."""
    out = program.query(i, b_i, carried)
    if is_abort(out):
        return None
    m, carried_next = decode_payload(out)
    return m, carried_next


def run_honest_chain(program: BrOtpProgram, inputs: list[bytes]) -> list[bytes]:
    """Query rounds 1..ell in order; returns the m_i list (or raises)."""
    carried = b""
    out = []
    for i, b_i in enumerate(inputs, start=1):
        res = brotp_query(program, i, b_i, carried)
        if res is None:
            raise RuntimeError(f"honest chain aborted in round {i}")
        m, carried = res
        out.append(m)
    return out


# ---------------------------------------------------------------------------
# ideal reactive functionality (the reference the construction must match)
# ---------------------------------------------------------------------------

class BrOtpIdeal:
    """Direct implementation of the bounded-reactive ideal functionality."""

    def __init__(self, round_functions: list, sender_input):
        self.gs = list(round_functions)
        self.a = sender_input
        self.state = None
        self.evaluated = [False] * len(self.gs)

    def execute(self, i: int, b_i: bytes) -> bytes | None:
        if i < 1 or i > len(self.gs):
            return None
        if any(not self.evaluated[j] for j in range(i - 1)):
            return None  # some g_j with j < i has not been evaluated
        if self.evaluated[i - 1]:
            return None  # g_i has already been evaluated
        if i == 1:
            m, s = self.gs[0](self.a, b_i)
        else:
            m, s = self.gs[i - 1](b_i, self.state)
        self.state = s
        self.evaluated[i - 1] = True
        if all(self.evaluated):
            self.gs = None
            self.a = None
        return m


# ---------------------------------------------------------------------------
# the simulator for a corrupted receiver
# ---------------------------------------------------------------------------

class BrOtpSimulator:
    """Ideal-world receiver simulation: answers like the real program but
    carries fresh random states, consulting the ideal functionality once per
    in-order round."""

    def __init__(self, ideal: BrOtpIdeal, ell: int, kappa: int,
                 state_len: int, rng):
        self.ideal = ideal
        self.ell = ell
        self.kappa = kappa
        self.state_len = state_len
        self.pads = [rng.bytes(state_len) for _ in range(ell - 1)]
        self.macs = [MacKey.random(kappa, rng) for _ in range(ell - 1)]
        self.rng = rng
        self.done = [False] * ell
        self.aborted = False

    def query(self, i: int, b_i: bytes, carried: bytes = b"") -> bytes:
        if self.aborted:
            return abort_message("absorbed")
        if i < 1 or i > self.ell or self.done[i - 1] or \
                any(not self.done[j] for j in range(i - 1)):
            self.aborted = True
            return abort_message("order")
        if i > 1:
            parts = decode_payload(carried)
            if len(parts) != 2 or len(parts[0]) != self.state_len:
                self.aborted = True
                return abort_message("mac")
            c0, c1 = parts
            tag = int.from_bytes(c1, "big")
            if not mac_verify_blocks(self.macs[i - 2],
                                     _bytes_to_blocks(c0, self.kappa), tag):
                self.aborted = True
                return abort_message("mac")
        m = self.ideal.execute(i, b_i)
        if m is None:
            self.aborted = True
            return abort_message("order")
        self.done[i - 1] = True
        if i < self.ell:
            w = self.rng.bytes(self.state_len)  # random substitute state
            c0 = _xor_bytes(w, self.pads[i - 1])
            tag = mac_tag_blocks(
                MacKey(self.macs[i - 1].a, self.macs[i - 1].b, self.kappa),
                _bytes_to_blocks(c0, self.kappa))
            return encode_payload(m, encode_payload(
                c0, tag.to_bytes((self.kappa + 7) // 8, "big")))
        return encode_payload(m, b"")
