"""The two key-agreement protocols as message-passing state machines.

Message layout, shared by both variants: Alice opens with one Round-0 block
(a self-delimiting field list). Bob answers every Alice message with one
control bit, ``0`` = send another bit, ``1`` = stop. Every later Alice
message is a single fingerprint bit. The transcript serialization is
``encode_condition`` of the payloads in order, and that exact string is the
eavesdropper's condition.

Variant A (linear hashing): Round 0 carries (n, H, first 1 + L bits of Hx)
with L = ceil(log2(1/delta)), delta = eps / 2n. At round j Bob looks for the
canonically first u with C(u | y, H) <= j whose hash agrees with the
(j + 1 + L)-bit prefix received so far.

Variant B (prime residue + prefix extractor): Round 0 carries
(n, x mod q, q) for a random prime q among the first t primes; round k
sends bit k of E(x, w) for a private random seed w. Bob's candidates at
round k are the first s strings u (canonical order) with
C at level n-k of (u | y, n, k+c) <= k+c that are neighbours of the
received prefix in the k-prefix graph.

Both variants end with Phase 2: each party takes the canonically first
shortest program for x given the reconciliation payload as the key.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

from .bits import BitString, binary, check_bits, decode_condition, encode_condition
from .complexity import Oracle, SpaceSchedule, candidate_set, default_oracle, kstar_condition, min_program
from .errors import InputTooLarge, MalformedTranscript, PrefixNotCertified, ReconciliationExhausted
from .hashing import ExtractorTable, Gf2Matrix, first_primes, gf2_hash, sample_gf2_matrix, string_value
from .rng import STREAM_MATRIX, STREAM_PRIME, STREAM_SEED, derive

ALICE = "Alice"
BOB = "Bob"
DEFAULT_Y_MAX = 256


@dataclass(frozen=True)
class Message:
    round: int
    sender: str
    payload: BitString


@dataclass
class Transcript:
    messages: list[Message] = field(default_factory=list)

    @property
    def parts(self) -> list[BitString]:
        return [m.payload for m in self.messages]

    def serialize(self) -> BitString:
        return encode_condition(self.parts)

    @property
    def bits(self) -> int:
        return len(self.serialize())

    @property
    def payload_bits(self) -> int:
        return sum(len(m.payload) for m in self.messages)

    @property
    def framing_bits(self) -> int:
        return self.bits - self.payload_bits

    def bob_string(self) -> BitString:
        return "".join(m.payload for m in self.messages if m.sender == BOB)

    def alice_bits(self) -> BitString:
        """Alice's single-bit messages after Round 0."""
        return "".join(m.payload for m in self.messages[1:] if m.sender == ALICE)

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


class Channel:
    """Public channel: records every message and notifies passive listeners."""

    def __init__(self):
        self.transcript = Transcript()
        self.listeners: list[Callable[[Message], None]] = []

    def send(self, round_: int, sender: str, payload: BitString) -> None:
        msg = Message(round_, sender, payload)
        self.transcript.messages.append(msg)
        for fn in self.listeners:
            fn(msg)


class PassiveObserver:
    """An eavesdropper's bookkeeping: what has been said, and whether Bob stopped."""

    def __init__(self):
        self.round0: BitString | None = None
        self.alice: list[str] = []
        self.bob: list[str] = []
        self.stopped = False

    def __call__(self, msg: Message) -> None:
        if msg.sender == ALICE and msg.round == 0:
            self.round0 = msg.payload
        elif msg.sender == ALICE:
            self.alice.append(msg.payload)
        else:
            self.bob.append(msg.payload)
            self.stopped = msg.payload == "1"

    def state(self) -> tuple:
        return (self.round0, "".join(self.alice), "".join(self.bob), self.stopped)


def channel_replay(transcript: Transcript | BitString) -> list[Message]:
    """Decode a transcript serialization back into messages.

    Raises MalformedTranscript on framing errors or on a message sequence
    the protocols cannot produce.
    """
    bits = transcript.serialize() if isinstance(transcript, Transcript) else transcript
    try:
        check_bits(bits)
        payloads = decode_condition(bits)
    except ValueError as exc:
        raise MalformedTranscript(str(exc)) from None
    messages = []
    stopped = False
    for i, payload in enumerate(payloads):
        if stopped:
            raise MalformedTranscript("message after Bob's stop bit")
        if i == 0:
            try:
                decode_condition(payload)
            except ValueError:
                raise MalformedTranscript("Round-0 block is not a field list") from None
            messages.append(Message(0, ALICE, payload))
            continue
        if len(payload) != 1:
            raise MalformedTranscript(f"message {i} carries {len(payload)} bits, expected 1")
        sender = BOB if i % 2 else ALICE
        if sender == BOB and payload == "1":
            stopped = True
        messages.append(Message(i // 2, sender, payload))
    return messages


@dataclass
class ProtocolResult:
    variant: str
    z_alice: BitString
    z_bob: BitString | None
    agreed: bool
    transcript: Transcript
    p: BitString
    rounds_used: int
    x_bob: BitString | None
    params: dict

    @property
    def prefix_bits(self) -> int:
        """Fingerprint bits Alice sent after Round 0."""
        return len(self.transcript.alice_bits())

    @property
    def round0_bits(self) -> int:
        return len(self.transcript.messages[0].payload)


def _stream(rng_seed, stream: int):
    if isinstance(rng_seed, tuple):
        return derive(rng_seed[0], *rng_seed[1:], stream)
    return derive(int(rng_seed), stream)


def hash_margin(epsilon: Fraction, n: int) -> int:
    """ceil(log2(1/delta)) for delta = epsilon / 2n, computed exactly."""
    delta = Fraction(epsilon) / (2 * n)
    L = 0
    while (1 << L) * delta < 1:
        L += 1
    return L


def _check_inputs(x, y, epsilon, y_max):
    check_bits(x, "x")
    check_bits(y, "y")
    if len(x) < 1:
        raise ValueError("x must be non-empty")
    if len(y) > y_max:
        raise InputTooLarge(f"|y| = {len(y)} exceeds the configured limit {y_max}")
    eps = Fraction(epsilon)
    if not 0 < eps < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return eps


def _phase2(x, x_bob, cond, schedule, oracle):
    z_alice = min_program(x, cond, 0, schedule, oracle)
    z_bob = None if x_bob is None else min_program(x_bob, cond, 0, schedule, oracle)
    return z_alice, z_bob


def matrix_rows(n: int, epsilon, oracle: Oracle) -> int:
    """Rows of H: enough fingerprint bits for every round up to L_max."""
    return oracle.program_bound(n) + 1 + hash_margin(epsilon, n)


def run_protocol_A(
    x: BitString,
    y: BitString,
    schedule: SpaceSchedule,
    epsilon,
    rng_seed,
    oracle: Oracle | None = None,
    channel: Channel | None = None,
    y_max: int = DEFAULT_Y_MAX,
) -> ProtocolResult:
    oracle = oracle or default_oracle()
    eps = _check_inputs(x, y, epsilon, y_max)
    n = len(x)
    L = hash_margin(eps, n)
    last_round = oracle.program_bound(n)
    H = sample_gf2_matrix(last_round + 1 + L, n, _stream(rng_seed, STREAM_MATRIX))
    h_bits = H.serialize()
    hx = gf2_hash(H, x)
    chan = channel or Channel()
    chan.send(0, ALICE, encode_condition([binary(n), h_bits, hx[:1 + L]]))

    cond = [y, h_bits]
    hashes: dict[str, str] = {}
    x_bob = None
    for j in range(last_round + 1):
        if j:
            chan.send(j, ALICE, hx[L + j])
        received = hx[:j + 1 + L]
        for u in candidate_set(j, cond, 0, schedule, n, oracle):
            hu = hashes.get(u) or hashes.setdefault(u, gf2_hash(H, u))
            if hu.startswith(received):
                x_bob = u
                break
        chan.send(j, BOB, "0" if x_bob is None else "1")
        if x_bob is not None:
            break
    else:
        raise ReconciliationExhausted(f"Bob did not stop by round {last_round}")

    p = received
    z_alice, z_bob = _phase2(x, x_bob, [p, h_bits], schedule, oracle)
    params = {
        "n": n, "epsilon": str(eps), "seed": repr(rng_seed), "hash_margin": L,
        "rows": H.rows, "base_space": schedule.base_space,
    }
    return ProtocolResult("A", z_alice, z_bob, z_alice == z_bob, chan.transcript, p, j, x_bob, params)


def round_collision(x: BitString, y: BitString, j: int, H: Gf2Matrix, epsilon, schedule, oracle=None) -> bool:
    """True if some u != x in Bob's round-j candidate set matches x's prefix."""
    L = hash_margin(epsilon, len(x))
    width = j + 1 + L
    hx = gf2_hash(H, x)[:width]
    return any(
        u != x and gf2_hash(H, u)[:width] == hx
        for u in candidate_set(j, [y, H.serialize()], 0, schedule, len(x), oracle)
    )


def protocol_B_parameters(epsilon, c: int, d: int, n: int) -> tuple[int, int]:
    """(s, t): candidate cap (1/eps) 2^(c+1) D and prime count (1/eps) s n^2."""
    eps = Fraction(epsilon)
    s = math.ceil(Fraction(1 << (c + 1 + d)) / eps)
    t = math.ceil(s * n * n / eps)
    return s, t


def run_protocol_B(
    x: BitString,
    y: BitString,
    schedule: SpaceSchedule,
    epsilon,
    E: ExtractorTable,
    c: int,
    rng_seed,
    oracle: Oracle | None = None,
    channel: Channel | None = None,
    y_max: int = DEFAULT_Y_MAX,
) -> ProtocolResult:
    oracle = oracle or default_oracle()
    eps = _check_inputs(x, y, epsilon, y_max)
    n = len(x)
    if E.n != n:
        raise ValueError(f"extractor left length {E.n} != |x| = {n}")
    s, t = protocol_B_parameters(eps, c, E.d, n)
    primes = first_primes(t)
    q = primes[int(_stream(rng_seed, STREAM_PRIME).integers(0, t))]
    residue = string_value(x) % q
    w = int(_stream(rng_seed, STREAM_SEED).integers(0, E.D))
    p_full = E.output(x, format(w, f"0{E.d}b") if E.d else "")
    certified = E.prefix_certified_upto or 0

    chan = channel or Channel()
    r0 = encode_condition([binary(n), binary(residue), binary(q)])
    chan.send(0, ALICE, r0)
    last_round = min(n, E.m)
    x_bob = None
    for k in range(last_round + 1):
        if k > certified:
            raise PrefixNotCertified(f"round {k} exceeds certified prefix length {certified}")
        if k:
            chan.send(k, ALICE, p_full[k - 1])
        prefix = p_full[:k]
        found = 0
        for u in candidate_set(k + c, kstar_condition(y, n, k + c), n - k, schedule, n, oracle):
            if not E.is_neighbor(u, prefix):
                continue
            found += 1
            if string_value(u) % q == residue:
                x_bob = u
                break
            if found == s:
                break
        chan.send(k, BOB, "0" if x_bob is None else "1")
        if x_bob is not None:
            break
    else:
        raise ReconciliationExhausted(f"Bob did not stop by round {last_round}")

    p = r0 + prefix
    z_alice, z_bob = _phase2(x, x_bob, [p], schedule, oracle)
    params = {
        "n": n, "epsilon": str(eps), "seed": repr(rng_seed), "c": c, "s": s, "t": t,
        "q": q, "d": E.d, "m": E.m, "extractor": E.digest()[:16], "base_space": schedule.base_space,
    }
    return ProtocolResult("B", z_alice, z_bob, z_alice == z_bob, chan.transcript, p, k, x_bob, params)


# ---------------------------------------------------------------------------
# Transcript files


def transcript_file_text(result: ProtocolResult) -> str:
    lines = [
        "spacekey-transcript 1",
        f"variant {result.variant}",
        f"n {result.params['n']}",
        f"epsilon {result.params['epsilon']}",
        f"seed {result.params['seed']}",
    ]
    for key in sorted(k for k in result.params if k not in ("n", "epsilon", "seed")):
        lines.append(f"param {key}={result.params[key]}")
    lines.append(f"bits {result.transcript.serialize()}")
    return "\n".join(lines) + "\n"


def write_transcript(path, result: ProtocolResult) -> str:
    """Write the transcript file; returns its sha256 digest."""
    text = transcript_file_text(result)
    with open(path, "w") as fh:
        fh.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def read_transcript(path) -> tuple[dict, Transcript]:
    with open(path) as fh:
        lines = fh.read().strip("\n").split("\n")
    if not lines or lines[0] != "spacekey-transcript 1":
        raise MalformedTranscript("not a transcript file")
    header: dict = {"params": {}}
    bits = None
    for line in lines[1:]:
        key, _, val = line.partition(" ")
        if key == "param":
            pk, _, pv = val.partition("=")
            header["params"][pk] = pv
        elif key == "bits":
            bits = val
        else:
            header[key] = val
    if bits is None:
        raise MalformedTranscript("missing bits line")
    return header, Transcript(channel_replay(bits))


def round0_fields(transcript: Transcript) -> list[BitString]:
    return decode_condition(transcript.messages[0].payload)


__all__ = [
    "ALICE", "BOB", "Message", "Transcript", "Channel", "PassiveObserver", "ProtocolResult",
    "channel_replay", "run_protocol_A", "run_protocol_B", "round_collision", "hash_margin",
    "matrix_rows", "protocol_B_parameters", "transcript_file_text", "write_transcript",
    "read_transcript", "round0_fields",
]
