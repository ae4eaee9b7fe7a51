"""Bit strings, the canonical string order, and self-delimiting codes.

Bit strings are plain ``str`` objects over the alphabet ``{'0', '1'}``. The
canonical order is length first, then lexicographic; ``canonical_index`` is
the position of a string in that order (the empty string has index 0).
"""

from __future__ import annotations

from typing import Iterable, Iterator

BitString = str


def is_bits(s: object) -> bool:
    return isinstance(s, str) and all(ch in "01" for ch in s)


def check_bits(s: object, what: str = "bit string") -> BitString:
    if not is_bits(s):
        raise ValueError(f"malformed {what}: {s!r}")
    return s  # type: ignore[return-value]


def canonical_key(s: BitString) -> tuple[int, str]:
    return (len(s), s)


def canonical_index(s: BitString) -> int:
    """Position of ``s`` in length-then-lex order; injective, < 2**(len+1)."""
    return (1 << len(s)) - 1 + (int(s, 2) if s else 0)


def from_canonical_index(i: int) -> BitString:
    if i < 0:
        raise ValueError("index must be non-negative")
    n = (i + 1).bit_length() - 1
    offset = i - ((1 << n) - 1)
    return format(offset, f"0{n}b") if n else ""


def all_strings(n: int) -> list[BitString]:
    """Every n-bit string in lexicographic (= canonical) order."""
    if n == 0:
        return [""]
    return [format(i, f"0{n}b") for i in range(1 << n)]


def strings_upto(max_length: int) -> Iterator[BitString]:
    for n in range(max_length + 1):
        yield from all_strings(n)


def to_int(s: BitString) -> int:
    return int(s, 2) if s else 0


def from_int(value: int, width: int) -> BitString:
    return format(value, f"0{width}b") if width else ""


def binary(value: int) -> BitString:
    """Minimal binary representation of a non-negative integer ("0" for 0)."""
    if value < 0:
        raise ValueError("negative integer")
    return format(value, "b")


def xor(u: BitString, v: BitString) -> BitString:
    if len(u) != len(v):
        raise ValueError("length mismatch")
    return "".join("1" if a != b else "0" for a, b in zip(u, v))


def flip(s: BitString, positions: Iterable[int]) -> BitString:
    out = list(s)
    for i in positions:
        out[i] = "1" if out[i] == "0" else "0"
    return "".join(out)


# -- Elias gamma code -------------------------------------------------------
#
# gamma(m) for m >= 1 is (bitlen(m) - 1) zeros followed by binary(m). It is
# the one self-delimiting integer code used everywhere: condition framing,
# transcript framing and program operands.


def gamma(m: int) -> BitString:
    if m < 1:
        raise ValueError("gamma code is defined for m >= 1")
    b = format(m, "b")
    return "0" * (len(b) - 1) + b


def gamma_length(m: int) -> int:
    return 2 * m.bit_length() - 1


def read_gamma(s: BitString, pos: int) -> tuple[int, int] | None:
    """Decode a gamma codeword starting at ``pos``; None if truncated."""
    zeros = 0
    n = len(s)
    while pos + zeros < n and s[pos + zeros] == "0":
        zeros += 1
    end = pos + 2 * zeros + 1
    if end > n:
        return None
    return int(s[pos + zeros:end], 2), end


def encode_condition(parts: Iterable[BitString]) -> BitString:
    """Self-delimiting concatenation: each part is prefixed by gamma(len + 1)."""
    return "".join(gamma(len(p) + 1) + p for p in parts)


def read_field(s: BitString, pos: int) -> tuple[BitString, int] | None:
    hdr = read_gamma(s, pos)
    if hdr is None:
        return None
    length, start = hdr[0] - 1, hdr[1]
    end = start + length
    if end > len(s):
        return None
    return s[start:end], end


def decode_condition(s: BitString) -> list[BitString]:
    parts = []
    pos = 0
    while pos < len(s):
        field = read_field(s, pos)
        if field is None:
            raise ValueError("malformed condition encoding")
        parts.append(field[0])
        pos = field[1]
    return parts


def field_offsets(s: BitString) -> dict[int, tuple[BitString, int]]:
    """Map each field start offset to (field bits, next offset).

    Decoding stops at the first malformed field; offsets past that point are
    absent from the map.
    """
    out: dict[int, tuple[BitString, int]] = {}
    pos = 0
    while pos < len(s):
        field = read_field(s, pos)
        if field is None:
            break
        out[pos] = field
        pos = field[1]
    return out


def chunks(s: BitString, width: int) -> list[BitString]:
    return [s[i:i + width] for i in range(0, len(s), width)]

