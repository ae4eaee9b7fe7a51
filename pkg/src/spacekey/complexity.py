"""Exact space-bounded Kolmogorov complexity by exhaustive program search.

All values are relative to the pinned machine of :mod:`spacekey.vm`, to a
maximum program length and to a :class:`SpaceSchedule`; nothing here
approximates unbounded complexity.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .bits import BitString, all_strings, binary, canonical_key, check_bits, encode_condition
from .errors import InputTooLarge, NoProgram
from .vm import C_LITERAL, Budget, VmLimits, run_program, shortest_programs

INFINITE = math.inf
DEFAULT_N_MAX = 12


@dataclass(frozen=True)
class SpaceSchedule:
    """Space bounds ceil(base_space * ratio**i) for levels i_min..i_max."""

    base_space: int
    ratio: Fraction = Fraction(2)
    level_min: int = -2
    level_max: int = 8
    cap: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "ratio", Fraction(self.ratio))
        if self.base_space < 1:
            raise ValueError("base_space must be positive")
        if self.ratio <= 1:
            raise ValueError("ratio must exceed 1")
        if not self.level_min <= 0 <= self.level_max:
            raise ValueError("level range must contain 0")

    def space_at(self, level: int) -> int:
        if not self.level_min <= level <= self.level_max:
            raise ValueError(f"level {level} outside [{self.level_min}, {self.level_max}]")
        s = max(1, math.ceil(self.base_space * self.ratio ** level))
        return s if self.cap is None else min(s, self.cap)

    def levels(self) -> range:
        return range(self.level_min, self.level_max + 1)

    @classmethod
    def for_length(cls, n: int, **kw) -> "SpaceSchedule":
        kw.setdefault("level_max", max(8, n))
        return cls(base_space=max(1, n), **kw)


@dataclass(frozen=True)
class ComplexityResult:
    value: float  # int, or math.inf
    witness: BitString | None
    space_level: int
    condition_digest: str

    @property
    def finite(self) -> bool:
        return self.value != INFINITE


def condition_digest(condition: BitString) -> str:
    return hashlib.sha256(condition.encode()).hexdigest()[:16]


class Oracle:
    """Memoized exhaustive-search oracle.

    Each (condition, space, length bound, output length) table is computed
    once and holds the canonically first shortest program of every output
    of that length. Reads and writes of the memo go through a lock, so
    concurrent callers see the same values as a sequential run.
    """

    def __init__(
        self,
        n_max: int = DEFAULT_N_MAX,
        length_slack: int = 2,
        max_length: int | None = None,
        step_cap: int | None = None,
        budget: Budget | None = None,
        verify_witnesses: bool = False,
        table_max: int = 12,
    ):
        self.n_max = n_max
        self.length_slack = length_slack
        self.max_length = max_length
        self.step_cap = step_cap
        self.budget = budget or Budget()
        self.verify_witnesses = verify_witnesses
        self.table_max = table_max
        self._memo: dict[tuple, dict[str, str]] = {}
        self._lock = threading.Lock()
        self.log: list[dict] = []

    def program_bound(self, n: int) -> int:
        """L_max for n-bit targets: n + c_literal + slack unless fixed."""
        if self.max_length is not None:
            return self.max_length
        return n + C_LITERAL + self.length_slack

    def _table(self, condition: str, space: int, n: int, target: str | None = None) -> dict[str, str]:
        L = self.program_bound(n)
        key = (condition, space, L, n, self.step_cap, target)
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        table = shortest_programs(
            condition, VmLimits(space, self.step_cap), L, n, target=target, budget=self.budget
        )
        with self._lock:
            return self._memo.setdefault(key, table)

    def table(self, parts: Sequence[BitString], level: int, schedule: SpaceSchedule, n: int) -> dict[str, str]:
        return self._table(encode_condition(parts), schedule.space_at(level), n)

    def complexity(
        self, x: BitString, parts: Sequence[BitString], level: int, schedule: SpaceSchedule
    ) -> ComplexityResult:
        check_bits(x)
        if len(x) > self.n_max:
            raise InputTooLarge(f"|x| = {len(x)} exceeds n_max = {self.n_max}")
        cond = encode_condition(parts)
        space = schedule.space_at(level)
        if len(x) <= self.table_max:
            witness = self._table(cond, space, len(x)).get(x)
        else:
            witness = self._table(cond, space, len(x), target=x).get(x)
        value = INFINITE if witness is None else len(witness)
        result = ComplexityResult(value, witness, level, condition_digest(cond))
        if self.verify_witnesses and witness is not None:
            out = run_program(witness, cond, VmLimits(space, self.step_cap))
            if not (out.halted and out.output == x):
                raise AssertionError(f"witness {witness!r} does not reproduce {x!r}")
        with self._lock:
            self.log.append({
                "x": x,
                "condition": result.condition_digest,
                "level": level,
                "space": space,
                "value": None if witness is None else value,
                "witness": witness,
            })
        return result

    def value(self, x, parts, level, schedule) -> float:
        return self.complexity(x, parts, level, schedule).value

    def dump(self, path) -> None:
        """Write the query log as JSON lines (one record per query)."""
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec) + "\n")


_default = Oracle()


def default_oracle() -> Oracle:
    return _default


def complexity(
    x: BitString,
    condition_parts: Sequence[BitString],
    level: int,
    schedule: SpaceSchedule,
    oracle: Oracle | None = None,
) -> ComplexityResult:
    return (oracle or _default).complexity(x, condition_parts, level, schedule)


def pair_complexity(x, y, level, schedule, oracle: Oracle | None = None) -> ComplexityResult:
    """C(x, y) as the complexity of the self-delimiting pair encoding."""
    return complexity(encode_condition([x, y]), [], level, schedule, oracle)


def candidate_set(
    bound: int,
    condition_parts: Sequence[BitString],
    level: int,
    schedule: SpaceSchedule,
    n: int,
    oracle: Oracle | None = None,
) -> list[BitString]:
    """All n-bit strings of complexity <= bound, in canonical order."""
    oracle = oracle or _default
    if bound < 0:
        return []
    if n > oracle.n_max:
        raise InputTooLarge(f"n = {n} exceeds n_max = {oracle.n_max}")
    table = oracle.table(condition_parts, level, schedule, n)
    return sorted((u for u, p in table.items() if len(p) <= bound), key=canonical_key)


def min_program(
    x: BitString,
    condition_parts: Sequence[BitString],
    level: int,
    schedule: SpaceSchedule,
    oracle: Oracle | None = None,
) -> BitString:
    res = complexity(x, condition_parts, level, schedule, oracle)
    if res.witness is None:
        raise NoProgram(f"no program of bounded length prints {x!r}")
    return res.witness


def kstar_condition(y: BitString, n: int, bound: int) -> list[BitString]:
    """Bob's round condition (y, n, k + c) with integers in binary."""
    return [y, binary(n), binary(bound)]


def k_star(
    x: BitString,
    y: BitString,
    schedule: SpaceSchedule,
    c: int,
    oracle: Oracle | None = None,
) -> int:
    """Least k in 0..n with C at level n-k of (x | y, n, k+c) <= k+c."""
    n = len(x)
    for k in range(n + 1):
        if complexity(x, kstar_condition(y, n, k + c), n - k, schedule, oracle).value <= k + c:
            return k
    raise ValueError(f"no k <= n satisfies the bound; c = {c} is below c_literal = {C_LITERAL}")


def all_complexities(
    n: int, parts: Sequence[BitString], level: int, schedule: SpaceSchedule, oracle: Oracle | None = None
) -> dict[BitString, float]:
    oracle = oracle or _default
    table = oracle.table(parts, level, schedule, n)
    return {u: len(table[u]) if u in table else INFINITE for u in all_strings(n)}

