"""The pinned space-metered interpreter (instruction set ``spacekey-vm/1``).

Machine model
-------------
* program: a bit string read left to right by the program counter ``pc``;
* condition tape: read-only, holds a self-delimiting field list (see
  :func:`spacekey.bits.encode_condition`); its head only moves forward, one
  whole field at a time;
* work tape: a bit buffer that grows at its right end. Its length is the
  number of work cells in use and is the only metered resource;
* output tape: write-only, append-only.

Instructions (a complete prefix code; ``g(m)`` is the Elias gamma code)::

    00          LIT   append the rest of the program to the output; halt
    01          LD    append the next condition field to the work buffer
    100 g(m)    SKP   skip m >= 1 condition fields
    101 g(i+1)  FLP   flip work bit i
    110 b       PUT   append bit b to the work buffer
    1110        DUP   buffer := buffer + buffer
    11110       OUT   output += buffer; buffer := empty
    11111       BCK   if the buffer ends in 1: drop that bit and jump to pc 0

Reaching the end of the program at an instruction boundary halts the
machine, and the buffer is appended to the output. The empty program
therefore halts at once with empty output.

A run ends ``Invalid`` on a truncated instruction, on LD/SKP past the last
well-formed condition field, or on FLP outside the buffer. It ends
``SpaceExceeded`` as soon as an instruction would grow the buffer beyond
``space_cells`` (``cells_used`` is then reported as ``space_cells + 1``).
Every executed instruction costs one step; halting costs none.

Consequences used throughout the package: ``00 + x`` prints ``x`` in zero
cells, so C(x) <= |x| + 2 at every level; ``01`` prints the first condition
field using |field| cells, so C(x | x) <= 2 whenever space >= |x|.

Configurations at instruction boundaries are (pc, condition head, buffer),
so a run that executes :func:`configuration_bound` steps without halting has
repeated one and never halts. BCK is the only backwards jump and always
lands on pc 0, which makes configuration repeats cheap to detect exactly:
the interpreter records (head, buffer) after every taken BCK.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Iterator

from .bits import BitString, all_strings, field_offsets, read_gamma
from .errors import BudgetExceeded

ISA_VERSION = "spacekey-vm/1"

C_LITERAL = 2
C_COPY = 2
C_EMPTY = 0
C_SKIP = 3

LIT, LD, SKP, FLP, PUT, DUP, OUT, BCK = range(8)
OPCODE_NAMES = ("LIT", "LD", "SKP", "FLP", "PUT", "DUP", "OUT", "BCK")

HALTED = "Halted"
SPACE_EXCEEDED = "SpaceExceeded"
STEP_EXCEEDED = "StepExceeded"
INVALID = "Invalid"


@dataclass(frozen=True)
class VmLimits:
    """Resource limits. ``step_cap=None`` selects the configuration bound."""

    space_cells: int
    step_cap: int | None = None

    def __post_init__(self):
        if self.space_cells < 1:
            raise ValueError("space_cells must be positive")
        if self.step_cap is not None and self.step_cap < 0:
            raise ValueError("step_cap must be non-negative")

    @property
    def budget_truncated(self) -> bool:
        return self.step_cap is not None

    def cap_for(self, program_length: int, condition_length: int) -> int:
        if self.step_cap is not None:
            return self.step_cap
        return configuration_bound(program_length, condition_length, self.space_cells)


@dataclass(frozen=True)
class RunOutcome:
    kind: str
    output: BitString | None = None
    cells_used: int = 0
    steps_used: int = 0
    # True when StepExceeded was certified by a repeated configuration
    # rather than by exhausting the step cap.
    cycle: bool = False

    @property
    def halted(self) -> bool:
        return self.kind == HALTED

    def digest_fields(self) -> dict:
        return {
            "kind": self.kind,
            "output": self.output,
            "cells_used": self.cells_used,
            "steps_used": self.steps_used,
        }


def configuration_bound(program_length: int, condition_length: int, space_cells: int) -> int:
    """Number of distinct instruction-boundary configurations.

    (pc in 0..|P|) x (head in 0..|C|) x (buffer of length <= S).
    """
    return (program_length + 1) * (condition_length + 1) * ((1 << (space_cells + 1)) - 1)


def literal_program(x: BitString) -> BitString:
    return "00" + x


def copy_program() -> BitString:
    return "01"


def _decode(prog: str, pc: int):
    """Decode the instruction at ``pc``; None when it runs past the end."""
    n = len(prog)
    if pc + 2 > n:
        return None
    if prog[pc] == "0":
        return (LIT if prog[pc + 1] == "0" else LD), 0, pc + 2
    if pc + 3 > n:
        return None
    if prog[pc + 1] == "0":
        g = read_gamma(prog, pc + 3)
        if g is None:
            return None
        return (SKP if prog[pc + 2] == "0" else FLP), g[0], g[1]
    if prog[pc + 2] == "0":
        if pc + 4 > n:
            return None
        return PUT, prog[pc + 3], pc + 4
    if pc + 4 > n:
        return None
    if prog[pc + 3] == "0":
        return DUP, 0, pc + 4
    if pc + 5 > n:
        return None
    return (OUT if prog[pc + 4] == "0" else BCK), 0, pc + 5


def disassemble(program: BitString) -> list[str]:
    """Human-readable listing; stops at LIT or at a truncated instruction."""
    out = []
    pc = 0
    while pc < len(program):
        dec = _decode(program, pc)
        if dec is None:
            out.append(f"<truncated {program[pc:]}>")
            break
        op, arg, npc = dec
        name = OPCODE_NAMES[op]
        if op == LIT:
            out.append(f"LIT {program[pc + 2:]!r}")
            break
        if op in (SKP, FLP):
            out.append(f"{name} {arg if op == SKP else arg - 1}")
        elif op == PUT:
            out.append(f"PUT {arg}")
        else:
            out.append(name)
        pc = npc
    return out


# Status codes of a single non-LIT instruction.
_OK, _BAD, _SPACE, _LOOP = range(4)


def _execute(op, arg, npc, head, buf, out, seen, fields, space):
    """Apply one decoded non-LIT instruction.

    Returns (status, pc, head, buf, out, seen); ``seen`` is a frozenset of
    (head, buffer) pairs recorded at taken BCKs, or None when cycle
    detection is off.
    """
    if op == LD:
        f = fields.get(head)
        if f is None:
            return _BAD, npc, head, buf, out, seen
        if len(buf) + len(f[0]) > space:
            return _SPACE, npc, head, buf, out, seen
        return _OK, npc, f[1], buf + f[0], out, seen
    if op == SKP:
        for _ in range(arg):
            f = fields.get(head)
            if f is None:
                return _BAD, npc, head, buf, out, seen
            head = f[1]
        return _OK, npc, head, buf, out, seen
    if op == FLP:
        i = arg - 1
        if i >= len(buf):
            return _BAD, npc, head, buf, out, seen
        bit = "1" if buf[i] == "0" else "0"
        return _OK, npc, head, buf[:i] + bit + buf[i + 1:], out, seen
    if op == PUT:
        if len(buf) + 1 > space:
            return _SPACE, npc, head, buf, out, seen
        return _OK, npc, head, buf + arg, out, seen
    if op == DUP:
        if 2 * len(buf) > space:
            return _SPACE, npc, head, buf, out, seen
        return _OK, npc, head, buf + buf, out, seen
    if op == OUT:
        return _OK, npc, head, "", out + buf, seen
    # BCK
    if buf and buf[-1] == "1":
        buf = buf[:-1]
        if seen is not None:
            key = (head, buf)
            if key in seen:
                return _LOOP, 0, head, buf, out, seen
            seen = seen | {key}
        return _OK, 0, head, buf, out, seen
    return _OK, npc, head, buf, out, seen


def run_program(
    program: BitString,
    condition: BitString,
    limits: VmLimits,
    detect_cycles: bool = True,
) -> RunOutcome:
    """Run ``program`` on ``condition`` under ``limits``.

    Deterministic; failures are outcome kinds, never exceptions. With
    ``detect_cycles`` a repeated configuration ends the run early as
    ``StepExceeded`` (it would reach any step cap without halting).
    """
    fields = field_offsets(condition)
    cap = limits.cap_for(len(program), len(condition))
    space = limits.space_cells
    pc, head, buf, out = 0, 0, "", ""
    steps = cells = 0
    seen = frozenset() if detect_cycles else None
    n = len(program)
    while True:
        if pc == n:
            return RunOutcome(HALTED, out + buf, cells, steps)
        if steps >= cap:
            return RunOutcome(STEP_EXCEEDED, None, cells, steps)
        steps += 1
        dec = _decode(program, pc)
        if dec is None:
            return RunOutcome(INVALID, None, cells, steps)
        op, arg, npc = dec
        if op == LIT:
            return RunOutcome(HALTED, out + program[pc + 2:] + buf, cells, steps)
        status, pc, head, buf, out, seen = _execute(op, arg, npc, head, buf, out, seen, fields, space)
        if status == _OK:
            cells = max(cells, len(buf))
        elif status == _BAD:
            return RunOutcome(INVALID, None, cells, steps)
        elif status == _SPACE:
            return RunOutcome(SPACE_EXCEEDED, None, space + 1, steps)
        else:
            return RunOutcome(STEP_EXCEEDED, None, cells, steps, cycle=True)


def enumerate_programs(max_length: int) -> Iterator[BitString]:
    """Every program of length 0..max_length, in canonical order."""
    for n in range(max_length + 1):
        yield from all_strings(n)


@dataclass
class Budget:
    """Step and wall-clock quota for one enumeration."""

    max_steps: int | None = None
    wall_clock: float | None = None

    def start(self) -> "_BudgetClock":
        return _BudgetClock(self)


class _BudgetClock:
    def __init__(self, budget: Budget):
        self.max_steps = budget.max_steps
        self.deadline = None if budget.wall_clock is None else time.monotonic() + budget.wall_clock
        self.steps = 0

    def tick(self):
        self.steps += 1
        if self.max_steps is not None and self.steps > self.max_steps:
            raise BudgetExceeded(f"enumeration exceeded {self.max_steps} steps")
        if self.deadline is not None and not self.steps & 1023 and time.monotonic() > self.deadline:
            raise BudgetExceeded("enumeration exceeded its wall-clock budget")


def shortest_programs(
    condition: BitString,
    limits: VmLimits,
    max_length: int,
    out_length: int,
    target: BitString | None = None,
    budget: Budget | None = None,
) -> dict[BitString, BitString]:
    """Canonically first shortest program for every ``out_length``-bit output.

    Equivalent to running every program of length <= ``max_length`` through
    :func:`run_program` in canonical order and keeping the first program per
    output, but walks the program tree so that shared prefixes execute once.
    With ``target`` only that output is searched for.
    """
    return _Search(condition, limits, max_length, out_length, target, budget).run()


class _Search:
    def __init__(self, condition, limits, max_length, out_length, target, budget):
        if target is not None and len(target) != out_length:
            raise ValueError("target length differs from out_length")
        self.fields = field_offsets(condition)
        self.space = limits.space_cells
        # With the configuration bound every halting run finishes before the
        # cap and cycle detection catches the rest, so no counting is needed.
        self.cap = limits.step_cap
        self.max_length = max_length
        self.out_length = out_length
        self.target = target
        self.clock = (budget or Budget()).start()
        self.best: dict[str, str] = {}
        self.total = 1 if target is not None else 1 << out_length
        self.hist = [0] * (max_length + 1)
        self.bound = max_length

    def run(self):
        self._explore("", 0, 0, "", "", 0, frozenset())
        return self.best

    def _record(self, prog: str, output: str):
        old = self.best.get(output)
        if old is not None:
            if (len(prog), prog) >= (len(old), old):
                return
            self.hist[len(old)] -= 1
        self.best[output] = prog
        self.hist[len(prog)] += 1
        if len(self.best) == self.total:
            b = self.bound
            while b > 0 and self.hist[b] == 0:
                b -= 1
            self.bound = b

    def _lit(self, prefix, pc, buf, out):
        base = out + prefix[pc + 2:]
        room = self.bound - len(prefix)
        m = self.out_length - len(base) - len(buf)
        if m < 0 or m > room:
            return
        if self.target is not None:
            t = self.target
            if t.startswith(base) and t.endswith(buf):
                self._record(prefix + t[len(base):len(base) + m], t)
            return
        for s in all_strings(m):
            self._record(prefix + s, base + s + buf)

    def _explore(self, prefix, pc, head, buf, out, steps, seen):
        tick = self.clock.tick
        target = self.target
        out_length = self.out_length
        while True:
            tick()
            if pc == len(prefix):
                result = out + buf
                if len(result) == out_length and (target is None or result == target):
                    self._record(prefix, result)
                if len(prefix) < self.bound:
                    self._explore(prefix + "0", pc, head, buf, out, steps, seen)
                    if len(prefix) < self.bound:
                        self._explore(prefix + "1", pc, head, buf, out, steps, seen)
                return
            if self.cap is not None and steps >= self.cap:
                return
            dec = _decode(prefix, pc)
            if dec is None:
                if len(prefix) < self.bound:
                    self._explore(prefix + "0", pc, head, buf, out, steps, seen)
                    if len(prefix) < self.bound:
                        self._explore(prefix + "1", pc, head, buf, out, steps, seen)
                return
            op, arg, npc = dec
            steps += 1
            if op == LIT:
                self._lit(prefix, pc, buf, out)
                return
            status, pc, head, buf, out, seen = _execute(
                op, arg, npc, head, buf, out, seen, self.fields, self.space
            )
            if status != _OK:
                return
            if op == OUT and (len(out) > out_length or (target is not None and not target.startswith(out))):
                return


def naive_shortest_programs(
    condition: BitString,
    limits: VmLimits,
    max_length: int,
    out_length: int,
    run: Callable[..., RunOutcome] = run_program,
) -> dict[BitString, BitString]:
    """Reference route: run every program in canonical order."""
    best: dict[str, str] = {}
    for prog in enumerate_programs(max_length):
        res = run(prog, condition, limits)
        if res.halted and len(res.output) == out_length and res.output not in best:
            best[res.output] = prog
    return best
