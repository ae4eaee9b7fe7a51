import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fixture_condition, load_golden
from spacekey.bits import all_strings, encode_condition
from spacekey.errors import BudgetExceeded
from spacekey.vm import (
    C_COPY,
    C_LITERAL,
    HALTED,
    STEP_EXCEEDED,
    Budget,
    VmLimits,
    configuration_bound,
    copy_program,
    disassemble,
    enumerate_programs,
    literal_program,
    naive_shortest_programs,
    run_program,
    shortest_programs,
)

GOLDEN = load_golden("vm_golden.json")
programs = st.text(alphabet="01", max_size=14)
parts = st.lists(st.text(alphabet="01", max_size=5), max_size=3)


def test_golden_count():
    assert len(GOLDEN) >= 30
    names = {f["name"] for f in GOLDEN}
    assert "copy 101" in names and "literal 01" in names


@pytest.mark.parametrize("fx", GOLDEN, ids=[f["name"] for f in GOLDEN])
def test_golden_fixture(fx):
    out = run_program(fx["program"], fixture_condition(fx), VmLimits(fx["space"], fx["step_cap"]), fx["detect_cycles"])
    got = dict(out.digest_fields(), cycle=out.cycle)
    assert got == fx["expect"]


def test_idioms():
    assert len(literal_program("0110")) == 4 + C_LITERAL
    assert len(copy_program()) == C_COPY
    res = run_program(copy_program(), encode_condition(["101"]), VmLimits(3))
    assert res.kind == HALTED and res.output == "101"
    assert run_program(literal_program("01"), "", VmLimits(1)).output == "01"


@given(programs.filter(bool), parts)
def test_zero_step_cap(prog, cond):
    assert run_program(prog, encode_condition(cond), VmLimits(4, 0)).kind == STEP_EXCEEDED


def test_enumerate_programs():
    assert list(enumerate_programs(0)) == [""]
    assert list(enumerate_programs(1)) == ["", "0", "1"]
    progs = list(enumerate_programs(2))
    assert len(progs) == 7 and progs[-1] == "11"
    assert sum(1 for _ in enumerate_programs(8)) == 2**9 - 1


def test_configuration_bound_formula():
    assert configuration_bound(0, 0, 1) == 3
    assert configuration_bound(4, 2, 2) == 5 * 3 * 7


def test_configuration_bound_soundness():
    # every run stopped by the configuration bound still fails to halt
    # with twice the steps; the cycle detector agrees on every run
    conditions = [c for n in range(5) for c in all_strings(n)]
    stopped = 0
    for space in range(1, 5):
        for cond in conditions:
            for prog in enumerate_programs(10):
                plain = run_program(prog, cond, VmLimits(space), detect_cycles=False)
                fast = run_program(prog, cond, VmLimits(space))
                assert (fast.kind, fast.output) == (plain.kind, plain.output)
                if plain.kind == STEP_EXCEEDED:
                    stopped += 1
                    cap = 2 * configuration_bound(len(prog), len(cond), space)
                    assert run_program(prog, cond, VmLimits(space, cap), detect_cycles=False).kind == STEP_EXCEEDED
    assert stopped > 0


@given(programs, parts, st.integers(1, 8))
def test_determinism_and_limits(prog, cond, space):
    c = encode_condition(cond)
    a = run_program(prog, c, VmLimits(space))
    assert a == run_program(prog, c, VmLimits(space))
    if a.halted:
        assert a.cells_used <= space
        assert a.steps_used <= configuration_bound(len(prog), len(c), space)


@given(programs, parts, st.integers(1, 6), st.integers(0, 6))
def test_space_monotone(prog, cond, space, extra):
    c = encode_condition(cond)
    a = run_program(prog, c, VmLimits(space))
    if a.halted:
        b = run_program(prog, c, VmLimits(space + extra))
        assert b.halted and b.output == a.output


@pytest.mark.parametrize("cond_parts", [[], ["101"], ["1", "01"], ["0110", "1"], ["", "11"]])
@pytest.mark.parametrize("space", [1, 2, 4])
@pytest.mark.parametrize("cap", [None, 3])
def test_tree_search_matches_naive(cond_parts, space, cap):
    cond = encode_condition(cond_parts)
    limits = VmLimits(space, cap)
    for n in range(4):
        assert shortest_programs(cond, limits, 8, n) == naive_shortest_programs(cond, limits, 8, n)
        for t in all_strings(n):
            got = shortest_programs(cond, limits, 8, n, target=t)
            ref = naive_shortest_programs(cond, limits, 8, n)
            assert got == ({t: ref[t]} if t in ref else {})


def test_search_budget():
    with pytest.raises(BudgetExceeded):
        shortest_programs("", VmLimits(4), 12, 6, budget=Budget(max_steps=50))


def test_disassemble():
    assert disassemble("0110111101") == ["LD", "FLP 0", "PUT 1"]
    assert disassemble("0001") == ["LIT '01'"]
    assert disassemble("11") == ["<truncated 11>"]
