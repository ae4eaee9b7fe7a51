import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spacekey.bits import all_strings, canonical_index, strings_upto, xor
from spacekey.errors import DimensionMismatch, SearchExhausted
from spacekey.hashing import (
    ExtractorTable,
    Gf2Matrix,
    build_prefix_extractor,
    constant_extractor,
    first_primes,
    gf2_hash,
    heavy_right_nodes,
    identity_seed_extractor,
    poor_left_nodes,
    prime_collision_frequency,
    prime_hash,
    prime_hash_with,
    random_table,
    sample_gf2_matrix,
    string_value,
    verify_extractor,
)
from spacekey.rng import derive, make_rng

GOLDEN_BUILD_DIGEST = "f729eca9148ccb92a367c80a479617798ec2c547c465271968aac24df2e8aed1"


def sigma3(p, trials):
    return 3 * (p * (1 - p) / trials) ** 0.5


def _dot_oracle(rows, v):
    return "".join(str(sum(int(a) & int(b) for a, b in zip(r, v)) % 2) for r in rows)


def test_gf2_examples():
    assert gf2_hash(Gf2Matrix.zeros(3, 3), "101") == "000"
    assert gf2_hash(Gf2Matrix.identity(3), "101") == "101"
    rows = ["110", "011"]
    assert gf2_hash(Gf2Matrix.from_rows(rows), "110") == _dot_oracle(rows, "110") == "01"
    with pytest.raises(DimensionMismatch):
        gf2_hash(Gf2Matrix.identity(3), "10")


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32), st.data())
def test_gf2_linear(rows, cols, seed, data):
    H = sample_gf2_matrix(rows, cols, seed)
    u = data.draw(st.text(alphabet="01", min_size=cols, max_size=cols))
    v = data.draw(st.text(alphabet="01", min_size=cols, max_size=cols))
    assert gf2_hash(H, xor(u, v)) == xor(gf2_hash(H, u), gf2_hash(H, v))
    assert gf2_hash(H, u) == _dot_oracle([H.serialize()[i * cols:(i + 1) * cols] for i in range(rows)], u)


def test_matrix_serialization_roundtrip():
    H = sample_gf2_matrix(3, 5, 11)
    assert H == sample_gf2_matrix(3, 5, 11)
    assert Gf2Matrix.from_bits(H.serialize(), 3, 5) == H
    assert len(H.serialize()) == 15


def test_matrix_uniform():
    trials = 10_000
    counts = np.zeros(16, dtype=int)
    for i in range(trials):
        counts[int(sample_gf2_matrix(2, 2, derive(5, i)).serialize(), 2)] += 1
    assert np.all(np.abs(counts / trials - 1 / 16) <= sigma3(1 / 16, trials))
    bits = sample_gf2_matrix(100, 1000, 3).serialize()
    assert abs(bits.count("1") / len(bits) - 0.5) <= sigma3(0.5, len(bits))


def test_pairwise_prefix_collision():
    x, u, r, trials = "101100", "011010", 3, 100_000
    hits = 0
    for i in range(trials):
        H = sample_gf2_matrix(r, 6, derive(9, i))
        hits += gf2_hash(H, x) == gf2_hash(H, u)
    p = 2.0**-r
    assert abs(hits / trials - p) <= sigma3(p, trials)


def _sieve_oracle(t):
    out, k = [], 2
    while len(out) < t:
        if all(k % p for p in out if p * p <= k):
            out.append(k)
        k += 1
    return out


def test_first_primes():
    assert first_primes(1) == [2]
    assert first_primes(5) == [2, 3, 5, 7, 11]
    assert first_primes(100)[-1] == 541
    assert first_primes(2000) == _sieve_oracle(2000)


def test_prime_hash():
    assert prime_hash_with("110", 5, 3).residue == string_value("110") % 5
    x13 = [s for s in strings_upto(4) if string_value(s) == 13][0]
    assert prime_hash_with(x13, 5, 3).residue == 3
    a, b = [[s for s in strings_upto(4) if string_value(s) == v][0] for v in (5, 9)]
    assert prime_hash_with(a, 2, 1).residue == prime_hash_with(b, 2, 1).residue == 1
    h = prime_hash("10110", 50, 4)
    assert h.modulus in first_primes(50) and h.residue == string_value("10110") % h.modulus
    assert h == prime_hash("10110", 50, 4)


def test_string_value_order_preserving():
    strings = list(strings_upto(12))
    values = [string_value(s) for s in strings]
    assert values == sorted(set(values))
    assert all(v < 2 ** (len(s) + 1) for s, v in zip(strings, values))


def test_prime_collision_small_t():
    # every prime divides 0, and q = 2 divides the difference 2 exactly half the time
    strings = [s for s in strings_upto(3) if string_value(s) in (3, 5)]
    assert prime_collision_frequency(strings, 2, 4000, 1) == pytest.approx(0.5, abs=sigma3(0.5, 4000))


def test_extractor_file_roundtrip(tmp_path):
    E = build_prefix_extractor(3, 2, 3, Fraction(1, 2), 5, 1)
    path = tmp_path / "e.txt"
    E.save(path)
    F = ExtractorTable.load(path)
    assert F.digest() == E.digest() and np.array_equal(F.table, E.table)
    assert F.prefix_certified_upto == 1 and F.epsilon == Fraction(1, 2) and F.seed == 5


def test_extractor_trivial_verdicts():
    for k in range(0, 4):
        v = verify_extractor(identity_seed_extractor(4, 2), k, Fraction(1, 100))
        assert v.passed and v.deviation == 0
    for eps in (Fraction(1, 5), Fraction(49, 100)):
        assert not verify_extractor(constant_extractor(4, 2, 2), 2, eps).passed


def _tv_oracle(E, k):
    # direct statistical distance from uniform, one flat source at a time
    M = 1 << E.m
    worst = Fraction(0)
    for src in itertools.combinations(range(1 << E.n), 1 << k):
        counts = [0] * M
        for u in src:
            for w in range(E.D):
                counts[int(E.table[u, w])] += 1
        total = len(src) * E.D
        worst = max(worst, sum(abs(Fraction(c, total) - Fraction(1, M)) for c in counts) / 2)
    return worst


def test_extractor_golden_and_routes():
    E = random_table(5, 3, 2, make_rng(2024))
    eps = Fraction(45, 100)
    a = verify_extractor(E, 2, eps, method="sources")
    b = verify_extractor(E, 2, eps, method="tests")
    assert a.deviation == b.deviation == _tv_oracle(E, 2)
    assert a.passed and a.deviation == Fraction(3, 8)


def test_extractor_routes_agree_random():
    for i in range(20):
        E = random_table(4, 2, 2, derive(31, i))
        for k in (1, 2):
            a = verify_extractor(E, k, Fraction(1, 4), method="sources")
            b = verify_extractor(E, k, Fraction(1, 4), method="tests")
            assert a.deviation == b.deviation == _tv_oracle(E, k)


def test_sampled_mode_never_certifies():
    v = verify_extractor(identity_seed_extractor(4, 2), 2, Fraction(1, 5), mode="sampled", samples=200)
    assert v.passed is None and v.deviation == 0
    v = verify_extractor(constant_extractor(4, 2, 2), 2, Fraction(1, 5), mode="sampled", samples=50)
    assert v.passed is False


def test_build_prefix_extractor_golden():
    E = build_prefix_extractor(4, 3, 4, Fraction(45, 100), 7, 1)
    assert E.digest() == GOLDEN_BUILD_DIGEST
    assert verify_extractor(E.prefix(1), 1, Fraction(45, 100)).passed
    first = build_prefix_extractor(4, 3, 4, Fraction(45, 100), 7, 0)
    assert np.array_equal(first.table, random_table(4, 3, 4, make_rng(7)).table)


def test_certified_prefixes_reverify():
    E = build_prefix_extractor(4, 4, 4, Fraction(1, 5), 1, 4)
    for k in range(1, 5):
        assert verify_extractor(E.prefix(k), k, Fraction(1, 5)).passed


def test_build_can_fail():
    with pytest.raises(SearchExhausted):
        build_prefix_extractor(4, 1, 4, Fraction(1, 100), 0, 4, attempts=3)


def test_heavy_nodes_examples():
    E = identity_seed_extractor(3, 2)  # every right node gets exactly avg edges
    assert heavy_right_nodes(E, all_strings(3), Fraction(1, 2)) == set()
    tab = ExtractorTable(2, 0, 1, np.array([[0], [0], [1], [1]]))
    assert heavy_right_nodes(tab, all_strings(2), Fraction(1, 2)) == set()
    assert poor_left_nodes(E, all_strings(3), Fraction(1, 2)) == set()
    C = constant_extractor(3, 2, 2)
    # one left node, 4 edges, avg 1: node 0 is heavy iff 4 > 1/eps
    assert poor_left_nodes(C, ["000"], Fraction(1, 4)) == set()
    assert poor_left_nodes(C, ["000"], Fraction(1, 3)) == set(all_strings(3))


def test_heavy_threshold_strict():
    # counts (3, 1) with avg 2: node 0 is heavy iff 3 > 2 / eps
    tab = ExtractorTable(2, 0, 1, np.array([[0], [0], [0], [1]]))
    assert heavy_right_nodes(tab, all_strings(2), Fraction(1, 2)) == set()
    assert heavy_right_nodes(tab, all_strings(2), Fraction(2, 3)) == set()
    assert heavy_right_nodes(tab, all_strings(2), Fraction(3, 4)) == {"0"}


def _heavy_oracle(E, B, eps):
    counts = {}
    for u in B:
        for w in range(E.D):
            r = int(E.table[canonical_index(u) - ((1 << E.n) - 1), w])
            counts[r] = counts.get(r, 0) + 1
    avg = Fraction(len(B) * E.D, E.M)
    return {format(r, f"0{E.m}b") for r, c in counts.items() if c > avg / eps}


def test_heavy_node_bound_random_graphs():
    rng = make_rng(77)
    for i in range(1000):
        n, d, m = int(rng.integers(2, 5)), int(rng.integers(0, 3)), int(rng.integers(1, 4))
        E = random_table(n, d, m, derive(77, i))
        size = int(rng.integers(1, (1 << n) + 1))
        B = [all_strings(n)[j] for j in sorted(rng.choice(1 << n, size=size, replace=False))]
        eps = Fraction(int(rng.integers(1, 10)), 10)
        heavy = heavy_right_nodes(E, B, eps)
        assert heavy == _heavy_oracle(E, B, eps)
        assert len(heavy) <= eps * E.M


def test_poor_set_bound_on_certified_graphs():
    E = build_prefix_extractor(4, 4, 4, Fraction(1, 5), 1, 4)
    rng = make_rng(3)
    checked = 0
    for k in (2, 3, 4):
        Ek = E.prefix(k)
        for c in range(0, k):
            if not verify_extractor(Ek, k - c, Fraction(1, 5)).passed:
                continue
            for _ in range(50):
                size = int(rng.integers(1, (1 << k) + 1))
                B = [all_strings(4)[j] for j in rng.choice(16, size=min(size, 16), replace=False)]
                assert len(poor_left_nodes(Ek, B, Fraction(1, 5))) < 2 ** (k - c)
                checked += 1
    assert checked > 0
