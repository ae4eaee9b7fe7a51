"""Fingerprint families: GF(2) linear hashes, prime residues, extractor graphs.

Extractor graphs are explicit tables ``E[u, w]`` (left node u, seed w) of
m-bit right nodes stored as integers; the k-prefix graph keeps the top k
bits of every entry.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .bits import BitString, canonical_index, check_bits, from_int, to_int
from .errors import BudgetExceeded, DimensionMismatch, SearchExhausted
from .rng import make_rng

# ---------------------------------------------------------------------------
# GF(2) matrices


@dataclass(frozen=True, eq=False)
class Gf2Matrix:
    entries: np.ndarray  # shape (rows, cols), values in {0, 1}

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def __eq__(self, other):
        return isinstance(other, Gf2Matrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.serialize())

    def serialize(self) -> BitString:
        """Row-major bits."""
        return "".join("1" if b else "0" for b in self.entries.ravel())

    @classmethod
    def from_bits(cls, bits: BitString, rows: int, cols: int) -> "Gf2Matrix":
        check_bits(bits)
        if len(bits) != rows * cols:
            raise DimensionMismatch("bit count does not match dimensions")
        arr = np.array([b == "1" for b in bits], dtype=np.uint8).reshape(rows, cols)
        return cls(arr)

    @classmethod
    def from_rows(cls, rows: Iterable[BitString]) -> "Gf2Matrix":
        rows = list(rows)
        return cls.from_bits("".join(rows), len(rows), len(rows[0]) if rows else 0)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Gf2Matrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, n: int) -> "Gf2Matrix":
        return cls(np.eye(n, dtype=np.uint8))


def gf2_hash(H: Gf2Matrix, v: BitString) -> BitString:
    """H . v over GF(2)."""
    check_bits(v)
    if len(v) != H.cols:
        raise DimensionMismatch(f"vector length {len(v)} != {H.cols} columns")
    vec = np.array([b == "1" for b in v], dtype=np.int64)
    out = (H.entries.astype(np.int64) @ vec) & 1
    return "".join("1" if b else "0" for b in out)


def sample_gf2_matrix(rows: int, cols: int, rng_seed) -> Gf2Matrix:
    if rows < 1 or cols < 1:
        raise ValueError("dimensions must be positive")
    rng = make_rng(rng_seed)
    return Gf2Matrix(rng.integers(0, 2, size=(rows, cols), dtype=np.uint8))


# ---------------------------------------------------------------------------
# Prime residues


@lru_cache(maxsize=32)
def _first_primes(t: int) -> tuple[int, ...]:
    # Rosser: p_t < t (ln t + ln ln t) for t >= 6.
    limit = 15 if t < 6 else int(t * (math.log(t) + math.log(math.log(t)))) + 1
    sieve = np.ones(limit + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    primes = np.flatnonzero(sieve)[:t]
    assert len(primes) == t
    return tuple(int(p) for p in primes)


def first_primes(t: int) -> list[int]:
    if t < 1:
        raise ValueError("t must be at least 1")
    return list(_first_primes(t))


@dataclass(frozen=True)
class PrimeHash:
    residue: int
    modulus: int
    prime_index_bound: int


def string_value(x: BitString) -> int:
    """The canonical string-to-integer map: position in length-then-lex order."""
    return canonical_index(check_bits(x))


def prime_hash_with(x: BitString, q: int, t: int) -> PrimeHash:
    return PrimeHash(string_value(x) % q, q, t)


def prime_hash(x: BitString, t: int, rng_seed) -> PrimeHash:
    primes = first_primes(t)
    q = primes[int(make_rng(rng_seed).integers(0, t))]
    return prime_hash_with(x, q, t)


def prime_collision_frequency(strings: list[BitString], t: int, trials: int, rng_seed) -> float:
    """Fraction of random q (among the first t primes) with h(strings[0]) = h(u) for another u."""
    if len(set(strings)) != len(strings):
        raise ValueError("strings must be distinct")
    primes = np.array(first_primes(t), dtype=np.int64)
    diffs = np.array([string_value(u) - string_value(strings[0]) for u in strings[1:]], dtype=np.int64)
    qs = primes[make_rng(rng_seed).integers(0, t, size=trials)]
    if diffs.size == 0:
        return 0.0
    hits = (diffs[None, :] % qs[:, None] == 0).any(axis=1)
    return float(hits.mean())


# ---------------------------------------------------------------------------
# Extractor tables


@dataclass(eq=False)
class ExtractorTable:
    n: int
    d: int
    m: int
    table: np.ndarray  # shape (2**n, 2**d), entries < 2**m
    epsilon: Fraction | None = None
    prefix_certified_upto: int | None = None
    seed: int | None = None

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)
        if self.table.shape != (1 << self.n, 1 << self.d):
            raise DimensionMismatch(f"table shape {self.table.shape} != (2^{self.n}, 2^{self.d})")
        if self.table.size and (self.table.min() < 0 or self.table.max() >= 1 << self.m):
            raise ValueError("right node out of range")
        if self.epsilon is not None:
            self.epsilon = Fraction(self.epsilon)

    @property
    def D(self) -> int:
        return 1 << self.d

    @property
    def M(self) -> int:
        return 1 << self.m

    def prefix(self, k: int) -> "ExtractorTable":
        """The k-prefix graph E_k (top k output bits)."""
        if not 0 <= k <= self.m:
            raise ValueError(f"prefix length {k} outside 0..{self.m}")
        return ExtractorTable(self.n, self.d, k, self.table >> (self.m - k), self.epsilon, seed=self.seed)

    def output(self, x: BitString, w: BitString) -> BitString:
        return from_int(int(self.table[to_int(x), to_int(w)]), self.m)

    def is_neighbor(self, u: BitString, right: BitString) -> bool:
        """True when some seed maps u to a node whose prefix is ``right``."""
        k = len(right)
        row = self.table[to_int(u)] >> (self.m - k)
        return bool((row == to_int(right)).any())

    def serialize(self) -> str:
        eps = "" if self.epsilon is None else str(self.epsilon)
        cert = "" if self.prefix_certified_upto is None else str(self.prefix_certified_upto)
        seed = "" if self.seed is None else str(self.seed)
        lines = [
            "spacekey-extractor 1",
            f"n {self.n}",
            f"d {self.d}",
            f"m {self.m}",
            f"epsilon {eps}",
            f"certified {cert}",
            f"seed {seed}",
            "table",
        ]
        for row in self.table:
            lines.append(" ".join(from_int(int(v), self.m) for v in row))
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()

    @classmethod
    def parse(cls, text: str) -> "ExtractorTable":
        lines = text.strip("\n").split("\n")
        if not lines or lines[0] != "spacekey-extractor 1":
            raise ValueError("not an extractor table file")
        header = {}
        i = 1
        while lines[i] != "table":
            key, _, val = lines[i].partition(" ")
            header[key] = val
            i += 1
        n, d, m = int(header["n"]), int(header["d"]), int(header["m"])
        rows = []
        for line in lines[i + 1:]:
            toks = line.split(" ")
            if any(len(tok) != m for tok in toks):
                raise ValueError("right node width differs from m")
            rows.append([to_int(check_bits(tok)) for tok in toks])
        return cls(
            n, d, m, np.array(rows, dtype=np.int64).reshape(1 << n, 1 << d),
            Fraction(header["epsilon"]) if header.get("epsilon") else None,
            int(header["certified"]) if header.get("certified") else None,
            int(header["seed"]) if header.get("seed") else None,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.serialize())

    @classmethod
    def load(cls, path) -> "ExtractorTable":
        with open(path) as fh:
            return cls.parse(fh.read())

    @classmethod
    def from_function(cls, n: int, d: int, m: int, fn) -> "ExtractorTable":
        """Tabulate ``fn(x_bits, w_bits) -> m-bit string``."""
        tab = np.zeros((1 << n, 1 << d), dtype=np.int64)
        for u in range(1 << n):
            for w in range(1 << d):
                tab[u, w] = to_int(fn(from_int(u, n), from_int(w, d)))
        return cls(n, d, m, tab)


@dataclass(frozen=True)
class ExtractorVerdict:
    """Outcome of an extractor check.

    ``passed`` is True/False for exhaustive checks. Sampled checks report
    False when a violating source was found and None otherwise: sampling
    never certifies.
    """

    passed: bool | None
    deviation: Fraction
    k: int
    epsilon: Fraction
    mode: str
    sources_checked: int
    worst_source: tuple[int, ...] | None = None


def degree_matrix(E: ExtractorTable) -> np.ndarray:
    """hist[u, r] = number of seeds taking left node u to right node r."""
    N, M = 1 << E.n, E.M
    hist = np.zeros((N, M), dtype=np.int64)
    rows = np.repeat(np.arange(N), E.D)
    np.add.at(hist, (rows, E.table.ravel()), 1)
    return hist


def source_distance(E: ExtractorTable, source: Iterable[int]) -> Fraction:
    """Total-variation distance between E(U_source, U_d) and uniform."""
    src = list(source)
    hist = degree_matrix(E)
    total = hist[src].sum(axis=0)
    K, D, M = len(src), E.D, E.M
    return Fraction(int(np.abs(total * M - K * D).sum()), 2 * K * D * M)


def _max_over_sources(hist, K, D, M, clock_limit):
    N = hist.shape[0]
    count = math.comb(N, K)
    if count > clock_limit:
        raise BudgetExceeded(f"{count} flat sources exceed the exhaustive budget")
    best_num, best_src = -1, None
    combos = itertools.combinations(range(N), K)
    while True:
        chunk = np.array(list(itertools.islice(combos, 50_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        totals = hist[chunk].sum(axis=1)  # (chunk, M)
        nums = np.abs(totals * M - K * D).sum(axis=1)
        i = int(nums.argmax())
        if nums[i] > best_num:
            best_num, best_src = int(nums[i]), tuple(int(v) for v in chunk[i])
    return Fraction(best_num, 2 * K * D * M), best_src, count


def _max_over_tests(hist, K, D, M, clock_limit):
    # For a fixed test set A the worst flat source holds the K left nodes of
    # largest A-degree, so max over sources = max over A of that top-K sum.
    count = 1 << M
    if count > clock_limit:
        raise BudgetExceeded(f"{count} test sets exceed the exhaustive budget")
    N = hist.shape[0]
    best_num, best_src = None, None
    step = max(1, (1 << 20) // max(1, M * N))
    for start in range(0, count, step):
        masks = np.arange(start, min(count, start + step), dtype=np.int64)
        members = (masks[:, None] >> np.arange(M)[None, :]) & 1  # (chunk, M)
        deg = members @ hist.T  # (chunk, N)
        top = -np.sort(-deg, axis=1)[:, :K].sum(axis=1)
        nums = top * M - members.sum(axis=1) * K * D
        i = int(nums.argmax())
        if best_num is None or nums[i] > best_num:
            best_num = int(nums[i])
            order = np.argsort(-deg[i], kind="stable")[:K]
            best_src = tuple(sorted(int(v) for v in order))
    return Fraction(best_num, K * D * M), best_src, count


def verify_extractor(
    E: ExtractorTable,
    k: int,
    epsilon,
    mode: str = "exhaustive",
    samples: int = 10_000,
    rng_seed=0,
    max_work: int = 5_000_000,
    method: str | None = None,
) -> ExtractorVerdict:
    """Check the (k, epsilon) extractor property of E.

    The statistic is the worst total-variation distance from uniform over
    flat sources of size 2**k; this equals the largest deviation
    |Pr[E(U_B, U_d) in A] - |A|/M| over all test sets A. PASS iff < epsilon.

    Exhaustive mode enumerates either all sources or all test sets,
    whichever is fewer (``method`` forces ``"sources"`` or ``"tests"``).
    """
    epsilon = Fraction(epsilon)
    N, K, D, M = 1 << E.n, 1 << k, E.D, E.M
    if K > N:
        raise ValueError(f"no flat source of size 2^{k} among 2^{E.n} left nodes")
    hist = degree_matrix(E)
    if mode == "exhaustive":
        if method is None:
            method = "sources" if math.comb(N, K) <= (1 << M) else "tests"
        fn = _max_over_sources if method == "sources" else _max_over_tests
        dev, worst, checked = fn(hist, K, D, M, max_work)
        return ExtractorVerdict(dev < epsilon, dev, k, epsilon, "exhaustive", checked, worst)
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    rng = make_rng(rng_seed)
    best, worst = Fraction(-1), None
    for _ in range(samples):
        src = tuple(sorted(int(v) for v in rng.choice(N, size=K, replace=False)))
        totals = hist[list(src)].sum(axis=0)
        dev = Fraction(int(np.abs(totals * M - K * D).sum()), 2 * K * D * M)
        if dev > best:
            best, worst = dev, src
    return ExtractorVerdict(False if best >= epsilon else None, best, k, epsilon, "sampled", samples, worst)


def _as_indices(E: ExtractorTable, nodes: Iterable[BitString | int]) -> list[int]:
    return sorted({to_int(v) if isinstance(v, str) else int(v) for v in nodes})


def heavy_right_nodes(E_k: ExtractorTable, B: Iterable[BitString | int], epsilon) -> set[BitString]:
    """Right nodes with more than (1/epsilon) * avg left neighbours in B.

    avg = |B| * D / M; edges are counted with multiplicity.
    """
    eps = Fraction(epsilon)
    idx = _as_indices(E_k, B)
    if not idx:
        raise ValueError("B must be non-empty")
    counts = np.bincount(E_k.table[idx].ravel(), minlength=E_k.M)
    # count > avg / eps  <=>  count * eps.num * M > |B| * D * eps.den
    lhs = counts * eps.numerator * E_k.M
    rhs = len(idx) * E_k.D * eps.denominator
    return {from_int(int(r), E_k.m) for r in np.flatnonzero(lhs > rhs)}


def poor_left_nodes(E_k: ExtractorTable, B: Iterable[BitString | int], epsilon) -> set[BitString]:
    """Left nodes with more than 2 * epsilon * D of their edges into heavy nodes."""
    eps = Fraction(epsilon)
    heavy = heavy_right_nodes(E_k, B, eps)
    if not heavy:
        return set()
    is_heavy = np.zeros(E_k.M, dtype=bool)
    is_heavy[[to_int(h) for h in heavy]] = True
    hits = is_heavy[E_k.table].sum(axis=1)
    poor = np.flatnonzero(hits * eps.denominator > 2 * eps.numerator * E_k.D)
    return {from_int(int(u), E_k.n) for u in poor}


def random_table(n: int, d: int, m: int, rng) -> ExtractorTable:
    return ExtractorTable(n, d, m, rng.integers(0, 1 << m, size=(1 << n, 1 << d), dtype=np.int64))


def build_prefix_extractor(
    n: int,
    d: int,
    m: int,
    epsilon,
    rng_seed: int,
    certify_upto: int,
    attempts: int = 500,
) -> ExtractorTable:
    """First seeded random table whose k-prefixes pass for every k <= certify_upto."""
    if n > 6:
        raise ValueError("exhaustive certification is limited to n <= 6")
    if not 0 <= certify_upto <= min(n, m):
        raise ValueError("certify_upto must lie in 0..min(n, m)")
    eps = Fraction(epsilon)
    rng = make_rng(rng_seed)
    for _ in range(attempts):
        E = random_table(n, d, m, rng)
        if all(verify_extractor(E.prefix(k), k, eps).passed for k in range(1, certify_upto + 1)):
            E.epsilon = eps
            E.prefix_certified_upto = certify_upto
            E.seed = rng_seed
            return E
    raise SearchExhausted(f"no table passed within {attempts} attempts")


def identity_seed_extractor(n: int, d: int) -> ExtractorTable:
    """E(x, w) = w: the output is the uniform seed itself."""
    tab = np.tile(np.arange(1 << d, dtype=np.int64), (1 << n, 1))
    return ExtractorTable(n, d, d, tab)


def constant_extractor(n: int, d: int, m: int) -> ExtractorTable:
    return ExtractorTable(n, d, m, np.zeros((1 << n, 1 << d), dtype=np.int64))
