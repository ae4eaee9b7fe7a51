"""Eavesdropper-side measurements over protocol runs.

Every number here is an exact oracle value. Inequalities of the form
``lhs <= rhs + slack`` are recorded as :class:`Flag` objects carrying the
minimal slack that makes them hold, next to the tolerance they are judged
against, so a report shows how much room each run needed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .bits import BitString, encode_condition, flip, strings_upto
from .complexity import Oracle, SpaceSchedule, k_star
from .config import Config
from .errors import SpaceKeyError
from .hashing import ExtractorTable, Gf2Matrix, build_prefix_extractor, sample_gf2_matrix
from .protocol import ProtocolResult, run_protocol_A, run_protocol_B, transcript_file_text
from .rng import STREAM_INPUT, STREAM_MATRIX, derive, random_bits
from .vm import Budget, C_LITERAL

REPORT_VERSION = 1

# (low, high) schedule levels whose complexity gap bounds the key's deficiency
SHALLOW_LEVELS = {"A": (-2, 8), "B": (-1, 1)}
# adversary levels standing in for S, lambda^2 S, lambda^3 S in the upper bound
UPPER_LEVELS = (0, 2, 3)
# config fields that cannot change results, left out of the report echo
NON_SEMANTIC = ("workers", "out_dir")


def log_slack(n: int, epsilon) -> int:
    """ceil(log2(n / epsilon)), the unit of precision loss allowed in the bounds."""
    return max(1, math.ceil(math.log2(Fraction(n) / Fraction(epsilon))))


@dataclass(frozen=True)
class Flag:
    """``lhs <= rhs + slack``; ``holds`` compares the minimal slack to ``tolerance``."""

    lhs: float
    rhs: float
    tolerance: int

    @property
    def slack(self) -> float:
        return max(0, self.lhs - self.rhs)

    @property
    def holds(self) -> bool:
        return self.slack <= self.tolerance

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "tolerance": self.tolerance, "holds": self.holds}


@dataclass
class RunMetrics:
    index: int
    variant: str
    agreed: bool
    rounds_used: int
    key_length: int
    mutual_info: float
    deficiency: float
    shallow_gap: float
    transcript_bits: int
    round0_bits: int
    prefix_bits: int
    transcript_digest: str
    k_star: int | None = None
    inequality_flags: dict[str, Flag] = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inequality_flags"] = {k: f.to_dict() for k, f in self.inequality_flags.items()}
        return d


def _c(oracle: Oracle, x, parts, level, schedule):
    return oracle.value(x, parts, level, schedule)


def measure_run(
    result: ProtocolResult,
    x: BitString,
    y: BitString,
    schedule: SpaceSchedule,
    oracle: Oracle | None = None,
    index: int = 0,
    c: int | None = None,
) -> RunMetrics:
    oracle = oracle or Oracle()
    n = len(x)
    eps = Fraction(result.params["epsilon"])
    tol = log_slack(n, eps)
    z = result.z_alice
    T = result.transcript.parts  # condition string = the transcript serialization

    c_x = _c(oracle, x, [], 0, schedule)
    c_x_y = _c(oracle, x, [y], 0, schedule)
    c_z_T = _c(oracle, z, T, 0, schedule)
    low, high = SHALLOW_LEVELS[result.variant]
    gap = _c(oracle, x, [], low, schedule) - _c(oracle, x, [], high, schedule)
    deficiency = len(z) - c_z_T
    _, lvl2, lvl3 = UPPER_LEVELS
    delta1 = c_z_T - _c(oracle, z, T, lvl2, schedule)
    bits = result.transcript.bits

    flags = {
        "key_length": Flag(c_x - c_x_y, len(z), tol),
        "deficiency": Flag(deficiency, gap, tol),
        "deficiency_floor": Flag(-deficiency, C_LITERAL, 0),
        "upper_bound": Flag(len(z), c_x - _c(oracle, x, [y], lvl3, schedule) + deficiency + delta1, tol),
        "reconstruction": Flag(_c(oracle, x, [], 1, schedule), len(result.p) + len(z), C_LITERAL),
    }
    ks = None
    if result.variant == "B":
        flags["transcript_length"] = Flag(bits, 2 * c_x_y, tol ** 3)
        flags["communication"] = Flag(
            bits, 2 * (result.round0_bits + result.prefix_bits) + result.transcript.framing_bits, 0
        )
        ks = k_star(x, y, schedule, c if c is not None else int(result.params["c"]), oracle)
        flags["prefix_vs_kstar"] = Flag(result.prefix_bits, ks, 0)
    return RunMetrics(
        index=index,
        variant=result.variant,
        agreed=result.agreed,
        rounds_used=result.rounds_used,
        key_length=len(z),
        mutual_info=c_x - c_x_y,
        deficiency=deficiency,
        shallow_gap=gap,
        transcript_bits=bits,
        round0_bits=result.round0_bits,
        prefix_bits=result.prefix_bits,
        transcript_digest=result.transcript.digest(),
        k_star=ks,
        inequality_flags=flags,
    )


def deficiency_given(z: BitString, parts: list[BitString], level: int, schedule, oracle=None) -> float:
    """|z| - C^level(z | encode_condition(parts)), e.g. parts = a transcript's payloads."""
    oracle = oracle or Oracle()
    return len(z) - oracle.value(z, parts, level, schedule)


# ---------------------------------------------------------------------------
# Conditioning on a random matrix


@dataclass
class ClaimCheck:
    trials: int
    passes: int
    slack: int
    worst_drop: float  # max over trials of C^2(x|v) - C^0(x|v,H)

    @property
    def pass_rate(self) -> float:
        return self.passes / self.trials if self.trials else 1.0


def claim_holds(x, v, H: Gf2Matrix, schedule, slack: int, oracle=None) -> tuple[bool, float]:
    """C^0(x | v, H) >= C^2(x | v) - slack for one matrix; also returns the drop."""
    oracle = oracle or Oracle()
    drop = oracle.value(x, [v], 2, schedule) - oracle.value(x, [v, H.serialize()], 0, schedule)
    return drop <= slack, drop


def conditioning_claim_check(
    trials: int,
    x: BitString,
    v: BitString,
    schedule: SpaceSchedule,
    epsilon,
    rows: int | None = None,
    rng_seed: int = 0,
    slack: int | None = None,
    oracle: Oracle | None = None,
) -> ClaimCheck:
    """Fraction of random matrices H for which conditioning on H costs at most ``slack``."""
    oracle = oracle or Oracle()
    n = len(x)
    rows = n if rows is None else rows
    slack = log_slack(n, epsilon) if slack is None else slack
    passes, worst = 0, -math.inf
    for i in range(trials):
        H = sample_gf2_matrix(rows, n, derive(rng_seed, i, STREAM_MATRIX))
        ok, drop = claim_holds(x, v, H, schedule, slack, oracle)
        passes += ok
        worst = max(worst, drop)
    return ClaimCheck(trials, passes, slack, worst)


# ---------------------------------------------------------------------------
# Sweeps


@dataclass
class ExperimentReport:
    config: dict
    runs: list[dict]
    aggregates: dict
    transcripts: dict[int, str] = field(default_factory=dict, repr=False)

    def body(self) -> dict:
        return {"version": REPORT_VERSION, "config": self.config, "aggregates": self.aggregates, "runs": self.runs}

    def to_json(self) -> str:
        return json.dumps(self.body(), indent=1) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def to_csv(self) -> str:
        cols = [
            "index", "variant", "agreed", "rounds_used", "key_length", "mutual_info", "deficiency",
            "shallow_gap", "transcript_bits", "round0_bits", "prefix_bits", "k_star", "transcript_digest",
        ]
        flag_names = sorted({k for r in self.runs if "inequality_flags" in r for k in r["inequality_flags"]})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols + [f"slack_{k}" for k in flag_names] + ["error"])
        for r in self.runs:
            if "error" in r:
                w.writerow([r["index"]] + [""] * (len(cols) - 1 + len(flag_names)) + [r["error"]])
                continue
            f = r["inequality_flags"]
            w.writerow([r[c] for c in cols] + [f[k]["slack"] if k in f else "" for k in flag_names] + [""])
        return buf.getvalue()


def run_inputs(cfg: Config, index: int) -> tuple[BitString, BitString]:
    """x uniform on n bits; y = x with ``flips`` distinct positions flipped."""
    rng = derive(cfg.master_seed, index, STREAM_INPUT)
    x = random_bits(rng, cfg.n)
    pos = rng.choice(cfg.n, size=cfg.flips, replace=False) if cfg.flips else []
    return x, flip(x, [int(i) for i in pos])


def experiment_extractor(cfg: Config) -> ExtractorTable | None:
    if cfg.variant != "B":
        return None
    cfg = cfg.resolved()
    if cfg.extractor:
        return ExtractorTable.load(cfg.extractor)
    return build_prefix_extractor(
        cfg.n, cfg.extractor_d, cfg.extractor_m, Fraction(cfg.extractor_epsilon),
        cfg.master_seed, cfg.certify_upto,
    )


def make_oracle(cfg: Config) -> Oracle:
    L = cfg.max_length if cfg.max_length is not None else cfg.n + C_LITERAL + 2
    return Oracle(
        n_max=max(12, L),
        max_length=cfg.max_length,
        step_cap=cfg.step_cap,
        budget=Budget(cfg.max_steps, cfg.wall_clock),
    )


def run_one(cfg: Config, index: int, E: ExtractorTable | None = None, oracle: Oracle | None = None):
    """One protocol run plus its measurement. Returns (record, transcript file text)."""
    oracle = oracle or make_oracle(cfg)
    schedule = cfg.schedule()
    x, y = run_inputs(cfg, index)
    seed = (cfg.master_seed, index)
    try:
        if cfg.variant == "A":
            res = run_protocol_A(x, y, schedule, cfg.eps, seed, oracle, y_max=cfg.y_max)
        else:
            res = run_protocol_B(x, y, schedule, cfg.eps, E, cfg.c, seed, oracle, y_max=cfg.y_max)
        metrics = measure_run(res, x, y, schedule, oracle, index, cfg.c)
    except (SpaceKeyError, ValueError) as exc:
        return {"index": index, "error": type(exc).__name__, "message": str(exc)}, None
    return metrics.to_dict(), transcript_file_text(res)


_worker_state: dict = {}


def _worker(args):
    cfg, index = args
    if _worker_state.get("cfg") != cfg:
        _worker_state.update(cfg=cfg, E=experiment_extractor(cfg), oracle=make_oracle(cfg))
    return run_one(cfg, index, _worker_state["E"], _worker_state["oracle"])


def aggregate(runs: list[dict]) -> dict:
    ok = [r for r in runs if "error" not in r]
    agreed = [r for r in ok if r["agreed"]]
    defs = Counter(r["deficiency"] for r in agreed)
    slack_hist: dict[str, Counter] = {}
    failures: Counter = Counter()
    for r in ok:
        for name, f in r["inequality_flags"].items():
            slack_hist.setdefault(name, Counter())[f["slack"]] += 1
            failures[name] += not f["holds"]
    return {
        "runs": len(runs),
        "completed": len(ok),
        "errors": len(runs) - len(ok),
        "error_kinds": dict(sorted(Counter(r["error"] for r in runs if "error" in r).items())),
        "agreed": len(agreed),
        "agreement_rate": len(agreed) / len(runs) if runs else None,
        "mean_deficiency": sum(r["deficiency"] for r in agreed) / len(agreed) if agreed else None,
        "deficiency_hist": {str(k): defs[k] for k in sorted(defs)},
        "max_slack": {k: max(h) for k, h in sorted(slack_hist.items())},
        "slack_hist": {k: {str(s): h[s] for s in sorted(h)} for k, h in sorted(slack_hist.items())},
        "flag_failures": {k: failures[k] for k in sorted(slack_hist)},
    }


def run_experiment(cfg: Config, workers: int | None = None) -> ExperimentReport:
    """Run ``cfg.trials`` seeded runs; results do not depend on the worker count."""
    workers = workers or cfg.workers
    indices = range(cfg.trials)
    if workers > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(workers) as pool:
            outs = list(pool.map(_worker, [(cfg, i) for i in indices], chunksize=max(1, cfg.trials // (4 * workers))))
    else:
        E, oracle = experiment_extractor(cfg), make_oracle(cfg)
        outs = [run_one(cfg, i, E, oracle) for i in indices]
    runs = [rec for rec, _ in outs]
    transcripts = {rec["index"]: text for rec, text in outs if text is not None}
    echo = {k: v for k, v in cfg.to_dict().items() if k not in NON_SEMANTIC}
    return ExperimentReport(echo, runs, aggregate(runs), transcripts)


def write_report(report: ExperimentReport, out_dir) -> dict[str, str]:
    """Write report.json, runs.csv, transcripts/ and report.digest; returns file digests."""
    os.makedirs(os.path.join(out_dir, "transcripts"), exist_ok=True)
    files = {"report.json": report.to_json(), "runs.csv": report.to_csv()}
    for i, text in sorted(report.transcripts.items()):
        files[f"transcripts/run{i:05d}.txt"] = text
    digests = {}
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text)
        digests[name] = hashlib.sha256(text.encode()).hexdigest()
    with open(os.path.join(out_dir, "report.digest"), "w") as fh:
        fh.write(f"{report.digest}  report.json\n")
    return digests


def summary_line(report: ExperimentReport) -> str:
    a = report.aggregates
    rate = "n/a" if a["agreement_rate"] is None else f"{a['agreement_rate']:.3f}"
    mean = "n/a" if a["mean_deficiency"] is None else f"{a['mean_deficiency']:.3f}"
    return (f"runs={a['runs']} agreed={a['agreed']} agreement_rate={rate} "
            f"mean_deficiency={mean} errors={a['errors']} digest={report.digest[:16]}")


def load_report(path) -> dict:
    with open(path) as fh:
        return json.loads(fh.read())


def report_digest_of(body: dict) -> str:
    return hashlib.sha256((json.dumps(body, indent=1) + "\n").encode()).hexdigest()


__all__ = [
    "Flag", "RunMetrics", "ExperimentReport", "ClaimCheck", "measure_run", "deficiency_given",
    "claim_holds", "conditioning_claim_check", "run_experiment", "run_one", "run_inputs",
    "aggregate", "write_report", "summary_line", "load_report", "report_digest_of", "log_slack",
    "SHALLOW_LEVELS", "UPPER_LEVELS",
]


# ---------------------------------------------------------------------------
# Chain rules


@dataclass
class ChainRuleReport:
    """Minimal additive constant b, per log coefficient a, for both chain-rule forms."""

    max_len: int
    level: int
    upper: dict[int, int]
    lower: dict[int, int]
    pairs: int

    def to_dict(self) -> dict:
        return asdict(self)


def chain_rule_slack(
    max_len: int = 4,
    base_space: int = 8,
    level: int = 0,
    a_values=(0, 1, 2),
    oracle: Oracle | None = None,
) -> ChainRuleReport:
    """Exhaustive chain-rule check over all x, y with |x|, |y| <= max_len.

    upper: C^{l+1}(x,y) <= C^l(x) + C^l(y|x) + a log(|x|+|y|+2) + b
    lower: C^l(x,y) >= C^{l+1}(x) + C^{l+1}(y|x) - a log(|x|+|y|+2) - b
    """
    pair_len = 2 * max_len + 2 * (2 * (max_len + 1).bit_length() - 1)
    oracle = oracle or Oracle(n_max=pair_len, table_max=pair_len)
    schedule = SpaceSchedule(base_space, level_min=min(-2, level), level_max=max(8, level + 1))
    strings = list(strings_upto(max_len))
    up = {a: -math.inf for a in a_values}
    lo = {a: -math.inf for a in a_values}
    for x in strings:
        for y in strings:
            pair = encode_condition([x, y])
            lg = math.log2(len(x) + len(y) + 2)
            u = (_c(oracle, pair, [], level + 1, schedule)
                 - _c(oracle, x, [], level, schedule) - _c(oracle, y, [x], level, schedule))
            w = (_c(oracle, x, [], level + 1, schedule) + _c(oracle, y, [x], level + 1, schedule)
                 - _c(oracle, pair, [], level, schedule))
            for a in a_values:
                up[a] = max(up[a], u - a * lg)
                lo[a] = max(lo[a], w - a * lg)
    fin = lambda v: max(0, math.ceil(v - 1e-9)) if v != math.inf else math.inf  # noqa: E731
    return ChainRuleReport(
        max_len, level, {a: fin(v) for a, v in up.items()}, {a: fin(v) for a, v in lo.items()}, len(strings) ** 2
    )
