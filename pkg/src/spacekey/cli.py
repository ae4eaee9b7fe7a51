"""Command-line front end.

Exit codes: 0 success, 1 extractor verification FAIL, 2 usage error,
3 budget exceeded, 4 I/O error, 5 infinite complexity (no program within
L_max).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from . import __version__
from .analysis import load_report, report_digest_of, run_experiment, summary_line, write_report
from .bits import check_bits
from .complexity import Oracle, SpaceSchedule
from .config import load_config
from .errors import BudgetExceeded, MalformedTranscript, SpaceKeyError
from .hashing import (
    ExtractorTable,
    build_prefix_extractor,
    constant_extractor,
    identity_seed_extractor,
    verify_extractor,
)
from .protocol import PassiveObserver, read_transcript
from .vm import Budget, disassemble

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET, EXIT_IO, EXIT_INFINITE = 0, 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _bits_arg(raw: str) -> str:
    """A bit-string literal, or ``@path`` for a file holding one."""
    if raw.startswith("@"):
        with open(raw[1:]) as fh:
            raw = fh.read().strip()
    try:
        return check_bits(raw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_oracle(args) -> int:
    x = _bits_arg(args.x)
    parts = [_bits_arg(c) for c in args.cond]
    base = args.base_space if args.base_space is not None else max(1, len(x))
    schedule = SpaceSchedule(base, Fraction(args.ratio), min(-2, args.level), max(8, args.level))
    oracle = Oracle(
        n_max=max(12, len(x)),
        max_length=args.max_length,
        step_cap=args.step_cap,
        budget=Budget(None, args.wall_clock),
        verify_witnesses=True,
    )
    res = oracle.complexity(x, parts, args.level, schedule)
    record = {
        "x": x,
        "value": res.value if res.finite else "infinite",
        "witness": res.witness,
        "disassembly": disassemble(res.witness) if res.witness is not None else None,
        "level": args.level,
        "space": schedule.space_at(args.level),
        "program_bound": oracle.program_bound(len(x)),
        "condition_digest": res.condition_digest,
        "budget": "truncated" if args.step_cap is not None else "complete",
    }
    if args.json:
        print(json.dumps(record))
    else:
        for k, v in record.items():
            print(f"{k}: {' '.join(v) if isinstance(v, list) else v}")
    return EXIT_OK if res.finite else EXIT_INFINITE


_RUN_OVERRIDES = ("variant", "n", "epsilon", "trials", "master_seed", "flips", "c", "extractor", "workers", "out_dir")


def cmd_run(args) -> int:
    overrides = {k: getattr(args, k) for k in _RUN_OVERRIDES}
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    report = run_experiment(cfg)
    digests = write_report(report, cfg.out_dir)
    with open(os.path.join(cfg.out_dir, "config.ini"), "w") as fh:
        fh.write(cfg.to_ini())
    print(summary_line(report))
    if args.verbose:
        for name, d in sorted(digests.items()):
            print(f"{d}  {name}")
    return EXIT_OK


def _load_or_make_extractor(args) -> ExtractorTable:
    if args.table:
        return ExtractorTable.load(args.table)
    if args.kind == "identity":
        return identity_seed_extractor(args.n, args.d)
    if args.kind == "constant":
        return constant_extractor(args.n, args.d, args.m)
    raise UsageError("give a table file or --kind identity|constant")


def cmd_extractor_build(args) -> int:
    if args.kind == "identity":
        E = identity_seed_extractor(args.n, args.d)
    elif args.kind == "constant":
        E = constant_extractor(args.n, args.d, args.m)
    else:
        certify = args.certify if args.certify is not None else min(args.n, args.m)
        E = build_prefix_extractor(args.n, args.d, args.m, Fraction(args.epsilon), args.seed, certify)
    E.save(args.out)
    print(f"{E.digest()}  {args.out}")
    return EXIT_OK


def cmd_extractor_verify(args) -> int:
    E = _load_or_make_extractor(args)
    k = args.k if args.k is not None else E.m
    eps = Fraction(args.epsilon)
    failed = False
    prefixes = range(1, min(E.n, E.m) + 1) if args.prefixes else [None]
    for kk in prefixes:
        table = E if kk is None else E.prefix(kk)
        src_k = k if kk is None else kk
        v = verify_extractor(table, src_k, eps, mode=args.mode, samples=args.samples, rng_seed=args.seed)
        verdict = {True: "PASS", False: "FAIL", None: "NO-VIOLATION-FOUND"}[v.passed]
        failed |= v.passed is False
        label = "" if kk is None else f"prefix {kk}: "
        print(f"{label}{verdict} k={src_k} epsilon={eps} deviation={v.deviation} mode={v.mode}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_replay(args) -> int:
    try:
        header, transcript = read_transcript(args.file)
    except MalformedTranscript as exc:
        print(f"malformed transcript: {exc}", file=sys.stderr)
        return EXIT_USAGE
    obs = PassiveObserver()
    for msg in transcript.messages:
        obs(msg)
        if args.verbose:
            print(f"round {msg.round:3d} {msg.sender:5s} {msg.payload}")
    round0, alice, bob, stopped = obs.state()
    print(f"variant={header.get('variant')} n={header.get('n')} messages={len(transcript.messages)} "
          f"round0_bits={len(round0 or '')} prefix={alice or '-'} control={bob or '-'} stopped={stopped}")
    print(f"transcript_digest={transcript.digest()}")
    return EXIT_OK


def cmd_report(args) -> int:
    body = load_report(args.file)
    digest = report_digest_of(body)
    side = os.path.join(os.path.dirname(os.path.abspath(args.file)), "report.digest")
    status = "unchecked"
    if os.path.exists(side):
        with open(side) as fh:
            status = "ok" if fh.read().split()[0] == digest else "MISMATCH"
    a = body["aggregates"]
    cfg = body["config"]
    print(f"variant={cfg['variant']} n={cfg['n']} epsilon={cfg['epsilon']} trials={cfg['trials']} seed={cfg['master_seed']}")
    for key in ("runs", "completed", "errors", "agreed", "agreement_rate", "mean_deficiency"):
        print(f"{key}: {a[key]}")
    for name, slack in a["max_slack"].items():
        print(f"max_slack[{name}]: {slack} (failures {a['flag_failures'][name]})")
    print(f"digest: {digest} ({status})")
    return EXIT_OK if status != "MISMATCH" else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spacekey", description="Space-bounded key agreement laboratory")
    p.add_argument("--version", action="version", version=f"spacekey {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("oracle", help="compute C^S(x | cond) exactly")
    o.add_argument("--x", required=True, help="bit string or @file")
    o.add_argument("--cond", action="append", default=[], help="condition part (repeatable)")
    o.add_argument("--level", type=int, default=0)
    o.add_argument("--base-space", type=int)
    o.add_argument("--ratio", default="2")
    o.add_argument("--max-length", type=int)
    o.add_argument("--step-cap", type=int)
    o.add_argument("--wall-clock", type=float)
    o.add_argument("--json", action="store_true")
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("run", help="run a seeded protocol sweep")
    r.add_argument("--config", help="INI config file")
    r.add_argument("--variant", choices=["A", "B"])
    r.add_argument("--n", type=int)
    r.add_argument("--epsilon")
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", dest="master_seed", type=int)
    r.add_argument("--flips", type=int)
    r.add_argument("--c", type=int)
    r.add_argument("--extractor")
    r.add_argument("--workers", type=int)
    r.add_argument("--out", dest="out_dir")
    r.add_argument("-v", "--verbose", action="store_true")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("extractor", help="build or verify extractor tables")
    esub = e.add_subparsers(dest="action", required=True)
    b = esub.add_parser("build")
    b.add_argument("--kind", choices=["prefix", "identity", "constant"], default="prefix")
    b.add_argument("--n", type=int, default=4)
    b.add_argument("--d", type=int, default=4)
    b.add_argument("--m", type=int, default=4)
    b.add_argument("--epsilon", default="1/5")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--certify", type=int)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_extractor_build)
    v = esub.add_parser("verify")
    v.add_argument("table", nargs="?")
    v.add_argument("--kind", choices=["identity", "constant"])
    v.add_argument("--n", type=int, default=4)
    v.add_argument("--d", type=int, default=2)
    v.add_argument("--m", type=int, default=2)
    v.add_argument("--k", type=int)
    v.add_argument("--epsilon", default="1/5")
    v.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    v.add_argument("--samples", type=int, default=10000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--prefixes", action="store_true", help="verify every k-prefix at k")
    v.set_defaults(func=cmd_extractor_verify)

    rp = sub.add_parser("replay", help="decode a transcript file")
    rp.add_argument("file")
    rp.add_argument("-v", "--verbose", action="store_true")
    rp.set_defaults(func=cmd_replay)

    rep = sub.add_parser("report", help="summarize a report.json and check its digest")
    rep.add_argument("file")
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SpaceKeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
