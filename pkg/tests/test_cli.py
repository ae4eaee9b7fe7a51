import json

import pytest

from spacekey.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_INFINITE, EXIT_OK, EXIT_USAGE, main
from spacekey.config import Config, load_config
from spacekey.vm import C_COPY, C_EMPTY


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


def test_oracle_empty(capsys):
    code, out = run(capsys, "oracle", "--x", "", "--json")
    rec = json.loads(out.out)
    assert code == EXIT_OK and rec["value"] <= C_EMPTY


def test_oracle_copy(capsys):
    code, out = run(capsys, "oracle", "--x", "1010", "--cond", "1010", "--json")
    rec = json.loads(out.out)
    assert code == EXIT_OK and rec["value"] <= C_COPY and rec["disassembly"] == ["LD"]


def test_oracle_file_reference(tmp_path, capsys):
    (tmp_path / "x.txt").write_text("0110\n")
    code, out = run(capsys, "oracle", "--x", f"@{tmp_path / 'x.txt'}", "--json")
    assert code == EXIT_OK and json.loads(out.out)["x"] == "0110"


def test_oracle_usage_errors(capsys):
    assert run(capsys, "oracle", "--x", "10a1")[0] == EXIT_USAGE
    with pytest.raises(SystemExit) as exc:
        main(["oracle"])
    assert exc.value.code == EXIT_USAGE


def test_oracle_infinite_and_budget(capsys):
    assert run(capsys, "oracle", "--x", "0110", "--max-length", "3")[0] == EXIT_INFINITE
    assert run(capsys, "oracle", "--x", "011010110110", "--wall-clock", "0")[0] == EXIT_BUDGET


def test_oracle_missing_file(capsys):
    assert run(capsys, "oracle", "--x", "@/nonexistent/x")[0] == 4


def test_run_trials_zero(tmp_path, capsys):
    code, out = run(capsys, "run", "--trials", "0", "--out", str(tmp_path / "o"))
    assert code == EXIT_OK and "runs=0" in out.out
    assert json.loads((tmp_path / "o" / "report.json").read_text())["runs"] == []


def test_run_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        code, _ = run(capsys, "run", "--variant", "A", "--n", "4", "--flips", "1", "--trials", "6", "--seed", "5", "--out", str(d))
        assert code == EXIT_OK
        outs.append({p.relative_to(d).as_posix(): p.read_bytes() for p in d.rglob("*") if p.is_file() and p.name != "config.ini"})
    assert outs[0] == outs[1]
    assert len([k for k in outs[0] if k.startswith("transcripts/")]) == 6


def test_run_regenerates_from_embedded_config(tmp_path, capsys):
    run(capsys, "run", "--n", "4", "--trials", "5", "--seed", "2", "--out", str(tmp_path / "a"))
    code, _ = run(capsys, "run", "--config", str(tmp_path / "a" / "config.ini"), "--out", str(tmp_path / "b"))
    assert code == EXIT_OK
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_run_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[protocol]\nvariant = C\n")
    assert run(capsys, "run", "--config", str(bad))[0] == EXIT_USAGE
    assert run(capsys, "run", "--config", str(tmp_path / "missing.ini"))[0] == 4


def test_replay_and_report(tmp_path, capsys):
    d = tmp_path / "o"
    run(capsys, "run", "--n", "4", "--trials", "3", "--seed", "1", "--out", str(d))
    code, out = run(capsys, "replay", str(d / "transcripts" / "run00000.txt"))
    assert code == EXIT_OK and "stopped=True" in out.out
    rep = json.loads((d / "report.json").read_text())
    assert f"transcript_digest={rep['runs'][0]['transcript_digest']}" in out.out
    code, out = run(capsys, "report", str(d / "report.json"))
    assert code == EXIT_OK and "(ok)" in out.out
    (d / "report.digest").write_text("0" * 64 + "  report.json\n")
    assert run(capsys, "report", str(d / "report.json"))[0] == EXIT_FAIL


def test_replay_malformed(tmp_path, capsys):
    f = tmp_path / "t.txt"
    f.write_text("spacekey-transcript 1\nvariant A\nbits 0\n")
    assert run(capsys, "replay", str(f))[0] == EXIT_USAGE


def test_extractor_commands(tmp_path, capsys):
    code, out = run(capsys, "extractor", "verify", "--kind", "identity", "--n", "4", "--d", "2", "--k", "2")
    assert code == EXIT_OK and "PASS" in out.out and "deviation=0" in out.out
    code, out = run(capsys, "extractor", "verify", "--kind", "constant", "--n", "4", "--d", "2", "--m", "2", "--k", "2")
    assert code == EXIT_FAIL and "FAIL" in out.out
    path = tmp_path / "e.txt"
    code, out = run(capsys, "extractor", "build", "--n", "4", "--d", "3", "--m", "4", "--epsilon", "0.45", "--seed", "7", "--certify", "1", "--out", str(path))
    assert code == EXIT_OK
    assert out.out.split()[0] == "f729eca9148ccb92a367c80a479617798ec2c547c465271968aac24df2e8aed1"
    code, out = run(capsys, "extractor", "verify", str(path), "--epsilon", "0.45", "--prefixes")
    assert "prefix 1: PASS" in out.out


def test_config_roundtrip(tmp_path):
    cfg = Config(variant="A", n=5, epsilon="1/4", flips=1, trials=7, master_seed=9, step_cap=100)
    path = tmp_path / "c.ini"
    path.write_text(cfg.to_ini())
    assert load_config(path) == cfg
    assert load_config(path, {"n": 6}).n == 6
    with pytest.raises(ValueError):
        load_config(None, {"bogus": 1})
    r = Config(n=5).resolved()
    assert (r.base_space, r.level_max, r.extractor_m, r.certify_upto) == (5, 8, 5, 5)
