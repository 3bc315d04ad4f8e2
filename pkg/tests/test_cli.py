import csv
import json
import subprocess
import sys
from decimal import Decimal
from fractions import Fraction

import pytest

from orbitmachine.cli import COMMANDS, SCHEMAS, exact, fmt, main


def _run(tmp_path, command, cfg, out="out", seed=0):
    path = tmp_path / f"{command}-{out}.json"
    path.write_text(json.dumps(cfg))
    return main([command, "--config", str(path), "--seed", str(seed), "--out", str(tmp_path / out)])


def _outputs(d):
    files = {}
    for p in sorted(d.iterdir()):
        if p.suffix == ".csv":
            files[p.name] = p.read_bytes()
        else:
            doc = json.loads(p.read_text())
            if isinstance(doc, dict):
                doc.pop("timestamp", None)
            files[p.name] = doc
    return files


def test_fmt():
    assert fmt(10 ** 30) == str(10 ** 30)
    assert fmt(Fraction(1, 3)) == "0.333333333333333"
    assert fmt(Fraction(4, 2)) == "2"
    assert fmt(Fraction(1, 3 * 10 ** 20)) == "3.33333333333333e-21"
    assert fmt(0.1) == "0.1"
    assert fmt(True) == "true" and fmt(None) == ""
    assert fmt(float("inf")) == "inf"
    assert exact(Fraction(-2, 6)) == "-1/3" and exact(7) == "7/1" and exact(0.5) == ""


def test_schemas_cover_commands():
    assert set(SCHEMAS) == set(COMMANDS)


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_deterministic_outputs(tmp_path, small_configs, command):
    cfg = small_configs[command]
    assert _run(tmp_path, command, cfg, "a") == 0
    assert _run(tmp_path, command, cfg, "b") == 0
    a, b = _outputs(tmp_path / "a"), _outputs(tmp_path / "b")
    assert a == b
    side = a[f"{command}.json"]
    assert side["command"] == command and side["seed"] == 0 and side["status"] == 0
    assert side["config"] == cfg
    csvs = [n for n in a if n.endswith(".csv")]
    assert csvs
    for n in csvs:
        rows = list(csv.reader((tmp_path / "a" / n).read_text().splitlines()))
        assert len(rows) > 1 and all(len(r) == len(rows[0]) for r in rows)


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_unknown_keys_rejected(tmp_path, small_configs, command, capsys):
    cfg = small_configs[command]
    cfg["extra"] = 1
    assert _run(tmp_path, command, cfg) == 2
    inner = dict(small_configs[command])
    key = next(iter(inner))
    inner[key] = {**inner[key], "bogus": True}
    assert _run(tmp_path, command, inner) == 2
    assert "error" in capsys.readouterr().err


def test_carousel_rows_are_exact(tmp_path, small_configs):
    assert _run(tmp_path, "verify-carousel", small_configs["verify-carousel"]) == 0
    with open(tmp_path / "out" / "verify-carousel.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["satisfied"] == "true" for r in rows)
    for r in rows[:200]:
        num, den = map(int, r["norm_pow_exact"].split("/"))
        assert Decimal(r["norm_pow"]) == pytest.approx(Decimal(num) / Decimal(den), rel=Decimal("1e-14"))


def test_carousel_short_cycle_exit_2(tmp_path):
    cfg = {"carousel": {"p": [2], "cases": [{"T": 7, "m": 2}]}}
    assert _run(tmp_path, "verify-carousel", cfg) == 2


def test_classify_ill_conditioned_exit_1(tmp_path):
    cfg = {"jordan": {"matrix": [[1.0000001, 0], [0, 0.5]], "vectors": [[1, 0], [0, 1]]}}
    assert _run(tmp_path, "classify", cfg) == 1
    doc = json.loads((tmp_path / "out" / "classify.json").read_text())
    assert doc["status"] == 1


def test_classify_verdicts(tmp_path, small_configs):
    assert _run(tmp_path, "classify", small_configs["classify"]) == 0
    verdicts = json.loads((tmp_path / "out" / "classify-verdicts.json").read_text())
    text = json.dumps(verdicts)
    for cls in ("DIVERGES", "BOUNDED_AWAY"):
        assert cls in text


def test_missing_config_file(tmp_path):
    assert main(["build-net", "--config", str(tmp_path / "nope.json")]) == 2


def test_argparse_requires_config():
    with pytest.raises(SystemExit) as err:
        main(["build-net"])
    assert err.value.code == 2


def test_seed_changes_sampled_times(tmp_path, small_configs):
    cfg = small_configs["run-orbit"]
    # without truncation every stage's window is sampled
    cfg["machine"] = {k: v for k, v in cfg["machine"].items() if k != "k_max"}
    _run(tmp_path, "run-orbit", cfg, "s0", seed=0)
    _run(tmp_path, "run-orbit", cfg, "s1", seed=1)
    a = (tmp_path / "s0" / "run-orbit.csv").read_bytes()
    b = (tmp_path / "s1" / "run-orbit.csv").read_bytes()
    assert a != b


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "orbitmachine", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify-carousel" in res.stdout


def test_single_carousel_case_row(tmp_path):
    cfg = {"carousel": {"p": ["inf"], "cases": [{"T": 8, "m": 2}], "eps": 1, "amplitudes": [1]}}
    assert _run(tmp_path, "verify-carousel", cfg) == 0
    with open(tmp_path / "out" / "verify-carousel.csv", newline="") as fh:
        row = [r for r in csv.DictReader(fh) if r["t"] == "4"][0]
    assert row["norm"] == "2" and row["lower"] == "2" and row["satisfied"] == "true"
