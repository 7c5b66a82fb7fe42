import csv
import json
import subprocess
import sys

import pytest

from d2dfd import cli
from d2dfd.model import REFERENCE_TEXT


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# --- helpers ---------------------------------------------------------------------

def test_parse_grid_range_is_inclusive():
    assert cli.parse_grid("-10:20:2") == [float(x) for x in range(-10, 21, 2)]
    assert cli.parse_grid("0,0.5,2") == [0.0, 0.5, 2.0]
    assert cli.parse_grid("0:1:0.1")[-1] == 1.0


@pytest.mark.parametrize("bad", ["", "1:2", "0:1:0", "2,1", "a,b", "0,nan"])
def test_parse_grid_rejects(bad):
    with pytest.raises(cli.UsageError):
        cli.parse_grid(bad)


def test_parse_modes():
    assert cli.parse_modes("FD, hd,fd") == ["fd", "hd"]
    with pytest.raises(cli.UsageError):
        cli.parse_modes("relay")


# --- commands ----------------------------------------------------------------------

def test_no_command_is_usage_error(capsys):
    assert cli.main([]) == 2


def test_assoc_zero_bias(capsys):
    assert cli.main(["assoc", "--set", "k=0", "--trials", "200"]) == 0
    out = capsys.readouterr().out
    assert "analytic  0.0" in out and "mc        0.0" in out


def test_coverage_outputs_and_reproducibility(tmp_path):
    args = ["coverage", "--mode", "fd,hd", "--trials", "150", "--seed", "4"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for mode in ("fd", "hd"):
        a = (tmp_path / "a" / f"coverage_{mode}.csv").read_bytes()
        assert a == (tmp_path / "b" / f"coverage_{mode}.csv").read_bytes()
        assert a.endswith(b"\n")
        rows = _rows(tmp_path / "a" / f"coverage_{mode}.csv")
        assert rows[0] == ["x", "analytic", "mc_mean", "mc_stderr", "trials"]
        assert len(rows) == 17
        assert [float(r[0]) for r in rows[1:]] == [float(x) for x in range(-10, 21, 2)]
        assert all(r[4] == "150" for r in rows[1:])
    assert (tmp_path / "a" / "plot_coverage.py").exists()
    assert not (tmp_path / "a" / "coverage_cellular.csv").exists()


def test_coverage_seed_changes_mc_only(tmp_path):
    base = ["coverage", "--mode", "hd", "--trials", "150", "--grid", "0,10"]
    cli.main(base + ["--seed", "1", "--out", str(tmp_path / "a")])
    cli.main(base + ["--seed", "2", "--out", str(tmp_path / "b")])
    a, b = _rows(tmp_path / "a" / "coverage_hd.csv"), _rows(tmp_path / "b" / "coverage_hd.csv")
    assert [r[1] for r in a] == [r[1] for r in b]
    assert [r[2] for r in a] != [r[2] for r in b]


def test_throughput_csv(tmp_path, capsys):
    assert cli.main(["throughput", "--grid", "0,1,2", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "throughput.csv")
    assert rows[0] == ["x", "cellular", "d2d", "total"]
    assert len(rows) == 4
    for r in rows[1:]:
        assert float(r[3]) == pytest.approx(float(r[1]) + float(r[2]), rel=1e-12)
    assert float(rows[1][1]) == 0.0  # no cellular users without bias
    assert "argmax k=" in capsys.readouterr().out
    assert (tmp_path / "plot_throughput.py").exists()


def test_throughput_pair_doubling_raises_d2d(tmp_path):
    cli.main(["throughput", "--grid", "1", "--out", str(tmp_path / "a")])
    cli.main(["throughput", "--grid", "1", "--fd-pair-doubling", "--out", str(tmp_path / "b")])
    a, b = _rows(tmp_path / "a" / "throughput.csv"), _rows(tmp_path / "b" / "throughput.csv")
    assert float(b[1][2]) > float(a[1][2])
    assert float(b[1][1]) == float(a[1][1])


def test_throughput_rejects_negative_k():
    assert cli.main(["throughput", "--grid", "-1,1"]) == 2


def test_rate_writes_csv(tmp_path):
    assert cli.main(["rate", "--mode", "fd", "--trials", "200", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "rate.csv")
    assert rows[0] == ["mode", "analytic", "mc_mean", "mc_stderr", "trials"]
    assert rows[1][0] == "fd" and len(rows) == 2


def test_validate_only_group(tmp_path):
    code = cli.main(["validate", "--only", "special-functions", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "validation.json").read_text())
    groups = {c["group"] for c in doc["checks"]}
    assert groups == {"special-functions"}


def test_validate_forced_failure_exits_one(capsys):
    code = cli.main(["validate", "--only", "monte-carlo", "--trials", "200", "--mc-tol", "1e-9"])
    assert code == 1
    assert "validation failed" in capsys.readouterr().err


def test_validate_unknown_group():
    assert cli.main(["validate", "--only", "nope"]) == 2


# --- configuration errors -----------------------------------------------------------

def test_malformed_config_names_the_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(REFERENCE_TEXT.replace("alpha = 4", "alpha = four"))
    assert cli.main(["throughput", "--config", str(cfg), "--grid", "1"]) == 2
    err = capsys.readouterr().err
    assert "alpha" in err


def test_out_of_range_override_names_invariant(capsys):
    assert cli.main(["throughput", "--set", "alpha=2", "--grid", "1"]) == 2
    assert "alpha > 2" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["assoc", "--config", str(tmp_path / "none.cfg")]) == 2


def test_bad_set_syntax():
    assert cli.main(["assoc", "--set", "alpha"]) == 2


def test_nonpositive_trials():
    assert cli.main(["assoc", "--trials", "0"]) == 2


def test_reference_config_file_matches_builtin(tmp_path):
    from pathlib import Path
    shipped = Path(__file__).resolve().parents[1] / "scenarios" / "reference.cfg"
    a = cli.main(["throughput", "--grid", "1", "--out", str(tmp_path / "a")])
    b = cli.main(["throughput", "--grid", "1", "--config", str(shipped), "--out", str(tmp_path / "b")])
    assert a == b == 0
    assert (tmp_path / "a" / "throughput.csv").read_bytes() == (tmp_path / "b" / "throughput.csv").read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "d2dfd", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "coverage" in res.stdout
