from __future__ import annotations

import json
import subprocess
import sys
from fractions import Fraction

import pytest

from nldistill import BinarySystem, PR, wedge
from nldistill.cli import main

F = Fraction


def run(capsys, *argv) -> tuple[int, str, str]:
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_nl_text_and_json(capsys):
    code, out, _ = run(capsys, "nl", "--wedge", "1/5,0")
    assert code == 0
    assert out.splitlines()[0] == "12/5"
    assert "anchor=(0,0)" in out
    code, out, _ = run(capsys, "nl", "--wedge", "1/5,0", "--format", "json")
    assert json.loads(out) == {"nl": "12/5", "anchor": [0, 0], "sign": 1}


def test_validate_ok_and_signaling(capsys, tmp_path):
    code, out, _ = run(capsys, "validate", "--wedge", "1/3,1/3")
    assert code == 0 and json.loads(out)["valid"]

    entries = [["1", "0", "0", "0"], ["0", "0", "0", "1"]]
    bad = {"p": [[entries[0], entries[1]], [entries[0], entries[0]]]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    code, out, _ = run(capsys, "validate", "--box", str(path))
    report = json.loads(out)
    assert code == 2 and not report["valid"]
    kinds = {issue["kind"] for issue in report["issues"]}
    assert "signaling-alice" in kinds or "signaling-bob" in kinds
    # the same box is rejected by value-bearing commands
    code, _, err = run(capsys, "nl", "--box", str(path))
    assert code == 2


def test_box_file_round_trip(capsys, tmp_path):
    path = tmp_path / "box.json"
    path.write_text(wedge(F(1, 5), 0).to_json())
    code, out, _ = run(capsys, "nl", "--box", str(path))
    assert code == 0 and out.splitlines()[0] == "12/5"


def test_decompose_json(capsys):
    code, out, _ = run(capsys, "decompose", "--wedge", "1/5,0")
    obj = json.loads(out)
    assert code == 0
    assert obj["epsilon"] == "1/5" and obj["q"] == "1" and obj["p_f"] == "1"
    assert obj["facet"] == {"anchor": [0, 0], "sign": 1}
    weights = [F(w) for w in obj["weights"]]
    assert sum(weights) == F(obj["local_part"]) == F(4, 5)


def test_tables_then_cached_bound_bit_identical(capsys, tmp_path):
    cache = str(tmp_path / "cache")
    code, out, err = run(capsys, "tables", "--wedge", "1/5,0", "--n", "3",
                         "--cache", cache)
    assert code == 0
    info = json.loads(out)
    assert info["n"] == 3 and info["p"] == "2/5"
    assert (tmp_path / "cache" / "delta_p2_5_n3.nldt").exists()

    code, out1, err1 = run(capsys, "bound", "--wedge", "1/5,0", "--n", "3",
                           "--cache", cache)
    assert code == 0 and "cache_hit" in err1
    code, out2, err2 = run(capsys, "bound", "--wedge", "1/5,0", "--n", "3",
                           "--cache", cache)
    assert out2 == out1
    report = json.loads(out1)
    assert report["raw_bound"] == "12/5"
    assert report["witness_profile"] == [4, 4, 4, 4]


def test_bound_cold_writes_cache(capsys, tmp_path):
    cache = str(tmp_path / "c2")
    code, out, err = run(capsys, "bound", "--wedge", "1/2,0", "--n", "2",
                         "--cache", cache)
    assert code == 0 and "cache_write" in err
    assert json.loads(out)["raw_bound"] == "3"


def test_corrupt_cache_is_distinct_io_error(capsys, tmp_path):
    cache = tmp_path / "c3"
    run(capsys, "tables", "--wedge", "1/5,0", "--n", "2", "--cache", str(cache))
    victim = next(cache.glob("*.nldt"))
    victim.write_bytes(victim.read_bytes()[:-10])
    code, _, err = run(capsys, "bound", "--wedge", "1/5,0", "--n", "2",
                       "--cache", str(cache))
    assert code == 4
    assert "cache corrupt" in err and "TableChecksumError" in err


def test_grid_csv_and_json(capsys):
    code, out, _ = run(capsys, "grid", "--wedge", "1/5,0", "--n", "2")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "s_k,s_l,bound_num,bound_den"
    rows = {tuple(map(int, l.split(",")[:2])): l.split(",")[2:] for l in lines[1:]}
    assert rows[(4, 4)] == ["12", "5"]
    code, out, _ = run(capsys, "grid", "--wedge", "1/5,0", "--n", "2",
                       "--approx")
    assert out.splitlines()[0].endswith("bound_approx")
    code, out, _ = run(capsys, "grid", "--wedge", "1/5,0", "--n", "2",
                       "--format", "json")
    obj = json.loads(out)
    assert obj["max"] == "12/5" and obj["max_cell"] == [4, 4]


def test_grid_rejects_non_isotropic(capsys):
    code, _, err = run(capsys, "grid", "--wedge", "1/5,1/5", "--n", "2")
    assert code == 3


def test_search_and_long_run_guards(capsys):
    code, out, _ = run(capsys, "search", "--wedge", "1/2,0", "--n", "1")
    obj = json.loads(out)
    assert code == 0 and obj["value"] == "3" and obj["distilled"] is False
    code, _, err = run(capsys, "search", "--wedge", "1/2,0", "--n", "2")
    assert code == 3 and "--long-run" in err
    code, _, err = run(capsys, "bound", "--wedge", "1/4,0", "--n", "8")
    assert code == 3 and "--long-run" in err
    code, _, err = run(capsys, "tables", "--wedge", "1/4,0", "--n", "9")
    assert code == 3


def test_search_n2_with_long_run(capsys):
    code, out, _ = run(capsys, "search", "--wedge", "1/2,0", "--n", "2",
                       "--long-run", "--seed", "17")
    obj = json.loads(out)
    assert code == 0
    assert obj["value"] == "3" and obj["nl"] == "3" and obj["seed"] == 17


def test_parameter_errors(capsys):
    assert run(capsys, "nl", "--wedge", "3/4,1/2")[0] == 3
    assert run(capsys, "nl", "--wedge", "nonsense")[0] == 3
    assert run(capsys, "nl")[0] == 3
    assert run(capsys, "bound", "--wedge", "1/5,0", "--n", "0")[0] == 3
    assert run(capsys, "search", "--wedge", "1/5,0", "--n", "3")[0] == 3


def test_missing_file_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "nl", "--box", str(tmp_path / "nope.json"))
    assert code == 4


def test_zero_denominator_entry_is_invalid_box(capsys, tmp_path):
    path = tmp_path / "zero.json"
    obj = json.loads(wedge(F(1, 5), 0).to_json())
    obj["p"][0][0][0] = "1/0"
    path.write_text(json.dumps(obj))
    code, _, err = run(capsys, "nl", "--box", str(path))
    assert code == 2


def test_out_file(capsys, tmp_path):
    out_path = tmp_path / "res.json"
    code, out, _ = run(capsys, "decompose", "--wedge", "1/5,0",
                       "--out", str(out_path))
    assert code == 0 and out == ""
    assert json.loads(out_path.read_text())["epsilon"] == "1/5"


def test_emitted_rationals_round_trip(capsys):
    code, out, _ = run(capsys, "decompose", "--wedge", "2/7,1/7")
    obj = json.loads(out)
    eps = F(obj["epsilon"])
    assert 0 < eps < 1
    assert F(obj["q"]) * 2 * (1 + eps) >= 0  # parseable exact rationals


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "nldistill.cli", "nl", "--wedge", "1/2,0"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "3"


def test_backend_flag_numpy(capsys):
    code, out, _ = run(capsys, "bound", "--wedge", "1/5,0", "--n", "2",
                       "--backend", "numpy")
    assert code == 0 and json.loads(out)["raw_bound"] == "12/5"


def test_grid_n6_reproduces_peak(capsys):
    code, out, _ = run(capsys, "grid", "--wedge", "1/5,0", "--n", "6")
    assert code == 0
    best, best_cell = F(0), None
    for line in out.splitlines()[1:]:
        sk, sl, num, den = line.split(",")
        value = F(int(num), int(den))
        if value > best:
            best, best_cell = value, (int(sk), int(sl))
    assert best == F(12, 5) and best_cell == (64, 64)


@pytest.mark.longrun
def test_bound_n9_long_run(capsys, tmp_path):
    code, out, _ = run(capsys, "bound", "--wedge", "1/4,0", "--n", "9",
                       "--long-run", "--cache", str(tmp_path / "cache"))
    assert code == 0
    report = json.loads(out)
    assert report["raw_bound"] == "5/2"
    assert report["witness_profile"] == [256, 256, 256, 256]
