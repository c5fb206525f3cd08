import csv
import hashlib
import json
from fractions import Fraction
from pathlib import Path

import pytest

from qpcodes.cli import main
from qpcodes.construct import panchenko


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_construct_panchenko_with_sidecar_and_manifest(tmp_path):
    out = tmp_path / "pan7.txt"
    assert main(["construct", "--family", "panchenko", "--r", "7", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.splitlines()[0] == "7 40"
    assert text == panchenko(7).H.to_text()

    spec = json.loads((tmp_path / "pan7.txt.json").read_text())
    assert (spec["n"], spec["r"], spec["d"]) == (40, 7, 4)
    assert spec["lineage"]["seed"] == "S"
    assert spec["lineage"]["doublings"] == 3

    manifest = json.loads((tmp_path / "pan7.txt.manifest.json").read_text())
    assert manifest["command"] == "construct"
    assert manifest["version"]
    digest = "sha256:" + hashlib.sha256(out.read_bytes()).hexdigest()
    assert manifest["outputs"][str(out)] == digest


def test_construct_other_families(tmp_path):
    out = tmp_path / "s.txt"
    assert main(["construct", "--family", "seed", "--seed", "S", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "4 5"

    out = tmp_path / "g3.txt"
    assert main(["construct", "--family", "general", "--r", "6", "--g", "3", "--out", str(out)]) == 0
    spec = json.loads((tmp_path / "g3.txt.json").read_text())
    assert (spec["n"], spec["r"], spec["d"]) == (18, 6, 4)

    out = tmp_path / "comp.txt"
    assert main(["construct", "--family", "panchenko", "--r", "8",
                 "--shorten", "8", "--out", str(out)]) == 0
    spec = json.loads((tmp_path / "comp.txt.json").read_text())
    assert (spec["n"], spec["r"], spec["d"]) == (72, 8, 4)
    assert spec["lineage"]["shortened"] == list(range(72, 80))


def test_construct_refusals(tmp_path):
    out = str(tmp_path / "x.txt")
    assert main(["construct", "--family", "eh", "--r", "2", "--out", out]) == 2
    assert main(["construct", "--family", "general", "--r", "8", "--g", "4", "--out", out]) == 2
    assert main(["construct", "--family", "eh", "--out", out]) == 2
    assert main(["construct", "--family", "panchenko", "--r", "7",
                 "--shorten", "40", "--out", out]) == 2


def test_spectrum_named_code_both_methods(tmp_path):
    out = tmp_path / "spec.json"
    assert main(["spectrum", "--code", "panchenko7", "--method", "both",
                 "--out", str(out)]) == 0
    blob = json.loads(out.read_text())
    assert blob["n"] == 40 and blob["k"] == 33
    assert blob["counts"]["4"] == "1190"


def test_spectrum_from_file_without_sidecar(tmp_path):
    mat = tmp_path / "eh4.txt"
    assert main(["construct", "--family", "eh", "--r", "4", "--out", str(mat)]) == 0
    (tmp_path / "eh4.txt.json").unlink()  # drop the metadata on purpose

    out = tmp_path / "spec.json"
    assert main(["spectrum", "--code", str(mat), "--out", str(out)]) == 0
    blob = json.loads(out.read_text())
    assert blob["counts"] == {"0": "1", "4": "14", "8": "1"}
    # the doubling recursion needs the construction history
    assert main(["spectrum", "--code", str(mat), "--method", "recursion",
                 "--out", str(out)]) == 2


def test_spectrum_both_fails_closed_on_mismatch(tmp_path):
    mat = tmp_path / "pan5.txt"
    assert main(["construct", "--family", "panchenko", "--r", "5", "--out", str(mat)]) == 0
    lines = mat.read_text().splitlines()
    row = list(lines[1])
    row[0] = "1" if row[0] == "0" else "0"  # corrupt one matrix bit
    lines[1] = "".join(row)
    mat.write_text("\n".join(lines) + "\n")

    out = tmp_path / "spec.json"
    assert main(["spectrum", "--code", str(mat), "--method", "both",
                 "--out", str(out)]) == 3
    assert not out.exists()


def test_erasure_exact_grid(tmp_path):
    out = tmp_path / "eh7.csv"
    assert main(["erasure", "--code", "eh7", "--rho-min", "4", "--rho-max", "5",
                 "--exact", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r["rho"] for r in rows] == ["4", "5"]
    assert rows[0]["delta_exact_or_estimate"] == "0.983607"
    assert rows[1]["delta_exact_or_estimate"] == "0.918033"
    assert {r["method"] for r in rows} == {"exact"}
    assert rows[0]["s_exact_or_estimate"] == "624960"

    side = json.loads((tmp_path / "eh7.csv.json").read_text())
    assert side["code"]["n"] == 64
    got = Fraction(side["rows"][0]["delta_exact_or_estimate"])
    assert got == Fraction(624960, 635376)


def test_erasure_sampled_deterministic(tmp_path):
    args = ["erasure", "--code", "panchenko5", "--rho-min", "4", "--rho-max", "4",
            "--sample", "20000", "--seed", "3"]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    row = read_csv(out1)[0]
    assert row["method"] == "sampled"
    assert float(row["ci_halfwidth"]) > 0
    assert abs(float(row["delta_exact_or_estimate"]) - 200 / 210) < 4 * 0.0019


def test_erasure_bound_only_methods(tmp_path):
    out = tmp_path / "psi.csv"
    assert main(["erasure", "--code", "eh7", "--rho-min", "6", "--rho-max", "6",
                 "--psi", "--out", str(out)]) == 0
    row = read_csv(out)[0]
    assert row["method"] == "psi-bound"
    assert row["s_exact_or_estimate"] == ""
    assert row["delta_lower"] == "0.738538"

    out = tmp_path / "rec.csv"
    assert main(["erasure", "--code", "eh7", "--rho-min", "6", "--rho-max", "6",
                 "--recursive", "2", "--z", "7", "--out", str(out)]) == 0
    row = read_csv(out)[0]
    assert row["method"] == "recursive"
    assert float(row["delta_entropy_bound"]) > float(row["delta_weak_bound"]) > 0


def test_erasure_budget_refusal(tmp_path):
    assert main(["erasure", "--code", "eh8", "--rho-min", "7", "--rho-max", "7",
                 "--exact", "--out", str(tmp_path / "x.csv")]) == 4


def test_erasure_flag_validation(tmp_path):
    out = str(tmp_path / "x.csv")
    assert main(["erasure", "--code", "eh7", "--rho-min", "5", "--rho-max", "4",
                 "--out", out]) == 2
    assert main(["erasure", "--code", "nosuch99z", "--rho-min", "4", "--rho-max", "4",
                 "--out", out]) == 2


def test_simulate_json_contract(tmp_path):
    out = tmp_path / "sim.json"
    args = ["simulate", "--p", "1.2e-3", "--dplus", "4", "--trials", "300",
            "--seed", "7", "--out", str(out)]
    assert main(args) == 0
    blob = json.loads(out.read_text())
    assert set(blob) == {"p", "d_plus", "trials", "failures", "miscorrections",
                         "estimate", "ci95", "strategy", "tail_bound"}
    assert blob["strategy"] == "plain"
    assert blob["trials"] == 300
    assert blob["estimate"] == blob["failures"] / 300

    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first  # identical rerun, identical artifact


def test_simulate_stratified(tmp_path):
    out = tmp_path / "strat.json"
    assert main(["simulate", "--p", "1.2e-3", "--dplus", "4", "--trials", "1",
                 "--stratified", "--per-stratum", "100", "--kmax", "12",
                 "--seed", "7", "--out", str(out)]) == 0
    blob = json.loads(out.read_text())
    assert blob["strategy"] == "stratified"
    assert blob["tail_bound"] > 0
    assert blob["trials"] % 100 == 0


def test_table1_single_code(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["table", "--which", "1", "--codes", "panchenko7",
                 "--rhos", "4,5", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r["rho"] for r in rows] == ["4", "5"]
    assert rows[0]["reference"] == "0.9870"
    assert all(abs(float(r["deviation"])) < 1e-4 for r in rows)
    assert {r["method"] for r in rows} == {"exact"}


def test_table2_subgrid(tmp_path):
    out = tmp_path / "t2.csv"
    assert main(["table", "--which", "2", "--p", "1e-2", "--dplus", "3,6",
                 "--trials", "300", "--seed", "11", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [(r["p"], r["d_plus"]) for r in rows] == [("0.01", "3"), ("0.01", "6")]
    assert rows[0]["reference"] == "0.996"
    assert rows[1]["reference"] == "0.926"
    assert {r["method"] for r in rows} == {"plain"}
    for r in rows:
        assert 0.85 <= float(r["estimate"]) <= 1.0


def test_every_command_emits_manifest(tmp_path):
    out = tmp_path / "pan5.txt"
    main(["construct", "--family", "panchenko", "--r", "5", "--out", str(out)])
    manifest = json.loads(Path(str(out) + ".manifest.json").read_text())
    assert manifest["params"]["family"] == "panchenko"
    assert manifest["params"]["r"] == 5
    assert str(out) in manifest["outputs"]
    assert str(out) + ".json" in manifest["outputs"]


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
