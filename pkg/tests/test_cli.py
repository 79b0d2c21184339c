import json

import pytest

from dimerlab.activity_log import read_recent_activity
from dimerlab.cli import run
from dimerlab.settings import Settings


def _json(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


def test_count_single_impurity(capsys):
    code = run(["count", "--shape", "rect:2x2", "--terminal", "1,1:W", "--at", "2,2"])
    assert code == 0
    doc = _json(capsys)
    assert doc["schema"] == 1 and doc["command"] == "count"
    assert doc["count"] == 8
    assert doc["provenance"]["shape"] == "rect:2x2"
    assert doc["provenance"]["route"] == "cofactor"


def test_count_on_chain_with_hitting_route(capsys):
    run(["count", "--shape", "chain:2", "--terminal", "1:N", "--at", "2", "--route", "hitting"])
    assert _json(capsys)["count"] == 1


def test_count_adjacent_boundary_pair_is_zero(capsys):
    terminals = ["--terminal", "4,2:E", "--terminal", "4,3:E", "--terminal", "4,4:E"]
    code = run(["count", "--shape", "rect:4x5", *terminals, "--a", "2,5", "--b", "1,5"])
    assert code == 0
    assert _json(capsys)["count"] == 0


def test_count_with_impurity_flags(capsys):
    terminals = ["--terminal", "3,1:E", "--terminal", "3,2:E", "--terminal", "3,3:E"]
    run(
        [
            "count", "--shape", "rect:3x4", *terminals,
            "--impurity", "1,2@1.5,2.5", "--impurity", "1,4@0.5,3.5",
        ]
    )
    doc = _json(capsys)
    assert set(doc["parts"]) == {"A", "B"}
    assert doc["count"] == doc["parts"]["A"] + doc["parts"]["B"]


def test_chain_count_reports_the_route_used(capsys):
    terminals = ["--terminal", "1:N", "--terminal", "4:N", "--terminal", "7:N"]
    argv = [
        "count", "--shape", "chain:7", *terminals,
        "--impurity", "2@1.5,0.5", "--impurity", "6@5.5,0.5",
    ]
    run(argv)
    grove = _json(capsys)
    assert grove["provenance"]["route"] == "grove"
    run([*argv, "--route", "transfer"])
    swept = _json(capsys)
    assert swept["provenance"]["route"] == "transfer"
    assert swept["count"] == grove["count"]


def test_invalid_input_exits_with_two(capsys):
    assert run(["count", "--shape", "rect:2x2", "--terminal", "1,1:W"]) == 2
    assert "exactly one of" in capsys.readouterr().err
    assert run(["count", "--shape", "rect:2x2", "--terminal", "1,1:E", "--at", "1,1"]) == 2
    assert run(["count", "--shape", "rect:2x2", "--terminal", "1,1:W", "--a", "1,1"]) == 2
    with pytest.raises(SystemExit) as exc:
        run(["count", "--shape", "rect:2x2", "--route", "guess"])
    assert exc.value.code == 2


def test_dist_csv_to_output_dir(isolated_home):
    code = run(
        ["dist", "--shape", "rect:2x2", "--terminal", "1,1:W", "--format", "csv", "--out", "d.csv"]
    )
    assert code == 0
    text = (isolated_home / "output" / "d.csv").read_text()
    assert text.splitlines()[0] == "x,y,weight,num,den"
    assert text.splitlines()[1] == "1,1,56,7,24"


def test_dist_json(capsys):
    run(["dist", "--shape", "rect:2x2", "--terminal", "1,1:W", "--normalization", "summed"])
    doc = _json(capsys)
    assert doc["total"] == 96 + 2 * 192
    assert doc["det_k"] == 192
    assert doc["argmax"] == [1, 1]
    assert len(doc["rows"]) == 4
    assert doc["argmax_edge"] == {"num": 7, "den": 96}


def test_sample_is_deterministic(capsys):
    argv = ["sample", "hitting", "--shape", "rect:2x2", "--terminal", "1,1:W",
            "--at", "1,1", "--n", "500", "--seed", "3"]
    run(argv)
    first = capsys.readouterr().out
    run(argv)
    assert capsys.readouterr().out == first
    [row] = json.loads(first)["terminals"]
    assert row["exact"] == pytest.approx(7 / 24)


def test_sample_ust(capsys):
    run(["sample", "ust", "--shape", "rect:2x2", "--terminal", "1,1:W", "--n", "50", "--seed", "1"])
    doc = _json(capsys)
    assert doc["samples"] == 50
    assert doc["exact_lt"] == pytest.approx(0.5)
    assert len(doc["membership"]) == 4


def test_sample_rejects_nonpositive_count():
    argv = ["sample", "ust", "--shape", "rect:2x2", "--terminal", "1,1:W", "--n", "0", "--seed", "1"]
    assert run(argv) == 2


def test_asym_chain_and_lt(capsys):
    run(["asym", "chain", "--n", "12"])
    doc = _json(capsys)
    assert doc["rate"] == pytest.approx(1 / doc["lambda_plus"], rel=1e-3)
    assert len(doc["rows"]) == 12
    run(["asym", "lt", "--n", "2", "3", "--format", "csv"])
    assert capsys.readouterr().out.splitlines()[0] == "n,expected_lt"


def test_asym_bad_window():
    assert run(["asym", "chain", "--n", "12", "--window", "3"]) == 2


def test_verify_subset(capsys):
    code = run(["verify", "--check", "distribution-sums", "--check", "resolvent"])
    assert code == 0
    doc = _json(capsys)
    assert doc["passed"] is True
    assert [c["name"] for c in doc["checks"]] == ["resolvent", "distribution-sums"]
    assert all("seconds" not in c for c in doc["checks"])


def test_export_formats(capsys):
    run(["export", "--shape", "rect:2x2", "--terminal", "1,1:W"])
    assert capsys.readouterr().out.startswith("// impurity-dimer-graph v1")
    run(["export", "--shape", "rect:2x2", "--terminal", "1,1:W", "--graph", "g1", "--format", "json"])
    doc = _json(capsys)
    assert doc["format"] == "impurity-dimer-graph"


def test_activity_log_records_cli_runs(capsys):
    run(["count", "--shape", "rect:2x2", "--terminal", "1,1:W", "--at", "1,1"])
    [entry] = read_recent_activity()
    assert entry.action == "count" and entry.source == "cli"
    assert entry.details["value"] == 56


def test_activity_log_can_be_disabled(capsys):
    argv = ["count", "--shape", "rect:2x2", "--terminal", "1,1:W", "--at", "1,1"]
    run(argv, Settings(activity_log=False))
    assert read_recent_activity() == []
