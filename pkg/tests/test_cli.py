import csv
import json
import os

import pytest

from subspacenc.cli import main, trial_seed
from subspacenc.report import aggregate, write_report


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_trial_seeds_are_stable_and_distinct():
    assert trial_seed(0, 0) == trial_seed(0, 0)
    assert len({trial_seed(7, i) for i in range(100)}) == 100


def test_disseminate_is_byte_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert main(["disseminate", "--network", "six_node", "--trials", "3", "--seed", "5", "--out", str(d)]) == 0
        outs.append((d / "disseminate.csv").read_bytes())
    assert outs[0] == outs[1]


def test_disseminate_single_trial_exports(tmp_path):
    assert main(["disseminate", "--network", "example_tree", "--n", "6", "--snapshot", "3", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "dims.csv").exists() and (tmp_path / "snapshot_t3.json").exists()
    assert (tmp_path / "snapshot_t3.snc").exists()


def test_aggregate_rows_match_recomputed_mean(tmp_path):
    main(["disseminate", "--network", "line:4", "--trials", "4", "--out", str(tmp_path)])
    rows = read_csv(tmp_path / "disseminate.csv")
    trials = [r for r in rows if r["row_type"] == "trial"]
    mean = next(r for r in rows if r["row_type"] == "mean")
    assert float(mean["slots"]) == pytest.approx(sum(float(r["slots"]) for r in trials) / len(trials), rel=1e-5)


def test_empty_batch_gives_header_only(tmp_path):
    csv_path, json_path = write_report(str(tmp_path), "empty", [], ["a", "b"], ["a"])
    assert open(csv_path).read() == "row_type,a,b\n"
    assert json.load(open(json_path))["rows"] == []


def test_aggregate_handles_infinity():
    rows = aggregate([{"g": 1, "x": 1.0}, {"g": 1, "x": float("inf")}], ["x"], ["g"])
    assert rows[0]["x"] == float("inf")


def test_validation_errors_exit_one(tmp_path):
    assert main(["disseminate", "--network", "six_node", "--q", "6", "--out", str(tmp_path)]) == 1
    assert main(["disseminate", "--network", "six_node", "--trials", "0", "--out", str(tmp_path)]) == 1
    assert main(["disseminate", "--network", "nowhere.json", "--out", str(tmp_path)]) == 1
    bad = tmp_path / "cyc.json"
    bad.write_text(json.dumps({"nodes": [0, 1, 2], "source": 0, "edges": [[0, 1], [1, 2], [2, 1]]}))
    assert main(["disseminate", "--network", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["p2p-sim", "--algos", "magic", "--rows", "20", "--trials", "1", "--out", str(tmp_path)]) == 1


def test_failed_check_exits_two(tmp_path):
    # over GF(2) a square random matrix is singular about 70% of the time
    assert main(["verify-lemmas", "--suite", "subspace", "--q", "2", "--trials", "200", "--tolerance", "0.1",
                 "--out", str(tmp_path)]) == 2
    rows = read_csv(tmp_path / "verify_lemmas.csv")
    assert any(r["passed"] == "0" for r in rows)


def test_verify_lemmas_small_passes(tmp_path):
    assert main(["verify-lemmas", "--suite", "subspace", "--trials", "1000", "--out", str(tmp_path)]) == 0


def test_infer_topology_generated_trees(tmp_path):
    assert main(["infer-topology", "--generate", "tree", "--trials", "3", "--out", str(tmp_path)]) == 0


def test_infer_topology_ground_truth(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps({"nodes": ["S", "A", "B", "C"], "source": "S",
                             "edges": [["S", "A"], ["A", "B"], ["A", "C"]]}))
    assert main(["infer-topology", "--ground-truth", str(g), "--mode", "tree", "--out", str(tmp_path)]) == 0


def test_locate_adversary_scenario(tmp_path):
    sc = tmp_path / "sc.json"
    sc.write_text(json.dumps({"attackers": [{"node": "D", "strategy": "truthful"}]}))
    assert main(["locate-adversary", "--network", "six_node", "--scenario", str(sc), "--method", "single",
                 "--out", str(tmp_path)]) == 0
    sc.write_text(json.dumps({"attackers": [{"node": "S"}]}))
    assert main(["locate-adversary", "--network", "six_node", "--scenario", str(sc), "--out", str(tmp_path)]) == 1


def test_p2p_small_sweep(tmp_path):
    assert main(["p2p-sim", "--rows", "20", "--algos", "random,algo2", "--trials", "2", "--n", "20",
                 "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "table1.csv")
    assert [r["topology"] for r in rows] == ["15-15-20"]


def test_cost_report_output(tmp_path, capsys):
    assert main(["cost-report", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "40000 bits" in out and "5.00 kilobytes" in out
    assert main(["cost-report", "--D", "0", "--out", str(tmp_path)]) == 1


def test_help_for_every_subcommand(capsys):
    for cmd in ("disseminate", "infer-topology", "locate-adversary", "p2p-sim", "verify-lemmas", "cost-report"):
        with pytest.raises(SystemExit) as exc:
            main([cmd, "--help"])
        assert exc.value.code == 0
        assert "--seed" in capsys.readouterr().out
