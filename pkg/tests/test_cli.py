import json
import subprocess
import sys

import pytest

import speaq.cli
from _factories import background, copy_of, gt, pred
from speaq.assignment import brute_force_assignment, hungarian
from speaq.cli import main
from speaq.cost_model import CostWeights, build_cost_matrix
from speaq.fileio import write_scenes
from speaq.simulator import Scene
from speaq.strategies import augment_gt_set
from speaq.verify import run_verification

PUBLISHED_TOTALS = "predicate_id,count\n1,990\n2,398\n3,299\n4,173\n5,186\n"

SMALL_CONFIG = """\
seed: 11
grouping: {n_g: 3, n_q: 40}
scenario:
  n_predicates: 20
  n_entity_classes: 8
  scenes: 12
  gt_per_scene: [1, 4]
"""


def example_scene():
    """Two GTs; three copies of GT1 with slightly soft class scores, one copy
    of GT2 and one prediction overlapping neither."""
    g1 = gt((0.05, 0.05, 0.35, 0.35), (0.4, 0.05, 0.7, 0.35), 0, 1, 0)
    g2 = gt((0.05, 0.5, 0.35, 0.8), (0.4, 0.5, 0.7, 0.8), 2, 1, 1)
    soft = [0.9, 0.05, 0.05, 0.0]
    near = [pred(g1.subject_box, g1.object_box, soft, [0.05, 0.9, 0.05, 0.0], [0.8, 0.1, 0.1, 0.0], q)
            for q in (1, 2, 3)]
    return Scene([g1, g2], near + [copy_of(g2, 4), background(5)])


class TestGroup:
    def test_published_group_totals(self, tmp_path, capsys):
        freq = tmp_path / "freq.csv"
        freq.write_text(PUBLISHED_TOTALS)
        assert main(["group", "--freq", str(freq), "--n-g", "5", "--n-q", "300",
                     "--as-groups", "--out-dir", str(tmp_path)]) == 0
        counts = json.loads((tmp_path / "query_groups.json").read_text())["counts"]
        assert sum(counts) == 300
        assert all(abs(a - b) <= 1 for a, b in zip(counts, (146, 58, 43, 25, 28)))
        assert "48.4%" in capsys.readouterr().out

    def test_single_group(self, tmp_path):
        freq = tmp_path / "freq.csv"
        freq.write_text(PUBLISHED_TOTALS)
        assert main(["group", "--freq", str(freq), "--n-g", "1", "--out-dir", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "query_groups.json").read_text())["counts"] == [300]
        groups = json.loads((tmp_path / "predicate_groups.json").read_text())["groups"]
        assert [g["predicates"] for g in groups] == [[1, 2, 3, 5, 4]]

    def test_malformed_row(self, tmp_path, capsys):
        freq = tmp_path / "freq.csv"
        freq.write_text("predicate_id,count\n1,10\n2,ten\n")
        assert main(["group", "--freq", str(freq), "--n-g", "1", "--out-dir", str(tmp_path)]) == 1
        assert "freq.csv:3:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["group", "--freq", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 2

    def test_as_groups_row_count(self, tmp_path):
        freq = tmp_path / "freq.csv"
        freq.write_text(PUBLISHED_TOTALS)
        assert main(["group", "--freq", str(freq), "--n-g", "4", "--as-groups",
                     "--out-dir", str(tmp_path)]) == 1


class TestAssign:
    def run(self, tmp_path, scenes, *extra):
        path = tmp_path / "scenes.jsonl"
        write_scenes(path, scenes)
        out = tmp_path / "out"
        code = main(["assign", "--scenes", str(path), "--out-dir", str(out), *extra])
        return code, (json.loads((out / "assignments.json").read_text()) if code == 0 else None)

    def test_quality_multi_assignment(self, tmp_path):
        scene = example_scene()
        code, report = self.run(tmp_path, [scene], "--strategy", "speaq", "--k", "5",
                                "--lambda-rel", "0", "--relation-fn", "min")
        assert code == 0
        rec = report["scenes"][0]
        assert rec["d"] == [3, 1]
        pairs = {(p["gt"], p["prediction"]) for p in rec["pairs"]}
        assert pairs == {(0, 0), (0, 1), (0, 2), (1, 3)}
        # Same optimum from exhaustive search over the augmented matrix.
        aug = augment_gt_set(scene.gts, [3, 1], 5)
        oracle = brute_force_assignment(build_cost_matrix(aug.slots, scene.preds, CostWeights()))
        assert rec["total_cost"] == pytest.approx(oracle.total_cost, rel=1e-5)
        assert [loss["gt"] for loss in rec["losses"]] == [0, 0, 0, 1, None]

    def test_single(self, tmp_path):
        code, report = self.run(tmp_path, [example_scene()], "--strategy", "single")
        assert code == 0
        gts = [p["gt"] for p in report["scenes"][0]["pairs"]]
        assert gts.count(0) == 1 and gts.count(1) == 1

    def test_empty_scene(self, tmp_path):
        code, report = self.run(tmp_path, [Scene([], [])])
        assert code == 0
        assert report["scenes"][0]["pairs"] == []

    def test_with_groupings(self, tmp_path):
        freq = tmp_path / "freq.csv"
        freq.write_text("predicate_id,count\n0,6\n1,4\n")
        assert main(["group", "--freq", str(freq), "--n-g", "2", "--n-q", "5", "--out-dir", str(tmp_path)]) == 0
        code, report = self.run(tmp_path, [example_scene()], "--predicate-groups",
                                str(tmp_path / "predicate_groups.json"), "--query-groups",
                                str(tmp_path / "query_groups.json"))
        assert code == 0
        # Queries 1-3 form group 1 (predicate 0), queries 4-5 group 2.
        for p in report["scenes"][0]["pairs"]:
            assert (p["gt"] == 0) == (p["prediction"] < 3)

    def test_unknown_class_fails(self, tmp_path):
        bad = Scene([gt((0, 0, 0.5, 0.5), (0, 0, 0.5, 0.5), 9, 0, 0)], [background(1)])
        code, _ = self.run(tmp_path, [bad], "--strategy", "single")
        assert code == 1


class TestSimulate:
    def test_identical_reruns(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(SMALL_CONFIG)
        outputs = []
        for name, workers in (("a", "1"), ("b", "1"), ("c", "3")):
            assert main(["simulate", "--config", str(cfg), "--workers", workers,
                         "--out-dir", str(tmp_path / name)]) == 0
            outputs.append((tmp_path / name / "report.json").read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]
        assert (tmp_path / "a" / "group_frequency.svg").exists()

    def test_selected_strategies(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(SMALL_CONFIG)
        assert main(["simulate", "--config", str(cfg), "--strategies", "single", "speaq",
                     "--out-dir", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "report.json").read_text())
        assert set(report["strategies"]) == {"single", "speaq"}
        assert report["seed"] == 11

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "none.yaml"), "--out-dir", str(tmp_path)]) != 0

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("quality: {k: 5, kk: 1}\n")
        assert main(["simulate", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 1
        assert "kk" in capsys.readouterr().err

    def test_needs_out_dir(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(SMALL_CONFIG)
        assert main(["simulate", "--config", str(cfg)]) == 1


class TestVerify:
    def test_defaults_pass(self, capsys):
        assert main(["verify", "--group-trials", "50"]) == 0
        assert "[PASS]" in capsys.readouterr().out

    def test_corrupted_solver_fails(self, monkeypatch, capsys):
        def corrupted(costs):
            a = hungarian(costs)
            if a.n < 2:
                return a
            perm = (a.perm[1], a.perm[0]) + a.perm[2:]
            return type(a)(perm, a.total_cost)

        monkeypatch.setattr(speaq.cli, "run_verification",
                            lambda *args, **kw: run_verification(*args, solver=corrupted, **kw))
        assert main(["verify", "--trials", "200", "--group-trials", "5"]) == 1
        assert "[FAIL]" in capsys.readouterr().out

    def test_max_n_one(self):
        assert main(["verify", "--max-n", "1", "--trials", "50", "--group-trials", "5"]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "speaq", "verify", "--trials", "20", "--group-trials", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
