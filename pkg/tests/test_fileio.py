import json
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from _factories import copy_of, gt, pred
from speaq.config import config_from_dict, load_config, with_overrides
from speaq.cost_model import GtTriplet, Prediction
from speaq.errors import ConfigError, ParseError
from speaq.fileio import (
    canonical_json,
    group_frequency_svg,
    parse_frequency_csv,
    pred_to_record,
    read_frequency_csv,
    read_groupings,
    read_scenes,
    write_frequency_csv,
    write_groupings,
    write_report_tables,
    write_scenes,
)
from speaq.geometry import BoundingBox
from speaq.grouping import FrequencyTable, PredicateGrouping, group_predicates, group_queries
from speaq.simulator import STRATEGIES, ScenarioConfig, Scene, generate_scene, run_comparison, scene_rng
from speaq.strategies import RelationFn


class TestCanonicalJson:
    def test_rounding_and_order(self):
        text = canonical_json({"b": 1 / 3, "a": [np.float64(2.0), np.int64(3), -0.0]})
        assert text == '{\n  "a": [\n    2.0,\n    3,\n    0.0\n  ],\n  "b": 0.333333\n}\n'

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            canonical_json({"x": float("nan")})

    def test_enum_values(self):
        assert json.loads(canonical_json({"r": RelationFn.MAX})) == {"r": "max"}


class TestFrequencyCsv:
    def test_round_trip(self, tmp_path):
        freq = FrequencyTable.from_counts({3: 10, 1: 2.5, 7: 0})
        path = tmp_path / "f.csv"
        write_frequency_csv(path, freq)
        assert read_frequency_csv(path) == freq

    def test_bad_header(self):
        with pytest.raises(ParseError) as exc:
            parse_frequency_csv("id,n\n1,2\n")
        assert exc.value.line == 1

    def test_malformed_row_names_line(self):
        with pytest.raises(ParseError) as exc:
            parse_frequency_csv("predicate_id,count\n1,5\n2,abc\n", "freq.csv")
        assert exc.value.line == 3
        assert "freq.csv" in str(exc.value) and "3" in str(exc.value)

    @pytest.mark.parametrize("row", ["1,-2", "1", "1,2,3", "x,2"])
    def test_rejects_bad_rows(self, row):
        with pytest.raises(ParseError):
            parse_frequency_csv(f"predicate_id,count\n{row}\n")

    def test_duplicate_id(self):
        with pytest.raises(ParseError):
            parse_frequency_csv("predicate_id,count\n1,2\n1,3\n")


class TestGroupingFiles:
    def test_round_trip_computed(self, tmp_path):
        pg = group_predicates(FrequencyTable.from_counts([50, 20, 10, 8, 5, 4, 3]), 3)
        qg = group_queries(pg, 37)
        p_path, q_path = write_groupings(tmp_path, pg, qg)
        pg2, qg2 = read_groupings(p_path, q_path)
        assert pg2 == pg and pg2.shares == pg.shares
        assert qg2 == qg
        assert group_queries(pg2, 37) == qg

    def test_round_trip_hand_built(self, tmp_path):
        pg = PredicateGrouping(((1,), (2, 3)), (0.3, 0.7))
        qg = group_queries(pg, 10)
        pg2, qg2 = read_groupings(*write_groupings(tmp_path, pg, qg))
        assert pg2 == pg and qg2 == qg
        assert pg2.shares is None or pg2.shares == (Fraction(3, 10), Fraction(7, 10))


class TestScenes:
    def test_round_trip(self, tmp_path):
        cfg = ScenarioConfig(n_predicates=10, n_entity_classes=5, n_q=12, n_g=2, gt_per_scene=(0, 3))
        scenes = [generate_scene(scene_rng(3, i), cfg) for i in range(4)]
        path = tmp_path / "s.jsonl"
        write_scenes(path, scenes)
        back = read_scenes(path)
        assert len(back) == 4
        for a, b in zip(scenes, back):
            assert a.gts == b.gts
            for name in ("subject_boxes", "object_boxes", "subject_probs", "object_probs",
                         "predicate_probs", "query_index"):
                np.testing.assert_array_equal(getattr(a.batch, name), getattr(b.batch, name))

    def test_predicate_boxes_survive(self, tmp_path):
        box = BoundingBox(0.1, 0.1, 0.2, 0.3)
        t = GtTriplet(box, box, 0, 0, 0, predicate_box=box)
        p = Prediction(box, box, [1, 0], [1, 0], [1, 0], 1, predicate_box=box)
        path = tmp_path / "s.jsonl"
        write_scenes(path, [Scene([t], [p])])
        (back,) = read_scenes(path)
        assert back.gts == [t]
        assert back.preds[0].predicate_box == box

    def test_empty_scene(self, tmp_path):
        path = tmp_path / "s.jsonl"
        path.write_text('{"gts": [], "preds": []}\n')
        (scene,) = read_scenes(path)
        assert scene.gts == [] and scene.preds == [] and scene.batch is None

    def test_bad_json_line(self, tmp_path):
        t = gt((0, 0, 0.5, 0.5), (0.5, 0.5, 1, 1))
        path = tmp_path / "s.jsonl"
        write_scenes(path, [Scene([t], [copy_of(t, 1)])])
        with open(path, "a") as fh:
            fh.write("{not json\n")
        with pytest.raises(ParseError) as exc:
            read_scenes(path)
        assert exc.value.line == 2

    def test_bad_probabilities(self, tmp_path):
        path = tmp_path / "s.jsonl"
        rec = {"gts": [], "preds": [{"s_box": [0, 0, 1, 1], "o_box": [0, 0, 1, 1],
                                     "s_probs": [0.5], "o_probs": [1], "p_probs": [1]}]}
        path.write_text(json.dumps(rec) + "\n")
        with pytest.raises(ParseError):
            read_scenes(path)

    def test_query_index_defaults_to_position(self, tmp_path):
        p = pred((0, 0, 1, 1), (0, 0, 1, 1), [1, 0], [1, 0], [1, 0], 1)
        rec = {"gts": [], "preds": [{k: v for k, v in pred_to_record(p).items() if k != "query_index"}] * 2}
        path = tmp_path / "s.jsonl"
        path.write_text(json.dumps(rec) + "\n")
        (scene,) = read_scenes(path)
        assert [q.query_index for q in scene.preds] == [1, 2]


class TestReportOutputs:
    def test_tables_and_svg(self, tmp_path):
        cfg = ScenarioConfig(n_predicates=20, n_entity_classes=5, n_q=30, n_g=3, scenes=5, gt_per_scene=(1, 3))
        report = run_comparison(cfg).to_dict()
        paths = write_report_tables(tmp_path, report)
        names = {p.name for p in paths}
        assert {"suppressed_promising_ratio.csv", "assignment_summary.csv", "group_frequency.csv"} <= names
        assert {f"cross_tab_{s}.csv" for s in STRATEGIES} <= names
        rows = (tmp_path / "suppressed_promising_ratio.csv").read_text().splitlines()
        assert rows[0] == "strategy,iou_threshold,ratio"
        assert len(rows) == 1 + 3 * len(STRATEGIES)
        svg = group_frequency_svg(report)
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


class TestConfig:
    def test_shipped_default_matches_builtin(self):
        shipped = load_config(Path(__file__).parents[1] / "configs" / "default.yaml")
        assert shipped.scenario == ScenarioConfig()
        assert shipped.strategies == STRATEGIES

    def test_round_trip_dict(self):
        cfg = config_from_dict({"seed": 5, "quality": {"k": 3, "relation_fn": "min"},
                                "scenario": {"gt_per_scene": [2, 4]}, "grouping": {"n_g": 2}})
        assert config_from_dict(cfg.to_dict()) == cfg
        assert cfg.quality.relation_fn is RelationFn.MIN
        assert cfg.scenario.gt_per_scene == (2, 4)

    @pytest.mark.parametrize("data", [
        {"bogus": 1}, {"quality": {"kk": 3}}, {"strategies": ["greedy"]}, {"workers": 0},
        {"quality": {"k": 0}}, {"quality": "x"}, [1, 2],
    ])
    def test_rejects(self, data):
        with pytest.raises(ConfigError):
            config_from_dict(data)

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text("seed: [1,\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_overrides(self):
        cfg = with_overrides(config_from_dict({}), seed=9, workers=3, out_dir="x")
        assert (cfg.scenario.seed, cfg.workers, cfg.out_dir) == (9, 3, "x")
