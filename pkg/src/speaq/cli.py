"""``speaq`` command line: group, assign, simulate, verify.

Exit codes: 0 success, 1 verification or configuration/input failure,
2 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from speaq.config import RunConfig, load_config, with_overrides
from speaq.cost_model import NULL_GT, CostWeights, match_cost, total_loss
from speaq.errors import ConfigError, SpeaQError
from speaq.fileio import (
    canonical_json,
    group_frequency_svg,
    read_frequency_csv,
    read_groupings,
    read_scenes,
    write_groupings,
    write_report_tables,
)
from speaq.grouping import PredicateGrouping, group_predicates, group_queries
from speaq.simulator import STRATEGIES, run_comparison
from speaq.strategies import (
    AssignmentResult,
    QualityConfig,
    agnostic_multi_assign,
    iou_assign,
    single_assign,
    speaq_assign,
)
from speaq.verify import run_verification

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


def cmd_group(args: argparse.Namespace) -> int:
    freq = read_frequency_csv(args.freq)
    if args.as_groups:
        # Rows are already-formed groups (e.g. published group totals).
        ints, scale = freq.scaled_counts()
        ids = list(freq.counts)
        if len(ids) != args.n_g:
            raise ConfigError(f"--as-groups needs exactly n_g={args.n_g} rows, got {len(ids)}")
        pg = PredicateGrouping(
            groups=tuple((pid,) for pid in ids),
            group_freq=tuple(ints[pid] / scale for pid in ids),
            shares=tuple(Fraction(ints[pid], scale) for pid in ids),
        )
    else:
        pg = group_predicates(freq, args.n_g)
    qg = group_queries(pg, args.n_q)
    p_path, q_path = write_groupings(Path(args.out_dir), pg, qg)

    total = freq.total
    print(f"{'Group':>5} | {'Predicates':>10} | {'Number of GTs':>22} | {'Number of queries':>20}")
    for g, (members, f, nq) in enumerate(zip(pg.groups, pg.group_freq, qg.counts), start=1):
        n_gt = sum(freq.counts[p] for p in members)
        print(
            f"{g:>5} | {len(members):>10} | {n_gt:>12g} ({100 * f:5.1f}%) | "
            f"{nq:>11} ({100 * nq / qg.n_q:5.1f}%)"
        )
    print(f"total GTs {total:g}, queries {qg.n_q}; wrote {p_path} and {q_path}")
    return EXIT_OK


def _assign_one(scene, strategy: str, pg, qg, w: CostWeights, qc: QualityConfig, args) -> AssignmentResult:
    batch = scene.batch
    if batch is None:
        return AssignmentResult((), (), strategy, 0.0)
    if strategy == "speaq":
        return speaq_assign(scene.gts, batch, pg, qg, w, qc)
    if strategy == "single":
        return single_assign(scene.gts, batch, w)
    if strategy == "agnostic":
        return agnostic_multi_assign(scene.gts, batch, w, args.agnostic_d, pg, qg)
    return iou_assign(scene.gts, batch, args.iou_threshold, w)


def cmd_assign(args: argparse.Namespace) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    qc = cfg.quality
    if args.k is not None or args.lambda_rel is not None or args.relation_fn is not None:
        qc = QualityConfig(
            k=args.k if args.k is not None else qc.k,
            lambda_rel=args.lambda_rel if args.lambda_rel is not None else qc.lambda_rel,
            relation_fn=args.relation_fn or qc.relation_fn,
        )
    w = cfg.weights
    if args.agnostic_d is None:
        args.agnostic_d = cfg.scenario.agnostic_d
    if args.iou_threshold is None:
        args.iou_threshold = cfg.scenario.iou_threshold

    pg = qg = None
    if args.predicate_groups or args.query_groups:
        if not (args.predicate_groups and args.query_groups):
            raise ConfigError("--predicate-groups and --query-groups go together")
        pg, qg = read_groupings(args.predicate_groups, args.query_groups)

    records = []
    for index, scene in enumerate(read_scenes(args.scenes)):
        try:
            result = _assign_one(scene, args.strategy, pg, qg, w, qc, args)
        except SpeaQError as exc:
            raise SpeaQError(f"scene record {index + 1}: {exc}") from exc
        gt_of = result.gt_of_prediction()
        losses = []
        for j, p in enumerate(scene.preds):
            target = scene.gts[gt_of[j]] if j in gt_of else NULL_GT
            l_s, l_p, l_o = total_loss(target, p, w)
            losses.append({"prediction": j, "gt": gt_of.get(j), "l_s": l_s, "l_p": l_p, "l_o": l_o,
                           "total": l_s + l_p + l_o})
        records.append({
            "scene": index,
            "strategy": result.strategy,
            "d": list(result.d),
            "total_cost": result.total_cost,
            "pairs": [
                {"gt": g, "prediction": j, "cost": match_cost(scene.gts[g], scene.preds[j], w)}
                for g, j in result.pairs
            ],
            "losses": losses,
        })

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "assignments.json"
    out.write_text(canonical_json({"scenes": records}), encoding="utf-8")
    print(f"assigned {len(records)} scene(s) with '{args.strategy}'; wrote {out}")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = with_overrides(load_config(args.config), seed=args.seed, workers=args.workers, out_dir=args.out_dir)
    if args.strategies:
        cfg = replace(cfg, strategies=tuple(args.strategies))
    if not cfg.out_dir:
        raise ConfigError("no output directory: set output.out_dir or pass --out-dir")
    report = run_comparison(cfg.scenario, cfg.strategies, workers=cfg.workers).to_dict()
    report["config"] = cfg.to_dict()
    report["config"].pop("workers")  # thread count never changes results
    report["config"]["output"].pop("out_dir")

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(canonical_json(report), encoding="utf-8")
    write_report_tables(out_dir, report)
    if cfg.svg:
        (out_dir / "group_frequency.svg").write_text(group_frequency_svg(report), encoding="utf-8")

    for name, rep in report["strategies"].items():
        ratios = ", ".join(f"{t}: {v:.4f}" for t, v in sorted(rep["suppressed_promising_ratio"].items()))
        avg_d = "n/a" if rep["avg_d"] is None else f"{rep['avg_d']:.3f}"
        print(f"{name:>9}  avg_d={avg_d}  suppressed[{ratios}]")
    print(f"wrote {out_dir / 'report.json'}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    summary = run_verification(args.trials, args.max_n, args.seed, group_trials=args.group_trials)
    status = "PASS" if not summary.oracle_failures else "FAIL"
    print(f"[{status}] solver vs brute force: {summary.oracle_trials} trials, "
          f"{len(summary.oracle_failures)} failure(s)")
    status = "PASS" if not summary.group_violations else "FAIL"
    print(f"[{status}] group constraint: {summary.group_trials} scenes, {summary.group_pairs} pairs, "
          f"{len(summary.group_violations)} violation(s)")
    for line in (summary.oracle_failures + summary.group_violations)[:20]:
        print(f"  {line}")
    return EXIT_OK if summary.ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speaq", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("group", help="group predicates by frequency and size query groups")
    p.add_argument("--freq", required=True, help="CSV with header predicate_id,count")
    p.add_argument("--n-g", type=int, default=4)
    p.add_argument("--n-q", type=int, default=300)
    p.add_argument("--as-groups", action="store_true",
                   help="take each CSV row as one predicate group, in file order, instead of grouping")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("assign", help="assign GTs to predictions for scenes in a JSON Lines file")
    p.add_argument("--scenes", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, default="speaq")
    p.add_argument("--predicate-groups")
    p.add_argument("--query-groups")
    p.add_argument("--config", help="YAML run config supplying quality and cost weights")
    p.add_argument("--k", type=int)
    p.add_argument("--lambda-rel", type=float)
    p.add_argument("--relation-fn", choices=["min", "mean", "max"])
    p.add_argument("--agnostic-d", type=int)
    p.add_argument("--iou-threshold", type=float)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("simulate", help="compare strategies on synthetic scenes")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--strategies", nargs="+", choices=STRATEGIES)
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="check the solver against brute force and the group constraint")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--max-n", type=int, default=7)
    p.add_argument("--group-trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SpeaQError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
