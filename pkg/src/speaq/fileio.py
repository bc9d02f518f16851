"""On-disk formats: frequency CSVs, grouping JSON, scene JSON Lines, canonical
report JSON, per-metric CSV tables and SVG bar charts."""

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from speaq.cost_model import GtTriplet, Prediction
from speaq.errors import ParseError
from speaq.geometry import BoundingBox
from speaq.grouping import FrequencyTable, PredicateGrouping, QueryGrouping
from speaq.simulator import Scene

SIG_DIGITS = 6


# -- canonical JSON -----------------------------------------------------------


def _canonical(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canonical(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r} cannot be written to a report")
        x = float(f"{x:.{SIG_DIGITS}g}")
        return 0.0 if x == 0 else x  # drop negative zero
    if hasattr(obj, "value") and isinstance(obj.value, str):  # str enums
        return obj.value
    return obj


def canonical_json(obj: Any) -> str:
    """Sorted keys, floats rounded to six significant digits, trailing newline."""
    return json.dumps(_canonical(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_canonical_json(path: Path, obj: Any) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


# -- frequency tables ---------------------------------------------------------


def parse_frequency_csv(text: str, path: Path | str | None = None) -> FrequencyTable:
    lines = text.splitlines()
    if not lines or [h.strip() for h in lines[0].split(",")] != ["predicate_id", "count"]:
        raise ParseError("expected header 'predicate_id,count'", path=path, line=1)
    counts: dict[int, float] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        fields = [f.strip() for f in raw.split(",")]
        if len(fields) != 2:
            raise ParseError(f"expected 2 fields, got {len(fields)}", path=path, line=lineno)
        try:
            pid = int(fields[0])
            count = float(fields[1]) if any(c in fields[1] for c in ".eE") else int(fields[1])
        except ValueError:
            raise ParseError(f"malformed row {raw!r}", path=path, line=lineno) from None
        if count < 0 or not math.isfinite(count):
            raise ParseError(f"count must be finite and >= 0, got {fields[1]}", path=path, line=lineno)
        if pid in counts:
            raise ParseError(f"duplicate predicate id {pid}", path=path, line=lineno)
        counts[pid] = count
    if not counts:
        raise ParseError("no rows", path=path)
    try:
        return FrequencyTable(counts)
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def read_frequency_csv(path: Path | str) -> FrequencyTable:
    return parse_frequency_csv(Path(path).read_text(encoding="utf-8"), path)


def write_frequency_csv(path: Path | str, freq: FrequencyTable) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["predicate_id", "count"])
    for pid, c in freq.counts.items():
        w.writerow([pid, repr(c) if isinstance(c, float) else c])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


# -- groupings ----------------------------------------------------------------


def predicate_grouping_to_dict(pg: PredicateGrouping) -> dict:
    groups = []
    for g, (members, f) in enumerate(zip(pg.groups, pg.group_freq), start=1):
        entry = {"group": g, "predicates": list(members), "frequency": f}
        if pg.shares is not None:
            entry["share"] = str(pg.shares[g - 1])
        groups.append(entry)
    return {"n_groups": pg.n_groups, "groups": groups}


def predicate_grouping_from_dict(data: dict) -> PredicateGrouping:
    try:
        entries = sorted(data["groups"], key=lambda e: e["group"])
        groups = tuple(tuple(int(p) for p in e["predicates"]) for e in entries)
        freqs = tuple(float(e["frequency"]) for e in entries)
        shares = None
        if all("share" in e for e in entries):
            shares = tuple(Fraction(e["share"]) for e in entries)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad predicate grouping: {exc}") from None
    return PredicateGrouping(groups, freqs, shares)


def query_grouping_to_dict(qg: QueryGrouping) -> dict:
    return {
        "n_q": qg.n_q,
        "counts": list(qg.counts),
        "offsets": list(qg.offsets),
        "ranges": [list(r) for r in qg.ranges()],
    }


def query_grouping_from_dict(data: dict) -> QueryGrouping:
    try:
        return QueryGrouping(tuple(int(c) for c in data["counts"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad query grouping: {exc}") from None


def write_groupings(out_dir: Path, pg: PredicateGrouping, qg: QueryGrouping) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p_path, q_path = out_dir / "predicate_groups.json", out_dir / "query_groups.json"
    p_path.write_text(json.dumps(predicate_grouping_to_dict(pg), indent=2) + "\n", encoding="utf-8")
    q_path.write_text(json.dumps(query_grouping_to_dict(qg), indent=2) + "\n", encoding="utf-8")
    return p_path, q_path


def read_groupings(p_path: Path | str, q_path: Path | str) -> tuple[PredicateGrouping, QueryGrouping]:
    return (
        predicate_grouping_from_dict(json.loads(Path(p_path).read_text(encoding="utf-8"))),
        query_grouping_from_dict(json.loads(Path(q_path).read_text(encoding="utf-8"))),
    )


# -- scenes -------------------------------------------------------------------


def _box(values, what: str) -> BoundingBox:
    if not isinstance(values, list) or len(values) != 4:
        raise ValueError(f"{what} must be a list of 4 numbers")
    return BoundingBox.from_seq(values)


def gt_to_record(t: GtTriplet) -> dict:
    rec = {
        "s_box": list(t.subject_box.as_tuple()),
        "o_box": list(t.object_box.as_tuple()),
        "s_cls": t.subject_class,
        "o_cls": t.object_class,
        "p_cls": t.predicate_class,
    }
    if t.predicate_box is not None:
        rec["p_box"] = list(t.predicate_box.as_tuple())
    return rec


def gt_from_record(rec: dict) -> GtTriplet:
    p_box = rec.get("p_box")
    return GtTriplet(
        subject_box=_box(rec["s_box"], "s_box"),
        object_box=_box(rec["o_box"], "o_box"),
        subject_class=int(rec["s_cls"]),
        object_class=int(rec["o_cls"]),
        predicate_class=int(rec["p_cls"]),
        predicate_box=_box(p_box, "p_box") if p_box is not None else None,
    )


def pred_to_record(p: Prediction) -> dict:
    rec = {
        "s_box": list(p.subject_box.as_tuple()),
        "o_box": list(p.object_box.as_tuple()),
        "s_probs": p.subject_probs.tolist(),
        "o_probs": p.object_probs.tolist(),
        "p_probs": p.predicate_probs.tolist(),
        "query_index": p.query_index,
    }
    if p.predicate_box is not None:
        rec["p_box"] = list(p.predicate_box.as_tuple())
    return rec


def pred_from_record(rec: dict, position: int) -> Prediction:
    p_box = rec.get("p_box")
    return Prediction(
        subject_box=_box(rec["s_box"], "s_box"),
        object_box=_box(rec["o_box"], "o_box"),
        subject_probs=rec["s_probs"],
        object_probs=rec["o_probs"],
        predicate_probs=rec["p_probs"],
        query_index=int(rec.get("query_index", position + 1)),
        predicate_box=_box(p_box, "p_box") if p_box is not None else None,
    )


def scene_to_record(scene: Scene) -> dict:
    return {"gts": [gt_to_record(t) for t in scene.gts], "preds": [pred_to_record(p) for p in scene.preds]}


def scene_from_record(rec: dict, line: int | None = None, path=None) -> Scene:
    if not isinstance(rec, dict) or "gts" not in rec or "preds" not in rec:
        raise ParseError("scene record needs 'gts' and 'preds'", path=path, line=line)
    gts, preds = [], []
    for kind, items, build in (
        ("gts", rec["gts"], lambda r, i: gt_from_record(r)),
        ("preds", rec["preds"], pred_from_record),
    ):
        for i, r in enumerate(items):
            try:
                (gts if kind == "gts" else preds).append(build(r, i))
            except (KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"{kind}[{i}]: {exc}", path=path, line=line) from None
    return Scene(gts, preds)


def iter_scenes(path: Path | str) -> Iterator[Scene]:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path=path, line=lineno) from None
            yield scene_from_record(rec, line=lineno, path=path)


def read_scenes(path: Path | str) -> list[Scene]:
    return list(iter_scenes(path))


def write_scenes(path: Path | str, scenes: Iterable[Scene]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for scene in scenes:
            fh.write(json.dumps(scene_to_record(scene)) + "\n")


# -- report tables and charts -------------------------------------------------


def _fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.{SIG_DIGITS}g}"


def write_report_tables(out_dir: Path, report: dict) -> list[Path]:
    """One CSV per metric from a ``SimulationReport.to_dict()`` payload."""
    out_dir = Path(out_dir)
    strategies = report["strategies"]
    written: list[Path] = []

    def emit(name: str, header: list[str], rows: list[list]) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        path = out_dir / name
        path.write_text(buf.getvalue(), encoding="utf-8")
        written.append(path)

    emit(
        "suppressed_promising_ratio.csv",
        ["strategy", "iou_threshold", "ratio"],
        [
            [s, t, _fmt(v)]
            for s, rep in strategies.items()
            for t, v in sorted(rep["suppressed_promising_ratio"].items(), key=lambda kv: float(kv[0]))
        ],
    )
    emit(
        "assignment_summary.csv",
        ["strategy", "avg_d", "avg_gts_per_query"],
        [[s, _fmt(rep["avg_d"]), _fmt(rep["avg_gts_per_query"])] for s, rep in strategies.items()],
    )
    n_g = len(report["query_counts"])
    emit(
        "group_frequency.csv",
        ["group", "gt_frequency", "query_count", *strategies],
        [
            [g + 1, _fmt(report["gt_frequency_per_group"][g]), report["query_counts"][g]]
            + [_fmt(rep["prediction_frequency_per_group"][g]) for rep in strategies.values()]
            for g in range(n_g)
        ],
    )
    for s, rep in strategies.items():
        emit(
            f"cross_tab_{s}.csv",
            ["gt_group", *[f"query_group_{j + 1}" for j in range(n_g)]],
            [[i + 1, *[_fmt(v) for v in row]] for i, row in enumerate(rep["per_group_cross_tab"])],
        )
    return written


_PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def group_frequency_svg(report: dict) -> str:
    """Grouped bars of GT share vs each strategy's assigned-pair share per group."""
    series = [("GT", report["gt_frequency_per_group"])] + [
        (s, rep["prediction_frequency_per_group"]) for s, rep in report["strategies"].items()
    ]
    n_g = len(report["gt_frequency_per_group"])
    width, height, margin = 120 + 110 * n_g, 300, 40
    plot_h = height - 2 * margin
    top = max([max(v) for _, v in series] + [1e-9])
    bar_w = 80 / len(series)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - 10}" y2="{height - margin}" stroke="black"/>',
    ]
    for g in range(n_g):
        x0 = margin + 10 + g * 110
        for k, (_, values) in enumerate(series):
            h = plot_h * values[g] / top
            parts.append(
                f'<rect x="{x0 + k * bar_w:.2f}" y="{height - margin - h:.2f}" width="{bar_w:.2f}" '
                f'height="{h:.2f}" fill="{_PALETTE[k % len(_PALETTE)]}"/>'
            )
        parts.append(
            f'<text x="{x0 + 40}" y="{height - margin + 16}" font-size="12" text-anchor="middle">G{g + 1}</text>'
        )
    for k, (name, _) in enumerate(series):
        y = 14 + 14 * k
        parts.append(f'<rect x="{width - 100}" y="{y - 9}" width="10" height="10" fill="{_PALETTE[k % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{width - 85}" y="{y}" font-size="11">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
