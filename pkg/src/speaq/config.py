"""Run configuration loaded from a YAML file.

Every section and key is optional; anything unrecognized is rejected so typos
fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from speaq.cost_model import CostWeights
from speaq.errors import ConfigError
from speaq.simulator import STRATEGIES, ScenarioConfig
from speaq.strategies import QualityConfig

_SCENARIO_KEYS = {
    "n_predicates", "n_entity_classes", "zipf_exponent", "scenes", "gt_per_scene",
    "candidates_per_gt", "box_jitter_sigma", "class_temperature", "class_noise",
    "specialized_fraction", "promising_iou_threshold",
}
_SECTIONS = {
    "seed": None,
    "strategies": None,
    "workers": None,
    "grouping": {"n_g", "n_q"},
    "quality": {f.name for f in fields(QualityConfig)},
    "cost_weights": {f.name for f in fields(CostWeights)},
    "scenario": _SCENARIO_KEYS,
    "baselines": {"agnostic_d", "iou_threshold"},
    "output": {"out_dir", "svg"},
}


@dataclass(frozen=True)
class RunConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    strategies: tuple[str, ...] = STRATEGIES
    workers: int = 1
    out_dir: str | None = None
    svg: bool = True

    @property
    def quality(self) -> QualityConfig:
        return self.scenario.quality

    @property
    def weights(self) -> CostWeights:
        return self.scenario.weights

    def to_dict(self) -> dict:
        sc = self.scenario
        return {
            "seed": sc.seed,
            "strategies": list(self.strategies),
            "workers": self.workers,
            "grouping": {"n_g": sc.n_g, "n_q": sc.n_q},
            "quality": {"k": sc.quality.k, "lambda_rel": sc.quality.lambda_rel,
                        "relation_fn": sc.quality.relation_fn.value},
            "cost_weights": {f.name: getattr(sc.weights, f.name) for f in fields(CostWeights)},
            "scenario": {k: (list(v) if isinstance(v, tuple) else v)
                         for k, v in ((k, getattr(sc, k)) for k in sorted(_SCENARIO_KEYS))},
            "baselines": {"agnostic_d": sc.agnostic_d, "iou_threshold": sc.iou_threshold},
            "output": {"out_dir": self.out_dir, "svg": self.svg},
        }


def _section(data: dict, name: str) -> dict:
    sec = data.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    unknown = set(sec) - _SECTIONS[name]
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(sorted(unknown))}")
    return sec


def config_from_dict(data: dict[str, Any] | None) -> RunConfig:
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(sorted(unknown))}")
    try:
        quality = QualityConfig(**_section(data, "quality"))
        weights = CostWeights(**_section(data, "cost_weights"))
        scenario_kw: dict[str, Any] = dict(_section(data, "scenario"))
        for key in ("gt_per_scene", "candidates_per_gt"):
            if key in scenario_kw:
                scenario_kw[key] = tuple(scenario_kw[key])
        scenario_kw.update(_section(data, "grouping"))
        scenario_kw.update(_section(data, "baselines"))
        if "seed" in data:
            scenario_kw["seed"] = int(data["seed"])
        scenario = ScenarioConfig(quality=quality, weights=weights, **scenario_kw)

        strategies = tuple(data.get("strategies", STRATEGIES))
        bad = [s for s in strategies if s not in STRATEGIES]
        if bad or not strategies:
            raise ConfigError(f"strategies must be a nonempty subset of {list(STRATEGIES)}, got {list(strategies)}")
        workers = int(data.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        output = _section(data, "output")
        return RunConfig(scenario, strategies, workers, output.get("out_dir"), bool(output.get("svg", True)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: Path | str) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return config_from_dict(data)


def with_overrides(cfg: RunConfig, **overrides: Any) -> RunConfig:
    """Apply non-None CLI overrides (``seed``, ``workers``, ``out_dir``)."""
    scenario = cfg.scenario
    if overrides.get("seed") is not None:
        scenario = replace(scenario, seed=int(overrides["seed"]))
    kw: dict[str, Any] = {"scenario": scenario}
    for key in ("workers", "out_dir"):
        if overrides.get(key) is not None:
            kw[key] = overrides[key]
    return replace(cfg, **kw)
