"""Dispatch a configuration to its experiment and write ``report.json``."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from ..exceptions import ValidationError
from .config import ExperimentConfig, parameter_schema
from .experiments import REGISTRY, RunContext


@dataclass
class RunReport:
    experiment: str
    config_hash: str
    seed: int
    wall_time: float
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c["passed"] for c in self.checks)

    def to_dict(self):
        return {"experiment": self.experiment, "config_hash": self.config_hash,
                "seed": self.seed, "wall_time": self.wall_time, "passed": self.passed,
                "checks": self.checks, "artifacts": self.artifacts}


def resolve_parameters(cfg):
    """Experiment defaults overlaid with the configured parameters."""
    exp = REGISTRY.get(cfg.experiment)
    if exp is None:
        raise ValidationError(f"unknown experiment {cfg.experiment!r}; "
                              f"known: {', '.join(REGISTRY)}")
    try:
        jsonschema.validate(cfg.parameters, parameter_schema(exp.defaults))
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"invalid parameters for {cfg.experiment}: {exc.message}") from exc
    return exp, {**exp.defaults, **cfg.parameters}


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    exp, params = resolve_parameters(cfg)
    out = Path(out_dir or cfg.output_dir)
    ctx = RunContext(out, cfg.seed)
    start = time.perf_counter()
    exp.run(ctx, params)
    report = RunReport(cfg.experiment, cfg.digest(), cfg.seed,
                       time.perf_counter() - start, ctx.checks, ctx.artifacts + ["report.json"])
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return report
