"""Running experiments into output directories, singly or as a sweep."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import ConfigError, ExperimentConfig
from .experiments import run
from .report import Row, RunReport, Section, rows_to_csv, write_outputs


@dataclass
class SweepResult:
    axis: str
    values: list[float]
    reports: list[RunReport] = field(default_factory=list)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        codes = [r.exit_code for r in self.reports] + [1 for _ in self.errors]
        if 1 in codes:
            return 1
        return 2 if 2 in codes else 0

    def csv_text(self) -> str:
        rows: list[Row] = []
        lead = []
        for value, report in zip(self.values, self.reports):
            rows.extend(report.rows)
            lead.extend([(self.axis, value)] * len(report.rows))
        return rows_to_csv(rows, ("sweep_axis", "sweep_value"), lead)


def run_to_dir(cfg: ExperimentConfig, out_dir=None) -> RunReport:
    """Run one experiment and write its report, CSV, plots and timings."""
    report, plots = run(cfg)
    write_outputs(report, out_dir if out_dir is not None else cfg.output, plots)
    return report


def _value_dir(axis: str, value: float) -> str:
    return f"{axis}={value:g}"


def sweep(cfg: ExperimentConfig, axis: str, values, out_dir=None) -> SweepResult:
    """One run per value with a shared seed; the merged CSV carries the value.

    A value that cannot be applied, or a run that raises, is recorded and the
    sweep moves on.
    """
    cfg.sweep_path(axis)  # unknown or inapplicable axes fail before any work
    out = Path(out_dir if out_dir is not None else cfg.output)
    result = SweepResult(axis, [])
    for value in values:
        key = _value_dir(axis, value)
        try:
            run_cfg = cfg.with_sweep_value(axis, value)
            report = run_to_dir(run_cfg, out / key)
        except (ConfigError, ValueError, ArithmeticError) as exc:
            result.errors[key] = f"{type(exc).__name__}: {exc}"
            report = RunReport(config=cfg.to_dict(), sections=[Section(key, error=result.errors[key])])
        result.values.append(float(value))
        result.reports.append(report)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(result.csv_text())
    summary = {"axis": axis, "values": result.values, "errors": result.errors,
               "exit_codes": [r.exit_code for r in result.reports]}
    (out / "sweep.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result

