"""Result rows, run reports and their CSV / JSON serializations."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("experiment", "system", "parameter", "value", "quantity", "estimate", "tolerance", "residual", "pass")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        return repr(_sig(x))
    return str(x)


def _sig(x: float) -> float:
    """Round to 12 significant digits so tiny residuals stay visible."""
    return float(f"{x:.12g}")


@dataclass
class Row:
    """One long-format result line.

    ``tolerance`` is a readable criterion such as ``"abs<=0.06 of 0.962424"``
    or ``"<0.05"``; ``passed`` is None for informational rows.
    """

    experiment: str
    system: str
    parameter: str
    value: object
    quantity: str
    estimate: float
    tolerance: str = ""
    residual: float | None = None
    passed: bool | None = None

    def cells(self) -> list[str]:
        return [self.experiment, self.system, self.parameter, _fmt(self.value), self.quantity,
                _fmt(self.estimate), self.tolerance, _fmt(self.residual), _fmt(self.passed)]


def check_close(estimate: float, target: float, tol: float) -> tuple[str, bool]:
    return f"abs<={tol:g} of {target:.6f}", bool(abs(estimate - target) <= tol)


def check_below(estimate: float, bound: float) -> tuple[str, bool]:
    return f"<{bound:g}", bool(estimate < bound)


def check_above(estimate: float, bound: float) -> tuple[str, bool]:
    return f">{bound:g}", bool(estimate > bound)


@dataclass
class Section:
    """Result of one estimator block; ``error`` is set when it raised."""

    name: str
    diagnostics: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class RunReport:
    config: dict
    rows: list[Row] = field(default_factory=list)
    sections: list[Section] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return any(r.passed is False for r in self.rows)

    @property
    def errored(self) -> bool:
        return any(s.error for s in self.sections)

    @property
    def exit_code(self) -> int:
        if self.errored:
            return 1
        return 2 if self.failed else 0

    def csv_text(self) -> str:
        return rows_to_csv(self.rows)

    def json_text(self) -> str:
        """Deterministic JSON; wall-clock timings are written separately."""
        payload = {
            "config": self.config,
            "rows": [dict(zip(CSV_COLUMNS, r.cells())) for r in self.rows],
            "sections": [_jsonable(asdict(s)) for s in self.sections],
            "passed": not self.failed and not self.errored,
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def rows_to_csv(rows, leading: tuple[str, ...] = (), lead_values=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(leading) + list(CSV_COLUMNS))
    for i, row in enumerate(rows):
        prefix = [] if not leading else [_fmt(v) for v in lead_values[i]]
        writer.writerow(prefix + row.cells())
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if not math.isfinite(x) else _sig(x)
    return obj


def write_outputs(report: RunReport, out_dir, plots: dict[str, str]) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in [("report.json", report.json_text()), ("results.csv", report.csv_text())]:
        path = out / name
        path.write_text(text)
        written.append(path)
    for name, svg in sorted(plots.items()):
        path = out / name
        path.write_text(svg)
        written.append(path)
    timing = out / "timings.json"
    timing.write_text(json.dumps(_jsonable(report.timings), indent=2, sort_keys=True) + "\n")
    written.append(timing)
    return written
