"""
Report serialization.

JSON reports are deterministic: keys are sorted, floats are rounded to four
decimals (magnitudes below 1e-4 keep four significant digits so tiny p-values
survive) and NaN/inf become null. CSV output is a set of flat tables:

    scores.csv     one row per scored page
                   (page_id, day, account_id, activity, treatment, kind,
                    capture_label, query, query_stance, algorithm, score)
    tests.csv      one row per statistical test in the report
    frequency.csv  histogram bins of SERP-MS and FSERP-MS
    undefined.csv  pages whose score is undefined
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple

import pandas as pd
from pydantic import ValidationError

from report_service.analysis import AnalysisReport, TestBattery
from utils.errors import ConfigurationError, DataError
from utils.file_helpers import read_json, write_text

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv")


def round_floats(obj: Any) -> Any:
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return None
        if obj != 0.0 and abs(obj) < 1e-4:
            return float(f"{obj:.4g}")
        rounded = round(obj, 4)
        return 0.0 if rounded == 0 else rounded
    if isinstance(obj, dict):
        return {str(k): round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def report_json(report: AnalysisReport) -> str:
    data = round_floats(report.model_dump(mode="json"))
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -------------------------------
# CSV tables
# -------------------------------
def _batteries(report: AnalysisReport) -> Iterator[Tuple[str, TestBattery]]:
    yield "rq1b.serp_ms", report.rq1b.tests
    for name, section in (("rq2", report.rq2), ("rq3", report.rq3)):
        yield f"{name}.serp_ms", section.serp_ms.tests
        yield f"{name}.fserp_ms", section.fserp_ms.tests
    if report.rq1a is not None:
        for stance, battery in report.rq1a.rank_tests.items():
            yield f"rq1a.rank.{stance}", battery
    if report.rq1c is not None:
        for key, battery in report.rq1c.tests.items():
            yield f"rq1c.{key}", battery


def tests_frame(report: AnalysisReport) -> pd.DataFrame:
    rows: List[Dict[str, Any]] = []
    for section, battery in _batteries(report):
        for result in (battery.kruskal_wallis, battery.tukey_hsd, *battery.pairwise):
            if result is None:
                continue
            rows.append({
                "section": section,
                "test": result.test.value,
                "groups": " vs ".join(result.group_sizes),
                "statistic": result.statistic,
                "df": result.df,
                "p_value": result.p_value,
                "summary": result.describe(),
            })
    return pd.DataFrame(rows, columns=["section", "test", "groups", "statistic", "df", "p_value", "summary"])


def frequency_frame(report: AnalysisReport) -> pd.DataFrame:
    rows = [
        {"score": name, **row}
        for name, table in sorted(report.frequency.items())
        for row in table.rows()
    ]
    return pd.DataFrame(rows, columns=["score", "bin_low", "bin_high", "count"])


def write_report(report: AnalysisReport, out_dir: Path, fmt: str = "json") -> List[Path]:
    """Write the report in `fmt` under `out_dir`; returns the written paths."""
    if fmt not in FORMATS:
        raise ConfigurationError(f"[REPORT] Unknown report format '{fmt}'. Expected one of: {', '.join(FORMATS)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        paths = [write_text(out_dir / "report.json", report_json(report))]
    else:
        tables = {
            "scores.csv": report.scores_frame(),
            "tests.csv": tests_frame(report),
            "frequency.csv": frequency_frame(report),
            "undefined.csv": pd.DataFrame([u.model_dump() for u in report.undefined], columns=["page_id", "reason"]),
        }
        paths = []
        for name, frame in tables.items():
            path = out_dir / name
            frame.to_csv(path, index=False, float_format="%.6g")
            paths.append(path)
    logger.info(f"[REPORT] Wrote {', '.join(p.name for p in paths)} to {out_dir}")
    return paths


# -------------------------------
# Full analysis (exact values, with per-page scores)
# -------------------------------
def save_analysis(path: Path, report: AnalysisReport) -> Path:
    data = {
        "report": report.model_dump(mode="python"),
        "scores": [s.model_dump() for s in report.scores],
    }
    return write_text(Path(path), json.dumps(data, sort_keys=True, default=str) + "\n")


def load_analysis(path: Path) -> AnalysisReport:
    data = read_json(Path(path), label="REPORT")
    if not isinstance(data, dict) or "report" not in data:
        raise DataError(f"[REPORT] {path} is not a saved analysis.")
    try:
        return AnalysisReport.model_validate({**data["report"], "scores": data.get("scores", [])})
    except ValidationError as e:
        raise DataError(f"[REPORT] {path} holds an invalid analysis: {e}") from e
