"""
Report Writer
Turns campaign results into the CSV contract, a JSON report with histograms,
a human-readable summary and per-bit PMR trace dumps
"""
import csv
import json
import os
from typing import Any, Dict, Optional

import numpy as np

from config import REPORTS_DIR
from decoder import PmrTrace
from simulator import SimPoint, SimReport

CSV_COLUMNS = ("ebno_db", "trials", "frame_errors", "fer", "ber",
               "avg_attempts", "avg_complexity", "undetected_errors")
TRACE_COLUMNS = ("bit_index", "pm_first", "pm_last", "pmr", "correct_rank")


def convert_to_json_serializable(obj):
    """Convert NumPy types to JSON-serializable Python types"""
    if isinstance(obj, (np.integer, np.int64, np.int32)):
        return int(obj)
    elif isinstance(obj, (np.floating, np.float64, np.float32)):
        return float(obj)
    elif isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    elif isinstance(obj, np.ndarray):
        return obj.tolist()
    elif isinstance(obj, dict):
        return {str(key): convert_to_json_serializable(value) for key, value in obj.items()}
    elif isinstance(obj, (list, tuple)):
        return [convert_to_json_serializable(item) for item in obj]
    return obj


def _histogram(counter) -> Dict[str, int]:
    return {str(key): int(counter[key]) for key in sorted(counter)}


class ReportWriter:
    """Write simulation reports; every format is deterministic for a given report"""

    def __init__(self, output_dir: str = REPORTS_DIR):
        self.output_dir = output_dir

    def _resolve(self, path: str) -> str:
        if not os.path.isabs(path) and not os.path.dirname(path):
            path = os.path.join(self.output_dir, path)
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        return path

    @staticmethod
    def csv_row(row: SimPoint):
        return (
            f"{row.ebno_db:.4f}",
            str(row.trials),
            str(row.frame_errors),
            f"{row.fer:.6e}",
            f"{row.ber:.6e}",
            f"{row.avg_attempts:.6f}",
            f"{row.avg_complexity:.6f}",
            str(row.undetected_errors),
        )

    def write_csv(self, report: SimReport, path: str) -> str:
        path = self._resolve(path)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in report.rows:
                writer.writerow(self.csv_row(row))
        return path

    def report_dict(self, report: SimReport) -> Dict[str, Any]:
        rows = []
        for row in report.rows:
            rows.append({
                "ebno_db": row.ebno_db,
                "trials": row.trials,
                "frame_errors": row.frame_errors,
                "fer": row.fer,
                "ber": row.ber,
                "avg_attempts": row.avg_attempts,
                "avg_complexity": row.avg_complexity,
                "undetected_errors": row.undetected_errors,
                "shifted_false_positives": row.shifted_false_positives,
                "histograms": {
                    "penalty_count": _histogram(row.penalty_histogram),
                    "elimination_bit": _histogram(row.elimination_histogram),
                    "pmr_drop_bit": _histogram(row.pmr_drop_histogram),
                    "penalty_bit": _histogram(row.penalty_position_histogram),
                },
            })
        return convert_to_json_serializable({
            "code": report.code,
            "scheme": report.scheme,
            "list_size": report.list_size,
            "segments": report.segments,
            "critical_set_size": report.critical_set_size,
            "shift": report.shift,
            "seed": report.seed,
            "rows": rows,
        })

    def write_json(self, report: SimReport, path: str) -> str:
        path = self._resolve(path)
        with open(path, "w") as f:
            json.dump(self.report_dict(report), f, indent=2, sort_keys=True)
        return path

    def summary_text(self, report: SimReport) -> str:
        lines = [
            f"Code:            {report.code}",
            f"Scheme:          {report.scheme} (L={report.list_size}, k={report.shift}, |CS|={report.critical_set_size})",
        ]
        if report.segments > 1:
            lines.append(f"Segments:        {report.segments}")
        lines.append(f"Seed:            {report.seed}")
        lines.append("")
        lines.append(f"{'Eb/N0':>7} {'trials':>9} {'errors':>7} {'FER':>10} {'BER':>10} {'t/c':>8} {'cmplx':>8}")
        for row in report.rows:
            lines.append(
                f"{row.ebno_db:7.2f} {row.trials:9d} {row.frame_errors:7d} {row.fer:10.3e} "
                f"{row.ber:10.3e} {row.avg_attempts:8.3f} {row.avg_complexity:8.3f}"
            )
            if row.undetected_errors:
                lines.append(f"        ⚠️  {row.undetected_errors} undetected "
                             f"({row.shifted_false_positives} from shifted attempts)")
        return "\n".join(lines)

    def write_summary(self, report: SimReport, path: str) -> str:
        path = self._resolve(path)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.summary_text(report) + "\n")
        return path

    def write_trace(self, trace: Optional[PmrTrace], path: str) -> Optional[str]:
        """Per-bit CSV of (bit index, PM_1, PM_L, PMR, correct-path rank)"""
        if trace is None:
            return None
        path = self._resolve(path)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRACE_COLUMNS)
            for bit, first, last, pmr, rank in trace.rows():
                writer.writerow([bit, f"{first:.9g}", f"{last:.9g}", f"{pmr:.9g}", rank])
        return path
