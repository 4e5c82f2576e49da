"""
MOTIONTOK Report Export
JSON for machines, aligned columns for people, CSV for plotting.
"""

import csv
import json
from typing import Dict, Any, List

from .tasks import EvalReport
from .codebook import CodebookUsageReport, CosineHistogram, SphereEntry

USAGE_HEADER = ("code", "count", "frequency", "bucket")
COSINE_HEADER = ("bin_low", "bin_high", "count")
SPHERE_HEADER = ("code", "count", "x", "y", "z", "zero")


def write_json(path: str, data: Dict[str, Any]) -> None:
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)


def write_report_json(path: str, report: EvalReport) -> None:
    write_json(path, report.to_dict())


def report_text(report: EvalReport) -> str:
    """Aligned two-column table."""
    lines = [f"task: {report.task}  samples: {report.num_samples}  config: {report.config_hash}"]
    tables = report.tables or {"metrics": report.metrics}
    for name, table in tables.items():
        if len(tables) > 1:
            lines.append(f"[{name}]")
        width = max(len(k) for k in table)
        for key, value in table.items():
            lines.append(f"  {key:<{width}}  {value:10.3f} mm")
    if report.malformed_cells:
        lines.append(f"  repaired cells: {report.malformed_cells}")
    for label, group in report.groups.items():
        lines.append(f"  {label}: " + "  ".join(f"{k} {v:.3f}" for k, v in group.metrics.items()))
    return "\n".join(lines) + "\n"


def write_report_text(path: str, report: EvalReport) -> None:
    with open(path, 'w') as f:
        f.write(report_text(report))


def _write_csv(path: str, header, rows: List) -> None:
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_usage_csv(path: str, report: CodebookUsageReport) -> None:
    _write_csv(path, USAGE_HEADER, [(k, c, f"{fr:.8f}", b) for k, c, fr, b in report.rows()])


def write_cosine_csv(path: str, hist: CosineHistogram) -> None:
    _write_csv(path, COSINE_HEADER, [(f"{lo:.4f}", f"{hi:.4f}", n) for lo, hi, n in hist.rows()])


def write_spheres_csv(path: str, spheres: Dict[int, SphereEntry]) -> None:
    rows = [(e.code, e.count, *(f"{v:.6f}" for v in e.vector), int(e.zero)) for e in spheres.values()]
    _write_csv(path, SPHERE_HEADER, rows)
