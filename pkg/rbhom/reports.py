"""
CSV emission. Every file starts with a ``#`` header block: column schema version,
the echoed run configuration and the basis fingerprint (when a basis is involved).
"""
import csv
import io
import math
import re
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional, Sequence, Union

from rbhom.types import RunConfig

SCHEMA_VERSION = 1

OFFLINE_COLUMNS = ["N", "max_rel_bound", "selected_param_id", "selected_dir"]
AUDIT_DECAY_COLUMNS = [
    "N",
    "max_rel_bound",
    "max_rel_true_err",
    "max_rel_s_err",
    "effectivity_min",
    "effectivity_median",
    "effectivity_max",
    "box_effectivity_min",
    "box_effectivity_max",
]
EFFECTIVITY_COLUMNS = [
    "N",
    "param_id",
    "b1",
    "c1",
    "b2",
    "c2",
    "theta",
    "dir",
    "true_err",
    "bound",
    "effectivity",
    "s_err",
    "s_bound",
    "alpha",
    "gamma",
    "box_effectivity",
    "resolved",
]
SUMMARY_COLUMNS = [
    "provider",
    "h_hom",
    "h_Y",
    "N",
    "epsilon",
    "l2_err",
    "h1_err",
    "max_delta_s",
    "indicator",
    "rigorous_bound",
    "assembly_time",
    "solve_time",
]
FINE_FIELD_COLUMNS = ["x1", "x2", "u_corrected", "u_star", "grad1", "grad2"]
BENCH_COLUMNS = [
    "n_per_side",
    "dofs",
    "N",
    "dof_ratio",
    "offline_time",
    "truth_query",
    "rb_query",
    "rb_solve",
    "rb_bound",
    "speedup",
]
CONVERGENCE_COLUMNS = ["case", "n_per_side", "a11", "a12", "a21", "a22", "order_11", "order_22"]

DANGEROUS_SPREADSHEET_PREFIX = re.compile(r"^[\t\r\n]|^\s*[=+\-@]")


def sanitize_cell(value: Any) -> Any:
    """Neutralize text cells a spreadsheet would evaluate; numbers pass through."""
    if isinstance(value, str) and DANGEROUS_SPREADSHEET_PREFIX.search(value):
        return f"'{value}"
    return value


def format_cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    if hasattr(value, "item") and not isinstance(value, str):
        return format_cell(value.item())
    return sanitize_cell(value)


def header_block(config: Optional[RunConfig], basis_fingerprint: Optional[str] = None, **extra) -> List[str]:
    lines = [f"schema={SCHEMA_VERSION}"]
    if config is not None:
        lines.extend(config.echo())
    lines.append(f"basis_fingerprint={basis_fingerprint or ''}")
    lines.extend(f"{key}={value}" for key, value in extra.items())
    return lines


def to_csv(
    fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]], header: Sequence[str] = ()
) -> str:
    with io.StringIO() as csv_fp:
        for line in header:
            csv_fp.write(f"# {line}\n")
        writer = csv.DictWriter(csv_fp, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: format_cell(row.get(key)) for key in fieldnames})
        csv_fp.seek(0)
        csv_data = csv_fp.read()
        return csv_data


def write_csv(
    path: Union[str, Path],
    fieldnames: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    header: Sequence[str] = (),
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fp:
        fp.write(to_csv(fieldnames, rows, header))
    return path


def read_csv(path: Union[str, Path]) -> List[dict]:
    """Rows of a file written by ``write_csv``, header block skipped."""
    with open(path, newline="", encoding="utf-8") as fp:
        lines = [line for line in fp if not line.startswith("#")]
    return list(csv.DictReader(lines))
