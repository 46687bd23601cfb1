"""Report assembly and deterministic serialization.

Reports are written twice: a schema-versioned JSON document and a flat CSV
of plot rows (one per effect x assumption set).  Both use the same
pre-rounded values (six significant digits, rounded once) so the CSV
reproduces the report exactly.  Nothing time- or path-dependent enters the payload, which
makes byte-identical output a testable property.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any

SCHEMA_VERSION = 1


def round6(x: float) -> float | None:
    """Round to six significant digits; non-finite values become missing."""
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def value_str(x: float | None) -> str:
    """CSV cell for a pre-rounded value; missing values are empty."""
    if x is None:
        return ""
    rounded = round6(x)
    return "" if rounded is None else repr(rounded)


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def dump_report(report: dict[str, Any], path: str | Path) -> bytes:
    """Serialize with sorted keys and fixed separators; returns the bytes."""
    payload = json.dumps(
        report, sort_keys=True, indent=2, allow_nan=False, ensure_ascii=True
    ).encode("ascii") + b"\n"
    Path(path).write_bytes(payload)
    return payload


PLOT_HEADER = "effect_t1,effect_t2,assumption_set,lower,upper,ci_lo,ci_hi"


def plot_rows_to_csv(rows: list[dict[str, Any]], path: str | Path) -> None:
    """Flat plot data: one row per effect x assumption set."""
    lines = [PLOT_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                (
                    _point_str(row["effect_t1"]),
                    _point_str(row["effect_t2"]),
                    row["assumption_set"],
                    value_str(row["lower"]),
                    value_str(row["upper"]),
                    value_str(row["ci_lo"]),
                    value_str(row["ci_hi"]),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


DIST_HEADER = "effect_t1,effect_t2,variant,q,lower,upper,ci_lo,ci_hi"


def dist_rows_to_csv(rows: list[dict[str, Any]], path: str | Path) -> None:
    lines = [DIST_HEADER]
    for row in rows:
        lines.append(
            ",".join(
                (
                    _point_str(row["effect_t1"]),
                    _point_str(row["effect_t2"]),
                    row["variant"],
                    value_str(row["q"]),
                    value_str(row["lower"]),
                    value_str(row["upper"]),
                    value_str(row["ci_lo"]),
                    value_str(row["ci_hi"]),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _point_str(p) -> str:
    return "(" + " ".join(str(int(c)) for c in p) + ")"
