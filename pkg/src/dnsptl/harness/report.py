"""CSV / JSON tables and gnuplot series.

Output is a pure function of the rows and the config: floats are written
with ``repr`` (round-trip exact), keys are sorted, nothing time-dependent
is recorded.
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import asdict, dataclass
from pathlib import Path

COLUMNS = ("method", "snr_db", "nmse", "ber", "n_frames", "seed")


@dataclass(frozen=True)
class ResultRow:
    method: str
    snr_db: float
    nmse: float | None = None
    ber: float | None = None
    n_frames: int = 0
    seed: int = 0


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def csv_text(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([_cell(getattr(r, c)) for c in COLUMNS])
    return buf.getvalue()


def emit_report(rows, out_dir, name: str, config: dict | None = None) -> dict:
    """Write ``tables/<name>.csv``, ``tables/<name>.json`` and one series per (method, metric).

    Returns the written paths keyed by kind.
    """
    rows = list(rows)
    out_dir = Path(out_dir)
    tables, series = out_dir / "tables", out_dir / "series"
    tables.mkdir(parents=True, exist_ok=True)
    series.mkdir(parents=True, exist_ok=True)
    written = {"csv": tables / f"{name}.csv", "json": tables / f"{name}.json", "series": []}
    written["csv"].write_text(csv_text(rows))
    doc = {"name": name, "columns": list(COLUMNS), "config": config or {},
           "rows": [asdict(r) for r in rows]}
    written["json"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    for metric in ("nmse", "ber"):
        by_method = {}
        for r in rows:
            if getattr(r, metric) is not None:
                by_method.setdefault(r.method, []).append(r)
        for method, group in by_method.items():
            path = series / f"{name}_{_slug(method)}_{metric}.dat"
            lines = [f"# {method} {metric} (seed {group[0].seed})", "# snr_db value n_frames"]
            lines += [f"{_cell(float(r.snr_db))} {_cell(getattr(r, metric))} {r.n_frames}" for r in group]
            path.write_text("\n".join(lines) + "\n")
            written["series"].append(path)
    return written


def load_rows(json_path) -> list[ResultRow]:
    doc = json.loads(Path(json_path).read_text())
    return [ResultRow(**r) for r in doc["rows"]]
