"""Snapshots and their on-disk formats (JSONL streams, fixed-header CSV)."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_SCHEMA_VERSION = 1


@dataclass
class Snapshot:
    """A configuration at a sweep (sampler) or time (dynamics) plus observables."""

    index: float
    wcm: float
    surface: float
    centers: np.ndarray = field(repr=False)
    clock: str = "sweep"
    extra: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {self.clock: self.index, "wcm": float(self.wcm), "surface": float(self.surface),
               "centers": self.centers.tolist()}
        rec.update(self.extra)
        return rec


def write_jsonl(path: Path, snapshots, header: dict | None = None) -> None:
    """One JSON object per line; ``header`` fields are merged into every line."""
    with open(path, "w", encoding="utf-8") as fh:
        for snap in snapshots:
            rec = snap.to_record()
            if header:
                rec = {**header, **rec}
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path: Path, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["# schema_version", CSV_SCHEMA_VERSION])
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v
