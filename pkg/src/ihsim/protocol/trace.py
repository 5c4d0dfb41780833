"""Append-only event trace and its CSV export."""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

TRACE_COLUMNS = (
    "frame", "node", "state_before", "event", "state_after",
    "harvested_uW", "bits_decoded", "detect_ok",
)


def fmt_float(v: float | None) -> str:
    return "" if v is None else f"{v:.6g}"


@dataclass(frozen=True)
class TraceRecord:
    frame: int
    node: str
    state_before: str
    event: str
    state_after: str
    emitted: tuple[str, ...] = ()
    harvested_uw: float | None = None
    bits_decoded: str | None = None
    detect_ok: bool | None = None
    extra: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def row(self) -> list[str]:
        return [
            str(self.frame), self.node, self.state_before, self.event, self.state_after,
            fmt_float(self.harvested_uw),
            "" if self.bits_decoded is None else self.bits_decoded,
            "" if self.detect_ok is None else str(int(self.detect_ok)),
        ]


class Trace:
    def __init__(self):
        self._records: list[TraceRecord] = []

    def append(self, rec: TraceRecord) -> None:
        if self._records and rec.frame < self._records[-1].frame:
            raise ValueError("trace frames must be non-decreasing")
        self._records.append(rec)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def for_node(self, node: str) -> list[TraceRecord]:
        return [r for r in self._records if r.node == node]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self._records:
            w.writerow(r.row())
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))

    def sha256(self) -> str:
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()
