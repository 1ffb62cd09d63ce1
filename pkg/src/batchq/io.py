"""CSV and JSON serialisation for traces and workloads."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .model import TaskRecord, Trace, Workload

TRACE_COLUMNS = ("job", "task_index", "server", "start", "finish")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = ""):
        where = f"{source}:" if source else ""
        where += f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace.records:
        w.writerow([r.job, r.task_index, r.server, repr(float(r.start)), repr(float(r.finish))])
    return buf.getvalue()


def write_trace(trace: Trace, path) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="utf-8", newline="")


def parse_trace_records(text: str, source: str = "") -> list[TaskRecord]:
    rows = csv.reader(io.StringIO(text))
    try:
        header = next(rows)
    except StopIteration:
        raise ParseError("empty file, expected a header row", 1, source) from None
    if tuple(h.strip() for h in header) != TRACE_COLUMNS:
        raise ParseError(f"header must be {','.join(TRACE_COLUMNS)}", 1, source)
    records = []
    for row in rows:
        line = rows.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(TRACE_COLUMNS):
            raise ParseError(f"expected {len(TRACE_COLUMNS)} fields, got {len(row)}", line, source)
        try:
            job, k, server = (int(c) for c in row[:3])
            start, finish = float(row[3]), float(row[4])
        except ValueError as exc:
            raise ParseError(f"bad value ({exc})", line, source) from None
        if not (math.isfinite(start) and math.isfinite(finish)):
            raise ParseError("times must be finite", line, source)
        records.append(TaskRecord(job, k, server, start, finish))
    return records


def read_trace(path, workload: Workload, servers: int | None = None, policy: str = "") -> Trace:
    """Load a trace CSV; ``servers`` defaults to the largest server id seen."""
    path = Path(path)
    records = parse_trace_records(path.read_text(encoding="utf-8"), str(path))
    m = servers if servers is not None else max((r.server for r in records), default=1)
    return Trace(workload, m, policy, tuple(records), None)


def workload_to_json(workload: Workload) -> str:
    return json.dumps(workload.to_json(), indent=1) + "\n"


def read_workload(path) -> Workload:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, str(path)) from None
    try:
        return Workload.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid workload: {exc}", None, str(path)) from None
