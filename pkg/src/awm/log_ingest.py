"""Query-log ingestion: parse record lines and keep a retained local store.

Input is line-delimited JSON, one record per line, with the execution-feature
field names used throughout the pipeline (lock_wait_time, logical_read,
rows_examined, rows_returned, rows_updated, rt, timestamp, physical_sync_read,
database, error_code, origin_host, sql_type, sql, plus the optional
group_label / no_label labeling fields). Unknown extra fields are ignored so
upstream log shippers can evolve without breaking us.

The store is a directory holding ``records.jsonl``. Ingestion appends in
arrival order; retention is evaluated lazily at ingest time and drops records
older than ``retention_days`` relative to the newest stored timestamp
(timestamps are epoch milliseconds).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InvalidValue, MalformedLine, MissingField, StoreUnavailable

MS_PER_DAY = 86_400_000

_SECONDS_FIELDS = ("lock_wait_time", "rt")
_COUNT_FIELDS = ("logical_read", "rows_examined", "rows_returned", "rows_updated", "physical_sync_read")
_STRING_FIELDS = ("database", "error_code", "origin_host", "sql_type")


@dataclass(frozen=True)
class QueryLogRecord:
    """One executed query with its execution features. Immutable after parse."""

    lock_wait_time: float = 0.0
    logical_read: int = 0
    rows_examined: int = 0
    rows_returned: int = 0
    rows_updated: int = 0
    rt: float = 0.0
    timestamp: int = 0
    physical_sync_read: int = 0
    database: str = ""
    error_code: str = ""
    origin_host: str = ""
    sql_type: str = ""
    sql: str = ""
    group_label: str | None = None
    no_label: bool | None = None


def _coerce_number(name: str, value: object) -> float:
    try:
        number = float(value)  # type: ignore[arg-type]
    except (TypeError, ValueError):
        raise InvalidValue(f"field {name!r} is not a number: {value!r}") from None
    if not math.isfinite(number):
        raise InvalidValue(f"field {name!r} is not finite: {value!r}")
    return number


def parse_record(line: str) -> QueryLogRecord:
    """Parse one serialized record line into a typed record.

    Raises MalformedLine for unparseable input, MissingField when the SQL
    text (or timestamp) is absent, and InvalidValue for negative counts or a
    bad timestamp.
    """
    try:
        payload = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedLine(f"unparseable record line: {exc}") from None
    if not isinstance(payload, dict):
        raise MalformedLine("record line is not an object")

    sql = payload.get("sql")
    if sql is None or (isinstance(sql, str) and not sql.strip()):
        raise MissingField("sql")
    if not isinstance(sql, str):
        raise InvalidValue(f"field 'sql' is not text: {sql!r}")
    if "timestamp" not in payload:
        raise MissingField("timestamp")

    fields: dict[str, object] = {"sql": sql}
    ts = _coerce_number("timestamp", payload["timestamp"])
    fields["timestamp"] = int(ts)

    for name in _SECONDS_FIELDS:
        value = _coerce_number(name, payload.get(name, 0.0))
        if value < 0:
            raise InvalidValue(f"field {name!r} is negative: {value}")
        fields[name] = value
    for name in _COUNT_FIELDS:
        value = _coerce_number(name, payload.get(name, 0))
        if value < 0:
            raise InvalidValue(f"field {name!r} is negative: {value}")
        fields[name] = int(value)
    for name in _STRING_FIELDS:
        fields[name] = str(payload.get(name, ""))

    if "group_label" in payload and payload["group_label"] is not None:
        fields["group_label"] = str(payload["group_label"])
    if "no_label" in payload and payload["no_label"] is not None:
        fields["no_label"] = bool(payload["no_label"])

    return QueryLogRecord(**fields)  # type: ignore[arg-type]


def serialize_record(record: QueryLogRecord) -> str:
    """Render a record back into its canonical line form."""
    payload: dict[str, object] = {
        "lock_wait_time": record.lock_wait_time,
        "logical_read": record.logical_read,
        "rows_examined": record.rows_examined,
        "rows_returned": record.rows_returned,
        "rows_updated": record.rows_updated,
        "rt": record.rt,
        "timestamp": record.timestamp,
        "physical_sync_read": record.physical_sync_read,
        "database": record.database,
        "error_code": record.error_code,
        "origin_host": record.origin_host,
        "sql_type": record.sql_type,
        "sql": record.sql,
    }
    if record.group_label is not None:
        payload["group_label"] = record.group_label
    if record.no_label is not None:
        payload["no_label"] = record.no_label
    return json.dumps(payload, sort_keys=True)


class RecordStore:
    """Append-only record store with lazy time-based retention.

    Single writer; readers may load concurrently since ingested content is
    only replaced atomically (write-to-temp then rename).
    """

    FILENAME = "records.jsonl"

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.skipped = 0

    @property
    def path(self) -> Path:
        return self.root / self.FILENAME

    def ensure_open(self, create: bool = True) -> None:
        if create:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise StoreUnavailable(f"cannot create store at {self.root}: {exc}") from None
        if not self.root.is_dir():
            raise StoreUnavailable(f"store directory missing: {self.root}")
        if not os.access(self.root, os.W_OK):
            raise StoreUnavailable(f"store directory not writable: {self.root}")

    def __len__(self) -> int:
        if not self.path.exists():
            return 0
        with self.path.open("r", encoding="utf-8") as fh:
            return sum(1 for _ in fh)

    def load(self) -> list[QueryLogRecord]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    records.append(parse_record(line))
        return records

    def append(self, records: Iterable[QueryLogRecord]) -> int:
        self.ensure_open()
        count = 0
        with self.path.open("a", encoding="utf-8") as fh:
            for record in records:
                fh.write(serialize_record(record) + "\n")
                count += 1
        return count

    def purge_older_than(self, cutoff_ts: int) -> int:
        """Rewrite the store keeping records with timestamp >= cutoff."""
        records = self.load()
        kept = [r for r in records if r.timestamp >= cutoff_ts]
        if len(kept) == len(records):
            return 0
        tmp = self.path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for record in kept:
                fh.write(serialize_record(record) + "\n")
        tmp.replace(self.path)
        return len(records) - len(kept)


def ingest_stream(source: Iterable[str], store: RecordStore, retention_days: int = 3) -> int:
    """Append valid record lines to the store and purge expired records.

    Malformed lines are counted on ``store.skipped`` and skipped, never fatal.
    Returns the number of records appended.
    """
    if retention_days < 1:
        raise InvalidValue(f"retention_days must be >= 1, got {retention_days}")
    store.ensure_open()

    parsed: list[QueryLogRecord] = []
    for line in source:
        if not line.strip():
            continue
        try:
            parsed.append(parse_record(line))
        except (MalformedLine, MissingField, InvalidValue):
            store.skipped += 1
    appended = store.append(parsed)

    if appended:
        newest = max(record.timestamp for record in store.load())
        store.purge_older_than(newest - retention_days * MS_PER_DAY)
    return appended


def iter_lines(path: str | Path) -> Iterator[str]:
    with Path(path).open("r", encoding="utf-8") as fh:
        yield from fh


__all__ = [
    "QueryLogRecord",
    "RecordStore",
    "parse_record",
    "serialize_record",
    "ingest_stream",
    "iter_lines",
    "MS_PER_DAY",
]
