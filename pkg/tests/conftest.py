import json

import pytest

from awm.log_ingest import QueryLogRecord

# the walkthrough sequence used across the mining tests
EXAMPLE_SEQUENCE = tuple("q1 q2 q3 q4 q3 q4 q2 q3 q4 q3 q1 q3 q4 q3 q2 q5".split())

GUARD_PATTERN_QUERIES = [
    "SELECT count(*) FROM users",
    "SELECT item FROM items",
    "SELECT shop FROM shops",
    "UPDATE users SET flag = 1 WHERE uid = 7",
]


@pytest.fixture
def example_sequence():
    return EXAMPLE_SEQUENCE


@pytest.fixture
def guard_pattern_queries():
    return list(GUARD_PATTERN_QUERIES)


def make_record(sql="SELECT 1", timestamp=0, group=None, no_label=None, **overrides):
    fields = dict(
        lock_wait_time=0.0,
        logical_read=10,
        rows_examined=100,
        rows_returned=5,
        rows_updated=0,
        rt=0.01,
        timestamp=timestamp,
        physical_sync_read=1,
        database="shop_db",
        error_code="0",
        origin_host="10.0.0.1",
        sql_type="SELECT",
        sql=sql,
        group_label=group,
        no_label=no_label,
    )
    fields.update(overrides)
    return QueryLogRecord(**fields)


def record_line(**kwargs):
    record = make_record(**kwargs)
    payload = {
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
    return json.dumps(payload)
