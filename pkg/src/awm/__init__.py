"""awm: mine workload patterns from SQL query logs and turn them into schedules.

The pipeline runs in stages: ingest query-log lines into a local record store,
digest SQL into templates with stable ids, encode each query into a feature
vector (semantic embedding + execution features), classify queries into
business groups, mine per-group template sequences with an MDL-selected Markov
model, and convert mined patterns into dependency-aware parallel schedules.
"""

__version__ = "0.1.0"
