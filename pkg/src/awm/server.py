"""HTTP API serving the pattern-browsing and dependency-editing loop.

Endpoints (JSON in and out):

    GET    /health
    GET    /patterns
    GET    /patterns/{id}
    GET    /patterns/{id}/schedule
    POST   /patterns/{id}/deps              body {"from": f, "to": t, "version": v?}
    DELETE /patterns/{id}/deps/{from}/{to}  optional ?version=v

Every pattern carries a version token; a mutation sent with a stale token
gets 409 so concurrent editors cannot silently overwrite each other. A
mutation validates and recomputes the schedule before anything is stored: a
rejected edit (bad index, order violation, cycle) returns 400 and leaves the
stored schedule untouched. Successful mutations persist state synchronously
and respond with the recomputed view.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .errors import CycleDetected, IndexOutOfRange
from .service import PatternEntry, PipelineState, load_state, persist_state

_PATTERN_PATH = re.compile(r"^/patterns/(\d+)$")
_SCHEDULE_PATH = re.compile(r"^/patterns/(\d+)/schedule$")
_DEPS_PATH = re.compile(r"^/patterns/(\d+)/deps$")
_DEP_ITEM_PATH = re.compile(r"^/patterns/(\d+)/deps/(\d+)/(\d+)$")


def pattern_summary(entry: PatternEntry) -> dict:
    return {
        "id": entry.id,
        "group": entry.group,
        "templates": entry.templates,
        "support": entry.support,
        "probability": entry.probability,
    }


def pattern_view(entry: PatternEntry) -> dict:
    view = pattern_summary(entry)
    view.update(
        {
            "sql_ids": entry.sql_ids,
            "model_ord": entry.model_order,
            "theta": entry.theta,
            "deps": [list(d) for d in entry.deps],
            "stages": entry.stages,
            "node_rt": entry.node_rt,
            "version": str(entry.version),
        }
    )
    return view


def schedule_view(entry: PatternEntry) -> dict:
    stage_times = None
    if entry.node_rt and all(rt > 0 for rt in entry.node_rt):
        stage_times = [max(entry.node_rt[node] for node in stage) for stage in entry.stages]
    return {
        "pattern_id": entry.id,
        "stages": entry.stages,
        "stage_templates": [[entry.templates[node] for node in stage] for stage in entry.stages],
        "stage_times": stage_times,
        "version": str(entry.version),
    }


class PatternService:
    """State container with per-pattern serialized mutations."""

    def __init__(self, state: PipelineState, store_dir: str | Path | None = None):
        self.state = state
        self.store_dir = Path(store_dir) if store_dir is not None else None
        self._locks: dict[int, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, pattern_id: int) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(pattern_id, threading.Lock())

    def _persist(self) -> None:
        if self.store_dir is not None:
            persist_state(self.state, self.store_dir)

    def add_dep(self, pattern_id: int, src: int, dst: int, version: str | None) -> PatternEntry:
        entry = self.state.pattern(pattern_id)
        if entry is None:
            raise LookupError(pattern_id)
        with self._lock_for(pattern_id):
            _check_version(entry, version)
            if (src, dst) in entry.deps:
                return entry
            candidate = entry.deps + [(src, dst)]
            trial = PatternEntry(**{**entry.__dict__, "deps": candidate})
            trial.recompute_schedule()  # IndexOutOfRange / CycleDetected abort before commit
            entry.deps = candidate
            entry.stages = trial.stages
            entry.version += 1
            self._persist()
            return entry

    def remove_dep(self, pattern_id: int, src: int, dst: int, version: str | None) -> PatternEntry:
        entry = self.state.pattern(pattern_id)
        if entry is None:
            raise LookupError(pattern_id)
        with self._lock_for(pattern_id):
            _check_version(entry, version)
            if (src, dst) not in entry.deps:
                raise KeyError((src, dst))
            entry.deps = [d for d in entry.deps if d != (src, dst)]
            entry.recompute_schedule()
            entry.version += 1
            self._persist()
            return entry


class StaleVersion(Exception):
    pass


def _check_version(entry: PatternEntry, version: str | None) -> None:
    if version is not None and version != str(entry.version):
        raise StaleVersion(f"expected version {entry.version}, got {version}")


class ApiHandler(BaseHTTPRequestHandler):
    service: PatternService  # set on the server class

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass

    def _send(self, status: int, payload: object) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str) -> None:
        self._send(status, {"error": message})

    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self) -> None:
        path, _, _query = self.path.partition("?")
        state = self.service.state
        if path == "/health":
            self._send(200, {"status": "ok", "patterns": len(state.patterns)})
            return
        if path == "/patterns":
            self._send(200, [pattern_summary(e) for e in state.patterns])
            return
        match = _PATTERN_PATH.match(path)
        if match:
            entry = state.pattern(int(match.group(1)))
            if entry is None:
                self._error(404, "unknown pattern")
                return
            self._send(200, pattern_view(entry))
            return
        match = _SCHEDULE_PATH.match(path)
        if match:
            entry = state.pattern(int(match.group(1)))
            if entry is None:
                self._error(404, "unknown pattern")
                return
            self._send(200, schedule_view(entry))
            return
        self._error(404, "no such endpoint")

    def do_POST(self) -> None:
        match = _DEPS_PATH.match(self.path.partition("?")[0])
        if not match:
            self._error(404, "no such endpoint")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            src = int(payload["from"])
            dst = int(payload["to"])
            version = payload.get("version")
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            self._error(400, "body must be JSON with integer 'from' and 'to'")
            return
        self._mutate(int(match.group(1)), "add", src, dst, version)

    def do_DELETE(self) -> None:
        path, _, query = self.path.partition("?")
        match = _DEP_ITEM_PATH.match(path)
        if not match:
            self._error(404, "no such endpoint")
            return
        version = None
        for part in query.split("&"):
            if part.startswith("version="):
                version = part.split("=", 1)[1]
        self._mutate(int(match.group(1)), "remove", int(match.group(2)), int(match.group(3)), version)

    def _mutate(self, pattern_id: int, action: str, src: int, dst: int, version: str | None) -> None:
        try:
            if action == "add":
                entry = self.service.add_dep(pattern_id, src, dst, version)
            else:
                entry = self.service.remove_dep(pattern_id, src, dst, version)
        except LookupError as exc:
            if isinstance(exc, KeyError):
                self._error(404, f"no dependency ({src}, {dst}) on pattern {pattern_id}")
            else:
                self._error(404, "unknown pattern")
            return
        except StaleVersion as exc:
            self._error(409, str(exc))
            return
        except (IndexOutOfRange, CycleDetected) as exc:
            self._error(400, str(exc))
            return
        self._send(200, pattern_view(entry))


def make_server(
    state: PipelineState,
    port: int = 8080,
    store_dir: str | Path | None = None,
    host: str = "127.0.0.1",
) -> ThreadingHTTPServer:
    service = PatternService(state, store_dir)
    handler = type("BoundApiHandler", (ApiHandler,), {"service": service})
    return ThreadingHTTPServer((host, port), handler)


def serve(store_dir: str | Path, port: int = 8080, host: str = "127.0.0.1") -> None:
    state = load_state(store_dir)
    server = make_server(state, port=port, store_dir=store_dir, host=host)
    print(f"serving {len(state.patterns)} patterns on http://{host}:{server.server_address[1]}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


__all__ = [
    "PatternService",
    "ApiHandler",
    "make_server",
    "serve",
    "pattern_summary",
    "pattern_view",
    "schedule_view",
]
