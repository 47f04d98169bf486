"""Turn a mined pattern into a dependency DAG and a parallel schedule.

Two edge kinds feed the graph. Block-based edges are inferred from the
statement texts: a write (INSERT/UPDATE/DELETE/REPLACE) orders against every
earlier read or write of the same table, a schema change (CREATE/ALTER/DROP/
TRUNCATE) orders against everything previously touched in its database and
blocks all of that database afterwards, and reads only order against earlier
writes (read-after-read imposes nothing). Business-based edges carry ordering
only the application author knows; they arrive as explicit (from, to) index
pairs with from < to.

Scheduling is longest-path levelization of the DAG: a node's stage is one
past the deepest of its predecessors, sources sit at stage 0, and every node
within a stage keeps pattern order. Queries sharing a stage may run in
parallel, so the estimated speedup is total runtime divided by the sum of
per-stage maxima.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import CycleDetected, IndexOutOfRange, MissingRt
from .sql_template import SqlTemplate

BLOCK_NONE = "none"
BLOCK_TABLE_WRITE = "table_write"
BLOCK_DATABASE_DDL = "database_ddl"

DML_WRITE_KINDS = frozenset({"INSERT", "UPDATE", "DELETE", "REPLACE"})
DDL_KINDS = frozenset({"CREATE", "ALTER", "DROP", "TRUNCATE"})

EDGE_BLOCK = "block_based"
EDGE_BUSINESS = "business_based"


@dataclass(frozen=True)
class StatementClass:
    blocking: str
    scopes: tuple[tuple[str, str], ...]  # (database, table) keys touched


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str


@dataclass
class DependencyGraph:
    nodes: list[SqlTemplate]
    edges: list[Edge] = field(default_factory=list)

    def edge_pairs(self) -> set[tuple[int, int]]:
        return {(e.src, e.dst) for e in self.edges}


def _scope_key(name: str, default_db: str | None) -> tuple[str, str]:
    if "." in name:
        db, table = name.split(".", 1)
        return db, table
    return default_db or "", name


def classify_statement(template: SqlTemplate) -> StatementClass:
    """Blocking level and scope keys of one statement."""
    kind = template.statement_kind
    if kind in DDL_KINDS:
        blocking = BLOCK_DATABASE_DDL
    elif kind in DML_WRITE_KINDS:
        blocking = BLOCK_TABLE_WRITE
    else:
        blocking = BLOCK_NONE
    scopes = tuple(_scope_key(name, template.database) for name in template.tables)
    return StatementClass(blocking=blocking, scopes=scopes)


def build_dependency_graph(
    pattern: Sequence[SqlTemplate],
    business_deps: Iterable[tuple[int, int]] = (),
) -> DependencyGraph:
    """Infer block-based edges by scanning the pattern with a scope map, then
    merge the user-supplied business-based edges.

    Raises IndexOutOfRange for a business edge out of range or violating
    pattern order (from must come before to), and CycleDetected defensively.
    """
    if not pattern:
        raise ValueError("pattern must not be empty")
    graph = DependencyGraph(nodes=list(pattern))
    seen: set[tuple[int, int, str]] = set()

    def add_edge(src: int | None, dst: int, kind: str) -> None:
        if src is None or src == dst:
            return
        key = (src, dst, kind)
        if key not in seen:
            seen.add(key)
            graph.edges.append(Edge(src, dst, kind))

    writer: dict[tuple[str, str], int] = {}  # scope -> index of current blocking write
    readers: dict[tuple[str, str], list[int]] = {}  # reads since that write
    ddl_writer: dict[str, int] = {}  # database -> index of current schema change

    for index, template in enumerate(pattern):
        cls = classify_statement(template)
        scopes = cls.scopes or ((template.database or "", ""),)
        if cls.blocking == BLOCK_DATABASE_DDL:
            for db in {db for db, _ in scopes}:
                add_edge(ddl_writer.get(db), index, EDGE_BLOCK)
                for scope in [s for s in writer if s[0] == db]:
                    add_edge(writer.pop(scope), index, EDGE_BLOCK)
                for scope in [s for s in readers if s[0] == db]:
                    for reader in readers.pop(scope):
                        add_edge(reader, index, EDGE_BLOCK)
                ddl_writer[db] = index
        elif cls.blocking == BLOCK_TABLE_WRITE:
            for scope in scopes:
                add_edge(ddl_writer.get(scope[0]), index, EDGE_BLOCK)
                add_edge(writer.get(scope), index, EDGE_BLOCK)
                for reader in readers.get(scope, []):
                    add_edge(reader, index, EDGE_BLOCK)
                writer[scope] = index
                readers[scope] = []
        else:
            for scope in scopes:
                add_edge(ddl_writer.get(scope[0]), index, EDGE_BLOCK)
                add_edge(writer.get(scope), index, EDGE_BLOCK)
                readers.setdefault(scope, []).append(index)

    for src, dst in business_deps:
        if not (0 <= src < len(pattern)) or not (0 <= dst < len(pattern)):
            raise IndexOutOfRange(f"business edge ({src}, {dst}) out of range")
        if src >= dst:
            raise IndexOutOfRange(
                f"business edge ({src}, {dst}) violates pattern order (from < to)"
            )
        add_edge(src, dst, EDGE_BUSINESS)

    _check_acyclic(len(pattern), graph.edges)
    return graph


def _check_acyclic(n: int, edges: Sequence[Edge]) -> None:
    indegree = [0] * n
    out: list[list[int]] = [[] for _ in range(n)]
    for edge in edges:
        out[edge.src].append(edge.dst)
        indegree[edge.dst] += 1
    ready = [i for i in range(n) if indegree[i] == 0]
    removed = 0
    while ready:
        node = ready.pop()
        removed += 1
        for nxt in out[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
    if removed != n:
        raise CycleDetected("dependency graph contains a cycle")


@dataclass
class Schedule:
    stages: list[list[int]]
    node_rt: dict[int, float] | None = None

    def stage_of(self) -> dict[int, int]:
        return {node: i for i, stage in enumerate(self.stages) for node in stage}


def schedule(graph: DependencyGraph, node_rt: Mapping[int, float] | None = None) -> Schedule:
    """Longest-path levelization: stage(v) = 1 + max stage of its predecessors."""
    n = len(graph.nodes)
    _check_acyclic(n, graph.edges)
    preds: list[list[int]] = [[] for _ in range(n)]
    for edge in graph.edges:
        preds[edge.dst].append(edge.src)

    stage_index = [0] * n
    # all edges are validated acyclic; process in topological order
    order = _topological_order(n, graph.edges)
    for node in order:
        if preds[node]:
            stage_index[node] = 1 + max(stage_index[p] for p in preds[node])

    depth = max(stage_index) + 1 if n else 0
    stages: list[list[int]] = [[] for _ in range(depth)]
    for node in range(n):
        stages[stage_index[node]].append(node)
    for stage in stages:
        stage.sort()
    return Schedule(stages=stages, node_rt=dict(node_rt) if node_rt else None)


def _topological_order(n: int, edges: Sequence[Edge]) -> list[int]:
    indegree = [0] * n
    out: list[list[int]] = [[] for _ in range(n)]
    for edge in edges:
        out[edge.src].append(edge.dst)
        indegree[edge.dst] += 1
    ready = sorted(i for i in range(n) if indegree[i] == 0)
    order = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in out[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
    return order


def estimate_speedup(sched: Schedule, rt: Mapping[int, float] | Sequence[float]) -> float:
    """Sequential runtime over staged runtime (>= 1 for valid inputs)."""
    nodes = [node for stage in sched.stages for node in stage]

    def rt_of(node: int) -> float:
        try:
            value = rt[node]
        except (KeyError, IndexError, TypeError):
            raise MissingRt(f"no rt for node {node}") from None
        if value is None or value <= 0:
            raise MissingRt(f"rt for node {node} must be positive, got {value}")
        return float(value)

    total = sum(rt_of(node) for node in nodes)
    staged = sum(max(rt_of(node) for node in stage) for stage in sched.stages if stage)
    return total / staged


def parse_deps_file(text: str) -> list[tuple[int, int]]:
    """Parse business dependencies, one "from -> to" pair per line."""
    deps = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise ValueError(f"expected 'from -> to', got {raw!r}")
        left, right = line.split("->", 1)
        deps.append((int(left.strip()), int(right.strip())))
    return deps


__all__ = [
    "StatementClass",
    "Edge",
    "DependencyGraph",
    "Schedule",
    "classify_statement",
    "build_dependency_graph",
    "schedule",
    "estimate_speedup",
    "parse_deps_file",
    "BLOCK_NONE",
    "BLOCK_TABLE_WRITE",
    "BLOCK_DATABASE_DDL",
    "EDGE_BLOCK",
    "EDGE_BUSINESS",
]
