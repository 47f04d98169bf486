"""Pipeline orchestration and persisted state.

A store directory holds everything one deployment needs: the record store
(records.jsonl), the embedding cache (embeddings.bin), fitted feature stats
(feature_stats.json), the trained classifier (classifier.json), the mined
pattern output (patterns.json), and the full pipeline state with schedules
and editable dependencies (state.json). State files carry a format version
and a checksum; loading verifies both.

``run_pipeline`` executes digest -> embed -> encode -> classify (or take the
ground-truth label) -> mine -> schedule, persisting every artifact. The run
is deterministic for fixed inputs and seeds: reruns produce byte-identical
pattern output.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import classifier as clf
from . import exec_features, optimizer, pattern_miner
from .embedding import EmbeddingConfig, EmbeddingStore, embed_with_store
from .errors import CorruptState, EmptyInput, StoreUnavailable, VersionMismatch
from .log_ingest import QueryLogRecord, RecordStore
from .sql_template import digest, sql_id

FORMAT_VERSION = 1

RECORDS_FILE = "records.jsonl"
EMBEDDINGS_FILE = "embeddings.bin"
STATS_FILE = "feature_stats.json"
CLASSIFIER_FILE = "classifier.json"
PATTERNS_FILE = "patterns.json"
STATE_FILE = "state.json"
LABELS_FILE = "labels.staged.jsonl"


@dataclass
class PipelineConfig:
    theta: float = pattern_miner.DEFAULT_THETA
    max_order: int = pattern_miner.DEFAULT_MAX_ORDER
    pooling: str = "max"
    batch_size: int = 512
    dimension: int = 64
    p_l: float = 0.01
    retention_days: int = 3
    num_batches: int = 10
    seed: int = 0
    group_by: str = "label"  # "label" or "predicted"
    mode: str = "random_sample"

    _ALIASES = {
        "max_ord": "max_order",
        "dim": "dimension",
        "pl": "p_l",
    }

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        config = cls()
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"expected key=value, got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.lower()
            key = cls._ALIASES.get(key, key)
            if not hasattr(config, key) or key.startswith("_"):
                raise ValueError(f"unknown config key {key!r}")
            current = getattr(config, key)
            if isinstance(current, bool):
                setattr(config, key, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(config, key, int(value))
            elif isinstance(current, float):
                setattr(config, key, float(value))
            else:
                setattr(config, key, value)
        return config

    def embedding(self) -> EmbeddingConfig:
        return EmbeddingConfig(
            dimension=self.dimension,
            batch_size=self.batch_size,
            pooling=self.pooling,
            seed=self.seed,
        )


@dataclass
class PatternEntry:
    """One mined pattern plus its editable dependencies and schedule."""

    id: int
    group: str
    sql_ids: list[str]
    templates: list[str]
    support: int
    probability: float
    model_order: int
    theta: float
    deps: list[tuple[int, int]] = field(default_factory=list)
    stages: list[list[int]] = field(default_factory=list)
    node_rt: list[float] | None = None
    version: int = 0

    def recompute_schedule(self) -> None:
        parsed = [digest(text) for text in self.templates]
        graph = optimizer.build_dependency_graph(parsed, self.deps)
        self.stages = optimizer.schedule(graph).stages

    def to_payload(self) -> dict:
        payload = asdict(self)
        payload["deps"] = [list(d) for d in self.deps]
        return payload

    @classmethod
    def from_payload(cls, payload: dict) -> "PatternEntry":
        return cls(
            id=int(payload["id"]),
            group=str(payload["group"]),
            sql_ids=list(payload["sql_ids"]),
            templates=list(payload["templates"]),
            support=int(payload["support"]),
            probability=float(payload["probability"]),
            model_order=int(payload["model_order"]),
            theta=float(payload["theta"]),
            deps=[(int(a), int(b)) for a, b in payload.get("deps", [])],
            stages=[list(map(int, stage)) for stage in payload.get("stages", [])],
            node_rt=payload.get("node_rt"),
            version=int(payload.get("version", 0)),
        )


@dataclass
class PipelineState:
    config: dict
    patterns: list[PatternEntry] = field(default_factory=list)
    status: str = "complete"

    def pattern(self, pattern_id: int) -> PatternEntry | None:
        for entry in self.patterns:
            if entry.id == pattern_id:
                return entry
        return None


def _canonical(payload: object) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def persist_state(state: PipelineState, store_dir: str | Path) -> Path:
    store_dir = Path(store_dir)
    if not store_dir.is_dir():
        raise StoreUnavailable(f"store directory missing: {store_dir}")
    payload = {
        "config": state.config,
        "status": state.status,
        "patterns": [entry.to_payload() for entry in state.patterns],
    }
    body = {
        "format_version": FORMAT_VERSION,
        "checksum": hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest(),
        "payload": payload,
    }
    path = store_dir / STATE_FILE
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def load_state(store_dir: str | Path) -> PipelineState:
    path = Path(store_dir) / STATE_FILE
    if not path.exists():
        raise StoreUnavailable(f"no state file at {path}")
    try:
        body = json.loads(path.read_text(encoding="utf-8"))
        version = body["format_version"]
        checksum = body["checksum"]
        payload = body["payload"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CorruptState(f"unreadable state file {path}: {exc}") from None
    if version > FORMAT_VERSION:
        raise VersionMismatch(f"state format {version} is newer than supported {FORMAT_VERSION}")
    if hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest() != checksum:
        raise CorruptState(f"checksum mismatch in {path}")
    return PipelineState(
        config=dict(payload.get("config", {})),
        patterns=[PatternEntry.from_payload(p) for p in payload.get("patterns", [])],
        status=str(payload.get("status", "complete")),
    )


def write_patterns_file(state: PipelineState, store_dir: str | Path) -> Path:
    """The mined-pattern output contract: one entry per pattern."""
    entries = [
        {
            "id": entry.id,
            "group": entry.group,
            "pattern": entry.sql_ids,
            "templates": entry.templates,
            "support": entry.support,
            "probability": entry.probability,
            "model_ord": entry.model_order,
            "theta": entry.theta,
        }
        for entry in state.patterns
    ]
    path = Path(store_dir) / PATTERNS_FILE
    path.write_text(_canonical(entries) + "\n", encoding="utf-8")
    return path


def run_pipeline(store_dir: str | Path, config: PipelineConfig) -> PipelineState:
    """Execute the full mining pipeline over the store directory."""
    store_dir = Path(store_dir)
    records = RecordStore(store_dir).load()
    if not records:
        raise EmptyInput(f"record store at {store_dir} holds no records")

    emb_config = config.embedding()
    emb_path = store_dir / EMBEDDINGS_FILE
    if emb_path.exists():
        # an existing cache fixes the dimension; the config follows the artifact
        emb_store = EmbeddingStore.open(emb_path)
        if emb_store.dimension != emb_config.dimension:
            config.dimension = emb_store.dimension
            emb_config = config.embedding()
    else:
        emb_store = EmbeddingStore.open(emb_path, emb_config.dimension)
    sql_texts = [r.sql for r in records]
    embeddings = embed_with_store(sql_texts, emb_store, emb_config)
    emb_store.save()

    stats_path = store_dir / STATS_FILE
    if stats_path.exists():
        stats = exec_features.FeatureStats.load(stats_path)
    else:
        stats = exec_features.fit_stats(records)
        stats.save(stats_path)

    if config.group_by == "predicted":
        model_path = store_dir / CLASSIFIER_FILE
        if not model_path.exists():
            raise StoreUnavailable(f"no trained classifier at {model_path}; run `awm train` first")
        model = clf.ClassifierModel.load(model_path)
        assembler = clf.FeatureAssembler()
        groups = []
        kept_records = []
        for record, z in zip(records, embeddings):
            feature = assembler.assemble(z, exec_features.encode(record, stats))
            groups.append(clf.predict(model, feature))
            kept_records.append(record)
    else:
        kept_records = [r for r in records if r.group_label is not None]
        groups = [r.group_label for r in kept_records]  # type: ignore[misc]
        if not kept_records:
            raise EmptyInput("no records carry group_label; train a classifier or label the log")

    try:
        results = pattern_miner.mine(
            kept_records, groups, theta=config.theta, max_order=config.max_order
        )
    except Exception:
        # upstream artifacts (embeddings, stats) are already on disk; mark it
        persist_state(PipelineState(config=_config_payload(config), status="failed"), store_dir)
        raise

    mean_rt = _mean_rt_by_template(kept_records)
    entries: list[PatternEntry] = []
    next_id = 0
    for group in sorted(results):
        result = results[group]
        for pattern in result.patterns:
            templates = [result.templates[tid] for tid in pattern.sequence]
            entry = PatternEntry(
                id=next_id,
                group=group,
                sql_ids=[str(tid) for tid in pattern.sequence],
                templates=templates,
                support=pattern.support,
                probability=pattern.probability,
                model_order=result.order,
                theta=result.theta,
                node_rt=[mean_rt.get(str(tid), 0.0) for tid in pattern.sequence],
            )
            entry.recompute_schedule()
            entries.append(entry)
            next_id += 1

    state = PipelineState(config=_config_payload(config), patterns=entries)
    persist_state(state, store_dir)
    write_patterns_file(state, store_dir)
    return state


def _mean_rt_by_template(records: Sequence[QueryLogRecord]) -> dict[str, float]:
    totals: dict[str, tuple[float, int]] = {}
    for record in records:
        tid = sql_id(digest(record.sql)).hex
        total, count = totals.get(tid, (0.0, 0))
        totals[tid] = (total + record.rt, count + 1)
    return {tid: total / count for tid, (total, count) in totals.items()}


def _config_payload(config: PipelineConfig) -> dict:
    payload = asdict(config)
    return {k: v for k, v in payload.items() if not k.startswith("_")}


def discard_staged_labels(store_dir: str | Path) -> None:
    """Privacy rule: labeled training data does not outlive training."""
    path = Path(store_dir) / LABELS_FILE
    if path.exists():
        os.remove(path)


__all__ = [
    "PipelineConfig",
    "PatternEntry",
    "PipelineState",
    "run_pipeline",
    "persist_state",
    "load_state",
    "write_patterns_file",
    "discard_staged_labels",
    "FORMAT_VERSION",
    "RECORDS_FILE",
    "EMBEDDINGS_FILE",
    "STATS_FILE",
    "CLASSIFIER_FILE",
    "PATTERNS_FILE",
    "STATE_FILE",
    "LABELS_FILE",
]
