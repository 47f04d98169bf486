"""Encode execution features into the numeric vector consumed by the classifier.

Three encodings, chosen per feature by configuration:

* plain numeric features are z-normalized against fitted mean/std (population
  std; a constant feature encodes to 0 instead of dividing by zero),
* long-tail counters are bucketized into deciles 1..10 fitted from the data,
* categorical strings become one-hot blocks over the fitted vocabulary; an
  unseen category encodes as an all-zero block rather than an error so new
  hosts or error codes never break streaming inference.

``rows_updated`` is zero-special by default: the value 0 carries meaning of
its own (reads), so it is encoded as the reserved value 0 and the fitted
mean/std only cover the non-zero values. The timestamp never enters the
vector; it is only used for ordering and batching.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyInput, StatsMismatch
from .log_ingest import QueryLogRecord

NUMERIC_FEATURES = ("lock_wait_time", "rt", "rows_returned", "rows_updated")
LONG_TAIL_FEATURES = ("rows_examined", "logical_read", "physical_sync_read")
ZERO_SPECIAL_FEATURES = ("rows_updated",)
CATEGORICAL_FEATURES = ("database", "error_code", "origin_host", "sql_type")

BUCKET_COUNT = 10


@dataclass(frozen=True)
class FeatureConfig:
    numeric: tuple[str, ...] = NUMERIC_FEATURES
    long_tail: tuple[str, ...] = LONG_TAIL_FEATURES
    zero_special: tuple[str, ...] = ZERO_SPECIAL_FEATURES
    categorical: tuple[str, ...] = CATEGORICAL_FEATURES


@dataclass
class FeatureStats:
    """Fitted statistics: mean/std per numeric feature, decile cut points per
    long-tail feature, sorted vocabulary per categorical feature."""

    config: FeatureConfig
    means: dict[str, float] = field(default_factory=dict)
    stds: dict[str, float] = field(default_factory=dict)
    cuts: dict[str, list[float]] = field(default_factory=dict)
    vocab: dict[str, list[str]] = field(default_factory=dict)

    def layout(self) -> list[tuple[str, int]]:
        """Ordered (feature, width) pairs defining the vector layout."""
        entries = [(name, 1) for name in self.config.numeric]
        entries += [(name, 1) for name in self.config.long_tail]
        entries += [(name, len(self.vocab.get(name, []))) for name in self.config.categorical]
        return entries

    def width(self) -> int:
        return sum(w for _, w in self.layout())

    def validate(self) -> None:
        for name in self.config.numeric:
            if name not in self.means or name not in self.stds:
                raise StatsMismatch(f"missing numeric stats for {name!r}")
            if self.stds[name] < 0:
                raise StatsMismatch(f"negative std for {name!r}")
        for name in self.config.long_tail:
            cuts = self.cuts.get(name)
            if cuts is None or len(cuts) != BUCKET_COUNT - 1:
                raise StatsMismatch(f"expected {BUCKET_COUNT - 1} cut points for {name!r}")
            if any(a > b for a, b in zip(cuts, cuts[1:])):
                raise StatsMismatch(f"cut points not sorted for {name!r}")
        for name in self.config.categorical:
            vocab = self.vocab.get(name)
            if vocab is None:
                raise StatsMismatch(f"missing vocabulary for {name!r}")
            if len(set(vocab)) != len(vocab):
                raise StatsMismatch(f"duplicate vocabulary entries for {name!r}")

    def to_json(self) -> str:
        payload = {
            "config": {
                "numeric": list(self.config.numeric),
                "long_tail": list(self.config.long_tail),
                "zero_special": list(self.config.zero_special),
                "categorical": list(self.config.categorical),
            },
            "means": self.means,
            "stds": self.stds,
            "cuts": self.cuts,
            "vocab": self.vocab,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeatureStats":
        payload = json.loads(text)
        config = FeatureConfig(
            numeric=tuple(payload["config"]["numeric"]),
            long_tail=tuple(payload["config"]["long_tail"]),
            zero_special=tuple(payload["config"]["zero_special"]),
            categorical=tuple(payload["config"]["categorical"]),
        )
        stats = cls(
            config=config,
            means={k: float(v) for k, v in payload["means"].items()},
            stds={k: float(v) for k, v in payload["stds"].items()},
            cuts={k: [float(x) for x in v] for k, v in payload["cuts"].items()},
            vocab={k: list(v) for k, v in payload["vocab"].items()},
        )
        stats.validate()
        return stats

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureStats":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class ExecVector:
    values: np.ndarray
    layout: dict[str, tuple[int, int]]


def fit_stats(records: Sequence[QueryLogRecord], config: FeatureConfig | None = None) -> FeatureStats:
    """Fit means/stds, decile cut points, and vocabularies from records."""
    if not records:
        raise EmptyInput("cannot fit feature stats on zero records")
    config = config or FeatureConfig()
    stats = FeatureStats(config=config)

    for name in config.numeric:
        values = np.array([getattr(r, name) for r in records], dtype=np.float64)
        if name in config.zero_special:
            values = values[values != 0]
        if values.size == 0:
            stats.means[name], stats.stds[name] = 0.0, 0.0
        else:
            stats.means[name] = float(values.mean())
            stats.stds[name] = float(values.std())  # population std: deterministic at n=1

    for name in config.long_tail:
        values = np.array([getattr(r, name) for r in records], dtype=np.float64)
        qs = np.linspace(0, 1, BUCKET_COUNT + 1)[1:-1]
        stats.cuts[name] = [float(c) for c in np.quantile(values, qs)]

    for name in config.categorical:
        stats.vocab[name] = sorted({str(getattr(r, name)) for r in records})

    stats.validate()
    return stats


def bucketize(value: float, cuts: Sequence[float]) -> int:
    """Map a value onto buckets 1..10 via its fitted decile cut points."""
    return int(np.searchsorted(cuts, value, side="right")) + 1


def encode(record: QueryLogRecord, stats: FeatureStats) -> ExecVector:
    """Encode one record against fitted stats. Deterministic and pure."""
    stats.validate()
    config = stats.config
    layout: dict[str, tuple[int, int]] = {}
    values = np.zeros(stats.width(), dtype=np.float64)
    pos = 0

    for name in config.numeric:
        raw = float(getattr(record, name))
        if name in config.zero_special and raw == 0:
            encoded = 0.0  # reserved: zero has special significance for this feature
        else:
            std = stats.stds[name]
            encoded = 0.0 if std == 0 else (raw - stats.means[name]) / std
        values[pos] = encoded
        layout[name] = (pos, pos + 1)
        pos += 1

    for name in config.long_tail:
        values[pos] = bucketize(float(getattr(record, name)), stats.cuts[name])
        layout[name] = (pos, pos + 1)
        pos += 1

    for name in config.categorical:
        vocab = stats.vocab[name]
        width = len(vocab)
        category = str(getattr(record, name))
        try:
            values[pos + vocab.index(category)] = 1.0
        except ValueError:
            pass  # unseen category: all-zero block by design
        layout[name] = (pos, pos + width)
        pos += width

    return ExecVector(values=values, layout=layout)


__all__ = [
    "FeatureConfig",
    "FeatureStats",
    "ExecVector",
    "fit_stats",
    "encode",
    "bucketize",
    "NUMERIC_FEATURES",
    "LONG_TAIL_FEATURES",
    "ZERO_SPECIAL_FEATURES",
    "CATEGORICAL_FEATURES",
]
