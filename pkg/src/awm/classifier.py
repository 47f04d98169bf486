"""Label collection, unified feature assembly, and business-group classification.

Labels are sampled under a privacy policy: random_sample keeps each labeled
record with probability p_l (seeded, reproducible), manual keeps only records
the user explicitly labeled, and hybrid samples like random_sample but a
record flagged no_label is never kept regardless of p_l. Labeled data is
meant to be discarded once training finishes; the pipeline deletes its staged
label file after a successful train.

The unified per-query feature is the semantic embedding concatenated with the
execution encoding; when execution features are unavailable the embedding
alone is used. The built-in model is multinomial logistic regression trained
by gradient descent over timestamp-ordered mini-batches; the model file
carries a kind tag so other classifier backends can be dropped in behind the
same predict contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet
from .exec_features import ExecVector
from .log_ingest import QueryLogRecord

LABEL_MODES = ("random_sample", "manual", "hybrid")

BUILTIN_KIND = "multinomial_logistic"


@dataclass(frozen=True)
class LabelPolicy:
    mode: str = "random_sample"
    p_l: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in LABEL_MODES:
            raise ValueError(f"mode must be one of {LABEL_MODES}, got {self.mode!r}")
        if not 0.0 <= self.p_l <= 1.0:
            raise ValueError(f"p_l must be in [0, 1], got {self.p_l}")


def sample_labels(records: Iterable[QueryLogRecord], policy: LabelPolicy) -> list[QueryLogRecord]:
    """Select labeled training records according to the policy."""
    if policy.mode == "manual":
        return [r for r in records if r.group_label is not None and not r.no_label]

    rng = np.random.default_rng(policy.seed)
    kept = []
    for record in records:
        if record.group_label is None:
            continue
        draw = rng.random()
        if draw >= policy.p_l:
            continue
        if policy.mode == "hybrid" and record.no_label:
            continue  # the flag overrides the sampling probability
        kept.append(record)
    return kept


@dataclass
class FeatureVector:
    """Unified per-query feature with its origin (template id + timestamp)."""

    values: np.ndarray
    sql_id: str | None = None
    timestamp: int | None = None


class FeatureAssembler:
    """Concatenate embedding and execution vectors with run-wide dim checks."""

    def __init__(self) -> None:
        self._z_dim: int | None = None
        self._x_dim: int | None = None

    def assemble(
        self,
        z: np.ndarray,
        x: ExecVector | np.ndarray | None = None,
        sql_id: str | None = None,
        timestamp: int | None = None,
    ) -> FeatureVector:
        z = np.asarray(z, dtype=np.float64).ravel()
        if z.size < 1:
            raise DimensionMismatch("embedding vector must have dimension >= 1")
        if self._z_dim is None:
            self._z_dim = z.size
        elif z.size != self._z_dim:
            raise DimensionMismatch(f"embedding dim changed from {self._z_dim} to {z.size}")

        if x is None:
            if self._x_dim not in (None, 0):
                raise DimensionMismatch("execution features missing after being present")
            self._x_dim = 0
            values = z
        else:
            xv = x.values if isinstance(x, ExecVector) else np.asarray(x, dtype=np.float64)
            xv = xv.ravel()
            if self._x_dim is None:
                self._x_dim = xv.size
            elif xv.size != self._x_dim:
                raise DimensionMismatch(f"execution dim changed from {self._x_dim} to {xv.size}")
            values = np.concatenate([z, xv])
        return FeatureVector(values=values, sql_id=sql_id, timestamp=timestamp)


def assemble_feature(z: np.ndarray, x: ExecVector | np.ndarray | None = None) -> FeatureVector:
    """One-off assembly without run-wide state."""
    return FeatureAssembler().assemble(z, x)


@dataclass(frozen=True)
class TrainConfig:
    num_batches: int = 10
    learning_rate: float = 0.1
    epochs: int = 50
    l2: float = 1e-4
    seed: int = 0


@dataclass
class ClassifierModel:
    kind: str
    classes: list[str]
    weights: np.ndarray  # (num_classes, feature_dim)
    bias: np.ndarray  # (num_classes,)
    feature_dim: int
    # input standardization fitted at train time; None means identity
    scale_mean: np.ndarray | None = None
    scale_std: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def standardize(self, values: np.ndarray) -> np.ndarray:
        if self.scale_mean is None or self.scale_std is None:
            return values
        return (values - self.scale_mean) / self.scale_std

    def save(self, path: str | Path) -> None:
        payload = {
            "kind": self.kind,
            "classes": self.classes,
            "feature_dim": self.feature_dim,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "scale_mean": None if self.scale_mean is None else self.scale_mean.tolist(),
            "scale_std": None if self.scale_std is None else self.scale_std.tolist(),
            "metadata": self.metadata,
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload["kind"] != BUILTIN_KIND:
            raise ValueError(f"unsupported classifier kind: {payload['kind']!r}")
        mean = payload.get("scale_mean")
        std = payload.get("scale_std")
        return cls(
            kind=payload["kind"],
            classes=list(payload["classes"]),
            weights=np.asarray(payload["weights"], dtype=np.float64),
            bias=np.asarray(payload["bias"], dtype=np.float64),
            feature_dim=int(payload["feature_dim"]),
            scale_mean=None if mean is None else np.asarray(mean, dtype=np.float64),
            scale_std=None if std is None else np.asarray(std, dtype=np.float64),
            metadata=dict(payload.get("metadata", {})),
        )


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def train(
    labeled: Sequence[tuple[FeatureVector, str]],
    config: TrainConfig | None = None,
) -> ClassifierModel:
    """Train the built-in model on (feature, group) pairs.

    Data is sorted by timestamp and split into contiguous mini-batches;
    training is plain gradient descent and fully deterministic for a fixed
    seed and input.
    """
    if not labeled:
        raise EmptyTrainingSet("no labeled feature vectors to train on")
    config = config or TrainConfig()

    classes = sorted({group for _, group in labeled})
    dim = labeled[0][0].values.size
    for fv, _ in labeled:
        if fv.values.size != dim:
            raise DimensionMismatch(f"feature dim changed from {dim} to {fv.values.size}")

    metadata = {"num_batches": config.num_batches, "seed": config.seed, "epochs": config.epochs}
    if len(classes) == 1:
        return ClassifierModel(
            kind=BUILTIN_KIND,
            classes=classes,
            weights=np.zeros((1, dim)),
            bias=np.zeros(1),
            feature_dim=dim,
            metadata=metadata,
        )

    order = sorted(range(len(labeled)), key=lambda i: (labeled[i][0].timestamp or 0, i))
    x = np.stack([labeled[i][0].values for i in order])
    class_index = {c: i for i, c in enumerate(classes)}
    y = np.array([class_index[labeled[i][1]] for i in order])

    # standardize inputs so bucketized / one-hot / embedding scales coexist
    scale_mean = x.mean(axis=0)
    scale_std = x.std(axis=0)
    scale_std[scale_std == 0] = 1.0
    x = (x - scale_mean) / scale_std

    num_batches = max(1, min(config.num_batches, len(labeled)))
    batches = np.array_split(np.arange(len(labeled)), num_batches)

    num_classes = len(classes)
    weights = np.zeros((num_classes, dim))
    bias = np.zeros(num_classes)
    onehot = np.eye(num_classes)[y]

    for _ in range(config.epochs):
        for batch in batches:
            if batch.size == 0:
                continue
            xb, yb = x[batch], onehot[batch]
            probs = _softmax(xb @ weights.T + bias)
            err = probs - yb
            weights -= config.learning_rate * (err.T @ xb / batch.size + config.l2 * weights)
            bias -= config.learning_rate * err.mean(axis=0)

    return ClassifierModel(
        kind=BUILTIN_KIND,
        classes=classes,
        weights=weights,
        bias=bias,
        feature_dim=dim,
        scale_mean=scale_mean,
        scale_std=scale_std,
        metadata=metadata,
    )


def predict(model: ClassifierModel, feature: FeatureVector | np.ndarray) -> str:
    """Argmax class for one feature vector; ties go to the smaller class id."""
    values = feature.values if isinstance(feature, FeatureVector) else np.asarray(feature)
    values = values.ravel()
    if values.size != model.feature_dim:
        raise DimensionMismatch(
            f"feature dim {values.size} does not match model dim {model.feature_dim}"
        )
    scores = model.weights @ model.standardize(values) + model.bias
    return model.classes[int(np.argmax(scores))]


def predict_many(model: ClassifierModel, matrix: np.ndarray) -> list[str]:
    if matrix.ndim != 2 or matrix.shape[1] != model.feature_dim:
        raise DimensionMismatch(
            f"feature matrix shape {matrix.shape} does not match model dim {model.feature_dim}"
        )
    scores = model.standardize(matrix) @ model.weights.T + model.bias
    return [model.classes[i] for i in np.argmax(scores, axis=1)]


__all__ = [
    "LabelPolicy",
    "FeatureVector",
    "FeatureAssembler",
    "assemble_feature",
    "TrainConfig",
    "ClassifierModel",
    "sample_labels",
    "train",
    "predict",
    "predict_many",
    "BUILTIN_KIND",
]
