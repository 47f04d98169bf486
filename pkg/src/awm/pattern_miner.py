"""Per-group workload pattern mining over template-id sequences.

The model is a variable-order Markov chain over the distinct template ids of
a sequence. Counts come from a prefix tree holding every contiguous
subsequence up to ``max_order + 1`` symbols. Raw transition probabilities are
smoothed against the threshold tau = 1 / |alphabet|: an entry at or above tau
keeps its real value, and the remaining mass is split uniformly across every
alphabet symbol below tau (a row with no entry reaching tau becomes uniform).
Smoothing and the kept-entry count are computed in exact rational arithmetic
and converted to float at the boundary, so golden ratios like 2/3 and 1/12
come out exact.

The order is chosen by a description-length cost

    cost(S, order) = 2*(log order + log m + 1)
                     + m*((order + 1)*log |alphabet| + 2*log |S|)
                     - log P(S | model)

with logs base 2, m the number of kept (context, symbol) entries at that
order, and the chain probability starting from the empirical unigram of the
first symbol. The log-of-zero corner cases (order 0, m 0) contribute 0 so
every order stays admissible. Patterns are then extracted by a single
left-to-right scan that keeps extending the current pattern while the
smoothed transition probability stays at or above theta; emitted patterns
partition the sequence exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Mapping, Sequence

from .errors import EmptySequence, UnknownContext
from .log_ingest import QueryLogRecord
from .sql_template import digest, sql_id

Symbol = Hashable

DEFAULT_THETA = 0.77
DEFAULT_MAX_ORDER = 1


@dataclass(frozen=True)
class QuerySequence:
    """Timestamp-ordered template ids of one business group."""

    ids: tuple[Symbol, ...]

    def __post_init__(self) -> None:
        if not self.ids:
            raise EmptySequence("query sequence is empty")

    @property
    def alphabet(self) -> tuple[Symbol, ...]:
        return tuple(sorted(set(self.ids), key=repr))

    def __len__(self) -> int:
        return len(self.ids)


class PrefixNode:
    __slots__ = ("count", "children")

    def __init__(self) -> None:
        self.count = 0
        self.children: dict[Symbol, PrefixNode] = {}


class PrefixTree:
    """Counts of every contiguous subsequence of length <= max_order + 1.

    The root sits at level 0 and holds |S|; a node at level k represents a
    k-symbol sequence and stores its occurrence count in S.
    """

    def __init__(self, max_order: int, length: int):
        self.root = PrefixNode()
        self.root.count = length
        self.max_order = max_order
        self.length = length

    def node(self, seq: Sequence[Symbol]) -> PrefixNode | None:
        node = self.root
        for symbol in seq:
            child = node.children.get(symbol)
            if child is None:
                return None
            node = child
        return node

    def count(self, seq: Sequence[Symbol]) -> int:
        node = self.node(seq)
        return 0 if node is None else node.count

    def contexts(self, level: int) -> list[tuple[Symbol, ...]]:
        """All sequences of exactly `level` symbols observed in S."""
        found: list[tuple[Symbol, ...]] = []

        def walk(node: PrefixNode, prefix: tuple[Symbol, ...]) -> None:
            if len(prefix) == level:
                found.append(prefix)
                return
            for symbol, child in node.children.items():
                walk(child, prefix + (symbol,))

        walk(self.root, ())
        return found


def build_prefix_tree(sequence: QuerySequence, max_order: int) -> PrefixTree:
    """Count all windows of length <= max_order + 1 into a tree."""
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    ids = sequence.ids
    tree = PrefixTree(max_order=max_order, length=len(ids))
    depth = max_order + 1
    for start in range(len(ids)):
        node = tree.root
        for offset in range(min(depth, len(ids) - start)):
            symbol = ids[start + offset]
            child = node.children.get(symbol)
            if child is None:
                child = PrefixNode()
                node.children[symbol] = child
            child.count += 1
            node = child
    return tree


@dataclass(frozen=True)
class TransitionRow:
    """One smoothed distribution: kept real entries plus a shared fallback."""

    kept: Mapping[Symbol, float]
    fallback: float

    def prob(self, symbol: Symbol) -> float:
        return self.kept.get(symbol, self.fallback)


@dataclass
class MarkovModel:
    order: int
    tau: float
    alphabet: tuple[Symbol, ...]
    transitions: dict[tuple[Symbol, ...], TransitionRow]
    initial: dict[Symbol, float]
    kept_entries: int = 0  # kept (context, symbol) entries at the model order

    def row(self, context: Sequence[Symbol]) -> TransitionRow:
        key = tuple(context)
        try:
            return self.transitions[key]
        except KeyError:
            raise UnknownContext(f"context {key!r} never observed") from None

    def transition(self, context: Sequence[Symbol], symbol: Symbol) -> float:
        """Smoothed P(symbol | context), backing off to the longest stored
        suffix of the context (the empty context always exists)."""
        ctx = tuple(context)[-self.order :] if self.order > 0 else ()
        while ctx not in self.transitions:
            if not ctx:
                raise UnknownContext("model has no empty-context distribution")
            ctx = ctx[1:]
        return self.transitions[ctx].prob(symbol)

    def chain_probability(self, sequence: Sequence[Symbol]) -> float:
        """Product of transition probabilities along a candidate pattern."""
        prob = 1.0
        seq = list(sequence)
        for i in range(1, len(seq)):
            start = max(0, i - self.order)
            prob *= self.transition(seq[start:i], seq[i])
        return prob


def smoothed_transitions(tree: PrefixTree, order: int) -> MarkovModel:
    """Build the smoothed model of the given order from prefix-tree counts."""
    if order > tree.max_order:
        raise ValueError(f"order {order} exceeds tree max_order {tree.max_order}")
    alphabet = tuple(sorted(tree.root.children.keys(), key=repr))
    size = len(alphabet)
    tau = Fraction(1, size)

    transitions: dict[tuple[Symbol, ...], TransitionRow] = {}
    kept_at_order = 0
    for level in range(order + 1):
        for context in tree.contexts(level):
            parent = tree.node(context)
            assert parent is not None and parent.count > 0
            kept: dict[Symbol, float] = {}
            kept_mass = Fraction(0)
            for symbol in alphabet:
                child = parent.children.get(symbol)
                raw = Fraction(child.count if child else 0, parent.count)
                if raw >= tau:
                    kept[symbol] = float(raw)
                    kept_mass += raw
                    if level == order:
                        kept_at_order += 1
            below = size - len(kept)
            fallback = float((1 - kept_mass) / below) if below else 0.0
            transitions[context] = TransitionRow(kept=kept, fallback=fallback)

    initial = {
        symbol: tree.count((symbol,)) / tree.length for symbol in alphabet
    }
    return MarkovModel(
        order=order,
        tau=float(tau),
        alphabet=alphabet,
        transitions=transitions,
        initial=initial,
        kept_entries=kept_at_order,
    )


def _log2_chain(sequence: QuerySequence, model: MarkovModel) -> float:
    ids = sequence.ids
    total = math.log2(model.initial[ids[0]])
    for i in range(1, len(ids)):
        start = max(0, i - model.order)
        total += math.log2(model.transition(ids[start:i], ids[i]))
    return total


def mdl_cost(sequence: QuerySequence, order: int) -> float:
    """Description-length cost of modelling the sequence at this order."""
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    tree = build_prefix_tree(sequence, order)
    model = smoothed_transitions(tree, order)
    m = model.kept_entries
    log_order = math.log2(order) if order >= 1 else 0.0
    log_m = math.log2(m) if m >= 1 else 0.0
    alphabet_size = len(model.alphabet)
    cost = 2.0 * (log_order + log_m + 1.0)
    cost += m * ((order + 1) * math.log2(alphabet_size) + 2.0 * math.log2(len(sequence)))
    cost -= _log2_chain(sequence, model)
    return cost


def select_order(sequence: QuerySequence, max_order: int) -> tuple[int, MarkovModel]:
    """Pick the order with the smallest cost (ties go to the smaller order)."""
    if max_order < 0:
        raise ValueError(f"max_order must be >= 0, got {max_order}")
    tree = build_prefix_tree(sequence, max_order)
    best_order = 0
    best_cost = math.inf
    best_model: MarkovModel | None = None
    for order in range(max_order + 1):
        model = smoothed_transitions(tree, order)
        m = model.kept_entries
        log_order = math.log2(order) if order >= 1 else 0.0
        log_m = math.log2(m) if m >= 1 else 0.0
        cost = 2.0 * (log_order + log_m + 1.0)
        cost += m * ((order + 1) * math.log2(len(model.alphabet)) + 2.0 * math.log2(len(sequence)))
        cost -= _log2_chain(sequence, model)
        if cost < best_cost:
            best_order, best_cost, best_model = order, cost, model
    assert best_model is not None
    return best_order, best_model


@dataclass(frozen=True)
class Pattern:
    sequence: tuple[Symbol, ...]
    support: int
    probability: float


def discover_patterns(
    sequence: QuerySequence, model: MarkovModel, theta: float = DEFAULT_THETA
) -> list[Pattern]:
    """Single left-to-right scan: extend while the transition stays >= theta.

    The emitted pattern instances partition the sequence exactly; identical
    sequences aggregate into one pattern with their occurrence count as
    support and the model's chain probability along the pattern.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    ids = sequence.ids
    emitted: dict[tuple[Symbol, ...], int] = {}
    current: list[Symbol] = [ids[0]]

    def emit(pattern: list[Symbol]) -> None:
        key = tuple(pattern)
        emitted[key] = emitted.get(key, 0) + 1

    for symbol in ids[1:]:
        context = current[-model.order :] if model.order > 0 else []
        if model.transition(context, symbol) >= theta:
            current.append(symbol)
        else:
            emit(current)
            current = [symbol]
    emit(current)

    return [
        Pattern(sequence=seq, support=count, probability=model.chain_probability(seq))
        for seq, count in emitted.items()
    ]


@dataclass
class MiningResult:
    group: str
    order: int
    theta: float
    patterns: list[Pattern]
    templates: dict[Symbol, str]  # template id -> template text


def mine(
    records: Sequence[QueryLogRecord],
    groups: Sequence[str],
    theta: float = DEFAULT_THETA,
    max_order: int = DEFAULT_MAX_ORDER,
) -> dict[str, MiningResult]:
    """Mine per-group patterns from classified records.

    ``groups[i]`` is the business group of ``records[i]`` (predicted or
    ground-truth). Within each group records are ordered by timestamp, their
    SQL digested to template ids, then order selection and pattern discovery
    run on the id sequence. Groups come back sorted by group id.
    """
    if len(records) != len(groups):
        raise ValueError("records and groups must align")

    by_group: dict[str, list[int]] = {}
    for i, group in enumerate(groups):
        by_group.setdefault(group, []).append(i)

    results: dict[str, MiningResult] = {}
    for group in sorted(by_group):
        indices = sorted(by_group[group], key=lambda i: (records[i].timestamp, i))
        templates: dict[Symbol, str] = {}
        ids: list[Symbol] = []
        for i in indices:
            template = digest(records[i].sql)
            tid = sql_id(template).hex
            templates[tid] = template.text
            ids.append(tid)
        sequence = QuerySequence(tuple(ids))
        order, model = select_order(sequence, max_order)
        patterns = discover_patterns(sequence, model, theta)
        results[group] = MiningResult(
            group=group, order=order, theta=theta, patterns=patterns, templates=templates
        )
    return results


__all__ = [
    "QuerySequence",
    "PrefixTree",
    "PrefixNode",
    "TransitionRow",
    "MarkovModel",
    "Pattern",
    "MiningResult",
    "build_prefix_tree",
    "smoothed_transitions",
    "mdl_cost",
    "select_order",
    "discover_patterns",
    "mine",
    "DEFAULT_THETA",
    "DEFAULT_MAX_ORDER",
]
