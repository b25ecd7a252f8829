"""Coreference graph data model: mentions, gold chains, adjacency, edge splits.

A corpus of event mentions becomes one undirected, unweighted cross-document
graph.  Nodes are mentions; an edge links two mentions of the same chain, and
gold chains are expanded to full cliques so that the connected components of
the edge set always recover the gold partition.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError

Edge = tuple[int, int]


def _norm_edge(i: int, j: int) -> Edge:
    return (i, j) if i < j else (j, i)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Mention:
    """One event mention: a node in the coreference graph."""

    id: int
    doc_id: str
    span_text: str
    chain_id: str


@dataclass(frozen=True)
class CorefGraph:
    """Undirected coreference graph over a dense mention universe 0..N-1.

    Edges are stored canonically with i < j; no self-loops.
    """

    mentions: tuple[Mention, ...]
    edges: frozenset[Edge]

    @property
    def n(self) -> int:
        return len(self.mentions)

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def gold_partition(self) -> dict[str, list[int]]:
        """Chain label -> sorted mention ids."""
        part: dict[str, list[int]] = {}
        for m in self.mentions:
            part.setdefault(m.chain_id, []).append(m.id)
        for ids in part.values():
            ids.sort()
        return part

    def spans(self) -> dict[int, str]:
        return {m.id: m.span_text for m in self.mentions}


def build_graph(records: Iterable[Mention | Mapping]) -> CorefGraph:
    """Build the gold coreference graph from mention records.

    Every pair of mentions sharing a chain label is connected, i.e. each gold
    chain becomes a complete clique.  Mention ids must be dense (0..N-1) and
    unique; span text must be non-empty.
    """
    mentions: list[Mention] = []
    for rec in records:
        if isinstance(rec, Mention):
            mentions.append(rec)
        else:
            try:
                mentions.append(
                    Mention(
                        id=int(rec["id"]),
                        doc_id=str(rec["doc_id"]),
                        span_text=str(rec["span_text"]),
                        chain_id=str(rec["chain_id"]),
                    )
                )
            except KeyError as exc:
                raise DataError(f"mention record missing field {exc}") from None
    if not mentions:
        raise DataError("empty mention list")

    seen: set[int] = set()
    for m in mentions:
        if m.id in seen:
            raise DataError(f"duplicate mention id {m.id}")
        seen.add(m.id)
        if not m.span_text:
            raise DataError(f"mention {m.id} has empty span text")
    n = len(mentions)
    if seen != set(range(n)):
        raise DataError(f"mention ids must be dense 0..{n - 1}")

    mentions.sort(key=lambda m: m.id)
    by_chain: dict[str, list[int]] = {}
    for m in mentions:
        by_chain.setdefault(m.chain_id, []).append(m.id)
    edges = frozenset(
        pair
        for ids in by_chain.values()
        for pair in itertools.combinations(sorted(ids), 2)
    )
    return CorefGraph(mentions=tuple(mentions), edges=edges)


def normalized_adjacency(
    graph: CorefGraph, observed: Sequence[Edge], sparse: bool = False
):
    """Symmetric renormalized adjacency D^(-1/2) (A + I) D^(-1/2).

    `observed` is the edge set visible to the encoder (typically the training
    positives).  Self-loops are always added, so isolated nodes keep a unit
    diagonal entry.  Returns a dense ndarray, or a CSR array when `sparse`.
    """
    n = graph.n
    rows: list[int] = []
    cols: list[int] = []
    degree = np.ones(n)  # self-loop contributes 1 to every node
    for i, j in observed:
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"edge ({i}, {j}) out of range for {n} nodes")
        if i == j:
            raise DataError(f"self-loop ({i}, {i}) in observed edges")
        rows.append(i)
        cols.append(j)
        degree[i] += 1
        degree[j] += 1

    inv_sqrt = 1.0 / np.sqrt(degree)
    r = np.array(rows + cols + list(range(n)), dtype=np.int64)
    c = np.array(cols + rows + list(range(n)), dtype=np.int64)
    vals = inv_sqrt[r] * inv_sqrt[c]
    mat = sp.csr_array((vals, (r, c)), shape=(n, n))
    if sparse:
        return mat
    return mat.toarray()


@dataclass(frozen=True)
class FeatureMatrix:
    """Node features X: either an external N x d matrix or the N x N identity."""

    kind: str  # "external" | "identity"
    n_rows: int
    n_cols: int
    values: np.ndarray | None = field(default=None, repr=False)

    @property
    def data(self) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(self.n_rows)
        assert self.values is not None
        return self.values


def external_features(array: np.ndarray) -> FeatureMatrix:
    array = np.asarray(array, dtype=np.float64)
    if array.ndim != 2:
        raise DataError(f"feature matrix must be 2-d, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise DataError("feature matrix contains non-finite values")
    return FeatureMatrix(
        kind="external", n_rows=array.shape[0], n_cols=array.shape[1], values=array
    )


def identity_features(graph: CorefGraph) -> FeatureMatrix:
    """Featureless setting: X is the identity matrix of A."""
    return FeatureMatrix(kind="identity", n_rows=graph.n, n_cols=graph.n)


@dataclass(frozen=True)
class EdgeSplit:
    """Disjoint train/val/test positive edges plus balanced sampled negatives.

    The three positive sets partition the full gold edge set.  Negative pairs
    are non-edges of the gold graph, never overlapping each other.
    """

    train_pos: tuple[Edge, ...]
    val_pos: tuple[Edge, ...]
    test_pos: tuple[Edge, ...]
    val_neg: tuple[Edge, ...]
    test_neg: tuple[Edge, ...]
    seed: int

    def __post_init__(self):
        pos_sets = [set(self.train_pos), set(self.val_pos), set(self.test_pos)]
        for a, b in itertools.combinations(pos_sets, 2):
            if a & b:
                raise DataError("positive edge sets overlap")
        full = pos_sets[0] | pos_sets[1] | pos_sets[2]
        negs = set(self.val_neg) | set(self.test_neg)
        if len(negs) != len(self.val_neg) + len(self.test_neg):
            raise DataError("negative pairs overlap between val and test")
        if negs & full:
            raise DataError("negative pair coincides with a gold edge")
        for i, j in itertools.chain(full, negs):
            if i == j:
                raise DataError(f"self-loop pair ({i}, {i}) in split")
            if i > j:
                raise DataError(f"pair ({i}, {j}) not stored with i < j")

    @property
    def n_edges(self) -> int:
        return len(self.train_pos) + len(self.val_pos) + len(self.test_pos)

    def all_pos(self) -> frozenset[Edge]:
        return frozenset(self.train_pos) | set(self.val_pos) | set(self.test_pos)

    def observed_edges(self, include_val: bool = False) -> list[Edge]:
        obs = list(self.train_pos)
        if include_val:
            obs.extend(self.val_pos)
        return obs


def _sample_non_edges(
    graph: CorefGraph, count: int, rng: np.random.Generator
) -> list[Edge]:
    n = graph.n
    total_pairs = n * (n - 1) // 2
    available = total_pairs - len(graph.edges)
    if count > available:
        raise DataError(
            f"graph too dense for negative sampling: need {count} non-edges, "
            f"only {available} exist ({total_pairs} pairs, {len(graph.edges)} edges)"
        )
    if count == 0:
        return []

    # Enumerate when the non-edge space is small relative to the request;
    # otherwise rejection-sample.  Both paths are deterministic per seed.
    if total_pairs <= 20_000 or available <= 4 * count:
        non_edges = [
            (i, j)
            for i in range(n)
            for j in range(i + 1, n)
            if (i, j) not in graph.edges
        ]
        idx = rng.choice(len(non_edges), size=count, replace=False)
        return [non_edges[k] for k in idx]

    chosen: list[Edge] = []
    seen: set[Edge] = set()
    while len(chosen) < count:
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n))
        if i == j:
            continue
        pair = _norm_edge(i, j)
        if pair in graph.edges or pair in seen:
            continue
        seen.add(pair)
        chosen.append(pair)
    return chosen


def split_edges(
    graph: CorefGraph, val_frac: float, test_frac: float, seed: int
) -> EdgeSplit:
    """Mask a fraction of the edges for validation and testing.

    Sizes are round-half-up of frac * |E|; the remainder stays in training.
    An equal number of non-edges is sampled uniformly without replacement for
    each of the val and test sets, rejecting anything in the gold edge set.
    Deterministic for a fixed seed.
    """
    if val_frac < 0 or test_frac < 0 or val_frac + test_frac >= 1:
        raise DataError(
            f"invalid split fractions ({val_frac}, {test_frac}): "
            "must be non-negative and sum below 1"
        )
    edges = graph.sorted_edges()
    if not edges:
        raise DataError("graph has no edges to split")

    rng = np.random.default_rng(seed)
    n_edges = len(edges)
    n_val = _round_half_up(val_frac * n_edges)
    n_test = _round_half_up(test_frac * n_edges)

    order = rng.permutation(n_edges)
    val_pos = tuple(edges[k] for k in order[:n_val])
    test_pos = tuple(edges[k] for k in order[n_val : n_val + n_test])
    train_pos = tuple(edges[k] for k in order[n_val + n_test :])

    negatives = _sample_non_edges(graph, n_val + n_test, rng)
    return EdgeSplit(
        train_pos=train_pos,
        val_pos=val_pos,
        test_pos=test_pos,
        val_neg=tuple(negatives[:n_val]),
        test_neg=tuple(negatives[n_val:]),
        seed=seed,
    )


def subsample_training(split: EdgeSplit, fraction: float, seed: int) -> EdgeSplit:
    """Reduce the training positives to round(fraction * |E|) edges.

    The fraction is expressed relative to the FULL edge set, so e.g. 0.05
    keeps 5% of all gold edges for training regardless of how many were
    masked.  Val/test sets are untouched.  Requests above the available
    training edges are capped with a warning.
    """
    if not 0 < fraction <= 1:
        raise DataError(f"training fraction must be in (0, 1], got {fraction}")
    request = _round_half_up(fraction * split.n_edges)
    if request >= len(split.train_pos):
        if request > len(split.train_pos):
            warnings.warn(
                f"requested {request} training edges but only "
                f"{len(split.train_pos)} available; keeping all",
                stacklevel=2,
            )
        return split
    rng = np.random.default_rng(seed)
    keep = rng.choice(len(split.train_pos), size=request, replace=False)
    new_train = tuple(split.train_pos[k] for k in sorted(keep))
    return replace(split, train_pos=new_train)
