"""Coreference scoring (MUC, B-cubed, CEAF-e, their CONLL mean), ranking
metrics for link prediction, and chain reconstruction from predicted links."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Collection, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import rankdata

from .errors import DataError
from .graph import Edge


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def connected_components(n: int, edges: Sequence[Edge]) -> list[list[int]]:
    """Components of an undirected graph; isolated nodes become singletons.

    Output is deterministic regardless of edge order: each component sorted,
    components ordered by smallest member.
    """
    uf = UnionFind(n)
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise DataError(f"edge ({i}, {j}) out of range for {n} mentions")
        uf.union(i, j)
    groups: dict[int, list[int]] = {}
    for node in range(n):
        groups.setdefault(uf.find(node), []).append(node)
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def reconstruct_chains(
    n: int,
    observed_edges: Sequence[Edge],
    classified_pairs: Sequence[tuple[Edge, bool]] = (),
) -> list[list[int]]:
    """Chains = connected components of the observed edges together with the
    positively classified pairs.  Mentions linked by neither are singletons."""
    edges = list(observed_edges) + [pair for pair, positive in classified_pairs if positive]
    return connected_components(n, edges)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    degenerate: bool = False

    @property
    def f1(self) -> float:
        if self.precision + self.recall == 0.0:
            return 0.0
        return 2.0 * self.precision * self.recall / (self.precision + self.recall)


def _as_partition(clusters: Sequence[Collection[int]], name: str) -> list[set[int]]:
    out: list[set[int]] = []
    seen: set[int] = set()
    for c in clusters:
        s = set(c)
        if not s:
            raise DataError(f"{name} partition contains an empty cluster")
        if s & seen:
            raise DataError(f"{name} partition has overlapping clusters")
        seen |= s
        out.append(s)
    if not out:
        raise DataError(f"{name} partition is empty")
    return out


def _check_universe(gold: list[set[int]], sys: list[set[int]]) -> None:
    gu = set().union(*gold)
    su = set().union(*sys)
    if gu != su:
        raise DataError(
            f"partitions cover different mentions ({len(gu)} gold vs {len(su)} system)"
        )


def muc(gold: Sequence[Collection[int]], sys: Sequence[Collection[int]]) -> PRF:
    """Link-based score of Vilain et al.

    Recall counts, per gold chain, the links that survive after the chain is
    partitioned by the system clusters; precision is the same with the roles
    reversed.  A side made only of singletons has no links at all; that
    degenerate case scores 0 and is flagged.
    """
    g = _as_partition(gold, "gold")
    s = _as_partition(sys, "system")
    _check_universe(g, s)

    def links_kept(chains: list[set[int]], other: list[set[int]]) -> tuple[int, int]:
        num = 0
        den = 0
        for chain in chains:
            parts = sum(1 for o in other if o & chain)
            num += len(chain) - parts
            den += len(chain) - 1
        return num, den

    rn, rd = links_kept(g, s)
    pn, pd = links_kept(s, g)
    if rd == 0 or pd == 0:
        return PRF(precision=0.0, recall=0.0, degenerate=True)
    return PRF(precision=pn / pd, recall=rn / rd)


def b_cubed(gold: Sequence[Collection[int]], sys: Sequence[Collection[int]]) -> PRF:
    """Mention-level average of per-mention precision/recall."""
    g = _as_partition(gold, "gold")
    s = _as_partition(sys, "system")
    _check_universe(g, s)
    gold_of = {m: c for c in g for m in c}
    sys_of = {m: c for c in s for m in c}
    p_sum = 0.0
    r_sum = 0.0
    for m in gold_of:
        overlap = len(gold_of[m] & sys_of[m])
        p_sum += overlap / len(sys_of[m])
        r_sum += overlap / len(gold_of[m])
    n = len(gold_of)
    return PRF(precision=p_sum / n, recall=r_sum / n)


def ceaf_e(gold: Sequence[Collection[int]], sys: Sequence[Collection[int]]) -> PRF:
    """Entity-based CEAF with similarity phi4 = 2|R & S| / (|R| + |S|).

    The alignment between gold and system clusters is the one-to-one matching
    that maximizes total similarity (solved exactly as an assignment problem).
    """
    g = _as_partition(gold, "gold")
    s = _as_partition(sys, "system")
    _check_universe(g, s)
    phi = np.zeros((len(g), len(s)))
    for a, gc in enumerate(g):
        for b, sc in enumerate(s):
            inter = len(gc & sc)
            if inter:
                phi[a, b] = 2.0 * inter / (len(gc) + len(sc))
    rows, cols = linear_sum_assignment(-phi)
    total = float(phi[rows, cols].sum())
    return PRF(precision=total / len(s), recall=total / len(g))


def conll_f1(gold: Sequence[Collection[int]], sys: Sequence[Collection[int]]) -> float:
    """Mean of the MUC, B-cubed and CEAF-e F1 scores."""
    return (muc(gold, sys).f1 + b_cubed(gold, sys).f1 + ceaf_e(gold, sys).f1) / 3.0


def coref_report(
    gold: Sequence[Collection[int]], sys: Sequence[Collection[int]]
) -> dict[str, float]:
    scores = {"muc": muc(gold, sys), "b3": b_cubed(gold, sys), "ceaf_e": ceaf_e(gold, sys)}
    report: dict[str, float] = {}
    for name, prf in scores.items():
        report[f"{name}_p"] = prf.precision
        report[f"{name}_r"] = prf.recall
        report[f"{name}_f1"] = prf.f1
    report["conll_f1"] = (scores["muc"].f1 + scores["b3"].f1 + scores["ceaf_e"].f1) / 3.0
    return report


def _check_binary(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels, dtype=np.float64).ravel()
    if labels.shape != scores.shape:
        raise DataError("scores and labels must have the same length")
    if labels.size == 0:
        raise DataError("cannot rank an empty score list")
    if not np.all((labels == 0) | (labels == 1)):
        raise DataError("labels must be 0 or 1")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores must be finite")
    return scores, labels


def average_precision(scores, labels) -> float:
    """Mean, over positives in score-descending order, of precision at each
    positive.  Ties keep their input order (stable sort)."""
    scores, labels = _check_binary(scores, labels)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise DataError("average precision needs both a positive and a negative label")
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    cum_pos = np.cumsum(ranked)
    ranks = np.arange(1, labels.size + 1)
    return float((cum_pos[ranked == 1] / ranks[ranked == 1]).mean())


def roc_auc(scores, labels) -> float:
    """Probability a random positive outscores a random negative (ties count
    half), computed from the rank-sum statistic."""
    scores, labels = _check_binary(scores, labels)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("roc auc needs both a positive and a negative label")
    ranks = rankdata(scores)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
