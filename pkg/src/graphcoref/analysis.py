"""Post-hoc analyses: edit-distance difficulty of true positives, a tuned
cosine pairwise baseline, and the low-training-data ablation grid."""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Collection, Mapping, Sequence

import numpy as np

from .errors import DataError
from .graph import (
    CorefGraph,
    Edge,
    EdgeSplit,
    FeatureMatrix,
    subsample_training,
)
from .metrics import (
    average_precision,
    coref_report,
    reconstruct_chains,
    roc_auc,
)
from .models import ModelConfig, TrainedModel, train


def levenshtein(a: str, b: str) -> int:
    """Minimal insert/delete/substitute count between two strings, computed
    over Unicode code points with the classic two-row dynamic program."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


# ---------------------------------------------------------------------------
# True-positive difficulty report


@dataclass(frozen=True)
class TPStats:
    tp_count: int
    mean_levenshtein: float | None  # None when the model produced no TPs


@dataclass(frozen=True)
class TPReport:
    per_model: dict[str, TPStats]

    def table(self) -> str:
        lines = ["model\ttp_count\tmean_levenshtein"]
        for name, stats in self.per_model.items():
            mean = "absent" if stats.mean_levenshtein is None else repr(stats.mean_levenshtein)
            lines.append(f"{name}\t{stats.tp_count}\t{mean}")
        return "\n".join(lines) + "\n"


def _norm_pair(pair: Edge) -> Edge:
    i, j = pair
    return (i, j) if i < j else (j, i)


def tp_levenshtein_report(
    predictions: Mapping[str, Sequence[tuple[Edge, bool]]],
    gold_pairs: Collection[Edge],
    spans: Mapping[int, str],
) -> TPReport:
    """Mean edit distance between the spans of each model's true positives.

    Every model must classify the identical pair set.  A true positive is a
    gold-coreferent pair the model marked positive; a model with no true
    positives gets a flagged absent mean instead of a number.
    """
    if not predictions:
        raise DataError("no model predictions given")
    gold = {_norm_pair(p) for p in gold_pairs}
    pair_sets = {
        name: {_norm_pair(p) for p, _ in preds} for name, preds in predictions.items()
    }
    reference = next(iter(pair_sets.values()))
    for name, pairs in pair_sets.items():
        if pairs != reference:
            raise DataError(f"model '{name}' predicts a different pair set")
    if not gold <= reference:
        raise DataError("gold-positive pairs must be a subset of the classified pairs")

    per_model: dict[str, TPStats] = {}
    for name, preds in predictions.items():
        tps = sorted({_norm_pair(p) for p, positive in preds if positive} & gold)
        distances = []
        for i, j in tps:
            if i not in spans or j not in spans:
                missing = i if i not in spans else j
                raise DataError(f"no span for mention {missing}")
            distances.append(levenshtein(spans[i], spans[j]))
        mean = float(np.mean(distances)) if distances else None
        per_model[name] = TPStats(tp_count=len(tps), mean_levenshtein=mean)
    return TPReport(per_model=per_model)


# ---------------------------------------------------------------------------
# Cosine pairwise baseline


def _feature_array(features) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.data
    return np.asarray(features, dtype=np.float64)


def surface_hash_features(spans: Sequence[str], dim: int = 64) -> np.ndarray:
    """Hashed character-trigram counts per span, L2-normalized.

    This is the surface-similarity signal the pairwise baseline classifies
    with: near-identical strings share most trigram buckets.  Spans shorter
    than three characters hash as a single gram.
    """
    if dim < 1:
        raise DataError("feature dimension must be positive")
    x = np.zeros((len(spans), dim))
    for row, span in enumerate(spans):
        grams = [span[k : k + 3] for k in range(len(span) - 2)] or [span]
        for gram in grams:
            x[row, zlib.crc32(gram.encode("utf-8")) % dim] += 1.0
        norm = np.linalg.norm(x[row])
        if norm > 0:
            x[row] /= norm
    return x


def cosine_pairwise_baseline(
    features, pairs: Sequence[Edge], threshold: float
) -> list[tuple[Edge, bool, float]]:
    """Classify each pair by cosine similarity of its feature vectors.

    Positive iff cosine >= threshold.  Zero-norm vectors score 0 against
    everything.
    """
    if not -1.0 <= threshold <= 1.0:
        raise DataError(f"cosine threshold must be in [-1, 1], got {threshold}")
    x = _feature_array(features)
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = x / safe[:, None]
    unit[norms == 0] = 0.0
    out: list[tuple[Edge, bool, float]] = []
    for i, j in pairs:
        score = float(unit[i] @ unit[j])
        out.append(((i, j), score >= threshold, score))
    return out


def _best_f1_threshold(
    scores: np.ndarray, labels: np.ndarray, grid: np.ndarray
) -> tuple[float, float]:
    """Threshold from the grid with the best link F1 (ties: lowest value)."""
    best_t, best_f1 = float(grid[0]), -1.0
    for t in grid:
        predicted = scores >= t
        tp = float(np.sum(predicted & (labels == 1)))
        fp = float(np.sum(predicted & (labels == 0)))
        fn = float(np.sum(~predicted & (labels == 1)))
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        if f1 > best_f1:
            best_t, best_f1 = float(t), f1
    return best_t, best_f1


def tune_cosine_threshold(
    features, pos_pairs: Sequence[Edge], neg_pairs: Sequence[Edge]
) -> tuple[float, float]:
    """Sweep 101 evenly spaced thresholds in [-1, 1]; return the one with the
    best link F1 on the given labeled pairs (ties go to the lowest threshold)."""
    if not pos_pairs or not neg_pairs:
        raise DataError("threshold tuning needs positive and negative pairs")
    scored = cosine_pairwise_baseline(features, list(pos_pairs) + list(neg_pairs), 0.0)
    scores = np.array([s for _, _, s in scored])
    labels = np.concatenate([np.ones(len(pos_pairs)), np.zeros(len(neg_pairs))])
    return _best_f1_threshold(scores, labels, np.linspace(-1.0, 1.0, 101))


def tune_link_threshold(model: TrainedModel, split: EdgeSplit) -> tuple[float, float]:
    """Decision threshold for link probabilities, tuned on validation pairs.

    The weighted reconstruction loss deliberately up-weights positive cells,
    which shifts the probability calibration; a validation-tuned cut keeps the
    held-out test pairs untouched while adapting to that shift.  Sweeps 101
    evenly spaced cuts in [0, 1] and picks the best link F1; ties go to the
    lowest cut.  Only validation pair labels are consulted — never the test
    pairs, and never the gold chains (which would encode test links).
    """
    if not split.val_pos or not split.val_neg:
        raise DataError("threshold tuning needs validation positives and negatives")
    pairs = list(split.val_pos) + list(split.val_neg)
    scores = model.predict_pairs(pairs)
    labels = np.concatenate([np.ones(len(split.val_pos)), np.zeros(len(split.val_neg))])
    return _best_f1_threshold(scores, labels, np.linspace(0.0, 1.0, 101))


# ---------------------------------------------------------------------------
# Split evaluation shared by eval / ablate commands


@dataclass
class SplitEvaluation:
    scores: dict[str, float]
    chains: list[list[int]]


def evaluate_split(
    model: TrainedModel,
    graph: CorefGraph,
    split: EdgeSplit,
    *,
    threshold: float | None = None,
    tune_on_val: bool = False,
    include_val: bool = True,
) -> SplitEvaluation:
    """Score a trained model on the split's held-out test pairs.

    Link-level AP/AUC come from the test positives and negatives; chain-level
    scores come from union-find reconstruction over the observed edges (train,
    plus val unless excluded) together with the positively classified test
    pairs.  The decision threshold is the model's configured one, an explicit
    override, or (tune_on_val) the best-F1 cut on validation pairs.
    """
    if threshold is not None and tune_on_val:
        raise DataError("pass either an explicit threshold or tune_on_val, not both")
    if tune_on_val:
        tau, _ = tune_link_threshold(model, split)
    elif threshold is not None:
        tau = threshold
    else:
        tau = model.config.threshold
    test_pairs = list(split.test_pos) + list(split.test_neg)
    if not test_pairs:
        raise DataError("split has no test pairs to evaluate")
    labels = np.concatenate([np.ones(len(split.test_pos)), np.zeros(len(split.test_neg))])
    probs = model.predict_pairs(test_pairs)

    classified = [(pair, bool(p >= tau)) for pair, p in zip(test_pairs, probs)]
    observed = split.observed_edges(include_val=include_val)
    sys_chains = reconstruct_chains(graph.n, observed, classified)
    gold_chains = list(graph.gold_partition().values())

    scores = coref_report(gold_chains, sys_chains)
    scores["ap"] = average_precision(probs, labels)
    scores["auc"] = roc_auc(probs, labels)
    scores["threshold"] = tau
    return SplitEvaluation(scores=scores, chains=sys_chains)


# ---------------------------------------------------------------------------
# Low-data ablation grid


@dataclass(frozen=True)
class AblationCell:
    variant: str
    fraction: float
    seed: int
    conll: float | None = None
    ap: float | None = None
    auc: float | None = None
    error: str | None = None


@dataclass
class AblationResult:
    variants: tuple[str, ...]
    fractions: tuple[float, ...]  # ascending
    seeds: tuple[int, ...]
    cells: list[AblationCell]

    def cell(self, variant: str, fraction: float, seed: int) -> AblationCell:
        for c in self.cells:
            if c.variant == variant and c.fraction == fraction and c.seed == seed:
                return c
        raise KeyError((variant, fraction, seed))

    def mean_conll(self, variant: str, fraction: float) -> float | None:
        vals = [
            c.conll
            for c in self.cells
            if c.variant == variant and c.fraction == fraction and c.error is None
        ]
        return float(np.mean(vals)) if vals else None

    def long_tsv(self) -> str:
        lines = ["variant\tfraction\tseed\tconll\tap\tauc\terror"]
        for c in self.cells:
            fields = [
                c.variant,
                repr(c.fraction),
                str(c.seed),
                "" if c.conll is None else repr(c.conll),
                "" if c.ap is None else repr(c.ap),
                "" if c.auc is None else repr(c.auc),
                c.error or "",
            ]
            lines.append("\t".join(fields))
        return "\n".join(lines) + "\n"

    def wide_tsv(self) -> str:
        """Variant rows x fraction columns, mean CONLL per cell."""
        header = "variant\t" + "\t".join(repr(f) for f in self.fractions)
        lines = [header]
        for v in self.variants:
            row = [v]
            for f in self.fractions:
                mean = self.mean_conll(v, f)
                row.append("failed" if mean is None else repr(mean))
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def _run_cell(
    graph: CorefGraph,
    features: FeatureMatrix,
    split: EdgeSplit,
    base_config: ModelConfig,
    variant: str,
    fraction: float,
    seed: int,
    include_val: bool,
    tune_threshold: bool,
) -> AblationCell:
    try:
        sub = subsample_training(split, fraction, seed=seed)
        config = replace(base_config, seed=seed)
        model = train(graph, sub, features, config)
        ev = evaluate_split(
            model, graph, sub, include_val=include_val, tune_on_val=tune_threshold
        )
        return AblationCell(
            variant=variant,
            fraction=fraction,
            seed=seed,
            conll=ev.scores["conll_f1"],
            ap=ev.scores["ap"],
            auc=ev.scores["auc"],
        )
    except Exception as exc:  # cell failures are recorded, the grid continues
        return AblationCell(
            variant=variant, fraction=fraction, seed=seed, error=f"{type(exc).__name__}: {exc}"
        )


def run_ablation(
    graph: CorefGraph,
    features_by_variant: Mapping[str, FeatureMatrix],
    split: EdgeSplit,
    fractions: Sequence[float],
    seeds: Sequence[int],
    base_config: ModelConfig,
    *,
    threads: int = 1,
    include_val: bool = True,
    tune_threshold: bool = True,
) -> AblationResult:
    """Train and score every (variant, fraction, seed) cell on a fixed split.

    Validation and test pairs never change; only the training positives are
    subsampled.  Each cell's decision threshold is tuned on the (fixed)
    validation pairs unless disabled.  Cells are independent, so they may run
    on a thread pool.
    """
    if not features_by_variant:
        raise DataError("ablation needs at least one feature variant")
    if not fractions:
        raise DataError("ablation needs at least one training fraction")
    if not seeds:
        raise DataError("ablation needs at least one seed")
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise DataError(f"training fraction must be in (0, 1], got {f}")
    if threads < 1:
        raise DataError("threads must be >= 1")

    fractions = tuple(sorted(float(f) for f in fractions))
    variants = tuple(features_by_variant)
    seeds = tuple(int(s) for s in seeds)
    jobs = [
        (variant, fraction, seed)
        for variant in variants
        for fraction in fractions
        for seed in seeds
    ]

    def worker(job: tuple[str, float, int]) -> AblationCell:
        variant, fraction, seed = job
        return _run_cell(
            graph,
            features_by_variant[variant],
            split,
            base_config,
            variant,
            fraction,
            seed,
            include_val,
            tune_threshold,
        )

    if threads == 1:
        cells = [worker(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(worker, jobs))
    return AblationResult(
        variants=variants, fractions=fractions, seeds=seeds, cells=cells
    )


def save_ablation_plot(result: AblationResult, path) -> None:
    """Line plot of mean CONLL vs training fraction, one line per variant."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "ablation"
    fig, ax = plt.subplots(figsize=(6, 4))
    for variant in result.variants:
        ys = [result.mean_conll(variant, f) for f in result.fractions]
        xs = [f for f, y in zip(result.fractions, ys) if y is not None]
        ys = [y for y in ys if y is not None]
        ax.plot(xs, ys, marker="o", label=variant)
    ax.set_xlabel("training fraction")
    ax.set_ylabel("CONLL F1")
    ax.set_ylim(0.0, 1.0)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
