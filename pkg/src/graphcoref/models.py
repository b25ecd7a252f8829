"""Model configuration, losses, Adam, and the training loop.

Reconstruction target is the dense matrix T = A_train + I.  With logits
L = Z Z^T the per-cell weighted cross-entropy is

    cell = (1 - t) * l + (1 + (pos_weight - 1) * t) * softplus(-l)

and the loss is norm * mean(cell) over all N^2 cells, where

    pos_weight = (N^2 - nnz) / nnz        nnz = number of ones in T
    norm       = N^2 / (2 * (N^2 - nnz))

A target that is all ones makes both expressions degenerate; that case
falls back to pos_weight = norm = 1.  The variational model adds

    kl = -(1 / 2N) * sum(1 + 2*logsig - mu^2 - exp(2*logsig))

Training is plain full-batch Adam with hand-computed gradients.  All
randomness comes from three child streams of the config seed: [seed, 0]
for weight init, [seed, 1] for reparameterization noise, [seed, 2] for
dropout masks, so runs are reproducible bit-for-bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, TrainingDiverged
from .gcn import (
    KIND_GAE,
    KIND_VGAE,
    EncoderWeights,
    encoder_backward,
    encoder_forward,
    init_weights,
)
from .graph import CorefGraph, Edge, EdgeSplit, FeatureMatrix, normalized_adjacency
from .metrics import average_precision, roc_auc

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    kind: str = KIND_GAE
    hidden_dim: int = 64
    latent_dim: int = 32
    epochs: int = 200
    lr: float = 0.001
    seed: int = 0
    dropout: float = 0.0
    threshold: float = 0.5
    adjacency: str = "dense"

    def __post_init__(self):
        if self.kind not in (KIND_GAE, KIND_VGAE):
            raise DataError(f"unknown model kind '{self.kind}'")
        if self.hidden_dim < 1 or self.latent_dim < 1:
            raise DataError("hidden_dim and latent_dim must be positive")
        if self.epochs < 1:
            raise DataError("epochs must be positive")
        if not self.lr > 0:
            raise DataError("learning rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0.0 < self.threshold < 1.0:
            raise DataError(f"threshold must be in (0, 1), got {self.threshold}")
        if self.adjacency not in ("dense", "sparse"):
            raise DataError(f"adjacency must be 'dense' or 'sparse', got '{self.adjacency}'")
        if self.seed < 0:
            raise DataError("seed must be non-negative")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    loss: float
    recon: float
    kl: float
    val_ap: float
    val_auc: float


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus_neg(logits: np.ndarray) -> np.ndarray:
    # softplus(-l), stable for large |l|
    return np.log1p(np.exp(-np.abs(logits))) + np.maximum(-logits, 0.0)


def pair_logits(z: np.ndarray, pairs: Sequence[Edge]) -> np.ndarray:
    """Logits z_i . z_j for each pair."""
    if len(pairs) == 0:
        return np.zeros(0)
    idx = np.asarray(pairs, dtype=np.intp)
    if idx.min() < 0 or idx.max() >= z.shape[0]:
        raise DataError("pair index out of range")
    return np.einsum("ij,ij->i", z[idx[:, 0]], z[idx[:, 1]])


def decode_pair(z: np.ndarray, i: int, j: int) -> float:
    """Link probability sigmoid(z_i . z_j) for one pair."""
    return float(sigmoid(pair_logits(z, [(i, j)])[0]))


def training_target(n: int, train_edges: Sequence[Edge]) -> np.ndarray:
    """T = A_train + I as a dense 0/1 matrix."""
    t = np.eye(n)
    for i, j in train_edges:
        t[i, j] = 1.0
        t[j, i] = 1.0
    return t


def loss_weights(target: np.ndarray) -> tuple[float, float]:
    """(pos_weight, norm) for a 0/1 target matrix."""
    n_sq = target.size
    nnz = int(np.count_nonzero(target))
    if nnz == 0:
        raise DataError("reconstruction target has no positive cells")
    if nnz == n_sq:
        return 1.0, 1.0
    pos_weight = (n_sq - nnz) / nnz
    norm = n_sq / (2.0 * (n_sq - nnz))
    return pos_weight, norm


def recon_loss_and_grad(
    z: np.ndarray, target: np.ndarray, pos_weight: float, norm: float
) -> tuple[float, np.ndarray]:
    """Weighted cross-entropy over all cells of sigmoid(Z Z^T) vs target.

    Returns (loss, dloss/dZ).
    """
    logits = z @ z.T
    t = target
    weight_pos = 1.0 + (pos_weight - 1.0) * t
    cells = (1.0 - t) * logits + weight_pos * _softplus_neg(logits)
    loss = norm * float(cells.mean())

    # d cell / d logit, scaled by norm / N^2 from the mean
    g = ((1.0 - t) - weight_pos * sigmoid(-logits)) * (norm / t.size)
    dz = (g + g.T) @ z
    return loss, dz


def kl_loss_and_grad(
    mu: np.ndarray, logsig: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """KL divergence of N(mu, diag(sig^2)) from the standard normal, averaged over nodes."""
    n = mu.shape[0]
    kl = -(0.5 / n) * float(np.sum(1.0 + 2.0 * logsig - mu**2 - np.exp(2.0 * logsig)))
    dmu = mu / n
    dlogsig = (np.exp(2.0 * logsig) - 1.0) / n
    return kl, dmu, dlogsig


class AdamState:
    """First/second-moment accumulators for one set of named parameters."""

    def __init__(self, weights: EncoderWeights):
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in weights.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in weights.params.items()}

    def step(self, weights: EncoderWeights, grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        bc1 = 1.0 - ADAM_BETA1**self.t
        bc2 = 1.0 - ADAM_BETA2**self.t
        for name, g in grads.items():
            m = self.m[name] = ADAM_BETA1 * self.m[name] + (1.0 - ADAM_BETA1) * g
            v = self.v[name] = ADAM_BETA2 * self.v[name] + (1.0 - ADAM_BETA2) * g * g
            weights.params[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


def model_loss(
    adj,
    features: FeatureMatrix,
    weights: EncoderWeights,
    target: np.ndarray,
    pos_weight: float,
    norm: float,
    *,
    eps: np.ndarray | None = None,
    noise_scale: float | None = None,
    force_logsig: float | None = None,
    dropout: float = 0.0,
    drop_rng: np.random.Generator | None = None,
) -> tuple[float, float, float, dict[str, np.ndarray]]:
    """One full forward/backward pass shared by training and gradient checks.

    Returns (loss, recon, kl, weight gradients).  `eps` is the standard-normal
    draw used for reparameterization (variational model) or additive output
    noise scaled by `noise_scale` (deterministic model); passing it explicitly
    keeps the function a pure, finite-differencable map of the weights.
    """
    trace = encoder_forward(adj, features, weights, dropout=dropout, rng=drop_rng)

    if weights.kind == KIND_GAE:
        z = trace["z"]
        if noise_scale is not None:
            if eps is None:
                raise DataError("noise_scale requires eps")
            z = z + noise_scale * eps
        recon, dz = recon_loss_and_grad(z, target, pos_weight, norm)
        grads = encoder_backward(adj, weights, trace, dz=dz)
        return recon, recon, 0.0, grads

    if eps is None:
        raise DataError("variational model requires eps")
    mu = trace["mu"]
    forced = force_logsig is not None
    logsig = np.full_like(mu, force_logsig) if forced else trace["logsig"]
    z = mu + np.exp(logsig) * eps

    recon, dz = recon_loss_and_grad(z, target, pos_weight, norm)
    kl, dmu_kl, dlogsig_kl = kl_loss_and_grad(mu, logsig)
    loss = recon + kl

    if forced:
        # Pinning the variance head turns the variational model into its
        # deterministic counterpart plus fixed-scale output noise.  The KL term
        # is still reported, but training follows reconstruction only, so the
        # trajectory is directly comparable with that counterpart.
        dmu = dz
        dlogsig = np.zeros_like(mu)
    else:
        dmu = dz + dmu_kl
        dlogsig = dz * eps * np.exp(logsig) + dlogsig_kl
    grads = encoder_backward(adj, weights, trace, dmu=dmu, dlogsig=dlogsig)
    return loss, recon, kl, grads


def _check_finite(epoch: int, loss: float, grads: dict[str, np.ndarray]) -> None:
    if not math.isfinite(loss):
        raise TrainingDiverged(epoch, f"loss={loss!r}")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged(epoch, f"non-finite gradient in {name}")


@dataclass
class TrainedModel:
    config: ModelConfig
    weights: EncoderWeights
    embedding: np.ndarray
    history: list[EpochStats]

    @property
    def n_nodes(self) -> int:
        return self.embedding.shape[0]

    def predict_pairs(self, pairs: Sequence[Edge]) -> np.ndarray:
        """Link probability sigmoid(z_i . z_j) for each pair."""
        return sigmoid(pair_logits(self.embedding, pairs))

    def save(self, path: str | Path) -> None:
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "config": asdict(self.config),
            "weights": {
                "kind": self.weights.kind,
                "params": {k: v.tolist() for k, v in self.weights.params.items()},
            },
            "embedding": self.embedding.tolist(),
            "history": [asdict(h) for h in self.history],
        }
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        path = Path(path)
        with path.open(encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON ({exc.msg})") from None
        version = doc.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise DataError(
                f"{path}: unsupported model format_version {version!r}"
                f" (expected {MODEL_FORMAT_VERSION})"
            )
        try:
            config = ModelConfig(**doc["config"])
            weights = EncoderWeights(
                doc["weights"]["kind"],
                {k: np.array(v, dtype=np.float64) for k, v in doc["weights"]["params"].items()},
            )
            embedding = np.array(doc["embedding"], dtype=np.float64)
            history = [EpochStats(**h) for h in doc["history"]]
        except (KeyError, TypeError) as exc:
            raise DataError(f"{path}: malformed model file ({exc})") from None
        return cls(config=config, weights=weights, embedding=embedding, history=history)


def _val_scores(
    z: np.ndarray, split: EdgeSplit
) -> tuple[float, float]:
    pairs = list(split.val_pos) + list(split.val_neg)
    if not pairs:
        return float("nan"), float("nan")
    labels = np.concatenate(
        [np.ones(len(split.val_pos)), np.zeros(len(split.val_neg))]
    )
    probs = sigmoid(pair_logits(z, pairs))
    return average_precision(probs, labels), roc_auc(probs, labels)


def train(
    graph: CorefGraph,
    split: EdgeSplit,
    features: FeatureMatrix,
    config: ModelConfig,
    *,
    force_logsig: float | None = None,
    noise_scale: float | None = None,
) -> TrainedModel:
    """Train on the split's training edges; returns the model with history.

    Validation AP/AUC are computed after each epoch's update from a
    deterministic forward pass (no dropout; the variational model scores
    with its means).
    """
    if features.n_rows != graph.n:
        raise DataError(
            f"feature rows ({features.n_rows}) do not match graph size ({graph.n})"
        )
    rng_init = np.random.default_rng([config.seed, 0])
    rng_noise = np.random.default_rng([config.seed, 1])
    rng_drop = np.random.default_rng([config.seed, 2])

    adj = normalized_adjacency(
        graph, split.train_pos, sparse=config.adjacency == "sparse"
    )
    target = training_target(graph.n, split.train_pos)
    pos_weight, norm = loss_weights(target)

    weights = init_weights(
        config.kind, features.n_cols, config.hidden_dim, config.latent_dim, rng_init
    )
    adam = AdamState(weights)
    latent_shape = (graph.n, config.latent_dim)

    history: list[EpochStats] = []
    z_eval = np.zeros(latent_shape)
    for epoch in range(1, config.epochs + 1):
        eps = None
        if config.kind == KIND_VGAE or noise_scale is not None:
            eps = rng_noise.standard_normal(latent_shape)
        # Overflow in the forward/backward pass surfaces as non-finite loss or
        # gradients, which the explicit check below turns into a diagnosable
        # exception; numpy's transient warnings would only duplicate it.
        with np.errstate(over="ignore", invalid="ignore"):
            loss, recon, kl, grads = model_loss(
                adj,
                features,
                weights,
                target,
                pos_weight,
                norm,
                eps=eps,
                noise_scale=noise_scale,
                force_logsig=force_logsig,
                dropout=config.dropout,
                drop_rng=rng_drop if config.dropout > 0 else None,
            )
        _check_finite(epoch, loss, grads)
        adam.step(weights, grads, config.lr)

        trace = encoder_forward(adj, features, weights)
        z_eval = trace["z"] if config.kind == KIND_GAE else trace["mu"]
        val_ap, val_auc = _val_scores(z_eval, split)
        history.append(
            EpochStats(
                epoch=epoch,
                loss=float(loss),
                recon=float(recon),
                kl=float(kl),
                val_ap=val_ap,
                val_auc=val_auc,
            )
        )

    return TrainedModel(
        config=config, weights=weights, embedding=z_eval, history=history
    )
