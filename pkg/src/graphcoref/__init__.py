"""Event coreference resolution as graph reconstruction.

Coreference chains over event mentions are treated as a partially observed
undirected graph; a (variational) graph autoencoder learns node embeddings
whose inner products reconstruct the adjacency, and held-out mention pairs
are scored as link predictions.  The package also ships the surrounding
experiment harness: deterministic synthetic corpora, edge-split protocol,
chain metrics (MUC, B-cubed, CEAF-e, CONLL), a cosine surface baseline, and
ablation/difficulty analyses.
"""

from .analysis import (
    AblationCell,
    AblationResult,
    SplitEvaluation,
    TPReport,
    TPStats,
    cosine_pairwise_baseline,
    evaluate_split,
    levenshtein,
    run_ablation,
    surface_hash_features,
    tp_levenshtein_report,
    tune_cosine_threshold,
    tune_link_threshold,
)
from .errors import DataError, TrainingDiverged
from .gcn import (
    KIND_GAE,
    KIND_VGAE,
    EncoderWeights,
    encoder_backward,
    encoder_forward,
    glorot,
    init_weights,
)
from .graph import (
    CorefGraph,
    Edge,
    EdgeSplit,
    FeatureMatrix,
    Mention,
    build_graph,
    external_features,
    identity_features,
    normalized_adjacency,
    split_edges,
    subsample_training,
)
from .metrics import (
    PRF,
    UnionFind,
    average_precision,
    b_cubed,
    ceaf_e,
    conll_f1,
    connected_components,
    coref_report,
    muc,
    reconstruct_chains,
    roc_auc,
)
from .models import (
    AdamState,
    EpochStats,
    ModelConfig,
    TrainedModel,
    decode_pair,
    kl_loss_and_grad,
    loss_weights,
    model_loss,
    pair_logits,
    recon_loss_and_grad,
    sigmoid,
    train,
    training_target,
)
from .synth import GenParams, generate, write_corpus_files

__version__ = "0.1.0"

__all__ = [
    "AblationCell",
    "AblationResult",
    "AdamState",
    "CorefGraph",
    "DataError",
    "Edge",
    "EdgeSplit",
    "EncoderWeights",
    "EpochStats",
    "FeatureMatrix",
    "GenParams",
    "KIND_GAE",
    "KIND_VGAE",
    "Mention",
    "ModelConfig",
    "PRF",
    "SplitEvaluation",
    "TPReport",
    "TPStats",
    "TrainedModel",
    "TrainingDiverged",
    "UnionFind",
    "average_precision",
    "b_cubed",
    "build_graph",
    "ceaf_e",
    "conll_f1",
    "connected_components",
    "coref_report",
    "cosine_pairwise_baseline",
    "decode_pair",
    "encoder_backward",
    "encoder_forward",
    "evaluate_split",
    "external_features",
    "generate",
    "glorot",
    "identity_features",
    "init_weights",
    "kl_loss_and_grad",
    "levenshtein",
    "loss_weights",
    "model_loss",
    "muc",
    "normalized_adjacency",
    "pair_logits",
    "recon_loss_and_grad",
    "reconstruct_chains",
    "roc_auc",
    "run_ablation",
    "sigmoid",
    "split_edges",
    "subsample_training",
    "surface_hash_features",
    "tp_levenshtein_report",
    "train",
    "training_target",
    "tune_cosine_threshold",
    "tune_link_threshold",
    "write_corpus_files",
]
