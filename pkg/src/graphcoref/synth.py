"""Synthetic cross-document coreference corpora.

Chains get a latent unit direction; mention features are that direction plus
isotropic noise, so feature informativeness is a single knob.  Surface strings
follow a "<lemma> <participant> <location>" template where participant and
location are fixed per chain: coreferent mentions usually share their whole
span, and a controllable fraction of chains adopt another chain's lemma to
create surface-identical hard negatives across chains.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as gio
from .errors import DataError
from .graph import Mention

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class GenParams:
    n_mentions: int = 500
    n_chains: int = 60
    chain_size_min: int = 2
    chain_size_max: int = 30
    chain_size_shape: float = 0.18  # geometric success probability
    n_docs: int = 40
    feature_dim: int = 64
    feature_noise: float = 0.5
    lemma_pool_size: int = 75
    p_same_lemma: float = 0.85
    p_confound: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.n_mentions < 1 or self.n_chains < 1 or self.n_docs < 1:
            raise DataError("mention, chain, and doc counts must be >= 1")
        if self.chain_size_min < 1 or self.chain_size_max < self.chain_size_min:
            raise DataError("need 1 <= chain_size_min <= chain_size_max")
        if not 0.0 < self.chain_size_shape <= 1.0:
            raise DataError("chain_size_shape must be in (0, 1]")
        if self.feature_dim < 1 or self.lemma_pool_size < 1:
            raise DataError("feature_dim and lemma_pool_size must be >= 1")
        if self.feature_noise < 0:
            raise DataError("feature_noise must be >= 0")
        for name in ("p_same_lemma", "p_confound"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DataError(f"{name} must be in [0, 1], got {p}")
        lo = self.n_chains * self.chain_size_min
        hi = self.n_chains * self.chain_size_max
        if not lo <= self.n_mentions <= hi:
            raise DataError(
                f"{self.n_chains} chains of size {self.chain_size_min}.."
                f"{self.chain_size_max} cannot hold {self.n_mentions} mentions"
            )
        if self.seed < 0:
            raise DataError("seed must be non-negative")


def _word(rng: np.random.Generator, n_syllables: int) -> str:
    return "".join(
        _CONSONANTS[rng.integers(len(_CONSONANTS))] + _VOWELS[rng.integers(len(_VOWELS))]
        for _ in range(n_syllables)
    )


def _word_pool(rng: np.random.Generator, count: int, n_syllables: int) -> list[str]:
    pool: list[str] = []
    seen: set[str] = set()
    while len(pool) < count:
        w = _word(rng, n_syllables)
        if w not in seen:
            seen.add(w)
            pool.append(w)
    return pool


def _chain_sizes(params: GenParams, rng: np.random.Generator) -> np.ndarray:
    """Truncated-geometric sizes nudged to sum exactly to n_mentions."""
    sizes = np.minimum(
        params.chain_size_min + rng.geometric(params.chain_size_shape, params.n_chains) - 1,
        params.chain_size_max,
    ).astype(np.int64)
    diff = params.n_mentions - int(sizes.sum())
    while diff > 0:
        candidates = np.where(sizes < params.chain_size_max)[0]
        sizes[candidates[np.argmin(sizes[candidates])]] += 1
        diff -= 1
    while diff < 0:
        candidates = np.where(sizes > params.chain_size_min)[0]
        sizes[candidates[np.argmax(sizes[candidates])]] -= 1
        diff += 1
    return sizes


def generate(params: GenParams) -> tuple[list[Mention], np.ndarray]:
    """Build mentions (sorted by id) and their feature matrix.

    One generator seeded from params.seed drives every draw in a fixed
    order, so a given parameter set always produces the same corpus.
    """
    rng = np.random.default_rng(params.seed)

    sizes = _chain_sizes(params, rng)
    lemmas = _word_pool(rng, params.lemma_pool_size, 3)
    participants = _word_pool(rng, max(8, params.lemma_pool_size // 2), 2)
    locations = _word_pool(rng, max(6, params.lemma_pool_size // 3), 2)

    # Base lemma per chain: unique while the pool lasts, then reused.
    if params.lemma_pool_size >= params.n_chains:
        base = rng.permutation(params.lemma_pool_size)[: params.n_chains]
        chain_lemma = [lemmas[i] for i in base]
    else:
        warnings.warn(
            "lemma pool smaller than chain count; distinct chains will share lemmas",
            stacklevel=2,
        )
        chain_lemma = [lemmas[rng.integers(params.lemma_pool_size)] for _ in range(params.n_chains)]
    # Confounds: a chain may adopt some other chain's lemma outright.
    if params.n_chains > 1:
        adopt = rng.random(params.n_chains) < params.p_confound
        originals = list(chain_lemma)
        for c in range(params.n_chains):
            if adopt[c]:
                other = int(rng.integers(params.n_chains - 1))
                if other >= c:
                    other += 1
                chain_lemma[c] = originals[other]

    chain_participant = [participants[rng.integers(len(participants))] for _ in range(params.n_chains)]
    chain_location = [locations[rng.integers(len(locations))] for _ in range(params.n_chains)]

    # Chain centers and the chain index of each mention id.  Ids are a random
    # permutation of the chain-block layout so chains are not contiguous.
    centers = rng.standard_normal((params.n_chains, params.feature_dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    chain_of_slot = np.repeat(np.arange(params.n_chains), sizes)
    slot_of_id = rng.permutation(params.n_mentions)
    chain_of_id = chain_of_slot[slot_of_id]

    # Every doc id appears at least once whenever there are enough mentions.
    doc_of_id = rng.integers(0, params.n_docs, size=params.n_mentions)
    forced = rng.permutation(params.n_mentions)[: params.n_docs]
    for d, mid in enumerate(forced):
        doc_of_id[mid] = d

    mentions: list[Mention] = []
    features = np.empty((params.n_mentions, params.feature_dim))
    for mid in range(params.n_mentions):
        c = int(chain_of_id[mid])
        if rng.random() < params.p_same_lemma:
            lemma = chain_lemma[c]
        else:
            lemma = lemmas[rng.integers(params.lemma_pool_size)]
        span = f"{lemma} {chain_participant[c]} {chain_location[c]}"
        mentions.append(
            Mention(
                id=mid,
                doc_id=f"d{int(doc_of_id[mid]):03d}",
                span_text=span,
                chain_id=f"c{c:03d}",
            )
        )
        features[mid] = centers[c] + params.feature_noise * rng.standard_normal(
            params.feature_dim
        )
    return mentions, features


def write_corpus_files(
    params: GenParams, corpus_path: str | Path, features_path: str | Path
) -> tuple[list[Mention], np.ndarray]:
    mentions, features = generate(params)
    gio.write_corpus(corpus_path, mentions)
    gio.write_features(features_path, features)
    return mentions, features
