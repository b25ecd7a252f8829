"""Turn mention corpora into feature tables using a pretrained text encoder.

Input is the mention corpus JSON Lines format extended with three fields per
line: "context" (the sentence containing the mention) and "span_start" /
"span_end" (character offsets of the mention inside that sentence).  Output is
the feature TSV consumed by graph-based coreference training: row ``i`` holds
the mention id followed by its embedding, one row per mention, ordered by id.

Two pooling schemes are supported. ``last_layer_mean`` averages the encoder's
final hidden layer over the subword tokens of the span (hidden-size columns);
``last4_concat_mean`` does the same for each of the last four layers and
concatenates them in layer order, final layer last (4 x hidden-size columns).

A subword belongs to the span when its character interval overlaps
[span_start, span_end).  Spans that align with zero subwords (for example
when truncation cuts them off, or the span covers only whitespace) fall back
to the mean over the whole sentence, with a warning naming the mention.

Inference runs in evaluation mode with gradients disabled, so identical
inputs always produce identical rows.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

POOLING_LAST = "last_layer_mean"
POOLING_LAST4 = "last4_concat_mean"
POOLINGS = (POOLING_LAST, POOLING_LAST4)


class DataError(ValueError):
    """Invalid input data or configuration."""


@dataclass(frozen=True)
class SpanRecord:
    """One mention: its id plus the sentence and character span to encode."""

    id: int
    context: str
    span_start: int
    span_end: int


@dataclass(frozen=True)
class ExportConfig:
    model_name: str
    pooling: str
    corpus_path: str | Path
    output_path: str | Path
    batch_size: int = 8

    def __post_init__(self):
        if self.pooling not in POOLINGS:
            raise DataError(
                f"pooling must be one of {', '.join(POOLINGS)}, got '{self.pooling}'"
            )
        if self.batch_size < 1:
            raise DataError("batch size must be >= 1")


def read_span_records(path: str | Path) -> list[SpanRecord]:
    """Parse the extended corpus JSONL into records sorted by mention id."""
    path = Path(path)
    records: list[SpanRecord] = []
    seen: set[int] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            for key in ("id", "context", "span_start", "span_end"):
                if key not in obj:
                    raise DataError(f"{path}:{lineno}: missing field '{key}'")
            mention_id = obj["id"]
            if isinstance(mention_id, bool) or not isinstance(mention_id, int) or mention_id < 0:
                raise DataError(f"{path}:{lineno}: bad mention id {mention_id!r}")
            context = obj["context"]
            if not isinstance(context, str):
                raise DataError(f"{path}:{lineno}: context must be a string")
            start, end = obj["span_start"], obj["span_end"]
            if any(isinstance(v, bool) or not isinstance(v, int) for v in (start, end)):
                raise DataError(f"{path}:{lineno}: span offsets must be integers")
            if not 0 <= start < end <= len(context):
                raise DataError(
                    f"{path}:{lineno}: span [{start}, {end}) out of range for"
                    f" context of length {len(context)}"
                )
            if mention_id in seen:
                raise DataError(f"{path}: duplicate mention id {mention_id}")
            seen.add(mention_id)
            records.append(SpanRecord(mention_id, context, start, end))
    if not records:
        raise DataError(f"{path}: empty corpus")
    records.sort(key=lambda r: r.id)
    return records


def _load_encoder(model_name: str):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_name)
    if not tokenizer.is_fast:
        raise DataError(
            "the tokenizer does not provide character offsets; a fast tokenizer is required"
        )
    model = AutoModel.from_pretrained(model_name)
    model.eval()
    return tokenizer, model


def _pool_rows(
    layers: list[torch.Tensor],
    seq_index: int,
    offsets: torch.Tensor,
    content_mask: torch.Tensor,
    batch_records: list[SpanRecord],
) -> dict[int, np.ndarray]:
    """Average the span subwords of each record in one encoded sequence."""
    rows: dict[int, np.ndarray] = {}
    for record in batch_records:
        span_mask = (
            content_mask
            & (offsets[:, 0] < record.span_end)
            & (offsets[:, 1] > record.span_start)
        )
        if not bool(span_mask.any()):
            if not bool(content_mask.any()):
                raise DataError(
                    f"context of mention {record.id} produced no encoder tokens"
                )
            warnings.warn(
                f"mention {record.id}: span [{record.span_start}, {record.span_end})"
                " has no aligned subwords; using the sentence mean",
                stacklevel=3,
            )
            span_mask = content_mask
        pooled = [layer[seq_index][span_mask].mean(dim=0) for layer in layers]
        rows[record.id] = torch.cat(pooled).numpy().astype(np.float64)
    return rows


def export_features(config: ExportConfig) -> np.ndarray:
    """Encode every mention span and write the feature TSV.

    Returns the feature matrix (one row per mention, ordered by id) that was
    written to ``config.output_path``.
    """
    records = read_span_records(config.corpus_path)
    tokenizer, model = _load_encoder(config.model_name)

    # Each distinct sentence is encoded once; records that share a sentence
    # (or are exact duplicates) are pooled from the same token vectors, which
    # makes identical input lines produce identical rows by construction.
    contexts: list[str] = []
    records_by_context: dict[str, list[SpanRecord]] = {}
    for record in records:
        if record.context not in records_by_context:
            records_by_context[record.context] = []
            contexts.append(record.context)
        records_by_context[record.context].append(record)

    rows_by_id: dict[int, np.ndarray] = {}
    with torch.no_grad():
        for first in range(0, len(contexts), config.batch_size):
            batch = contexts[first : first + config.batch_size]
            enc = tokenizer(
                batch,
                return_offsets_mapping=True,
                return_special_tokens_mask=True,
                padding=True,
                truncation=True,
                return_tensors="pt",
            )
            out = model(
                input_ids=enc["input_ids"],
                attention_mask=enc["attention_mask"],
                output_hidden_states=True,
            )
            hidden = out.hidden_states  # embeddings + one entry per layer
            if config.pooling == POOLING_LAST:
                layers = [hidden[-1]]
            else:
                if len(hidden) - 1 < 4:
                    raise DataError(
                        f"{config.pooling} needs an encoder with at least 4 layers,"
                        f" got {len(hidden) - 1}"
                    )
                layers = list(hidden[-4:])
            for seq_index, context in enumerate(batch):
                content_mask = (enc["attention_mask"][seq_index] == 1) & (
                    enc["special_tokens_mask"][seq_index] == 0
                )
                rows_by_id.update(
                    _pool_rows(
                        layers,
                        seq_index,
                        enc["offset_mapping"][seq_index],
                        content_mask,
                        records_by_context[context],
                    )
                )

    matrix = np.vstack([rows_by_id[record.id] for record in records])
    if not np.all(np.isfinite(matrix)):
        raise DataError("encoder produced non-finite values")

    out_path = Path(config.output_path)
    with out_path.open("w", encoding="utf-8") as fh:
        for record, row in zip(records, matrix):
            fh.write(str(record.id) + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")
    return matrix
