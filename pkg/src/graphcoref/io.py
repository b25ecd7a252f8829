"""File formats: corpus JSONL, feature TSV, split TSV, chain JSONL."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError
from .graph import (
    CorefGraph,
    Edge,
    EdgeSplit,
    FeatureMatrix,
    Mention,
    external_features,
)


def read_corpus(path: str | Path) -> list[Mention]:
    """Read mentions from a JSON Lines corpus file (UTF-8)."""
    path = Path(path)
    mentions: list[Mention] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            for key in ("id", "doc_id", "span_text", "chain_id"):
                if key not in obj:
                    raise DataError(f"{path}:{lineno}: missing field '{key}'")
            mentions.append(
                Mention(
                    id=int(obj["id"]),
                    doc_id=str(obj["doc_id"]),
                    span_text=str(obj["span_text"]),
                    chain_id=str(obj["chain_id"]),
                )
            )
    if not mentions:
        raise DataError(f"{path}: empty corpus")
    return mentions


def write_corpus(path: str | Path, mentions: Iterable[Mention]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for m in mentions:
            fh.write(
                json.dumps(
                    {
                        "id": m.id,
                        "doc_id": m.doc_id,
                        "span_text": m.span_text,
                        "chain_id": m.chain_id,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_features(path: str | Path, graph: CorefGraph) -> FeatureMatrix:
    """Load an external feature TSV: first column mention id, then d reals.

    The file must contain exactly one row per mention.  Ragged rows,
    non-finite values, and duplicate or out-of-range ids are rejected with
    their line number.
    """
    path = Path(path)
    n = graph.n
    rows: dict[int, np.ndarray] = {}
    width: int | None = None
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if width is None:
                width = len(parts)
                if width < 2:
                    raise DataError(f"{path}:{lineno}: expected id + feature columns")
            elif len(parts) != width:
                raise DataError(
                    f"{path}:{lineno}: ragged row ({len(parts)} columns, expected {width})"
                )
            try:
                mid = int(parts[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad mention id '{parts[0]}'") from None
            if not 0 <= mid < n:
                raise DataError(f"{path}:{lineno}: mention id {mid} out of range 0..{n - 1}")
            if mid in rows:
                raise DataError(f"{path}:{lineno}: duplicate mention id {mid}")
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
            if not np.all(np.isfinite(vec)):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            rows[mid] = vec
    if len(rows) != n:
        raise DataError(
            f"{path}: feature row count {len(rows)} does not match {n} mentions"
        )
    data = np.stack([rows[i] for i in range(n)])
    return external_features(data)


def write_features(path: str | Path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise DataError("refusing to write non-finite feature values")
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, row in enumerate(data):
            fh.write(str(i) + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def write_split(path: str | Path, split: EdgeSplit) -> None:
    """Persist a split as TSV lines "i<TAB>j<TAB>{train|val|test}<TAB>{pos|neg}"."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for part, label, pairs in (
            ("train", "pos", split.train_pos),
            ("val", "pos", split.val_pos),
            ("test", "pos", split.test_pos),
            ("val", "neg", split.val_neg),
            ("test", "neg", split.test_neg),
        ):
            for i, j in pairs:
                fh.write(f"{i}\t{j}\t{part}\t{label}\n")


def read_split(path: str | Path, seed: int = -1) -> EdgeSplit:
    path = Path(path)
    buckets: dict[tuple[str, str], list[Edge]] = {
        ("train", "pos"): [],
        ("val", "pos"): [],
        ("test", "pos"): [],
        ("val", "neg"): [],
        ("test", "neg"): [],
    }
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad node index") from None
            key = (parts[2], parts[3])
            if key not in buckets:
                raise DataError(
                    f"{path}:{lineno}: invalid set/label '{parts[2]}/{parts[3]}'"
                )
            buckets[key].append((i, j))
    try:
        return EdgeSplit(
            train_pos=tuple(buckets[("train", "pos")]),
            val_pos=tuple(buckets[("val", "pos")]),
            test_pos=tuple(buckets[("test", "pos")]),
            val_neg=tuple(buckets[("val", "neg")]),
            test_neg=tuple(buckets[("test", "neg")]),
            seed=seed,
        )
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def write_chains(path: str | Path, chains: Iterable[Sequence[int]]) -> None:
    """Chain file: JSON Lines, one {"chain": [mention ids]} object per chain."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for chain in chains:
            fh.write(json.dumps({"chain": sorted(int(i) for i in chain)}) + "\n")


def read_chains(path: str | Path) -> list[list[int]]:
    path = Path(path)
    chains: list[list[int]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if "chain" not in obj or not isinstance(obj["chain"], list):
                raise DataError(f"{path}:{lineno}: missing 'chain' list")
            chains.append([int(i) for i in obj["chain"]])
    return chains


def _jsonable(obj):
    """Map numpy scalars/arrays to plain Python and NaN to null before dumping
    (the stdlib encoder would otherwise emit the non-JSON literal ``NaN``)."""
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: str | Path, obj) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")
