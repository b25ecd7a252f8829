import json

import numpy as np
import pytest

from graphcoref import DataError, Mention, build_graph, split_edges
from graphcoref import io as gio


@pytest.fixture
def small_graph():
    ms = [Mention(i, "d0", f"event {i}", "c0" if i < 3 else "c1") for i in range(6)]
    return build_graph(ms)


class TestCorpusRoundTrip:
    def test_round_trip(self, tmp_path):
        ms = [
            Mention(0, "doc-a", "verhoor geschorst", "c0"),
            Mention(1, "doc-b", "zitting geschorst", "c0"),
        ]
        p = tmp_path / "corpus.jsonl"
        gio.write_corpus(p, ms)
        assert gio.read_corpus(p) == ms

    def test_unicode_preserved(self, tmp_path):
        ms = [Mention(0, "d", "überfall—café", "c")]
        p = tmp_path / "c.jsonl"
        gio.write_corpus(p, ms)
        assert gio.read_corpus(p)[0].span_text == "überfall—café"

    def test_blank_lines_skipped(self, tmp_path):
        p = tmp_path / "c.jsonl"
        rec = {"id": 0, "doc_id": "d", "span_text": "x", "chain_id": "c"}
        p.write_text("\n" + json.dumps(rec) + "\n\n", encoding="utf-8")
        assert len(gio.read_corpus(p)) == 1

    def test_invalid_json_reports_line(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id": 0}\n{broken\n', encoding="utf-8")
        with pytest.raises(DataError, match=r":1: missing field"):
            gio.read_corpus(p)

    def test_bad_json_line_number(self, tmp_path):
        p = tmp_path / "c.jsonl"
        rec = {"id": 0, "doc_id": "d", "span_text": "x", "chain_id": "c"}
        p.write_text(json.dumps(rec) + "\n{broken\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":2: invalid JSON"):
            gio.read_corpus(p)

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="empty corpus"):
            gio.read_corpus(p)


class TestFeatureIO:
    def test_round_trip(self, tmp_path, small_graph):
        data = np.linspace(-1, 1, 6 * 3).reshape(6, 3)
        p = tmp_path / "f.tsv"
        gio.write_features(p, data)
        f = gio.load_features(p, small_graph)
        assert np.array_equal(f.data, data)

    def test_rows_may_be_permuted(self, tmp_path, small_graph):
        data = np.arange(12.0).reshape(6, 2)
        p = tmp_path / "f.tsv"
        lines = [
            f"{i}\t{float(data[i, 0])!r}\t{float(data[i, 1])!r}"
            for i in reversed(range(6))
        ]
        p.write_text("\n".join(lines) + "\n", encoding="utf-8")
        f = gio.load_features(p, small_graph)
        assert np.array_equal(f.data, data)

    def test_ragged_row_rejected(self, tmp_path, small_graph):
        p = tmp_path / "f.tsv"
        p.write_text("0\t1.0\t2.0\n1\t3.0\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":2: ragged row"):
            gio.load_features(p, small_graph)

    def test_non_numeric_rejected(self, tmp_path, small_graph):
        p = tmp_path / "f.tsv"
        p.write_text("0\tabc\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":1: non-numeric"):
            gio.load_features(p, small_graph)

    def test_non_finite_rejected(self, tmp_path, small_graph):
        p = tmp_path / "f.tsv"
        p.write_text("0\tnan\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":1: non-finite"):
            gio.load_features(p, small_graph)

    def test_duplicate_id_rejected(self, tmp_path, small_graph):
        p = tmp_path / "f.tsv"
        p.write_text("0\t1.0\n0\t2.0\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":2: duplicate mention id"):
            gio.load_features(p, small_graph)

    def test_out_of_range_id_rejected(self, tmp_path, small_graph):
        p = tmp_path / "f.tsv"
        p.write_text("9\t1.0\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":1: mention id 9 out of range"):
            gio.load_features(p, small_graph)

    def test_row_count_mismatch_rejected(self, tmp_path, small_graph):
        p = tmp_path / "f.tsv"
        p.write_text("0\t1.0\n1\t2.0\n", encoding="utf-8")
        with pytest.raises(DataError, match="row count 2 does not match 6"):
            gio.load_features(p, small_graph)

    def test_write_refuses_non_finite(self, tmp_path):
        with pytest.raises(DataError, match="non-finite"):
            gio.write_features(tmp_path / "f.tsv", np.array([[np.inf]]))

    def test_full_float_precision(self, tmp_path, small_graph):
        data = np.random.default_rng(0).normal(size=(6, 4))
        p = tmp_path / "f.tsv"
        gio.write_features(p, data)
        assert np.array_equal(gio.load_features(p, small_graph).data, data)


class TestSplitIO:
    def test_round_trip(self, tmp_path, small_graph):
        split = split_edges(small_graph, 0.25, 0.25, seed=5)
        p = tmp_path / "s.tsv"
        gio.write_split(p, split)
        back = gio.read_split(p, seed=5)
        assert back == split

    def test_bad_column_count(self, tmp_path):
        p = tmp_path / "s.tsv"
        p.write_text("0\t1\ttrain\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":1: expected 4 columns"):
            gio.read_split(p)

    def test_bad_index(self, tmp_path):
        p = tmp_path / "s.tsv"
        p.write_text("0\tx\ttrain\tpos\n", encoding="utf-8")
        with pytest.raises(DataError, match=r":1: bad node index"):
            gio.read_split(p)

    def test_bad_bucket(self, tmp_path):
        p = tmp_path / "s.tsv"
        p.write_text("0\t1\ttrain\tneg\n", encoding="utf-8")
        with pytest.raises(DataError, match="invalid set/label"):
            gio.read_split(p)

    def test_inconsistent_split_wrapped_with_path(self, tmp_path):
        p = tmp_path / "s.tsv"
        p.write_text("0\t1\ttrain\tpos\n0\t1\tval\tpos\n", encoding="utf-8")
        with pytest.raises(DataError, match=r"s\.tsv: .*overlap"):
            gio.read_split(p)


class TestChainIO:
    def test_round_trip(self, tmp_path):
        chains = [[0, 1, 2], [3], [4, 5]]
        p = tmp_path / "chains.jsonl"
        gio.write_chains(p, chains)
        assert gio.read_chains(p) == chains

    def test_chains_written_sorted(self, tmp_path):
        p = tmp_path / "chains.jsonl"
        gio.write_chains(p, [[2, 0, 1]])
        assert gio.read_chains(p) == [[0, 1, 2]]

    def test_missing_chain_key(self, tmp_path):
        p = tmp_path / "chains.jsonl"
        p.write_text('{"nodes": [1]}\n', encoding="utf-8")
        with pytest.raises(DataError, match="missing 'chain' list"):
            gio.read_chains(p)


class TestWriteJson:
    def test_numpy_types_serialized(self, tmp_path):
        p = tmp_path / "o.json"
        gio.write_json(p, {"a": np.float64(1.5), "b": np.arange(3), "c": np.int64(2)})
        assert json.loads(p.read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": 2}

    def test_nan_becomes_null(self, tmp_path):
        p = tmp_path / "o.json"
        gio.write_json(p, {"x": float("nan")})
        assert json.loads(p.read_text()) == {"x": None}
