import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from semspace.ingest import PubRecord, parse_archive
from semspace.store import (
    CorpusStore,
    DimensionMismatchError,
    EmbFormatError,
    StoredEmbedding,
    UnknownSpaceError,
    read_emb_file,
    write_emb_file,
)


@pytest.fixture()
def ten_records(ten_archive_gz):
    return list(parse_archive(ten_archive_gz))


@pytest.fixture()
def store(tmp_path):
    return CorpusStore(tmp_path / "store")


class TestRecords:
    def test_put_and_counts(self, store, ten_records, ten_archive_manifest):
        assert store.put_records(ten_records) == 10
        assert store.record_count == 10
        manifest = store.manifest()
        assert manifest["journals"] == ten_archive_manifest["journal_counts"]
        assert manifest["years"] == ten_archive_manifest["year_counts"]

    def test_double_write_overwrites(self, store, ten_records):
        store.put_records(ten_records)
        store.put_records(ten_records)
        assert store.record_count == 10

    def test_empty_put(self, store):
        assert store.put_records([]) == 0
        assert store.record_count == 0

    def test_query_by_journal(self, store, ten_records):
        store.put_records(ten_records)
        hits = store.query(journal="NeuroImage")
        assert [r.pmid for r in hits] == [90000001, 90000002, 90000003, 90000004]

    def test_query_identity(self, store, ten_records):
        store.put_records(ten_records)
        assert len(store.query()) == 10

    def test_query_unknown_journal_is_empty(self, store, ten_records):
        store.put_records(ten_records)
        assert store.query(journal="Nonexistent") == []

    def test_query_by_year(self, store, ten_records):
        store.put_records(ten_records)
        assert [r.pmid for r in store.query(year=1998)] == [90000005]

    def test_require_abstract_matches_validation(self, store, ten_records):
        store.put_records(ten_records)
        eligible = store.query(require_abstract=True)
        # 90000003 and 90000008 lack abstracts; 90000010 has an empty title.
        assert [r.pmid for r in eligible] == [
            90000001, 90000002, 90000004, 90000005, 90000006, 90000007, 90000009,
        ]

    def test_last_write_wins(self, store):
        store.put_records([PubRecord(7, "old", "a", "J1", 1990)])
        store.put_records([PubRecord(7, "new", "b", "J2", 1991)])
        assert store.record_count == 1
        assert store.get_record(7).title == "new"
        assert store.manifest()["journals"] == {"J2": 1}

    def test_rejects_nonpositive_pmid(self, store):
        with pytest.raises(ValueError):
            store.put_records([PubRecord(0, "t", "a", "J", None)])

    def test_reopen_sees_committed_state(self, tmp_path, ten_records):
        root = tmp_path / "store"
        CorpusStore(root).put_records(ten_records)
        reopened = CorpusStore(root)
        assert reopened.record_count == 10
        assert reopened.get_record(90000006).title.startswith("Étude")

    def test_manifest_consistent_with_queries(self, store, ten_records):
        store.put_records(ten_records)
        manifest = json.loads((store.root / "manifest.json").read_text())
        for journal, count in manifest["journals"].items():
            assert len(store.query(journal=journal)) == count
        assert manifest["record_count"] == len(store.query())


class TestEmbeddings:
    def test_roundtrip_is_quantization(self, store):
        store.register_space("raw768", 768)
        rng = np.random.default_rng(0)
        vec = rng.standard_normal(768).astype(np.float32) * 3.0
        store.put_embedding(StoredEmbedding(1, "raw768", vec))
        out, found = store.get_embeddings("raw768", [1])
        assert found.all()
        assert out.dtype == np.float32
        expected = vec.astype(np.float16).astype(np.float32)
        assert np.array_equal(out[0], expected)
        ulp = np.spacing(np.abs(vec).astype(np.float16)).astype(np.float32)
        assert (np.abs(out[0] - vec) <= ulp).all()

    def test_quantization_fixed_point(self, store):
        store.register_space("s", 16)
        rng = np.random.default_rng(1)
        vec = rng.standard_normal(16).astype(np.float32)
        store.put_embedding(StoredEmbedding(1, "s", vec))
        first, _ = store.get_embeddings("s", [1])
        store.put_embedding(StoredEmbedding(1, "s", first[0]))
        second, _ = store.get_embeddings("s", [1])
        assert np.array_equal(first, second)

    @given(arrays(np.float32, 24, elements=st.floats(-100, 100, width=32)))
    @settings(max_examples=50, deadline=None)
    def test_fixed_point_property(self, vec):
        emb = StoredEmbedding(5, "s", vec)
        once = emb.vector.astype(np.float32)
        twice = StoredEmbedding(5, "s", once).vector.astype(np.float32)
        assert np.array_equal(once, twice)

    def test_missing_pmid_marker(self, store):
        store.register_space("s", 4)
        store.put_embedding(StoredEmbedding(1, "s", np.ones(4)))
        out, found = store.get_embeddings("s", [1, 99])
        assert found.tolist() == [True, False]
        assert np.array_equal(out[1], np.zeros(4, dtype=np.float32))

    def test_dimension_mismatch(self, store):
        store.register_space("small", 100)
        with pytest.raises(DimensionMismatchError):
            store.put_embedding(StoredEmbedding(1, "small", np.zeros(768)))

    def test_unregistered_space(self, store):
        with pytest.raises(UnknownSpaceError):
            store.get_embeddings("nope", [1])
        with pytest.raises(UnknownSpaceError):
            store.put_embeddings("nope", [1], np.zeros((1, 4)))

    def test_reregister_must_agree(self, store):
        store.register_space("s", 8)
        store.register_space("s", 8)
        with pytest.raises(DimensionMismatchError):
            store.register_space("s", 9)

    def test_overflow_rejected(self, store):
        store.register_space("s", 2)
        with pytest.raises(ValueError):
            store.put_embedding(StoredEmbedding(1, "s", np.array([1e6, 0.0])))

    def test_reopen_embeddings(self, tmp_path):
        root = tmp_path / "store"
        first = CorpusStore(root)
        first.register_space("s", 3)
        first.put_embeddings("s", [10, 11], np.array([[1, 2, 3], [4, 5, 6]], dtype=np.float32))
        second = CorpusStore(root)
        assert second.spaces == {"s": 3}
        out, found = second.get_embeddings("s", [11, 10])
        assert found.all()
        assert np.array_equal(out[0], np.array([4, 5, 6], dtype=np.float32))


class TestEmbFile:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "x.emb"
        matrix = np.arange(12, dtype=np.float32).reshape(3, 4) / 7
        write_emb_file(path, [5, 6, 7], matrix)
        pmids, loaded = read_emb_file(path)
        assert pmids.tolist() == [5, 6, 7]
        assert np.array_equal(loaded, matrix.astype(np.float16).astype(np.float32))

    def test_header_layout(self, tmp_path):
        path = tmp_path / "x.emb"
        write_emb_file(path, [1], np.zeros((1, 2), dtype=np.float32))
        blob = path.read_bytes()
        assert blob[:4] == b"EMB1"
        assert int.from_bytes(blob[4:8], "little") == 1
        assert int.from_bytes(blob[8:12], "little") == 2
        assert int.from_bytes(blob[12:20], "little") == 1
        assert len(blob) == 20 + 8 + 2 * 2

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.emb"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(EmbFormatError):
            read_emb_file(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "x.emb"
        write_emb_file(path, [1, 2], np.zeros((2, 3), dtype=np.float32))
        blob = path.read_bytes()
        path.write_bytes(blob[:-4])
        with pytest.raises(EmbFormatError):
            read_emb_file(path)
