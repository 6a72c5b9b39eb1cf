import numpy as np
import pytest

import reslink.encoder as enc
import reslink.index as ix
from reslink.data import EntityRecord, synthetic_vocab
from reslink.util import DataError


FINGERPRINT = bytes(range(32))


def _encoder(seed=0):
    config = enc.ResCNNConfig(d_model=12, n_blocks=1, kernel_widths=(1, 3),
                              filters_per_width=6, embed_dim=8, max_len=12,
                              init_std=0.3)
    return enc.ResCNNEncoder(config, synthetic_vocab(), seed=seed)


KB = [EntityRecord("E1", "bakomi", ["bako mi"]),
      EntityRecord("E2", "sotuna", []),
      EntityRecord("E3", "lirepa vodi", ["lire"]),
      EntityRecord("E4", "zuge", [])]


def _random_index(rng, rows=1000, dim=300, entities=300, duplicates=50):
    vectors = rng.normal(size=(rows, dim))
    # exact duplicate rows under different owners give score ties
    src = rng.integers(0, rows, size=duplicates)
    dst = rng.integers(0, rows, size=duplicates)
    vectors[dst] = vectors[src]
    owners = ["C{:04d}".format(i) for i in rng.integers(0, entities, size=rows)]
    names = ["name{}".format(j) for j in range(rows)]
    return ix.NameIndex(ix.unit_rows(vectors), names, owners, FINGERPRINT)


class TestBuildIndex(object):

    @classmethod
    def setup_class(cls):
        cls.encoder = _encoder()
        cls.index = ix.build_index(cls.encoder, KB, fingerprint=FINGERPRINT)

    def test_one_row_per_name(self):
        assert len(self.index) == 6
        assert self.index.owners == ["E1", "E1", "E2", "E3", "E3", "E4"]
        assert self.index.names[:2] == ["bakomi", "bako mi"]
        assert self.index.entity_ids == ["E1", "E2", "E3", "E4"]

    def test_single_entity_single_row(self):
        index = ix.build_index(self.encoder, [EntityRecord("X", "dafo", [])])
        assert len(index) == 1
        assert index.fingerprint == b"\0" * 32

    def test_rows_are_unit_float32(self):
        assert self.index.vectors.dtype == np.float32
        assert np.allclose(np.linalg.norm(self.index.vectors, axis=1), 1.0, atol=1e-6)
        assert not self.index.vectors.flags.writeable

    def test_deterministic(self):
        assert ix.build_index(self.encoder, KB, fingerprint=FINGERPRINT) == self.index

    def test_threads_do_not_change_rows(self):
        serial = ix.build_index(self.encoder, KB, threads=1, batch_size=2)
        pooled = ix.build_index(self.encoder, KB, threads=3, batch_size=2)
        assert np.array_equal(serial.vectors, pooled.vectors)
        assert np.allclose(serial.vectors, self.index.vectors, atol=1e-6)

    def test_empty_kb(self):
        with pytest.raises(DataError, match="empty"):
            ix.build_index(self.encoder, [])

    def test_exact_name_scores_one(self):
        ranked = ix.link("lire", self.encoder, self.index, k=1)
        assert ranked[0][0] == "E3"
        assert np.isclose(ranked[0][1], 1.0, atol=1e-6)

    def test_k_beyond_entity_count(self):
        ranked = ix.link("sotuna", self.encoder, self.index, k=10)
        assert sorted(e for e, _ in ranked) == ["E1", "E2", "E3", "E4"]

    def test_scores_descending(self):
        ranked = ix.link("bakomis", self.encoder, self.index, k=4)
        scores = [s for _, s in ranked]
        assert scores == sorted(scores, reverse=True)
        assert all(-1.0 <= s <= 1.0 for s in scores)

    def test_link_batch_matches_link(self):
        mentions = ["bakomi", "zugea", "lirepa"]
        batched = ix.link_batch(mentions, self.encoder, self.index, k=2)
        assert batched == [ix.link(m, self.encoder, self.index, k=2) for m in mentions]

    def test_empty_mention(self):
        with pytest.raises(ValueError, match="empty"):
            ix.link("  ", self.encoder, self.index)

    def test_mention_without_content_tokens(self):
        with pytest.raises(DataError, match="no content tokens"):
            ix.link("\u200b", self.encoder, self.index)
        with pytest.raises(DataError, match="no content tokens"):
            ix.link_batch(["bakomi", "\u200b\u200b"], self.encoder, self.index)

    def test_kb_name_without_content_tokens(self):
        kb = [EntityRecord("X", "dafo", []), EntityRecord("Y", "\u200b", [])]
        with pytest.raises(DataError, match="KB name"):
            ix.build_index(self.encoder, kb)

    def test_k_must_be_positive(self):
        with pytest.raises(ValueError, match="k"):
            ix.link("zuge", self.encoder, self.index, k=0)


class TestRanking(object):

    def test_best_name_per_entity(self):
        vectors = np.array([[1., 0.], [0.8, 0.6], [0., 1.], [0.6, 0.8]])
        index = ix.NameIndex(vectors, ["a", "b", "c", "d"], ["X", "Y", "X", "Z"])
        ranked = ix.rank(np.array([1., 0.]), index, k=3)
        assert [e for e, _ in ranked] == ["X", "Y", "Z"]
        assert np.allclose([s for _, s in ranked], [1.0, 0.8, 0.6])

    def test_ties_go_to_lower_row(self):
        vectors = np.array([[0., 1.], [0., 1.], [1., 0.]])
        index = ix.NameIndex(vectors, ["a", "b", "c"], ["B", "A", "C"])
        assert [e for e, _ in ix.rank(np.array([0., 2.]), index, k=2)] == ["B", "A"]

    def test_zero_query_rejected(self):
        index = ix.NameIndex(np.eye(2), ["a", "b"], ["A", "B"])
        with pytest.raises(ValueError, match="zero"):
            ix.rank(np.zeros(2), index, k=1)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_brute_force_scan(self, seed):
        rng = np.random.default_rng(seed)
        index = _random_index(rng)
        queries = rng.normal(size=(100, index.dim))
        # some queries sit exactly on an indexed row
        queries[:10] = index.vectors[rng.integers(0, len(index), size=10)]
        for query in queries:
            k = int(rng.integers(1, 20))
            assert ix.rank(query, index, k) == ix.brute_force_scan(query, index, k)

    def test_entity_list_complete_when_k_large(self):
        index = _random_index(np.random.default_rng(9), rows=200, dim=16, entities=40)
        ranked = ix.rank(np.ones(16), index, k=1000)
        assert len(ranked) == len(index.entity_ids)
        assert len({e for e, _ in ranked}) == len(ranked)


class TestIndexFile(object):

    @classmethod
    def setup_class(cls):
        cls.index = ix.build_index(_encoder(), KB, fingerprint=FINGERPRINT)

    def test_round_trip(self, tmp_path):
        path = str(tmp_path / "names.idx")
        ix.save_index(self.index, path)
        loaded = ix.load_index(path)
        assert loaded == self.index
        assert loaded.fingerprint == FINGERPRINT

    def test_truncated(self, tmp_path):
        path = tmp_path / "names.idx"
        ix.save_index(self.index, str(path))
        payload = path.read_bytes()
        path.write_bytes(payload[:-40])
        with pytest.raises(DataError, match="truncated"):
            ix.load_index(str(path))

    def test_trailing_bytes(self, tmp_path):
        path = tmp_path / "names.idx"
        ix.save_index(self.index, str(path))
        path.write_bytes(path.read_bytes() + b"\0")
        with pytest.raises(DataError, match="trailing"):
            ix.load_index(str(path))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "names.idx"
        path.write_bytes(b"RCNN1" + b"\0" * 40)
        with pytest.raises(DataError, match="magic"):
            ix.load_index(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            ix.load_index(str(tmp_path / "absent.idx"))
