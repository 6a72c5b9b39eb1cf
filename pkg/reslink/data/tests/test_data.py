import numpy as np
import pytest

import reslink.data as dt
import reslink.encoder as enc
import reslink.index as ix
from reslink.config import RunConfig
from reslink.data.export import read_index_h5
from reslink.tokenizer import Vocab, tokenize
from reslink.util import ConfigError, DataError


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestKnowledgeBase(object):

    def test_primary_and_alternative(self, tmp_path):
        kb = dt.load_kb(_write(tmp_path, "kb.tsv",
                               "D001\taspirin\tP\nD001\tacetylsalicylic acid\tA\n"))
        assert len(kb) == 1
        assert kb[0].entity_id == "D001"
        assert kb[0].primary == "aspirin"
        assert kb[0].alternatives == ["acetylsalicylic acid"]
        assert kb[0].names == ["aspirin", "acetylsalicylic acid"]

    def test_entity_order_follows_first_row(self, tmp_path):
        kb = dt.load_kb(_write(tmp_path, "kb.tsv",
                               "B\tbeta alt\tA\nA\talpha\tP\nB\tbeta\tP\r\n"))
        assert [r.entity_id for r in kb] == ["B", "A"]
        assert kb[0].primary == "beta"

    def test_two_primaries(self, tmp_path):
        path = _write(tmp_path, "kb.tsv", "D001\taspirin\tP\nD001\tASA\tP\n")
        with pytest.raises(DataError, match=r"kb.tsv:2: .*more than one primary"):
            dt.load_kb(path)

    def test_missing_primary(self, tmp_path):
        path = _write(tmp_path, "kb.tsv", "D001\taspirin\tP\nD002\tASA\tA\n")
        with pytest.raises(DataError, match=r":2: entity D002 has no primary"):
            dt.load_kb(path)

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            dt.load_kb(_write(tmp_path, "kb.tsv", ""))

    @pytest.mark.parametrize("row", ["D001\taspirin\n", "D001\taspirin\tX\n",
                                     "\taspirin\tP\n", "D001\t \tP\n"])
    def test_malformed_row(self, tmp_path, row):
        with pytest.raises(DataError, match=r"kb.tsv:1:"):
            dt.load_kb(_write(tmp_path, "kb.tsv", row))

    def test_save_load_round_trip(self, tmp_path):
        kb = [dt.EntityRecord("E1", "alpha", ["alfa"]), dt.EntityRecord("E2", "beta")]
        path = str(tmp_path / "kb.tsv")
        dt.save_kb(kb, path)
        assert dt.load_kb(path) == kb

    def test_duplicate_ids_in_lookup(self):
        with pytest.raises(DataError, match="duplicate"):
            dt.kb_lookup([dt.EntityRecord("E1", "a"), dt.EntityRecord("E1", "b")])


class TestDataset(object):

    def test_load(self, tmp_path):
        dataset = dt.load_dataset(_write(tmp_path, "test.tsv",
                                         "aspirin tablets\tD001\nASA\tD001\n"))
        assert len(dataset) == 2
        assert dataset.mentions == ["aspirin tablets", "ASA"]
        assert dataset.gold == ["D001", "D001"]

    def test_unknown_gold_id(self, tmp_path):
        kb = [dt.EntityRecord("D001", "aspirin")]
        path = _write(tmp_path, "test.tsv", "aspirin\tD001\nibuprofen\tD999\n")
        with pytest.raises(DataError, match=r"test.tsv:2: unknown gold entity id D999"):
            dt.load_dataset(path, kb=kb)

    def test_wrong_field_count(self, tmp_path):
        with pytest.raises(DataError, match="2 tab-separated"):
            dt.load_dataset(_write(tmp_path, "test.tsv", "aspirin\tD001\textra\n"))

    def test_empty(self, tmp_path):
        with pytest.raises(DataError, match="no rows"):
            dt.load_dataset(_write(tmp_path, "test.tsv", ""))

    def test_unknown_split(self):
        with pytest.raises(DataError, match="split"):
            dt.Dataset([], split="holdout")

    def test_concat_keeps_line_numbers(self):
        a = dt.Dataset([("x", "E1")], "train", source="a.tsv")
        b = dt.Dataset([("y", "E2"), ("z", "E9")], "train", source="b.tsv")
        joined = dt.Dataset.concat([a, b])
        assert joined.rows == [("x", "E1"), ("y", "E2"), ("z", "E9")]
        assert joined.lines == [1, 1, 2]
        assert joined.source == "a.tsv+b.tsv"


class TestEmbeddings(object):

    def test_round_trip(self, tmp_path):
        table = np.random.default_rng(0).normal(size=(7, 5)).astype(np.float32)
        path = str(tmp_path / "table.emb")
        dt.save_embeddings(table, path)
        loaded = dt.load_embeddings(path, vocab_size=7)
        assert loaded.dtype == np.float64
        assert np.array_equal(loaded, table.astype(np.float64))

    def test_row_count_must_match_vocab(self, tmp_path):
        path = str(tmp_path / "table.emb")
        dt.save_embeddings(np.zeros((7, 5)), path)
        with pytest.raises(DataError, match="7 rows"):
            dt.load_embeddings(path, vocab_size=8)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "table.emb"
        path.write_bytes(b"EMB2" + b"\0" * 8)
        with pytest.raises(DataError, match="magic"):
            dt.load_embeddings(str(path))

    def test_size_mismatch(self, tmp_path):
        path = tmp_path / "table.emb"
        dt.save_embeddings(np.zeros((3, 2)), str(path))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(DataError, match="bytes"):
            dt.load_embeddings(str(path))


def _run_config(**overrides):
    values = {"d_model": "12", "n_blocks": "1", "kernel_widths": "1,3",
              "filters_per_width": "6", "embed_dim": "8", "max_len": "12",
              "freeze_embeddings": "false"}
    values.update(overrides)
    return RunConfig(values)


class TestCheckpoint(object):

    @classmethod
    def setup_class(cls):
        cls.vocab = dt.synthetic_vocab()
        cls.run = _run_config(pooling="self-attention")
        cls.encoder = enc.build_encoder("rescnn", cls.run.rescnn, cls.vocab, seed=4)
        cls.checkpoint = dt.checkpoint_from_encoder(cls.encoder, cls.run.effective_text())

    def _save(self, tmp_path):
        path = str(tmp_path / "model.ckpt")
        fingerprint = dt.save_checkpoint(path, self.checkpoint)
        return path, fingerprint

    def test_round_trip(self, tmp_path):
        path, fingerprint = self._save(tmp_path)
        loaded = dt.load_checkpoint(path)
        assert loaded == self.checkpoint
        assert loaded.kind == "rescnn"
        assert loaded.fingerprint == fingerprint
        assert len(fingerprint) == 32
        for name, array in loaded.tensors.items():
            assert array.dtype == np.float32
            assert np.array_equal(array, self.encoder.params[name].data.astype(np.float32))

    def test_restore_encoder(self, tmp_path):
        path, _ = self._save(tmp_path)
        restored = dt.restore_encoder(dt.load_checkpoint(path), self.vocab)
        assert restored.kind == "rescnn"
        assert restored.config == self.run.rescnn
        assert restored.config.pooling == "self-attention"
        for name, tensor in restored.params.items():
            assert np.array_equal(tensor.data, self.checkpoint.tensors[name])
        text = "bakomi lire"
        assert np.allclose(restored.encode(text), self.encoder.encode(text), atol=1e-4)

    def test_restore_rejects_other_vocab(self, tmp_path):
        path, _ = self._save(tmp_path)
        smaller = dt.synthetic_vocab().tokens[:-1]
        with pytest.raises(DataError, match="rows"):
            dt.restore_encoder(dt.load_checkpoint(path), Vocab(smaller))

    def test_model_kind_checked(self, tmp_path):
        path, _ = self._save(tmp_path)
        with pytest.raises(DataError, match="rescnn model, not a transformer"):
            dt.load_checkpoint(path, model="transformer")

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "model.ckpt"
        path.write_bytes(b"NIDX1" + b"\0" * 16)
        with pytest.raises(DataError, match="magic"):
            dt.load_checkpoint(str(path))

    def test_unsupported_version(self, tmp_path):
        path, _ = self._save(tmp_path)
        payload = bytearray(open(path, "rb").read())
        payload[5] = 9
        with open(path, "wb") as f:
            f.write(bytes(payload))
        with pytest.raises(DataError, match="version 9"):
            dt.load_checkpoint(path)

    @pytest.mark.parametrize("cut", [1, 100, 1000])
    def test_truncated(self, tmp_path, cut):
        path, _ = self._save(tmp_path)
        payload = open(path, "rb").read()
        with open(path, "wb") as f:
            f.write(payload[:-cut])
        with pytest.raises(DataError, match="truncated"):
            dt.load_checkpoint(path)

    def test_trailing_bytes(self, tmp_path):
        path, _ = self._save(tmp_path)
        with open(path, "ab") as f:
            f.write(b"\0\0")
        with pytest.raises(DataError, match="trailing"):
            dt.load_checkpoint(path)

    def test_transformer_round_trip(self, tmp_path):
        run = RunConfig({"layers": "1", "heads": "2", "width": "8", "ffn_width": "16",
                         "max_len": "10"})
        encoder = enc.build_encoder("transformer", run.transformer, self.vocab, seed=1)
        path = str(tmp_path / "transformer.ckpt")
        dt.save_checkpoint(path, dt.checkpoint_from_encoder(encoder, run.effective_text()))
        restored = dt.restore_encoder(dt.load_checkpoint(path, model="transformer"),
                                      self.vocab)
        assert restored.kind == "transformer"
        assert restored.config == run.transformer
        assert np.allclose(restored.encode("sotuna"), encoder.encode("sotuna"), atol=1e-4)


class TestSyntheticCorpus(object):

    def test_two_entities(self):
        kb, train, dev, test = dt.generate_synthetic_corpus(2, 1, seed=0)
        assert [r.entity_id for r in kb] == ["SYN0000", "SYN0001"]
        assert all(len(r.alternatives) == 1 for r in kb)
        assert len(train) == 2 and len(dev) == 2 and len(test) == 2

    def test_deterministic(self):
        first = dt.generate_synthetic_corpus(20, 3, seed=5)
        second = dt.generate_synthetic_corpus(20, 3, seed=5)
        assert first[0] == second[0]
        for a, b in zip(first[1:], second[1:]):
            assert a.rows == b.rows
        assert dt.generate_synthetic_corpus(20, 3, seed=6)[0] != first[0]

    def test_splits_disjoint_and_resolvable(self):
        kb, train, dev, test = dt.generate_synthetic_corpus(50, 3, seed=1)
        assert len(train) == 150
        names = {n for r in kb for n in r.names}
        mentions = [set(d.mentions) for d in (train, dev, test)]
        assert not mentions[0] & mentions[1]
        assert not mentions[0] & mentions[2]
        assert not mentions[1] & mentions[2]
        assert not names & (mentions[0] | mentions[1] | mentions[2])
        for dataset in (train, dev, test):
            dataset.check_against(kb)

    def test_vocab_covers_every_string(self):
        kb, train, _, _ = dt.generate_synthetic_corpus(50, 2, seed=2)
        vocab = dt.synthetic_vocab()
        texts = [n for r in kb for n in r.names] + train.mentions
        for text in texts:
            assert vocab.unk_id not in tokenize(text, vocab, max_len=64).ids

    def test_too_small(self):
        with pytest.raises(ValueError):
            dt.generate_synthetic_corpus(1, 1)

    def test_write(self, tmp_path):
        paths = dt.write_synthetic_corpus(str(tmp_path / "corpus"), 5, 2, seed=0)
        kb = dt.load_kb(paths["kb"])
        assert len(kb) == 5
        assert len(dt.load_dataset(paths["train"], "train", kb)) == 10
        assert len(dt.load_dataset(paths["test"], "test", kb)) == 5


def test_export_index_h5(tmp_path):
    index = ix.NameIndex(np.eye(3), ["alpha", "alfa", "beta"], ["E1", "E1", "E2"],
                         bytes(range(32)))
    path = str(tmp_path / "index.h5")
    dt.export_index_h5(index, path)
    vectors, names, owners, fingerprint = read_index_h5(path)
    assert np.array_equal(vectors, index.vectors)
    assert names == index.names
    assert owners == index.owners
    assert fingerprint == index.fingerprint


def test_run_config_rejects_unknown_key():
    with pytest.raises(ConfigError, match="dropout"):
        _run_config(dropout="0.1")
