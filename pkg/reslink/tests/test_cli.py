import io
import json
import os

import pytest

from reslink import cli


TINY_CONFIG = """\
# small enough for a unit test
d_model = 12
n_blocks = 1
kernel_widths = 1,3
filters_per_width = 6
embed_dim = 8
max_len = 12
freeze_embeddings = false
init_std = 0.1
layers = 1
heads = 2
width = 8
ffn_width = 16
epochs = 2
batch_size = 8
"""


def _json_lines(capsys):
    return [json.loads(line) for line in capsys.readouterr().out.splitlines() if line]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = str(root / "corpus")
    assert cli.main(["synth", "--out", corpus, "--entities", "8", "--variants", "2",
                     "--seed", "3"]) == 0
    config = root / "tiny.cfg"
    config.write_text(TINY_CONFIG, encoding="utf-8")
    paths = {name: os.path.join(corpus, name + ".tsv")
             for name in ("kb", "train", "dev", "test")}
    paths["vocab"] = os.path.join(corpus, "vocab.txt")
    paths["config"] = str(config)
    for model in ("rescnn", "transformer"):
        paths[model] = str(root / (model + ".ckpt"))
        assert cli.main(["-q", "train", "--model", model, "--kb", paths["kb"],
                         "--train", paths["train"], "--dev", paths["dev"],
                         "--vocab", paths["vocab"], "--config", paths["config"],
                         "--out", paths[model], "--seed", "1"]) == 0
    return paths


def test_train_writes_checkpoint_and_log(workspace):
    assert os.path.exists(workspace["rescnn"])
    with open(workspace["rescnn"] + ".log") as f:
        entries = [json.loads(line) for line in f]
    assert [e["epoch"] for e in entries] == [1, 2]


def test_train_summary(workspace, tmp_path, capsys):
    out = str(tmp_path / "again.ckpt")
    assert cli.main(["train", "--kb", workspace["kb"], "--train", workspace["train"],
                     "--vocab", workspace["vocab"], "--config", workspace["config"],
                     "--set", "epochs=1", "--out", out, "--log",
                     str(tmp_path / "again.log")]) == 0
    summary = _json_lines(capsys)[-1]
    assert summary["checkpoint"] == out
    assert summary["epochs"] == 1
    assert len(summary["fingerprint"]) == 64


def test_eval(workspace, capsys):
    assert cli.main(["eval", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--dataset", workspace["test"], "--k", "3"]) == 0
    result = _json_lines(capsys)[-1]
    assert result["n"] == 8
    assert 0.0 <= result["top1"] <= result["top3"] <= 1.0


def test_index_and_link(workspace, tmp_path, capsys):
    index = str(tmp_path / "names.idx")
    assert cli.main(["index", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--out", index, "--h5", str(tmp_path / "names.h5")]) == 0
    assert _json_lines(capsys)[-1]["entities"] == 8
    assert cli.main(["link", "--ckpt", workspace["rescnn"], "--index", index,
                     "--k", "2", "bakomi", "sotu"]) == 0
    results = _json_lines(capsys)
    assert [r["mention"] for r in results] == ["bakomi", "sotu"]
    assert all(len(r["results"]) == 2 for r in results)
    scores = [item["score"] for item in results[0]["results"]]
    assert scores == sorted(scores, reverse=True)


def test_link_rejects_index_of_other_checkpoint(workspace, tmp_path):
    index = str(tmp_path / "names.idx")
    assert cli.main(["-q", "index", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--out", index]) == 0
    assert cli.main(["-q", "link", "--ckpt", workspace["transformer"], "--index", index,
                     "bakomi"]) == cli.EXIT_DATA


def test_probe_shuffle(workspace, capsys):
    assert cli.main(["probe", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--dataset", workspace["test"], "--probe", "shuffle", "--n", "1"]) == 0
    report = _json_lines(capsys)[-1]
    assert report["probe"] == "shuffle"
    assert report["param"] == 1
    assert report["datasets"][0]["name"] == "test"


def test_probe_sweep_on_transformer(workspace, capsys):
    assert cli.main(["probe", "--ckpt", workspace["transformer"], "--kb", workspace["kb"],
                     "--dataset", workspace["test"], "--dataset", workspace["dev"],
                     "--sweep"]) == 0
    reports = _json_lines(capsys)
    assert [(r["probe"], r["param"]) for r in reports] == [
        ("shuffle", 1), ("shuffle", 2), ("shuffle", 3), ("scope", 3), ("scope", 5)]
    assert [d["name"] for d in reports[0]["datasets"]] == ["test", "dev"]


def test_scope_probe_on_rescnn_is_config_error(workspace):
    assert cli.main(["-q", "probe", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--dataset", workspace["test"], "--probe", "scope",
                     "--w", "3"]) == cli.EXIT_CONFIG


def test_params_default_rescnn(capsys):
    assert cli.main(["params"]) == 0
    counts = _json_lines(capsys)[-1]
    assert counts["trainable"] == 1673100
    assert counts["pooling"] == "max"


def test_params_self_attention(capsys):
    assert cli.main(["params", "--pooling", "self-attention"]) == 0
    assert _json_lines(capsys)[-1]["trainable"] == 1763700


def test_bench(capsys):
    assert cli.main(["bench", "--names", "20", "--batch-size", "8", "--threads", "2",
                     "--set", "d_model=12", "--set", "kernel_widths=1,3",
                     "--set", "filters_per_width=6", "--set", "embed_dim=8"]) == 0
    result = _json_lines(capsys)[-1]
    assert result["names"] == 20
    assert result["names_per_second"] > 0


def test_missing_kb_is_data_error(workspace, tmp_path):
    assert cli.main(["-q", "train", "--kb", str(tmp_path / "absent.tsv"),
                     "--train", workspace["train"], "--vocab", workspace["vocab"],
                     "--config", workspace["config"],
                     "--out", str(tmp_path / "x.ckpt")]) == cli.EXIT_DATA


def test_unknown_config_key_is_config_error(workspace, tmp_path):
    assert cli.main(["-q", "train", "--kb", workspace["kb"], "--train", workspace["train"],
                     "--vocab", workspace["vocab"], "--set", "dropout=0.1",
                     "--out", str(tmp_path / "x.ckpt")]) == cli.EXIT_CONFIG


def test_missing_vocab_is_config_error(workspace, tmp_path):
    assert cli.main(["-q", "train", "--kb", workspace["kb"], "--train", workspace["train"],
                     "--out", str(tmp_path / "x.ckpt")]) == cli.EXIT_CONFIG


def test_unreadable_checkpoint_is_data_error(workspace, tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"not a checkpoint")
    assert cli.main(["-q", "eval", "--ckpt", str(bad), "--kb", workspace["kb"],
                     "--dataset", workspace["test"]]) == cli.EXIT_DATA


def test_usage_error_exits():
    with pytest.raises(SystemExit) as info:
        cli.main(["probe"])
    assert info.value.code == 2


def test_training_is_bitwise_reproducible(workspace, tmp_path):
    outputs = [str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")]
    for out in outputs:
        assert cli.main(["-q", "train", "--kb", workspace["kb"], "--train", workspace["train"],
                         "--vocab", workspace["vocab"], "--config", workspace["config"],
                         "--seed", "5", "--out", out]) == 0
    with open(outputs[0], "rb") as a, open(outputs[1], "rb") as b:
        assert a.read() == b.read()


def test_eval_empty_dataset_is_data_error(workspace, tmp_path):
    empty = tmp_path / "empty.tsv"
    empty.write_text("", encoding="utf-8")
    assert cli.main(["-q", "eval", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--dataset", str(empty)]) == cli.EXIT_DATA


def test_eval_default_k(workspace, capsys):
    assert cli.main(["eval", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--dataset", workspace["test"]]) == 0
    assert set(_json_lines(capsys)[-1]) == {"dataset", "n", "top1"}


def test_identity_shuffle_probe(workspace, capsys):
    assert cli.main(["probe", "--ckpt", workspace["transformer"], "--kb", workspace["kb"],
                     "--dataset", workspace["test"], "--probe", "shuffle",
                     "--n", "999"]) == 0
    row = _json_lines(capsys)[-1]["datasets"][0]
    assert row["probed"] == row["baseline"]


def test_scope_probe_on_transformer(workspace, capsys):
    assert cli.main(["probe", "--ckpt", workspace["transformer"], "--kb", workspace["kb"],
                     "--dataset", workspace["test"], "--probe", "scope", "--w", "3",
                     "--cls-exemption", "row_and_column"]) == 0
    report = _json_lines(capsys)[-1]
    assert (report["probe"], report["param"]) == ("scope", 3)
    assert "avg_percent_change" in report


def test_saved_index_matches_on_the_fly(workspace, tmp_path, capsys):
    index = str(tmp_path / "names.idx")
    assert cli.main(["index", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--out", index]) == 0
    capsys.readouterr()
    mentions = ["bakomi", "lire vo"]
    assert cli.main(["link", "--ckpt", workspace["rescnn"], "--index", index,
                     "--k", "3"] + mentions) == 0
    saved = _json_lines(capsys)
    assert cli.main(["link", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--k", "3"] + mentions) == 0
    assert _json_lines(capsys) == saved


def test_link_reads_stdin(workspace, monkeypatch, capsys):
    monkeypatch.setattr("sys.stdin", io.StringIO("zuge\nbako mi\r\nsotu\n"))
    assert cli.main(["link", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"]]) == 0
    results = _json_lines(capsys)
    assert [r["mention"] for r in results] == ["zuge", "bako mi", "sotu"]
    assert all(len(r["results"]) == 1 for r in results)


def test_link_needs_kb_or_index(workspace):
    assert cli.main(["-q", "link", "--ckpt", workspace["rescnn"],
                     "bakomi"]) == cli.EXIT_CONFIG


def test_train_into_missing_directory_is_data_error(workspace, tmp_path):
    out = str(tmp_path / "nope" / "m.ckpt")
    assert cli.main(["-q", "train", "--kb", workspace["kb"], "--train", workspace["train"],
                     "--vocab", workspace["vocab"], "--config", workspace["config"],
                     "--set", "epochs=1", "--out", out]) == cli.EXIT_DATA
    assert not os.path.exists(out)


def test_index_into_missing_directory_is_data_error(workspace, tmp_path):
    out = str(tmp_path / "nope" / "names.idx")
    assert cli.main(["-q", "index", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "--out", out]) == cli.EXIT_DATA


def test_link_contentless_mention_is_data_error(workspace):
    assert cli.main(["-q", "link", "--ckpt", workspace["rescnn"], "--kb", workspace["kb"],
                     "\u200b"]) == cli.EXIT_DATA
