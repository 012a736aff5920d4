import pytest

import desmil.data.core as data_core


def _write_log(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return str(path)


def test_ingest_orders_by_timestamp(tmp_path):
    path = _write_log(
        tmp_path / "log.tsv",
        ["u2\tb\t5", "u1\tc\t3", "u1\ta\t1", "u2\ta\t2", "u1\tb\t2"],
    )
    ds = data_core.ingest(path)
    assert ds.user_index == {"u1": 0, "u2": 1}
    assert ds.item_index == {"a": 0, "b": 1, "c": 2}
    assert ds.num_items == 3
    assert ds.pad_index == 3
    assert ds.sequences == {0: [0, 1, 2], 1: [0, 1]}
    assert ds.timestamps == {0: [1, 2, 3], 1: [2, 5]}
    assert ds.num_events == 5
    ds.validate()


def test_ingest_ties_keep_file_order(tmp_path):
    path = _write_log(tmp_path / "log.tsv", ["u1\tc\t7", "u1\ta\t7", "u1\tb\t7"])
    ds = data_core.ingest(path)
    assert [ds.item_id(i) for i in ds.sequences[0]] == ["c", "a", "b"]


def test_ingest_skips_few_malformed_lines(tmp_path):
    lines = [f"u{i % 7}\ti{i % 11}\t{i}" for i in range(200)] + ["u1\ti1\tnot_a_number"]
    ds = data_core.ingest(_write_log(tmp_path / "log.tsv", lines))
    assert ds.num_malformed == 1
    assert ds.num_events == 200


def test_ingest_rejects_many_malformed_lines(tmp_path):
    lines = ["u1\ti1\t1", "u1\ti2\t2", "u1\ti3", "u2\t\t4"]
    with pytest.raises(data_core.MalformedInputError):
        data_core.ingest(_write_log(tmp_path / "log.tsv", lines))


def test_ingest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        data_core.ingest(str(tmp_path / "missing.tsv"))


def test_ingest_fixed_vocab(tmp_path):
    path = _write_log(tmp_path / "log.tsv", ["u1\tb\t1", "u1\ta\t2"])
    ds = data_core.ingest(path, item_vocab={"a": 0, "b": 1, "z": 2})
    assert ds.num_items == 3
    assert ds.sequences == {0: [1, 0]}


def test_ingest_many_shares_vocab(tmp_path):
    first = _write_log(tmp_path / "a.tsv", ["u1\tx\t1", "u2\ty\t1"])
    second = _write_log(tmp_path / "b.tsv", ["u3\tz\t1", "u1\tx\t2"])
    ds_a, ds_b = data_core.ingest_many([first, second])
    assert ds_a.item_index == ds_b.item_index == {"x": 0, "y": 1, "z": 2}
    assert ds_a.user_index == ds_b.user_index == {"u1": 0, "u2": 1, "u3": 2}
    assert ds_b.sequences == {0: [0], 2: [2]}


def test_export_then_ingest_preserves_sequences(tmp_path):
    path = _write_log(tmp_path / "log.tsv", ["u1\tb\t3", "u1\ta\t1", "u2\tc\t9"])
    ds = data_core.ingest(path)
    data_core.export_tsv(ds, str(tmp_path / "out" / "log.tsv"))
    reloaded = data_core.ingest(str(tmp_path / "out" / "log.tsv"), item_vocab=ds.item_index)
    assert reloaded.sequences == ds.sequences
    assert reloaded.timestamps == ds.timestamps


def test_vocab_io(tmp_path):
    vocab = {"b": 1, "a": 0, "c": 2}
    data_core.write_vocab(vocab, str(tmp_path / "vocab.tsv"))
    assert (tmp_path / "vocab.tsv").read_text().splitlines() == ["a\t0", "b\t1", "c\t2"]
    assert data_core.read_vocab(str(tmp_path / "vocab.tsv")) == vocab


def test_read_vocab_rejects_gaps(tmp_path):
    (tmp_path / "vocab.tsv").write_text("a\t0\nb\t2\n")
    with pytest.raises(RuntimeError):
        data_core.read_vocab(str(tmp_path / "vocab.tsv"))


def test_interaction_event_validation():
    with pytest.raises(ValueError):
        data_core.InteractionEvent(user_id="", item_id="a", timestamp=1)
    with pytest.raises(ValueError):
        data_core.InteractionEvent(user_id="u", item_id="a", timestamp=-1)


def test_subset_drops_nothing_else():
    ds = data_core.build_dataset([("u1", "a", 1), ("u2", "b", 1), ("u3", "a", 2)])
    sub = ds.subset([0, 2])
    assert sub.users() == [0, 2]
    assert sub.item_index == ds.item_index
    assert sub.user_id(2) == "u3"
