import os

import pytest

import desmil.utils.zlog as zlog


def test_buffered_logger(tmp_path):
    fol_path = str(tmp_path / "logs")
    log_writer = zlog.ZBufferedLogger(fol_path, buffer_size_dict={"loss_train": 3})
    with log_writer.log_context():
        log_writer.write_entry("loss_train", {"step": 0, "loss": 1.5})
        log_writer.write_entry("loss_train", {"step": 1, "loss": 1.25})
        log_writer.write_entry("train_val", {"step": 1, "recall50": 10.0})
        # "train_val" uses the default buffer size of 1, "loss_train" is still buffered
        log_data = zlog.load_log(fol_path)
        assert len(log_data["train_val"]) == 1
        assert log_data["loss_train"] == []
    log_data = zlog.load_log(fol_path)
    assert [entry["step"] for entry in log_data["loss_train"]] == [0, 1]
    assert "TIMESTAMP" in log_data["loss_train"][0]


def test_non_dict_entries(tmp_path):
    log_writer = zlog.ZLogger(str(tmp_path))
    with log_writer.log_context():
        log_writer.write_entry("notes", "started")
    assert zlog.load_log(str(tmp_path))["notes"][0]["data"] == "started"


def test_log_context_records_errors(tmp_path):
    log_writer = zlog.ZBufferedLogger(str(tmp_path))
    with pytest.raises(RuntimeError):
        with log_writer.log_context():
            raise RuntimeError("weights collapsed")
    errors = zlog.load_log(str(tmp_path))["errors"]
    assert "weights collapsed" in errors[0]["data"]


def test_overwrite(tmp_path):
    for _ in range(2):
        log_writer = zlog.ZLogger(str(tmp_path), overwrite=True)
        with log_writer.log_context():
            log_writer.write_entry("split", {"num_items": 5})
    assert len(zlog.load_log(str(tmp_path))["split"]) == 1
    assert os.path.exists(os.path.join(str(tmp_path), "split.zlog"))


def test_in_memory_logger():
    log_writer = zlog.InMemoryZLogger()
    with log_writer.log_context():
        log_writer.write_entry("weight_update", {"step": 0})
        log_writer.write_entry("weight_update", {"step": 1})
    assert [entry["step"] for entry in log_writer.entries["weight_update"]] == [0, 1]
    zlog.VOID_LOGGER.write_entry("weight_update", {"step": 0})


def test_per_step_keys_are_buffered_by_default(tmp_path):
    log_writer = zlog.ZBufferedLogger(str(tmp_path))
    with log_writer.log_context():
        for step in range(5):
            log_writer.write_entry("weight_update", {"step": step})
        log_writer.write_entry("train_val_best", {"step": 4})
        assert log_writer.streams["weight_update"].capacity == 100
        assert zlog.load_log(str(tmp_path))["weight_update"] == []
        assert len(zlog.load_log(str(tmp_path))["train_val_best"]) == 1
    assert len(zlog.load_log(str(tmp_path))["weight_update"]) == 5
