"""Structured JSONL run logs.

Every key (e.g. "loss_train", "train_val", "weight_update") maps to one `<key>.zlog` file of
JSON lines inside the log folder; `load_log` reads a folder back into a dict of entry lists.
Each entry is a dict stamped with "TIMESTAMP"; non-dict entries are wrapped as {"data": ...}.
"""
import os
import time
import traceback
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import IO, Dict, List, Optional

import desmil.utils.python.io as py_io

ERRORS_KEY = "errors"


def _prepare_entry(entry) -> dict:
    entry = dict(entry) if isinstance(entry, dict) else {"data": entry}
    entry["TIMESTAMP"] = time.time()
    return entry


class BaseZLogger:
    @contextmanager
    def log_context(self):
        yield self

    def write_entry(self, key, entry):
        raise NotImplementedError()

    def flush(self, key=None):
        raise NotImplementedError()


@dataclass
class _KeyStream:
    handle: IO
    capacity: int
    pending: List[dict] = field(default_factory=list)

    def add(self, entry: dict):
        self.pending.append(entry)
        if len(self.pending) >= self.capacity:
            self.flush()

    def flush(self):
        if self.pending:
            self.handle.write("".join(py_io.to_jsonl(entry) + "\n" for entry in self.pending))
            self.pending = []
        self.handle.flush()


class ZLogger(BaseZLogger):
    """Appends entries to `<fol_path>/<key>.zlog`, one JSON object per line.

    Entries of a key are held in memory until `buffer_size_dict[key]` (else
    `default_buffer_size`) of them are pending; `flush` and leaving `log_context` write them.
    An exception escaping `log_context` is recorded under "errors" before it propagates.
    """

    def __init__(
        self,
        fol_path,
        default_buffer_size=1,
        buffer_size_dict: Optional[Dict[str, int]] = None,
        log_errors=True,
        overwrite=False,
    ):
        self.fol_path = fol_path
        self.default_buffer_size = default_buffer_size
        self.buffer_size_dict = dict(buffer_size_dict or {})
        self.log_errors = log_errors
        self.write_mode = "w" if overwrite else "a"
        os.makedirs(fol_path, exist_ok=True)
        self.streams: Dict[str, _KeyStream] = {}

    def get_path(self, key):
        return os.path.join(self.fol_path, key + ".zlog")

    @contextmanager
    def log_context(self):
        try:
            yield self
        except Exception:
            if self.log_errors:
                self.write_entry(ERRORS_KEY, traceback.format_exc())
            raise
        finally:
            self.close()

    def write_entry(self, key, entry, do_print=False):
        entry = _prepare_entry(entry)
        self._stream(key).add(entry)
        if do_print:
            print(entry)

    def flush(self, key=None):
        keys = list(self.streams) if key is None else [key]
        for k in keys:
            self.streams[k].flush()

    def close(self):
        self.flush()
        for stream in self.streams.values():
            stream.handle.close()
        self.streams = {}

    def _stream(self, key) -> _KeyStream:
        if key not in self.streams:
            path = self.get_path(key)
            py_io.create_containing_folder(path)
            self.streams[key] = _KeyStream(
                handle=open(path, self.write_mode),
                capacity=self.buffer_size_dict.get(key, self.default_buffer_size),
            )
        return self.streams[key]


class ZBufferedLogger(ZLogger):
    """ZLogger for per-step keys: "loss_train" and "weight_update" default to 100 entries."""

    DEFAULT_BUFFER_SIZES = {"loss_train": 100, "weight_update": 100}

    def __init__(
        self,
        fol_path,
        default_buffer_size=1,
        buffer_size_dict: Optional[Dict[str, int]] = None,
        log_errors=True,
        overwrite=False,
    ):
        sizes = dict(self.DEFAULT_BUFFER_SIZES)
        sizes.update(buffer_size_dict or {})
        super().__init__(
            fol_path=fol_path,
            default_buffer_size=default_buffer_size,
            buffer_size_dict=sizes,
            log_errors=log_errors,
            overwrite=overwrite,
        )


class _VoidZLogger(BaseZLogger):
    def write_entry(self, key, entry):
        pass

    def flush(self, key=None):
        pass


class _PrintZLogger(BaseZLogger):
    def write_entry(self, key, entry):
        print(f"{key}: {entry}")

    def flush(self, key=None):
        pass


class InMemoryZLogger(BaseZLogger):
    def __init__(self):
        self.entries: Dict[str, List[dict]] = {}

    def write_entry(self, key, entry):
        self.entries.setdefault(key, []).append(_prepare_entry(entry))

    def flush(self, key=None):
        pass


VOID_LOGGER = _VoidZLogger()
PRINT_LOGGER = _PrintZLogger()


def load_log(fol_path) -> Dict[str, List[dict]]:
    log_data = {}
    for dirpath, _, filenames in os.walk(fol_path):
        for filename in sorted(filenames):
            if filename.endswith(".zlog"):
                path = os.path.join(dirpath, filename)
                log_data[os.path.relpath(path, fol_path)[: -len(".zlog")]] = py_io.read_jsonl(path)
    return log_data
