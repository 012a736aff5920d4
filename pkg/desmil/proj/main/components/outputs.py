import os
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from desmil.utils.python.datastructures import ExtendedDataClassMixin

TRACE_COLUMNS = ("step", "loss", "hsic", "recall50")


@dataclass
class TraceRecord(ExtendedDataClassMixin):
    """One training step: mean unweighted loss, mean raw-interest HSIC, validation Recall@50."""

    step: int
    loss: float
    hsic: float
    recall50: Optional[float] = None


class TraceWriter:
    """Appends trace rows to a CSV, keeping the newest record open for a validation score.

    Rows are written once `buffer_size` newer records exist, and on `flush`.
    """

    def __init__(self, path: Optional[str], buffer_size: int = 100):
        self.path = path
        self.buffer_size = buffer_size
        self.buffer: List[TraceRecord] = []
        self.history: List[TraceRecord] = []
        if path is not None and os.path.exists(path):
            os.remove(path)

    def add(self, record: TraceRecord):
        if self.history and record.step <= self.history[-1].step:
            raise RuntimeError(f"trace steps must increase, got {record.step}")
        if len(self.buffer) > self.buffer_size:
            self._write(self.buffer[:-1])
            self.buffer = self.buffer[-1:]
        self.buffer.append(record)
        self.history.append(record)

    def last(self) -> Optional[TraceRecord]:
        return self.history[-1] if self.history else None

    def flush(self):
        self._write(self.buffer)
        self.buffer = []

    def _write(self, records: Sequence[TraceRecord]):
        if self.path is None or not records:
            return
        df = pd.DataFrame([r.to_dict() for r in records], columns=list(TRACE_COLUMNS))
        df.to_csv(
            self.path, mode="a", header=not os.path.exists(self.path), index=False, na_rep=""
        )


def read_trace(path: str) -> pd.DataFrame:
    return pd.read_csv(path)


def plateau_mean(records: Sequence[TraceRecord], fraction: float = 0.2) -> float:
    """Mean trace HSIC over the last `fraction` of the steps."""
    if not records:
        return float("nan")
    tail = records[-max(1, int(len(records) * fraction)) :]
    return float(np.mean([r.hsic for r in tail]))
