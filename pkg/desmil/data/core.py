"""Interaction logs and per-user item sequences.

A `SequenceDataset` is immutable after construction. User and item ids are mapped to dense
indices in sorted id order, so the indices depend only on the set of ids present (or on the
fixed vocabulary passed in). The pad index is `num_items`, one past the last real item.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import desmil.utils.python.io as py_io
from desmil.utils.python.datastructures import ExtendedDataClassMixin

logger = logging.getLogger(__name__)

MAX_MALFORMED_FRACTION = 0.01


class MalformedInputError(ValueError):
    def __init__(self, path, num_malformed, num_lines):
        self.path = path
        self.num_malformed = num_malformed
        self.num_lines = num_lines
        super().__init__(
            f"{path}: {num_malformed} of {num_lines} lines are malformed "
            f"(limit {MAX_MALFORMED_FRACTION:.0%})"
        )


@dataclass(frozen=True)
class InteractionEvent(ExtendedDataClassMixin):
    user_id: str
    item_id: str
    timestamp: int

    def __post_init__(self):
        if not self.user_id or not self.item_id:
            raise ValueError(f"ids must be nonempty: {self}")
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be non-negative: {self}")


@dataclass(frozen=True)
class SequenceDataset:
    """Per-user item-index sequences ordered by timestamp.

    Attributes:
        user_index: user_id -> dense user index.
        item_index: item_id -> dense item index in [0, num_items).
        sequences: user index -> item indices, time ordered (ties keep file order).
        timestamps: user index -> timestamps aligned with `sequences`.
    """

    user_index: Dict[str, int]
    item_index: Dict[str, int]
    sequences: Dict[int, List[int]]
    timestamps: Dict[int, List[int]]
    num_malformed: int = 0
    _user_ids: Dict[int, str] = field(default=None, repr=False, compare=False)
    _item_ids: Dict[int, str] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_user_ids", {v: k for k, v in self.user_index.items()})
        object.__setattr__(self, "_item_ids", {v: k for k, v in self.item_index.items()})

    @property
    def num_items(self) -> int:
        return len(self.item_index)

    @property
    def pad_index(self) -> int:
        return self.num_items

    @property
    def num_users(self) -> int:
        return len(self.sequences)

    @property
    def num_events(self) -> int:
        return sum(len(seq) for seq in self.sequences.values())

    def users(self) -> List[int]:
        return sorted(self.sequences)

    def user_id(self, user: int) -> str:
        return self._user_ids[user]

    def item_id(self, item: int) -> str:
        return self._item_ids[item]

    def subset(self, users: Sequence[int]) -> "SequenceDataset":
        """Dataset restricted to `users`, sharing the vocabularies."""
        return self.with_sequences(
            {u: self.sequences[u] for u in users}, {u: self.timestamps[u] for u in users}
        )

    def with_sequences(self, sequences, timestamps) -> "SequenceDataset":
        sequences = {u: list(seq) for u, seq in sequences.items() if len(seq) > 0}
        timestamps = {u: list(timestamps[u]) for u in sequences}
        return SequenceDataset(
            user_index=self.user_index,
            item_index=self.item_index,
            sequences=sequences,
            timestamps=timestamps,
        )

    def iter_events(self):
        for user in self.users():
            for item, timestamp in zip(self.sequences[user], self.timestamps[user]):
                yield InteractionEvent(
                    user_id=self.user_id(user), item_id=self.item_id(item), timestamp=timestamp
                )

    def validate(self):
        for user, seq in self.sequences.items():
            if len(seq) < 1:
                raise RuntimeError(f"user {user} has an empty sequence")
            if any(not 0 <= item < self.num_items for item in seq):
                raise RuntimeError(f"user {user} has an out-of-range item index")
            ts = self.timestamps[user]
            if any(a > b for a, b in zip(ts[:-1], ts[1:])):
                raise RuntimeError(f"user {user} is not time ordered")


def _parse_line(line: str) -> Optional[Tuple[str, str, int]]:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 3:
        return None
    user_id, item_id, raw_timestamp = fields
    if not user_id or not item_id:
        return None
    try:
        timestamp = int(raw_timestamp)
    except ValueError:
        return None
    if timestamp < 0:
        return None
    return user_id, item_id, timestamp


def build_dataset(
    events: Sequence[Tuple[str, str, int]],
    item_vocab: Optional[Dict[str, int]] = None,
    user_vocab: Optional[Dict[str, int]] = None,
    num_malformed: int = 0,
) -> SequenceDataset:
    """Groups (user_id, item_id, timestamp) triples into time-ordered per-user sequences."""
    if user_vocab is None:
        user_vocab = {u: i for i, u in enumerate(sorted({e[0] for e in events}))}
    if item_vocab is None:
        item_vocab = {it: i for i, it in enumerate(sorted({e[1] for e in events}))}
    grouped = {}
    for position, (user_id, item_id, timestamp) in enumerate(events):
        grouped.setdefault(user_vocab[user_id], []).append(
            (timestamp, position, item_vocab[item_id])
        )
    sequences, timestamps = {}, {}
    for user, rows in grouped.items():
        # (timestamp, file position) keeps identical timestamps in file order
        rows.sort()
        sequences[user] = [item for _, _, item in rows]
        timestamps[user] = [ts for ts, _, _ in rows]
    return SequenceDataset(
        user_index=dict(user_vocab),
        item_index=dict(item_vocab),
        sequences=sequences,
        timestamps=timestamps,
        num_malformed=num_malformed,
    )


def ingest(
    path: str,
    fmt: str = "tsv",
    item_vocab: Optional[Dict[str, int]] = None,
    user_vocab: Optional[Dict[str, int]] = None,
) -> SequenceDataset:
    """Reads a `user_id<TAB>item_id<TAB>timestamp` log into a SequenceDataset.

    Lines that do not parse (or reference an item outside a fixed `item_vocab`) are counted
    as malformed and skipped; more than 1% malformed lines is an error.

    Args:
        path: TSV file, UTF-8, no header.
        fmt: input format; only "tsv" is supported.
        item_vocab: optional fixed item_id -> index map (e.g. from a split's vocab.tsv).
        user_vocab: optional fixed user_id -> index map.

    Returns:
        SequenceDataset with dense indices.

    Raises:
        FileNotFoundError: if the file does not exist.
        MalformedInputError: if more than 1% of the lines are malformed.

    """
    if fmt != "tsv":
        raise ValueError(f"Unsupported ingest format: {fmt}")
    events, num_malformed = read_events(path, item_vocab=item_vocab, user_vocab=user_vocab)
    return build_dataset(
        events, item_vocab=item_vocab, user_vocab=user_vocab, num_malformed=num_malformed
    )


def ingest_many(paths: Sequence[str], item_vocab: Optional[Dict[str, int]] = None):
    """Ingests several logs so that they share one user vocabulary and one item vocabulary.

    Without a fixed `item_vocab`, both vocabularies are built from the union of the files.
    """
    loaded = [read_events(path, item_vocab=item_vocab) for path in paths]
    all_events = [e for events, _ in loaded for e in events]
    user_vocab = {u: i for i, u in enumerate(sorted({e[0] for e in all_events}))}
    if item_vocab is None:
        item_vocab = {it: i for i, it in enumerate(sorted({e[1] for e in all_events}))}
    return [
        build_dataset(
            events, item_vocab=item_vocab, user_vocab=user_vocab, num_malformed=num_malformed
        )
        for events, num_malformed in loaded
    ]


def read_events(
    path: str,
    item_vocab: Optional[Dict[str, int]] = None,
    user_vocab: Optional[Dict[str, int]] = None,
) -> Tuple[List[Tuple[str, str, int]], int]:
    py_io.assert_exists(path)
    events = []
    num_lines = 0
    num_malformed = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            num_lines += 1
            parsed = _parse_line(line)
            if (
                parsed is None
                or (item_vocab is not None and parsed[1] not in item_vocab)
                or (user_vocab is not None and parsed[0] not in user_vocab)
            ):
                num_malformed += 1
                continue
            events.append(parsed)
    if num_malformed:
        logger.warning("%s: skipped %d malformed of %d lines", path, num_malformed, num_lines)
    if num_lines and num_malformed / num_lines > MAX_MALFORMED_FRACTION:
        raise MalformedInputError(path, num_malformed, num_lines)
    return events, num_malformed


def export_tsv(ds: SequenceDataset, path: str):
    """Writes the dataset as an ingest TSV, users in index order, events in sequence order."""
    py_io.create_containing_folder(path)
    py_io.write_tsv_rows(
        ((e.user_id, e.item_id, e.timestamp) for e in ds.iter_events()), path=path
    )


def write_vocab(item_index: Dict[str, int], path: str):
    """Vocabulary dump: `item_id<TAB>dense_index` lines sorted by index."""
    py_io.create_containing_folder(path)
    rows = sorted(item_index.items(), key=lambda kv: kv[1])
    py_io.write_tsv_rows(rows, path=path)


def read_vocab(path: str) -> Dict[str, int]:
    vocab = {}
    for row in py_io.read_tsv_rows(path):
        item_id, index = row
        vocab[item_id] = int(index)
    if sorted(vocab.values()) != list(range(len(vocab))):
        raise RuntimeError(f"{path} is not a dense vocabulary")
    return vocab
