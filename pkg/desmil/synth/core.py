"""Synthetic interaction logs with a controllable dependence between interest clusters.

Items are dealt into g clusters. Every user has a primary cluster p; each event comes from p
with probability `primary_prob`, and otherwise from the companion cluster (p + 1) mod g with
probability rho, or else from a uniformly chosen non-primary cluster. Training logs use
`rho_train` and test logs `rho_test` for the same users and primary clusters, so a large gap
between the two breaks the co-occurrence the training data teaches.
"""
import os
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

import desmil.utils.python.io as py_io
from desmil.data.core import SequenceDataset, build_dataset, export_tsv, write_vocab
from desmil.utils.python.datastructures import ExtendedDataClassMixin

TEST_STREAM = 1


@dataclass(frozen=True)
class SynthConfig(ExtendedDataClassMixin):
    num_users: int = 2000
    num_items: int = 1000
    num_clusters: int = 4
    min_seq_len: int = 20
    max_seq_len: int = 40
    rho_train: float = 0.9
    rho_test: float = 0.1
    primary_prob: float = 0.5
    seed: int = 0

    def validate(self):
        if self.num_clusters < 2:
            raise ValueError(f"num_clusters must be >= 2, got {self.num_clusters}")
        if self.num_items < self.num_clusters:
            raise ValueError(
                f"num_items ({self.num_items}) must be >= num_clusters ({self.num_clusters})"
            )
        if self.num_users < 1:
            raise ValueError(f"num_users must be >= 1, got {self.num_users}")
        if not 1 <= self.min_seq_len <= self.max_seq_len:
            raise ValueError(f"bad sequence length range [{self.min_seq_len}, {self.max_seq_len}]")
        for name in ("rho_train", "rho_test", "primary_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class SynthResult:
    train: SequenceDataset
    test: SequenceDataset
    item_clusters: np.ndarray
    user_primaries: np.ndarray


def user_id(user: int) -> str:
    return f"u{user:05d}"


def item_id(item: int) -> str:
    return f"i{item:05d}"


def assign_clusters(num_items: int, num_clusters: int, seed: int) -> np.ndarray:
    """Cluster of each item: a seeded permutation of the items dealt round-robin."""
    order = np.random.RandomState(seed).permutation(num_items)
    clusters = np.empty(num_items, dtype=np.int64)
    clusters[order] = np.arange(num_items) % num_clusters
    return clusters


def companion_cluster(primary: int, num_clusters: int) -> int:
    return (primary + 1) % num_clusters


def _draw_cluster(rng, primary: int, rho: float, primary_prob: float, num_clusters: int) -> int:
    if rng.random() < primary_prob:
        return primary
    if rng.random() < rho:
        return companion_cluster(primary, num_clusters)
    others = [k for k in range(num_clusters) if k != primary]
    return others[rng.integers(len(others))]


def _draw_sequence(
    rng, primary: int, rho: float, cfg: SynthConfig, members: List[np.ndarray]
) -> List[int]:
    length = int(rng.integers(cfg.min_seq_len, cfg.max_seq_len + 1))
    items = []
    for _ in range(length):
        cluster = _draw_cluster(rng, primary, rho, cfg.primary_prob, cfg.num_clusters)
        items.append(int(members[cluster][rng.integers(len(members[cluster]))]))
    return items


def generate(cfg: SynthConfig) -> SynthResult:
    """Paired train/test logs over the same users, item vocabulary and primary clusters.

    Each user draws from its own generator seeded by (seed, user), so the output is a pure
    function of the configuration. Timestamps count events per user; the test log continues
    after the user's last training timestamp.
    """
    cfg.validate()
    clusters = assign_clusters(cfg.num_items, cfg.num_clusters, cfg.seed)
    members = [np.flatnonzero(clusters == k) for k in range(cfg.num_clusters)]
    primaries = np.empty(cfg.num_users, dtype=np.int64)
    train_events: List[Tuple[str, str, int]] = []
    test_events: List[Tuple[str, str, int]] = []
    for user in range(cfg.num_users):
        rng = np.random.default_rng([cfg.seed, user])
        primary = int(rng.integers(cfg.num_clusters))
        primaries[user] = primary
        train_items = _draw_sequence(rng, primary, cfg.rho_train, cfg, members)
        test_rng = np.random.default_rng([cfg.seed, user, TEST_STREAM])
        test_items = _draw_sequence(test_rng, primary, cfg.rho_test, cfg, members)
        train_events.extend((user_id(user), item_id(i), t) for t, i in enumerate(train_items))
        offset = len(train_items)
        test_events.extend(
            (user_id(user), item_id(i), offset + t) for t, i in enumerate(test_items)
        )
    item_vocab = {item_id(i): i for i in range(cfg.num_items)}
    user_vocab = {user_id(u): u for u in range(cfg.num_users)}
    return SynthResult(
        train=build_dataset(train_events, item_vocab=item_vocab, user_vocab=user_vocab),
        test=build_dataset(test_events, item_vocab=item_vocab, user_vocab=user_vocab),
        item_clusters=clusters,
        user_primaries=primaries,
    )


def cooccurrence_counts(
    ds: SequenceDataset, item_clusters: np.ndarray, user_primaries: np.ndarray
) -> np.ndarray:
    """g x g counts: row = user's primary cluster, column = cluster of each event."""
    g = int(item_clusters.max()) + 1
    counts = np.zeros((g, g), dtype=np.int64)
    for user in ds.users():
        np.add.at(counts[user_primaries[user]], item_clusters[ds.sequences[user]], 1)
    return counts


def clusters_touched(ds: SequenceDataset, item_clusters: np.ndarray) -> List[int]:
    """Number of distinct clusters in each user's sequence, users in index order."""
    return [len(set(item_clusters[ds.sequences[u]].tolist())) for u in ds.users()]


def write_synth_outputs(result: SynthResult, output_dir: str, manifest: dict):
    os.makedirs(output_dir, exist_ok=True)
    export_tsv(result.train, os.path.join(output_dir, "train.tsv"))
    export_tsv(result.test, os.path.join(output_dir, "test.tsv"))
    write_vocab(result.train.item_index, os.path.join(output_dir, "vocab.tsv"))
    py_io.write_tsv_rows(
        ((item_id(i), int(k)) for i, k in enumerate(result.item_clusters)),
        path=os.path.join(output_dir, "clusters.tsv"),
    )
    py_io.write_tsv_rows(
        ((user_id(u), int(p)) for u, p in enumerate(result.user_primaries)),
        path=os.path.join(output_dir, "primaries.tsv"),
    )
    py_io.write_json(manifest, os.path.join(output_dir, "manifest.json"))
