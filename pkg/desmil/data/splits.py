"""Classic (user-disjoint), OOD (temporal, shift ratio z) and synthetic-shift splits.

All fractional cuts use floor arithmetic. A `SplitBundle` is the unit training consumes:
training sequences plus (inputs, targets) pairs for validation and test.
"""
import hashlib
import math
import os
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import desmil.utils.python.io as py_io
from desmil.data.core import (
    SequenceDataset,
    export_tsv,
    ingest_many,
    read_vocab,
    write_vocab,
)
from desmil.shared.constants import OOD_Z_RANGE

OOD_MIN_LENGTH = 10
OOD_TRAIN_FRACTION = 0.5
OOD_VALID_FRACTION = 0.1
DEFAULT_CLASSIC_RATIOS = (0.8, 0.1, 0.1)
DEFAULT_HOLDOUT_RATIO = 0.8

# Guards floor() against products such as 0.29 * 100 = 28.999999999999996
_FLOOR_EPS = 1e-9

BUNDLE_FILES = ("train", "valid_inputs", "valid_targets", "test_inputs", "test_targets")


def floor_fraction(fraction: float, length: int) -> int:
    return int(math.floor(fraction * length + _FLOOR_EPS))


@dataclass(frozen=True)
class OodSplit:
    train: SequenceDataset
    valid: SequenceDataset
    test_inputs: SequenceDataset
    test_targets: SequenceDataset


@dataclass(frozen=True)
class SplitBundle:
    train: SequenceDataset
    valid_inputs: SequenceDataset
    valid_targets: SequenceDataset
    test_inputs: SequenceDataset
    test_targets: SequenceDataset

    @property
    def item_index(self) -> Dict[str, int]:
        return self.train.item_index

    @property
    def num_items(self) -> int:
        return self.train.num_items

    def as_dict(self) -> Dict[str, SequenceDataset]:
        return {name: getattr(self, name) for name in BUNDLE_FILES}


def _user_sort_key(user_id: str, seed: int) -> str:
    return hashlib.sha1(f"{seed}:{user_id}".encode("utf-8")).hexdigest()


def split_classic(
    ds: SequenceDataset, ratios: Tuple[float, float, float] = DEFAULT_CLASSIC_RATIOS, seed=0
) -> Tuple[SequenceDataset, SequenceDataset, SequenceDataset]:
    """Splits users into disjoint train / valid / test sets.

    Users are ordered by a hash of (seed, user_id); valid and test take floor(ratio * n) users
    each (at least one), train takes the rest.

    Raises:
        ValueError: if ratios are not positive or do not sum to 1, or fewer than 3 users.

    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
        raise ValueError(f"ratios must be three positive values summing to 1, got {ratios}")
    users = ds.users()
    n = len(users)
    if n < 3:
        raise ValueError(f"classic split needs at least 3 users, got {n}")
    ordered = sorted(users, key=lambda u: _user_sort_key(ds.user_id(u), seed))
    num_valid = max(1, floor_fraction(ratios[1], n))
    num_test = max(1, floor_fraction(ratios[2], n))
    num_train = n - num_valid - num_test
    if num_train < 1:
        raise ValueError(f"ratios {ratios} leave no training users out of {n}")
    return (
        ds.subset(sorted(ordered[:num_train])),
        ds.subset(sorted(ordered[num_train : num_train + num_valid])),
        ds.subset(sorted(ordered[num_train + num_valid :])),
    )


def check_z(z: float):
    lo, hi = OOD_Z_RANGE
    if not lo - _FLOOR_EPS <= z <= hi + _FLOOR_EPS:
        raise ValueError(f"shift ratio z must be in [{lo}, {hi}], got {z}")


def split_ood(ds: SequenceDataset, z: float) -> OodSplit:
    """Temporal split with covariate-shift ratio z.

    Per user of length n >= 10: the first floor(0.5 n) events train, the next floor(0.1 n)
    validate, the first floor(z n) are test inputs and the remainder test targets. Users with
    n < 10 are used for training only.
    """
    check_z(z)
    parts = {name: ({}, {}) for name in ("train", "valid", "test_inputs", "test_targets")}

    def put(name, user, start, end):
        seqs, times = parts[name]
        seqs[user] = ds.sequences[user][start:end]
        times[user] = ds.timestamps[user][start:end]

    for user in ds.users():
        n = len(ds.sequences[user])
        if n < OOD_MIN_LENGTH:
            put("train", user, 0, n)
            continue
        num_train = floor_fraction(OOD_TRAIN_FRACTION, n)
        num_valid = floor_fraction(OOD_VALID_FRACTION, n)
        num_inputs = floor_fraction(z, n)
        put("train", user, 0, num_train)
        put("valid", user, num_train, num_train + num_valid)
        put("test_inputs", user, 0, num_inputs)
        put("test_targets", user, num_inputs, n)
    return OodSplit(**{name: ds.with_sequences(*parts[name]) for name in parts})


def holdout_split(
    ds: SequenceDataset, ratio: float = DEFAULT_HOLDOUT_RATIO
) -> Tuple[SequenceDataset, SequenceDataset]:
    """Per user: the first floor(ratio * n) events (at least one) as inputs, the rest as targets."""
    inputs, input_times, targets, target_times = {}, {}, {}, {}
    for user in ds.users():
        seq, ts = ds.sequences[user], ds.timestamps[user]
        k = max(1, floor_fraction(ratio, len(seq)))
        inputs[user], input_times[user] = seq[:k], ts[:k]
        targets[user], target_times[user] = seq[k:], ts[k:]
    return ds.with_sequences(inputs, input_times), ds.with_sequences(targets, target_times)


def classic_bundle(
    ds: SequenceDataset,
    ratios=DEFAULT_CLASSIC_RATIOS,
    seed=0,
    holdout_ratio=DEFAULT_HOLDOUT_RATIO,
) -> SplitBundle:
    train, valid, test = split_classic(ds, ratios=ratios, seed=seed)
    valid_inputs, valid_targets = holdout_split(valid, ratio=holdout_ratio)
    test_inputs, test_targets = holdout_split(test, ratio=holdout_ratio)
    return SplitBundle(
        train=train,
        valid_inputs=valid_inputs,
        valid_targets=valid_targets,
        test_inputs=test_inputs,
        test_targets=test_targets,
    )


def ood_bundle(ds: SequenceDataset, z: float) -> SplitBundle:
    split = split_ood(ds, z=z)
    return SplitBundle(
        train=split.train,
        valid_inputs=split.train.subset(split.valid.users()),
        valid_targets=split.valid,
        test_inputs=split.test_inputs,
        test_targets=split.test_targets,
    )


def shift_bundle(
    train_ds: SequenceDataset, shifted_ds: SequenceDataset, holdout_ratio=DEFAULT_HOLDOUT_RATIO
) -> SplitBundle:
    """Bundle for a paired (train-distribution, shifted-distribution) log of the same users.

    Training uses the head of each train-distribution sequence and validation its tail; the
    test uses the full train-distribution sequence as history and the shifted sequence as
    targets.
    """
    if train_ds.item_index != shifted_ds.item_index:
        raise ValueError("train and shifted datasets must share an item vocabulary")
    heads, tails = holdout_split(train_ds, ratio=holdout_ratio)
    shared_users = sorted(set(train_ds.users()) & set(shifted_ds.users()))
    return SplitBundle(
        train=heads,
        valid_inputs=heads.subset(tails.users()),
        valid_targets=tails,
        test_inputs=train_ds.subset(shared_users),
        test_targets=shifted_ds.subset(shared_users),
    )


def write_split_dir(bundle: SplitBundle, split_dir: str, manifest: dict):
    os.makedirs(split_dir, exist_ok=True)
    for name, ds in bundle.as_dict().items():
        export_tsv(ds, os.path.join(split_dir, f"{name}.tsv"))
    write_vocab(bundle.item_index, os.path.join(split_dir, "vocab.tsv"))
    py_io.write_json(manifest, os.path.join(split_dir, "manifest.json"))


def read_split_dir(split_dir: str) -> SplitBundle:
    py_io.assert_exists(os.path.join(split_dir, "vocab.tsv"))
    item_vocab = read_vocab(os.path.join(split_dir, "vocab.tsv"))
    datasets = ingest_many(
        [os.path.join(split_dir, f"{name}.tsv") for name in BUNDLE_FILES], item_vocab=item_vocab
    )
    return SplitBundle(**dict(zip(BUNDLE_FILES, datasets)))


def users_by_id(ds: SequenceDataset) -> Dict[str, int]:
    return {ds.user_id(u): u for u in ds.users()}


def pair_users(inputs: SequenceDataset, targets: SequenceDataset) -> Sequence[Tuple[int, int]]:
    """(input user index, target user index) pairs for users present in both, by user id."""
    input_users = users_by_id(inputs)
    target_users = users_by_id(targets)
    return [
        (input_users[uid], target_users[uid])
        for uid in sorted(input_users)
        if uid in target_users
    ]
