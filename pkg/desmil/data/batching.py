"""Training examples, padded batches and evaluation examples."""
from dataclasses import dataclass
from typing import Iterator, List, Sequence

import numpy as np
import torch

from desmil.data.core import SequenceDataset
from desmil.data.splits import pair_users
from desmil.utils.python.datastructures import ExtendedDataClassMixin

DEFAULT_MAX_LENGTH = 20


@dataclass(frozen=True)
class TrainingExample(ExtendedDataClassMixin):
    sample_id: int
    user: int
    prefix: List[int]
    target: int


@dataclass(frozen=True)
class EvalExample(ExtendedDataClassMixin):
    user: int
    prefix: List[int]
    targets: List[int]


class BatchMixin(ExtendedDataClassMixin):
    def to(self, device, non_blocking=False):
        # noinspection PyArgumentList
        return self.__class__(
            **{
                k: v.to(device=device, non_blocking=non_blocking)
                if isinstance(v, torch.Tensor)
                else v
                for k, v in self.to_dict().items()
            }
        )

    def __len__(self):
        return len(getattr(self, self.get_fields()[0]))


@dataclass
class Batch(BatchMixin):
    """B x L_max prefixes right-padded with the pad index."""

    prefixes: torch.LongTensor
    valid_lengths: torch.LongTensor
    targets: torch.LongTensor
    sample_ids: torch.LongTensor

    @classmethod
    def from_examples(cls, examples: Sequence[TrainingExample], max_length: int, pad_index: int):
        prefixes, valid_lengths = pad_prefixes(
            [ex.prefix for ex in examples], max_length=max_length, pad_index=pad_index
        )
        return cls(
            prefixes=prefixes,
            valid_lengths=valid_lengths,
            targets=torch.tensor([ex.target for ex in examples], dtype=torch.long),
            sample_ids=torch.tensor([ex.sample_id for ex in examples], dtype=torch.long),
        )


@dataclass
class EvalBatch(BatchMixin):
    prefixes: torch.LongTensor
    valid_lengths: torch.LongTensor
    targets: List[List[int]]

    @classmethod
    def from_examples(cls, examples: Sequence[EvalExample], max_length: int, pad_index: int):
        prefixes, valid_lengths = pad_prefixes(
            [ex.prefix for ex in examples], max_length=max_length, pad_index=pad_index
        )
        return cls(
            prefixes=prefixes,
            valid_lengths=valid_lengths,
            targets=[list(ex.targets) for ex in examples],
        )


def pad_prefixes(prefix_ls: Sequence[Sequence[int]], max_length: int, pad_index: int):
    prefixes = torch.full((len(prefix_ls), max_length), pad_index, dtype=torch.long)
    valid_lengths = torch.zeros(len(prefix_ls), dtype=torch.long)
    for i, prefix in enumerate(prefix_ls):
        if not 1 <= len(prefix) <= max_length:
            raise ValueError(f"prefix length {len(prefix)} outside [1, {max_length}]")
        prefixes[i, : len(prefix)] = torch.tensor(prefix, dtype=torch.long)
        valid_lengths[i] = len(prefix)
    return prefixes, valid_lengths


def make_examples(
    ds: SequenceDataset, max_length: int = DEFAULT_MAX_LENGTH
) -> List[TrainingExample]:
    """One example per (user, position t >= 1), users ascending then positions ascending.

    The prefix holds the most recent min(t, max_length) events before the target, so
    `sample_id` is stable for a given dataset and max_length.
    """
    if max_length < 1:
        raise ValueError(f"max_length must be >= 1, got {max_length}")
    examples = []
    for user in ds.users():
        seq = ds.sequences[user]
        for t in range(1, len(seq)):
            examples.append(
                TrainingExample(
                    sample_id=len(examples),
                    user=user,
                    prefix=list(seq[max(0, t - max_length) : t]),
                    target=seq[t],
                )
            )
    return examples


def epoch_permutation(num_examples: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, epoch]).permutation(num_examples)


def batch_iter(
    examples: Sequence[TrainingExample],
    batch_size: int,
    seed: int,
    epoch: int,
    max_length: int,
    pad_index: int,
) -> Iterator[Batch]:
    """Yields the batches of one epoch, a seeded permutation of `examples`.

    The final short batch is emitted as-is.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = epoch_permutation(len(examples), seed=seed, epoch=epoch)
    for start in range(0, len(order), batch_size):
        yield Batch.from_examples(
            [examples[i] for i in order[start : start + batch_size]],
            max_length=max_length,
            pad_index=pad_index,
        )


def make_eval_examples(
    inputs: SequenceDataset,
    targets: SequenceDataset,
    max_length: int = DEFAULT_MAX_LENGTH,
    expand_targets: bool = False,
) -> List[EvalExample]:
    """Pairs each user's input history with their target events.

    The prefix is the most recent `max_length` input events. Users without targets are
    skipped. With `expand_targets`, every target event becomes its own example.
    """
    examples = []
    for input_user, target_user in pair_users(inputs, targets):
        history = inputs.sequences[input_user]
        user_targets = targets.sequences.get(target_user, [])
        if not history or not user_targets:
            continue
        prefix = list(history[-max_length:])
        if expand_targets:
            examples.extend(
                EvalExample(user=input_user, prefix=prefix, targets=[target])
                for target in user_targets
            )
        else:
            examples.append(EvalExample(user=input_user, prefix=prefix, targets=list(user_targets)))
    return examples


def eval_batch_iter(
    examples: Sequence[EvalExample], batch_size: int, max_length: int, pad_index: int
) -> Iterator[EvalBatch]:
    for start in range(0, len(examples), batch_size):
        yield EvalBatch.from_examples(
            examples[start : start + batch_size], max_length=max_length, pad_index=pad_index
        )
