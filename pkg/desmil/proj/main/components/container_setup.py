from dataclasses import dataclass
from typing import List

from desmil.data.batching import EvalExample, TrainingExample, make_eval_examples, make_examples
from desmil.data.splits import SplitBundle, read_split_dir


@dataclass
class DataContainer:
    bundle: SplitBundle
    train_examples: List[TrainingExample]
    val_examples: List[EvalExample]
    test_examples: List[EvalExample]

    @property
    def num_items(self) -> int:
        return self.bundle.num_items


def create_data_container(
    bundle: SplitBundle, max_length: int, expand_targets: bool = False
) -> DataContainer:
    """Builds training and evaluation examples from a split.

    Raises:
        ValueError: if the split yields no training or no validation examples.

    """
    train_examples = make_examples(bundle.train, max_length=max_length)
    val_examples = make_eval_examples(
        bundle.valid_inputs,
        bundle.valid_targets,
        max_length=max_length,
        expand_targets=expand_targets,
    )
    test_examples = make_eval_examples(
        bundle.test_inputs,
        bundle.test_targets,
        max_length=max_length,
        expand_targets=expand_targets,
    )
    if not train_examples:
        raise ValueError("training split has no examples (every sequence has length 1?)")
    if not val_examples:
        raise ValueError("validation split has no users with targets")
    return DataContainer(
        bundle=bundle,
        train_examples=train_examples,
        val_examples=val_examples,
        test_examples=test_examples,
    )


def create_data_container_from_dir(
    split_dir: str, max_length: int, expand_targets: bool = False
) -> DataContainer:
    return create_data_container(
        read_split_dir(split_dir), max_length=max_length, expand_targets=expand_targets
    )
