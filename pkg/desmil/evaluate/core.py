"""Top-p retrieval metrics and the evaluation loop.

Metrics are reported in percent, averaged over users with nonempty target sets.
"""
import json
import math
from dataclasses import dataclass, field
from typing import Collection, Dict, Sequence

import numpy as np
import torch

from desmil.data.batching import EvalExample, eval_batch_iter
from desmil.evaluate.retrieval import retrieve_topN
from desmil.modeling.primary import DesmilModel
from desmil.shared.constants import DEFAULT_CUTOFFS
from desmil.utils.display import maybe_tqdm

METRIC_NAMES = ("recall", "ndcg", "hr")


def _num_hits(recommended: Sequence[int], relevant: Collection[int], p: int) -> int:
    return sum(1 for item in recommended[:p] if item in relevant)


def recall_at_p(recommended: Sequence[int], relevant: Collection[int], p: int) -> float:
    """|top-p & relevant| / |relevant|."""
    relevant = set(relevant)
    _check_args(relevant, p)
    return _num_hits(recommended, relevant, p) / len(relevant)


def ndcg_at_p(recommended: Sequence[int], relevant: Collection[int], p: int) -> float:
    """Binary-relevance NDCG with a log2(rank + 1) discount, ranks starting at 1."""
    relevant = set(relevant)
    _check_args(relevant, p)
    dcg = sum(
        1.0 / math.log2(rank + 1)
        for rank, item in enumerate(recommended[:p], start=1)
        if item in relevant
    )
    idcg = sum(1.0 / math.log2(rank + 1) for rank in range(1, min(p, len(relevant)) + 1))
    return dcg / idcg


def hr_at_p(recommended: Sequence[int], relevant: Collection[int], p: int) -> float:
    relevant = set(relevant)
    _check_args(relevant, p)
    return 1.0 if _num_hits(recommended, relevant, p) > 0 else 0.0


def _check_args(relevant, p):
    if p < 1:
        raise ValueError(f"cutoff must be >= 1, got {p}")
    if not relevant:
        raise ValueError("relevant set must be nonempty")


METRIC_FUNCS = {"recall": recall_at_p, "ndcg": ndcg_at_p, "hr": hr_at_p}


def metric_keys(cutoffs: Sequence[int]):
    return [f"{name}{p}" for name in METRIC_NAMES for p in cutoffs]


@dataclass
class MetricsReport:
    """Percentages keyed `recall20, recall50, ndcg20, ndcg50, hr20, hr50`, plus the user count."""

    values: Dict[str, float]
    users: int
    cutoffs: Sequence[int] = field(default=DEFAULT_CUTOFFS)

    def __getitem__(self, key):
        if key == "users":
            return self.users
        return self.values[key]

    def to_dict(self) -> dict:
        result = {key: float(self.values[key]) for key in metric_keys(self.cutoffs)}
        result["users"] = int(self.users)
        return result

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, dictionary: dict, cutoffs=DEFAULT_CUTOFFS) -> "MetricsReport":
        return cls(
            values={key: float(dictionary[key]) for key in metric_keys(cutoffs)},
            users=int(dictionary["users"]),
            cutoffs=tuple(cutoffs),
        )

    @classmethod
    def mean(cls, reports: Sequence["MetricsReport"]) -> "MetricsReport":
        """Average of several reports (e.g. one per training seed)."""
        if not reports:
            raise ValueError("cannot average zero reports")
        cutoffs = tuple(reports[0].cutoffs)
        return cls(
            values={
                key: float(np.mean([r.values[key] for r in reports]))
                for key in metric_keys(cutoffs)
            },
            users=int(round(np.mean([r.users for r in reports]))),
            cutoffs=cutoffs,
        )


def score_user(recommended: Sequence[int], relevant: Collection[int], cutoffs) -> Dict[str, float]:
    return {
        f"{name}{p}": METRIC_FUNCS[name](recommended, relevant, p)
        for name in METRIC_NAMES
        for p in cutoffs
    }


def aggregate(per_user: Sequence[Dict[str, float]], cutoffs=DEFAULT_CUTOFFS) -> MetricsReport:
    """Mean over users, in list order, as percentages."""
    if not per_user:
        raise ValueError("no users to aggregate")
    keys = metric_keys(cutoffs)
    sums = dict.fromkeys(keys, 0.0)
    for scores in per_user:
        for key in keys:
            sums[key] += scores[key]
    return MetricsReport(
        values={key: 100.0 * sums[key] / len(per_user) for key in keys},
        users=len(per_user),
        cutoffs=tuple(cutoffs),
    )


def evaluate_model(
    model: DesmilModel,
    eval_examples: Sequence[EvalExample],
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    batch_size: int = 256,
    verbose: bool = False,
) -> MetricsReport:
    """Embeds each user's prefix, retrieves top-max(cutoffs) items and scores them.

    Raises:
        ValueError: if there are no examples with nonempty targets.

    """
    eval_examples = [ex for ex in eval_examples if ex.targets]
    if not eval_examples:
        raise ValueError("evaluation set is empty")
    N = max(cutoffs)
    per_user = []
    was_training = model.training
    model.eval()
    with torch.no_grad():
        for batch in maybe_tqdm(
            eval_batch_iter(
                eval_examples,
                batch_size=batch_size,
                max_length=model.max_length,
                pad_index=model.pad_index,
            ),
            desc="Evaluating",
            total=math.ceil(len(eval_examples) / batch_size),
            verbose=verbose,
        ):
            M = model.interests(batch.prefixes, batch.valid_lengths)
            for recommended, relevant in zip(retrieve_topN(M, model.V, N), batch.targets):
                per_user.append(score_user(recommended, set(relevant), cutoffs))
    model.train(was_training)
    return aggregate(per_user, cutoffs=cutoffs)
