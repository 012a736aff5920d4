from typing import List, Union

import torch


def score_items(M: torch.Tensor, V: torch.Tensor) -> torch.Tensor:
    """Inner products of every interest with every real item: (..., c, d) -> (..., c, |I|).

    `V` is the full embedding table; its last (pad) row is never scored.
    """
    return torch.matmul(M, V[:-1].t())


def retrieve_topN(M: torch.Tensor, V: torch.Tensor, N: int) -> Union[List[int], List[List[int]]]:
    """Per-interest top-N retrieval, merged and re-ranked by the best interest score.

    Each interest takes its N highest-scoring items; the union is ordered by each item's
    maximum score over the interests that retrieved it. Score ties go to the lower item index.

    Args:
        M: c x d interests for one user, or B x c x d for a batch.
        V: (|I| + 1) x d item embeddings including the pad row.
        N: list length, >= 1.

    Returns:
        A ranked list of item indices of length min(N, |union|); a list of them for a batch.

    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    single = M.dim() == 2
    if single:
        M = M.unsqueeze(0)
    with torch.no_grad():
        scores = score_items(M, V)
        num_items = scores.shape[-1]
        n = min(N, num_items)
        _, per_interest = torch.sort(scores, dim=-1, descending=True, stable=True)
        retrieved = torch.zeros_like(scores, dtype=torch.bool)
        retrieved.scatter_(-1, per_interest[..., :n], True)
        merged = torch.where(retrieved, scores, torch.full_like(scores, -float("inf")))
        best, _ = merged.max(dim=1)
        best_scores, order = torch.sort(best, dim=-1, descending=True, stable=True)
    results = []
    for row_scores, row_order in zip(best_scores[:, :n], order[:, :n]):
        keep = torch.isfinite(row_scores)
        results.append(row_order[keep].tolist())
    return results[0] if single else results
