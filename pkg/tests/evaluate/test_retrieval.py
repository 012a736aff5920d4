import pytest
import torch

from desmil.evaluate.retrieval import retrieve_topN, score_items

V = torch.tensor(
    [[3.0, 0.0], [2.0, 1.0], [0.0, 4.0], [1.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [0.0, 0.0]],
    dtype=torch.float64,
)
M = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)


def _brute_force(M, V, N):
    scores = score_items(M, V)
    retrieved = set()
    for row in scores:
        ranked = sorted(range(len(row)), key=lambda i: (-row[i].item(), i))
        retrieved.update(ranked[:N])
    best = {i: max(scores[:, i]).item() for i in retrieved}
    return sorted(retrieved, key=lambda i: (-best[i], i))[:N]


def test_score_items_skips_pad():
    assert score_items(M, V).shape == (2, 6)


def test_two_interest_hand_case():
    assert retrieve_topN(M, V, 2) == [2, 0]
    assert retrieve_topN(M, V, 3) == [2, 0, 1]
    for N in range(1, 8):
        assert retrieve_topN(M, V, N) == _brute_force(M, V, N)


def test_single_interest_is_plain_top_n():
    assert retrieve_topN(M[:1], V, 3) == [0, 1, 3]


def test_large_n_never_returns_pad():
    result = retrieve_topN(M, V, 50)
    assert sorted(result) == [0, 1, 2, 3, 4, 5]
    assert len(set(result)) == len(result)


def test_batched():
    batch = torch.stack([M, M.flip(0)])
    assert retrieve_topN(batch, V, 2) == [[2, 0], [2, 0]]


def test_random_against_brute_force():
    generator = torch.Generator().manual_seed(0)
    for _ in range(20):
        V_rand = torch.randn(31, 5, generator=generator, dtype=torch.float64)
        V_rand[30] = 0.0
        M_rand = torch.randn(3, 5, generator=generator, dtype=torch.float64)
        assert retrieve_topN(M_rand, V_rand, 7) == _brute_force(M_rand, V_rand, 7)


def test_rejects_bad_n():
    with pytest.raises(ValueError):
        retrieve_topN(M, V, 0)
