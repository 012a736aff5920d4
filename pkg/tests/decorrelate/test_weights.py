import numpy as np
import pytest
import torch

import desmil.decorrelate.kernels as kernels
import desmil.decorrelate.weights as weights
import desmil.utils.numerics as numerics


def _interests(seed, batch_size=8, c=3, d=16):
    rng = np.random.default_rng(seed)
    return numerics.as_matrix(rng.normal(size=(batch_size, c, d)))


def test_table_create_and_set():
    table = weights.SampleWeightTable.create(5)
    assert len(table) == 5
    assert table.get([0, 4]).tolist() == [1.0, 1.0]
    table.set([1, 3], torch.tensor([0.25, 0.0], dtype=torch.float64), step=7)
    assert table.w.tolist() == [1.0, 0.25, 1.0, 0.0, 1.0]
    assert table.epoch_tag.tolist() == [-1, 7, -1, 7, -1]
    with pytest.raises(RuntimeError):
        table.set([0], torch.tensor([1.5], dtype=torch.float64), step=8)


def test_table_rejects_out_of_range():
    with pytest.raises(ValueError):
        weights.SampleWeightTable(w=np.array([0.5, -0.1]), epoch_tag=np.array([-1, -1]))


def test_table_histogram_and_fraction():
    table = weights.SampleWeightTable(
        w=np.array([0.0, 0.01, 0.5, 1.0]), epoch_tag=np.full(4, -1)
    )
    counts, edges = table.histogram(bins=4)
    assert counts.tolist() == [2, 0, 1, 1]
    assert edges.tolist() == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert table.fraction_below(0.05) == 0.5


def test_table_dump(tmp_path):
    table = weights.SampleWeightTable.create(3)
    table.set([1], torch.tensor([0.1234567890123], dtype=torch.float64), step=1)
    path = str(tmp_path / "out" / "weights.tsv")
    table.dump_tsv(path)
    assert (tmp_path / "out" / "weights.tsv").read_text().splitlines() == [
        "0\t1.0",
        "1\t0.1234567890123",
        "2\t1.0",
    ]
    assert np.array_equal(weights.SampleWeightTable.read_tsv(path).w, table.w)


def test_update_descends():
    for seed in range(10):
        M = _interests(seed)
        table = weights.SampleWeightTable.create(20)
        ids = torch.arange(4, 12)
        result = weights.update_sample_weights(
            ids, M, table, decorrelation_lambda=1.0, eta_w=0.01, step=1
        )
        assert result.descended()
        unclipped = ~result.clipped
        assert bool((result.objective_after[unclipped] <= result.objective_before[unclipped]).all())
        assert bool((table.w >= 0).all()) and bool((table.w <= 1).all())
        assert np.array_equal(table.w[ids.numpy()], result.weights_after.numpy())


def test_update_moves_weights_down_the_gradient():
    M = _interests(0)
    table = weights.SampleWeightTable.create(8)
    table.w[:] = 0.5
    result = weights.update_sample_weights(
        torch.arange(8), M, table, decorrelation_lambda=1.0, eta_w=0.01
    )
    assert not torch.equal(result.weights_after, result.weights_before)
    cfg = kernels.KernelConfig()
    before = weights.weight_objective(result.weights_before, M, cfg).sum()
    after = weights.weight_objective(result.weights_after, M, cfg).sum()
    assert after.item() <= before.item()


def test_update_leaves_other_entries():
    table = weights.SampleWeightTable.create(10)
    table.w[0] = 0.3
    weights.update_sample_weights(
        torch.tensor([2, 5, 7]), _interests(1, batch_size=3), table, decorrelation_lambda=10.0
    )
    untouched = [0, 1, 3, 4, 6, 8, 9]
    assert table.w[untouched].tolist() == [0.3] + [1.0] * 6
    assert (table.epoch_tag[untouched] == weights.NEVER_UPDATED).all()


def test_zero_lambda_keeps_weights():
    table = weights.SampleWeightTable.create(8)
    result = weights.update_sample_weights(
        torch.arange(8), _interests(2), table, decorrelation_lambda=0.0
    )
    assert table.w.tolist() == [1.0] * 8
    assert torch.equal(result.objective_after, result.objective_before)


def test_large_steps_are_clipped():
    table = weights.SampleWeightTable.create(8)
    result = weights.update_sample_weights(
        torch.arange(8), _interests(3), table, decorrelation_lambda=1.0, eta_w=1e6
    )
    assert bool(result.clipped.any())
    assert bool((table.w >= 0).all()) and bool((table.w <= 1).all())


def test_reverted_samples_are_not_marked_clipped(monkeypatch):
    slopes = torch.tensor([1.0, 1.0, 1000.0], dtype=torch.float64)
    kinks = torch.tensor([10.0, 0.0, 0.0], dtype=torch.float64)

    def objective(w, M, cfg, hsic_axis="embedding"):
        # the kink has zero gradient at w = 1, so the first sample rises on every halving
        return w * slopes + kinks * (w - 1.0).abs()

    monkeypatch.setattr(weights, "weight_objective", objective)
    table = weights.SampleWeightTable.create(3)
    result = weights.update_sample_weights(
        torch.arange(3), _interests(0, batch_size=3), table, decorrelation_lambda=1.0
    )
    assert table.w.tolist() == pytest.approx([1.0, 0.99, 0.0])
    assert result.clipped.tolist() == [False, False, True]
    assert result.objective_after[0].item() == result.objective_before[0].item()
    assert result.descended()

def test_duplicate_ids_rejected():
    with pytest.raises(ValueError):
        weights.update_sample_weights(
            torch.tensor([1, 1]),
            _interests(4, batch_size=2),
            weights.SampleWeightTable.create(3),
            decorrelation_lambda=1.0,
        )


def test_batch_axis_update():
    table = weights.SampleWeightTable.create(8)
    result = weights.update_sample_weights(
        torch.arange(8), _interests(5), table, decorrelation_lambda=1.0, hsic_axis="batch"
    )
    assert result.objective_before.dim() == 0
    assert result.descended() or bool(result.clipped.any())
    assert bool((table.w >= 0).all()) and bool((table.w <= 1).all())


def test_mean_batch_dependence():
    M = _interests(6)
    expected = kernels.interest_dependence(M).mean().item()
    assert weights.mean_batch_dependence(M) == pytest.approx(expected, abs=1e-12)
    assert isinstance(weights.mean_batch_dependence(M, hsic_axis="batch"), float)
