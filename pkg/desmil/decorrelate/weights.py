"""Per-sample weights and their projected-gradient update.

A weight step rescales each sample's interest matrix, w_h * M_h, and moves w_h down the
gradient of the pairwise interest dependence. The kernel bandwidth is measured on the raw
M_h and held fixed: a median bandwidth measured on w_h * M_h scales with w_h and would make
the objective independent of it.
"""
from dataclasses import dataclass

import numpy as np
import torch

import desmil.utils.numerics as numerics
import desmil.utils.python.io as py_io
from desmil.decorrelate.kernels import KernelConfig, dependence_fn, reweight_interests

DEFAULT_ETA_W = 0.01
MAX_BACKTRACKS = 10
NEVER_UPDATED = -1


class SampleWeightTable:
    """Weights in [0, 1] indexed by sample_id, with the step of each entry's last update."""

    def __init__(self, w: np.ndarray, epoch_tag: np.ndarray):
        if w.shape != epoch_tag.shape or w.ndim != 1:
            raise ValueError("w and epoch_tag must be 1-d arrays of the same length")
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("sample weights must lie in [0, 1]")
        self.w = w.astype(np.float64)
        self.epoch_tag = epoch_tag.astype(np.int64)

    @classmethod
    def create(cls, num_samples: int) -> "SampleWeightTable":
        return cls(
            w=np.ones(num_samples, dtype=np.float64),
            epoch_tag=np.full(num_samples, NEVER_UPDATED, dtype=np.int64),
        )

    def __len__(self):
        return len(self.w)

    def get(self, sample_ids) -> torch.Tensor:
        return torch.tensor(self.w[np.asarray(sample_ids)], dtype=numerics.DTYPE)

    def set(self, sample_ids, values: torch.Tensor, step: int):
        ids = np.asarray(sample_ids)
        values = values.detach().cpu().numpy().astype(np.float64)
        if np.any(values < 0) or np.any(values > 1):
            raise RuntimeError("sample weights left [0, 1]")
        self.w[ids] = values
        self.epoch_tag[ids] = step

    def copy(self) -> "SampleWeightTable":
        return SampleWeightTable(w=self.w.copy(), epoch_tag=self.epoch_tag.copy())

    def histogram(self, bins: int = 20):
        """(counts, edges) over [0, 1]."""
        return np.histogram(self.w, bins=bins, range=(0.0, 1.0))

    def fraction_below(self, threshold: float) -> float:
        if len(self.w) == 0:
            return 0.0
        return float(np.mean(self.w < threshold))

    def dump_tsv(self, path: str):
        """`sample_id<TAB>weight` lines in sample_id order."""
        py_io.create_containing_folder(path)
        py_io.write_tsv_rows(((i, repr(float(w))) for i, w in enumerate(self.w)), path=path)

    @classmethod
    def read_tsv(cls, path: str) -> "SampleWeightTable":
        rows = py_io.read_tsv_rows(path)
        ids = np.array([int(row[0]) for row in rows], dtype=np.int64)
        if not np.array_equal(ids, np.arange(len(rows))):
            raise RuntimeError(f"{path} must list sample ids 0..n-1 in order")
        w = np.array([float(row[1]) for row in rows], dtype=np.float64)
        return cls(w=w, epoch_tag=np.full(len(w), NEVER_UPDATED, dtype=np.int64))


@dataclass
class UpdateResult:
    """Objective values around one weight step.

    `objective_before` / `objective_after` are per sample (shape B) on the embedding axis and
    a single batch value on the batch axis.
    """

    sample_ids: torch.LongTensor
    weights_before: torch.Tensor
    weights_after: torch.Tensor
    objective_before: torch.Tensor
    objective_after: torch.Tensor
    clipped: torch.BoolTensor

    def descended(self, atol=1e-12) -> bool:
        return bool((self.objective_after <= self.objective_before + atol).all())


def weight_objective(
    w: torch.Tensor, M: torch.Tensor, cfg: KernelConfig, hsic_axis="embedding"
) -> torch.Tensor:
    """Dependence of w * M with the bandwidth measured on M."""
    return dependence_fn(hsic_axis)(reweight_interests(M, w), cfg, reference=M)


def update_sample_weights(
    sample_ids: torch.LongTensor,
    M: torch.Tensor,
    table: SampleWeightTable,
    decorrelation_lambda: float,
    cfg: KernelConfig = KernelConfig(),
    eta_w: float = DEFAULT_ETA_W,
    step: int = 0,
    hsic_axis: str = "embedding",
) -> UpdateResult:
    """One projected gradient step w <- clip(w - eta_w * lambda * grad, 0, 1) on in-batch weights.

    Model parameters are not touched: M is detached. Samples whose objective would rise after
    an unclipped step have their step halved, up to MAX_BACKTRACKS times, and keep their old
    weight if it still rises; `clipped` then describes the weights that were kept. Entries of
    `table` outside `sample_ids` are left unchanged.

    Args:
        sample_ids: B ids indexing `table`.
        M: B x c x d interest matrices computed with the current parameters.
        table: weight table, updated in place.
        decorrelation_lambda: step scale; 0 leaves every weight as it is.
        cfg: kernel configuration.
        eta_w: base step size.
        step: training step recorded in `table.epoch_tag`.
        hsic_axis: "embedding" (per-sample objective) or "batch" (one objective per batch).

    Returns:
        UpdateResult

    """
    M = M.detach().to(numerics.DTYPE)
    ids = sample_ids.detach().cpu().numpy()
    if len(np.unique(ids)) != len(ids):
        raise ValueError("sample ids within a batch must be unique")
    w = table.get(ids).requires_grad_(True)
    objective = weight_objective(w, M, cfg, hsic_axis=hsic_axis)
    before = objective.detach().clone()
    step_size = eta_w * decorrelation_lambda
    if step_size == 0:
        w_new = w.detach().clone()
        table.set(ids, w_new, step=step)
        return UpdateResult(
            sample_ids=sample_ids,
            weights_before=w_new,
            weights_after=w_new,
            objective_before=before,
            objective_after=before,
            clipped=torch.zeros(len(ids), dtype=torch.bool),
        )

    gradient = numerics.grad(objective.sum(), w, retain_graph=False)
    w_old = w.detach()
    scale = torch.ones_like(w_old)
    with torch.no_grad():
        for _ in range(MAX_BACKTRACKS + 1):
            raw = w_old - scale * step_size * gradient
            w_new = torch.clamp(raw, 0.0, 1.0)
            clipped = (raw < 0.0) | (raw > 1.0)
            after = weight_objective(w_new, M, cfg, hsic_axis=hsic_axis)
            rose = _rose(after, before, clipped, hsic_axis)
            if not bool(rose.any()):
                break
            scale = torch.where(rose, scale / 2, scale)
        else:
            # keep the old weight where even the shortest step rose
            w_new = torch.where(rose, w_old, w_new)
            after = weight_objective(w_new, M, cfg, hsic_axis=hsic_axis)
    table.set(ids, w_new, step=step)
    return UpdateResult(
        sample_ids=sample_ids,
        weights_before=w_old,
        weights_after=w_new,
        objective_before=before,
        objective_after=after,
        clipped=clipped,
    )


def _rose(after, before, clipped, hsic_axis) -> torch.BoolTensor:
    if hsic_axis == "batch":
        rose = bool(after > before) and not bool(clipped.any())
        return torch.full(clipped.shape, rose, dtype=torch.bool)
    return (after > before) & ~clipped


def mean_batch_dependence(
    M: torch.Tensor, cfg: KernelConfig = KernelConfig(), hsic_axis: str = "embedding"
) -> float:
    """Unweighted dependence of raw interest matrices, averaged over the batch."""
    with torch.no_grad():
        value = dependence_fn(hsic_axis)(M.detach().to(numerics.DTYPE), cfg)
    return float(value.mean()) if value.dim() else float(value)
