"""Self-attentive multi-interest network with target-aware interest selection.

Every operation works on a leading batch axis; a single example is the B = 1 case.
Item index `num_items` is the pad index: row `num_items` of `V` is zero and never trained.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import torch
import torch.nn as nn

import desmil.utils.numerics as numerics
from desmil.data.batching import Batch
from desmil.utils.python.datastructures import ExtendedDataClassMixin

DEFAULT_NUM_NEGATIVES = 10
MASK_LOGIT = -1e9
PARAM_NAMES = ("V", "P_pos", "W1", "W2")


@dataclass
class ModelParams(ExtendedDataClassMixin):
    """V: (num_items + 1) x d, P_pos: L_max x d, W1: d_hat x d, W2: c x d_hat."""

    V: torch.Tensor
    P_pos: torch.Tensor
    W1: torch.Tensor
    W2: torch.Tensor

    @property
    def num_items(self) -> int:
        return self.V.shape[0] - 1

    @property
    def max_length(self) -> int:
        return self.P_pos.shape[0]

    @property
    def embedding_dim(self) -> int:
        return self.V.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def num_interests(self) -> int:
        return self.W2.shape[0]

    def validate(self):
        d = self.embedding_dim
        if self.P_pos.shape[1] != d or self.W1.shape[1] != d:
            raise ValueError(f"inconsistent embedding width in {self.shapes()}")
        if self.W2.shape[1] != self.hidden_dim:
            raise ValueError(f"inconsistent attention width in {self.shapes()}")
        if min(d, self.hidden_dim, self.num_interests, self.max_length) < 1:
            raise ValueError(f"empty parameter matrix in {self.shapes()}")
        for name in PARAM_NAMES:
            numerics.assert_finite(getattr(self, name), name=name)
        if bool(self.V[self.num_items].abs().sum() != 0):
            raise ValueError("pad row of V must be zero")

    def shapes(self):
        return {name: tuple(getattr(self, name).shape) for name in PARAM_NAMES}


@dataclass
class ModelOutput(ExtendedDataClassMixin):
    loss: torch.Tensor
    per_sample_loss: torch.Tensor
    interests: torch.Tensor
    selected_index: torch.Tensor


class DesmilModel(nn.Module):
    def __init__(self, params: ModelParams):
        super().__init__()
        params.validate()
        self.V = nn.Parameter(numerics.as_matrix(params.V))
        self.P_pos = nn.Parameter(numerics.as_matrix(params.P_pos))
        self.W1 = nn.Parameter(numerics.as_matrix(params.W1))
        self.W2 = nn.Parameter(numerics.as_matrix(params.W2))

    @property
    def num_items(self) -> int:
        return self.V.shape[0] - 1

    @property
    def pad_index(self) -> int:
        return self.num_items

    @property
    def max_length(self) -> int:
        return self.P_pos.shape[0]

    @property
    def num_interests(self) -> int:
        return self.W2.shape[0]

    def get_params(self) -> ModelParams:
        """Detached copy of the current parameters."""
        return ModelParams(**{name: getattr(self, name).detach().clone() for name in PARAM_NAMES})

    def load_params(self, params: ModelParams):
        params.validate()
        with torch.no_grad():
            for name in PARAM_NAMES:
                getattr(self, name).copy_(getattr(params, name))

    def build_input_embedding(
        self, prefixes: torch.LongTensor, valid_lengths: torch.LongTensor
    ) -> Tuple[torch.Tensor, torch.BoolTensor]:
        """E[b, k] = V[prefix[b, k]] + P_pos[k], and the mask of valid positions.

        Args:
            prefixes: B x t item indices (t <= L_max), pad index past each valid length.
            valid_lengths: B counts in [1, t].

        Returns:
            (E: B x t x d, mask: B x t bool)

        """
        if prefixes.dim() != 2:
            raise ValueError(f"prefixes must be B x t, got shape {tuple(prefixes.shape)}")
        num_positions = prefixes.shape[1]
        if num_positions > self.max_length:
            raise ValueError(f"prefix length {num_positions} exceeds L_max={self.max_length}")
        if bool((valid_lengths < 1).any()) or bool((valid_lengths > num_positions).any()):
            raise ValueError(f"valid lengths must lie in [1, {num_positions}]")
        mask = torch.arange(num_positions).unsqueeze(0) < valid_lengths.unsqueeze(1)
        valid_items = prefixes[mask]
        if bool((valid_items < 0).any()) or bool((valid_items >= self.num_items).any()):
            raise IndexError(f"item index out of range [0, {self.num_items})")
        if bool((prefixes[~mask] != self.pad_index).any()):
            raise ValueError("padded positions must hold the pad index")
        E = self.V[prefixes] + self.P_pos[:num_positions].unsqueeze(0)
        return E, mask

    def extract_interests(
        self, E: torch.Tensor, mask: torch.BoolTensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """A = softmax(W2 tanh(W1 E^T)) over valid positions, M = A E.

        Returns:
            (M: B x c x d, A: B x c x t)

        """
        hidden = numerics.tanh_elementwise(numerics.matmul(E, self.W1.t()))
        logits = numerics.matmul(hidden, self.W2.t()).transpose(1, 2)
        logits = logits.masked_fill(~mask.unsqueeze(1), MASK_LOGIT)
        A = numerics.softmax_rows(logits)
        M = numerics.matmul(A, E)
        return M, A

    @staticmethod
    def select_interest(
        M: torch.Tensor, target_embedding: torch.Tensor
    ) -> Tuple[torch.LongTensor, torch.Tensor]:
        """Row of M with the largest inner product with the target, lowest index on ties.

        The index is a constant: gradients reach only the selected row.
        """
        scores = torch.einsum("bcd,bd->bc", M.detach(), target_embedding.detach())
        # torch.argmax returns the first maximal index
        index = torch.argmax(scores, dim=1)
        selected = M[torch.arange(M.shape[0]), index]
        return index, selected

    def sampled_softmax_loss(
        self, selected: torch.Tensor, targets: torch.LongTensor, negatives: torch.LongTensor
    ) -> torch.Tensor:
        """Per-example -log softmax of the target logit against k explicit negatives.

        Args:
            selected: B x d selected interests.
            targets: B item indices.
            negatives: B x k item indices, excluding each target and the pad index.

        Returns:
            B nonnegative losses.

        """
        if bool((negatives == targets.unsqueeze(1)).any()):
            raise ValueError("target item found among its negatives")
        if bool((negatives == self.pad_index).any()) or bool((negatives < 0).any()):
            raise ValueError("negatives must be real item indices")
        positive_logit = (selected * self.V[targets]).sum(dim=-1, keepdim=True)
        negative_logits = torch.einsum("bd,bkd->bk", selected, self.V[negatives])
        logits = torch.cat([positive_logit, negative_logits], dim=1)
        loss = torch.logsumexp(logits, dim=1) - positive_logit.squeeze(1)
        # logsumexp >= any of its terms; clamp rounding below zero
        return torch.clamp(loss, min=0.0)

    @staticmethod
    def weighted_loss(per_sample_loss: torch.Tensor, weights: Optional[torch.Tensor]):
        """Batch mean of w_h * loss_h; weights are constants here."""
        if weights is None:
            return per_sample_loss.mean()
        return (weights.detach().to(per_sample_loss.dtype) * per_sample_loss).mean()

    def sample_negatives(
        self, targets: torch.LongTensor, k: int, generator: torch.Generator
    ) -> torch.LongTensor:
        """k uniform draws per row from the real items other than the target, with replacement."""
        if self.num_items < 2:
            raise ValueError("negative sampling needs at least 2 items")
        draws = torch.randint(
            0, self.num_items - 1, (targets.shape[0], k), generator=generator, dtype=torch.long
        )
        return draws + (draws >= targets.unsqueeze(1)).long()

    def interests(self, prefixes: torch.LongTensor, valid_lengths: torch.LongTensor):
        E, mask = self.build_input_embedding(prefixes, valid_lengths)
        M, _ = self.extract_interests(E, mask)
        return M

    def forward(
        self,
        batch: Batch,
        generator: torch.Generator,
        weights: Optional[torch.Tensor] = None,
        num_negatives: int = DEFAULT_NUM_NEGATIVES,
    ) -> ModelOutput:
        M = self.interests(batch.prefixes, batch.valid_lengths)
        index, selected = self.select_interest(M, self.V[batch.targets])
        negatives = self.sample_negatives(batch.targets, k=num_negatives, generator=generator)
        per_sample_loss = self.sampled_softmax_loss(selected, batch.targets, negatives)
        return ModelOutput(
            loss=self.weighted_loss(per_sample_loss, weights),
            per_sample_loss=per_sample_loss,
            interests=M,
            selected_index=index,
        )
