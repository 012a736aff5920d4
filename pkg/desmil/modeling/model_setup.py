import math
from dataclasses import dataclass
from typing import Tuple

import torch

import desmil.utils.numerics as numerics
from desmil.data.batching import DEFAULT_MAX_LENGTH
from desmil.modeling.primary import DEFAULT_NUM_NEGATIVES, DesmilModel, ModelParams
from desmil.shared.initialization import torch_generator
from desmil.utils.python.datastructures import ExtendedDataClassMixin

ADAM_BETAS = (0.9, 0.999)
ADAM_EPSILON = 1e-8


@dataclass
class TrainConfig(ExtendedDataClassMixin):
    embedding_dim: int = 64
    num_interests: int = 4
    hidden_factor: int = 4
    decorrelation_lambda: float = 1.0
    eta_w: float = 0.01
    use_sample_weights: bool = True
    hsic_sigma: str = "median"
    hsic_axis: str = "embedding"
    batch_size: int = 128
    eval_batch_size: int = 256
    learning_rate: float = 1e-3
    num_negatives: int = DEFAULT_NUM_NEGATIVES
    max_length: int = DEFAULT_MAX_LENGTH
    patience: int = 5
    min_epochs: int = 0
    max_epochs: int = 20
    max_steps: int = -1
    eval_every: int = 500
    seed: int = 0
    debug_checks: bool = False

    @property
    def hidden_dim(self) -> int:
        return self.hidden_factor * self.embedding_dim

    def validate(self):
        positive = (
            "embedding_dim",
            "num_interests",
            "hidden_factor",
            "batch_size",
            "eval_batch_size",
            "num_negatives",
            "max_length",
            "max_epochs",
            "eval_every",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        for name in ("eta_w", "patience", "min_epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.min_epochs > self.max_epochs:
            raise ValueError(
                f"min_epochs ({self.min_epochs}) exceeds max_epochs ({self.max_epochs})"
            )
        if self.decorrelation_lambda < 0:
            raise ValueError(f"lambda must be >= 0, got {self.decorrelation_lambda}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


def glorot_uniform(shape: Tuple[int, int], generator: torch.Generator) -> torch.Tensor:
    """Uniform in [-b, b], b = sqrt(6 / (fan_in + fan_out)), fan_out = rows, fan_in = cols."""
    fan_out, fan_in = shape
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    draws = torch.rand(shape, generator=generator, dtype=numerics.DTYPE)
    return (2.0 * draws - 1.0) * bound


def init_params(cfg: TrainConfig, num_items: int) -> ModelParams:
    generator = torch_generator(cfg.seed)
    d = cfg.embedding_dim
    V = glorot_uniform((num_items + 1, d), generator=generator)
    V[num_items] = 0.0
    return ModelParams(
        V=V,
        P_pos=glorot_uniform((cfg.max_length, d), generator=generator),
        W1=glorot_uniform((cfg.hidden_dim, d), generator=generator),
        W2=glorot_uniform((cfg.num_interests, cfg.hidden_dim), generator=generator),
    )


def setup_model(cfg: TrainConfig, num_items: int) -> DesmilModel:
    return DesmilModel(init_params(cfg, num_items=num_items))


def create_optimizer(model: DesmilModel, learning_rate: float) -> torch.optim.Adam:
    return torch.optim.Adam(
        model.parameters(), lr=learning_rate, betas=ADAM_BETAS, eps=ADAM_EPSILON
    )


def adam_step(model: DesmilModel, optimizer: torch.optim.Optimizer):
    """One optimizer step; the pad row of V never moves."""
    pad = model.pad_index
    if model.V.grad is not None:
        model.V.grad[pad] = 0.0
    optimizer.step()
    with torch.no_grad():
        model.V[pad] = 0.0
    optimizer.zero_grad()
