import math

import pytest
import torch

import desmil.modeling.model_setup as model_setup
from desmil.shared.initialization import torch_generator


def test_train_config_defaults():
    cfg = model_setup.TrainConfig()
    cfg.validate()
    assert cfg.hidden_dim == 256
    assert (cfg.decorrelation_lambda, cfg.eta_w, cfg.num_negatives) == (1.0, 0.01, 10)


@pytest.mark.parametrize(
    "overrides",
    [
        {"embedding_dim": 0},
        {"learning_rate": 0.0},
        {"decorrelation_lambda": -1.0},
        {"seed": -1},
        {"min_epochs": -1},
        {"min_epochs": 3, "max_epochs": 2},
    ],
)
def test_train_config_validate(overrides):
    with pytest.raises(ValueError):
        model_setup.TrainConfig(**overrides).validate()


def test_glorot_uniform_bound():
    draws = model_setup.glorot_uniform((30, 20), generator=torch_generator(0))
    bound = math.sqrt(6.0 / 50)
    assert float(draws.abs().max()) <= bound
    assert draws.dtype == torch.float64


def test_init_params_is_seeded():
    cfg = model_setup.TrainConfig(embedding_dim=8, num_interests=3, hidden_factor=2, max_length=5)
    params = model_setup.init_params(cfg, num_items=11)
    assert params.shapes() == {"V": (12, 8), "P_pos": (5, 8), "W1": (16, 8), "W2": (3, 16)}
    assert bool((params.V[11] == 0).all())
    again = model_setup.init_params(cfg, num_items=11)
    assert torch.equal(params.W2, again.W2)
    other = model_setup.init_params(cfg.new(seed=1), num_items=11)
    assert not torch.equal(params.W2, other.W2)


def test_adam_step_matches_update_rule():
    cfg = model_setup.TrainConfig(embedding_dim=2, num_interests=1, hidden_factor=1, max_length=2)
    model = model_setup.setup_model(cfg, num_items=3)
    optimizer = model_setup.create_optimizer(model, learning_rate=0.1)
    before = model.W1.detach().clone()
    (model.W1 * torch.tensor([[1.0, -2.0], [0.5, 3.0]], dtype=torch.float64)).sum().backward()
    grad = model.W1.grad.clone()
    model_setup.adam_step(model, optimizer)
    # the first bias-corrected step is lr * g / (|g| + eps)
    expected = before - 0.1 * grad / (grad.abs() + model_setup.ADAM_EPSILON)
    assert torch.allclose(model.W1.detach(), expected, atol=1e-12)
    assert model.W1.grad is None or bool((model.W1.grad == 0).all())


def test_adam_step_keeps_pad_row_zero():
    cfg = model_setup.TrainConfig(embedding_dim=3, num_interests=2, hidden_factor=1, max_length=2)
    model = model_setup.setup_model(cfg, num_items=4)
    optimizer = model_setup.create_optimizer(model, learning_rate=0.5)
    for _ in range(5):
        (model.V ** 2).sum().mul(-1).backward()
        model_setup.adam_step(model, optimizer)
        assert bool((model.V[model.pad_index] == 0).all())
    assert bool((model.V[:4] != 0).any())
