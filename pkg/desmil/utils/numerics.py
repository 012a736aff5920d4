"""Dense float64 matrix primitives with reverse-mode gradients.

Matrices are `torch.Tensor`s of dtype float64 and the gradient tape is torch's autograd
graph: every op below records itself when its inputs require grad, and `grad` replays the
adjoints in reverse order. The central-difference helpers are the oracle the gradient test
suite checks against.
"""
from typing import Callable, Sequence, Union

import numpy as np
import torch

DTYPE = torch.float64
FD_STEP = 1e-5


class NonFiniteError(FloatingPointError):
    pass


def as_matrix(data: Union[Sequence, np.ndarray, torch.Tensor], requires_grad=False) -> torch.Tensor:
    """Converts nested lists / arrays / tensors to a float64 tensor (a copy for tensors)."""
    if isinstance(data, torch.Tensor):
        matrix = data.detach().to(DTYPE).clone()
    else:
        matrix = torch.tensor(np.asarray(data, dtype=np.float64), dtype=DTYPE)
    if requires_grad:
        matrix.requires_grad_(True)
    return matrix


def assert_finite(x: torch.Tensor, name="matrix") -> torch.Tensor:
    if not bool(torch.isfinite(x).all()):
        raise NonFiniteError(f"{name} of shape {tuple(x.shape)} contains NaN or Inf")
    return x


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(
            f"Cannot multiply matrices of shape {tuple(a.shape)} and {tuple(b.shape)}"
        )
    return torch.matmul(a, b)


def softmax_rows(a: torch.Tensor) -> torch.Tensor:
    """Row-wise softmax (over the last axis) with max-subtraction."""
    if a.numel() == 0:
        raise ValueError("softmax_rows requires a nonempty matrix")
    shifted = a - a.max(dim=-1, keepdim=True).values.detach()
    exp = torch.exp(shifted)
    return exp / exp.sum(dim=-1, keepdim=True)


def tanh_elementwise(a: torch.Tensor) -> torch.Tensor:
    return torch.tanh(a)


def grad(loss: torch.Tensor, wrt: torch.Tensor, retain_graph=True) -> torch.Tensor:
    """d(loss)/d(wrt); a zero matrix when `wrt` does not reach the loss."""
    if loss.numel() != 1:
        raise ValueError(f"grad expects a scalar loss, got shape {tuple(loss.shape)}")
    if not loss.requires_grad or not wrt.requires_grad:
        return torch.zeros_like(wrt, dtype=DTYPE)
    (result,) = torch.autograd.grad(
        loss.reshape(()), [wrt], retain_graph=retain_graph, allow_unused=True
    )
    if result is None:
        return torch.zeros_like(wrt, dtype=DTYPE)
    return result


def central_difference_grad(
    fn: Callable[[torch.Tensor], torch.Tensor], x: torch.Tensor, h: float = FD_STEP
) -> torch.Tensor:
    """Central finite differences of a scalar function, one coordinate at a time."""
    x = as_matrix(x)
    flat = x.reshape(-1)
    result = torch.zeros_like(flat)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + h
            f_plus = float(fn(x))
            flat[i] = orig - h
            f_minus = float(fn(x))
            flat[i] = orig
            result[i] = (f_plus - f_minus) / (2 * h)
    return result.reshape(x.shape)


def analytic_grad(fn: Callable[[torch.Tensor], torch.Tensor], x: torch.Tensor) -> torch.Tensor:
    leaf = as_matrix(x, requires_grad=True)
    return grad(fn(leaf), leaf, retain_graph=False)


def max_relative_error(a: torch.Tensor, b: torch.Tensor, floor: float = 1e-5) -> float:
    """max |a - b| / max(|a|, |b|, floor), elementwise."""
    a = as_matrix(a)
    b = as_matrix(b)
    denom = torch.clamp(torch.maximum(a.abs(), b.abs()), min=floor)
    return float(((a - b).abs() / denom).max())
