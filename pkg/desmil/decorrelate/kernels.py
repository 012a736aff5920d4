"""RBF kernels, the empirical HSIC statistic and the pairwise interest-dependence objective.

All functions accept leading batch axes. Bandwidths are always detached from the graph.
"""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import torch

import desmil.utils.numerics as numerics
from desmil.utils.python.datastructures import ExtendedDataClassMixin, chunk_list

MEDIAN = "median"
FALLBACK_SIGMA = 1.0
HSIC_AXES = ("embedding", "batch")
PERMUTATION_CHUNK_SIZE = 32


@dataclass(frozen=True)
class KernelConfig(ExtendedDataClassMixin):
    """sigma: a fixed positive bandwidth, or "median" for the median pairwise distance."""

    sigma: Union[float, str] = MEDIAN

    def __post_init__(self):
        if isinstance(self.sigma, str):
            if self.sigma != MEDIAN:
                raise ValueError(f"sigma must be a positive number or '{MEDIAN}', got {self.sigma}")
        elif not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def from_string(cls, sigma: str) -> "KernelConfig":
        return cls(sigma=MEDIAN if sigma == MEDIAN else float(sigma))

    @property
    def is_median(self) -> bool:
        return self.sigma == MEDIAN


def squared_distances(x: torch.Tensor, multivariate=False) -> torch.Tensor:
    """(..., m) scalars, or (..., m, p) vectors with `multivariate`, to (..., m, m)."""
    if multivariate:
        diff = x.unsqueeze(-2) - x.unsqueeze(-3)
        return (diff * diff).sum(dim=-1)
    diff = x.unsqueeze(-1) - x.unsqueeze(-2)
    return diff * diff


def resolve_bandwidth(x: torch.Tensor, cfg: KernelConfig, multivariate=False) -> torch.Tensor:
    """Bandwidth per leading index, shape x.shape[:-1] (or x.shape[:-2] if multivariate).

    The median is taken over |x_i - x_j|, i < j. A zero or non-finite median falls back to 1.
    """
    batch_shape = x.shape[:-2] if multivariate else x.shape[:-1]
    if not cfg.is_median:
        return torch.full(batch_shape, float(cfg.sigma), dtype=numerics.DTYPE)
    with torch.no_grad():
        dist = squared_distances(x.detach().to(numerics.DTYPE), multivariate=multivariate).sqrt()
        m = dist.shape[-1]
        rows, cols = torch.triu_indices(m, m, offset=1)
        upper = dist[..., rows, cols]
        sigma = torch.quantile(upper, 0.5, dim=-1)
        degenerate = ~torch.isfinite(sigma) | (sigma <= 0)
        return torch.where(degenerate, torch.full_like(sigma, FALLBACK_SIGMA), sigma)


def rbf_kernel_matrix(
    x: torch.Tensor,
    cfg: KernelConfig = KernelConfig(),
    sigma: Optional[torch.Tensor] = None,
    multivariate=False,
) -> torch.Tensor:
    """K_ij = exp(-(x_i - x_j)^2 / sigma^2).

    Args:
        x: (..., m) samples, or (..., m, p) with `multivariate`.
        cfg: bandwidth rule, used when `sigma` is not given.
        sigma: explicit bandwidth broadcastable to the leading shape of x.
        multivariate: treat the last axis as the coordinates of each sample.

    Returns:
        (..., m, m) symmetric kernel matrix with unit diagonal.

    """
    m = x.shape[-2] if multivariate else x.shape[-1]
    if m < 2:
        raise ValueError(f"kernel matrix needs at least 2 samples, got {m}")
    if sigma is None:
        sigma = resolve_bandwidth(x, cfg, multivariate=multivariate)
    sigma = torch.as_tensor(sigma, dtype=numerics.DTYPE).detach()
    scale = (sigma * sigma).unsqueeze(-1).unsqueeze(-1)
    return torch.exp(-squared_distances(x, multivariate=multivariate) / scale)


def center_kernel(K: torch.Tensor) -> torch.Tensor:
    """P_c K P_c with P_c = I - 11^T / m."""
    return (
        K
        - K.mean(dim=-1, keepdim=True)
        - K.mean(dim=-2, keepdim=True)
        + K.mean(dim=(-2, -1), keepdim=True)
    )


def hsic_from_centered(Kc: torch.Tensor, Lc: torch.Tensor) -> torch.Tensor:
    m = Kc.shape[-1]
    # sum(Kc * Lc) == tr(Kc Lc) for symmetric Kc; the elementwise form is symmetric in (K, L)
    value = (Kc * Lc).sum(dim=(-2, -1)) / (m - 1) ** 2
    return torch.clamp(value, min=0.0)


def empirical_hsic(
    u: torch.Tensor,
    v: torch.Tensor,
    cfg: KernelConfig = KernelConfig(),
    sigma_u: Optional[torch.Tensor] = None,
    sigma_v: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """(m - 1)^-2 tr(K_U P_c K_V P_c) over the last axis, clamped at 0.

    Raises:
        ValueError: if u and v disagree in shape or have fewer than 2 samples.

    """
    u = torch.as_tensor(u, dtype=numerics.DTYPE)
    v = torch.as_tensor(v, dtype=numerics.DTYPE)
    if u.shape != v.shape:
        raise ValueError(
            f"u and v must have the same shape, got {tuple(u.shape)} and {tuple(v.shape)}"
        )
    if u.shape[-1] < 2:
        raise ValueError(f"HSIC needs at least 2 samples, got {u.shape[-1]}")
    Kc = center_kernel(rbf_kernel_matrix(u, cfg, sigma=sigma_u))
    Lc = center_kernel(rbf_kernel_matrix(v, cfg, sigma=sigma_v))
    return hsic_from_centered(Kc, Lc)


def _pairwise_dependence(Kc: torch.Tensor) -> torch.Tensor:
    """Sum over i < j of HSIC between the centered kernels Kc[..., i, :, :]."""
    c, m = Kc.shape[-3], Kc.shape[-1]
    gram = torch.einsum("...iab,...jab->...ij", Kc, Kc) / (m - 1) ** 2
    rows, cols = torch.triu_indices(c, c, offset=1)
    return torch.clamp(gram[..., rows, cols], min=0.0).sum(dim=-1)


def interest_dependence(
    M_hat: torch.Tensor,
    cfg: KernelConfig = KernelConfig(),
    reference: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Sum over interest pairs i < j of empirical_hsic(M_hat[i], M_hat[j]).

    The d embedding coordinates are the samples.

    Args:
        M_hat: (..., c, d) interest matrices.
        cfg: kernel configuration.
        reference: optional (..., c, d) matrices the median bandwidth is measured on, in place
            of M_hat itself.

    Returns:
        (...) nonnegative dependence values; zeros when c < 2.

    """
    c = M_hat.shape[-2]
    if c < 2:
        return torch.zeros(M_hat.shape[:-2], dtype=numerics.DTYPE)
    sigma = resolve_bandwidth(M_hat if reference is None else reference, cfg)
    Kc = center_kernel(rbf_kernel_matrix(M_hat, cfg, sigma=sigma))
    return _pairwise_dependence(Kc)


def batch_interest_dependence(
    M_hat: torch.Tensor,
    cfg: KernelConfig = KernelConfig(),
    reference: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Dependence between interests with the batch as the samples.

    Each interest contributes a (B, d) sample of d-vectors; the kernel is RBF on squared
    Euclidean distance.

    Args:
        M_hat: B x c x d.

    Returns:
        scalar.

    """
    B, c = M_hat.shape[0], M_hat.shape[1]
    if c < 2:
        return torch.zeros((), dtype=numerics.DTYPE)
    if B < 2:
        return torch.zeros((), dtype=numerics.DTYPE)
    per_interest = M_hat.transpose(0, 1)
    ref = per_interest if reference is None else reference.transpose(0, 1)
    sigma = resolve_bandwidth(ref, cfg, multivariate=True)
    Kc = center_kernel(rbf_kernel_matrix(per_interest, cfg, sigma=sigma, multivariate=True))
    return _pairwise_dependence(Kc)


def dependence_fn(hsic_axis: str):
    if hsic_axis == "embedding":
        return interest_dependence
    elif hsic_axis == "batch":
        return batch_interest_dependence
    else:
        raise KeyError(f"hsic_axis must be one of {HSIC_AXES}, got {hsic_axis}")


def reweight_interests(M: torch.Tensor, w: torch.Tensor) -> torch.Tensor:
    """w_h * M_h, with M held constant; w has the leading shape of M."""
    w = torch.as_tensor(w, dtype=numerics.DTYPE)
    return w.unsqueeze(-1).unsqueeze(-1) * M.detach()


@dataclass
class PermutationTestResult:
    statistic: float
    p_value: float
    null_distribution: np.ndarray

    def null_quantile(self, q: float) -> float:
        return float(np.quantile(self.null_distribution, q))


def permutation_test(
    u: torch.Tensor,
    v: torch.Tensor,
    cfg: KernelConfig = KernelConfig(),
    num_permutations: int = 1000,
    rng: Optional[np.random.Generator] = None,
) -> PermutationTestResult:
    """HSIC against its null distribution under random re-pairings of v.

    The p-value is (1 + #{null >= statistic}) / (1 + num_permutations).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    u = numerics.as_matrix(u)
    v = numerics.as_matrix(v)
    m = u.shape[-1]
    with torch.no_grad():
        statistic = float(empirical_hsic(u, v, cfg))
        Kc = center_kernel(rbf_kernel_matrix(u, cfg))
        Lc = center_kernel(rbf_kernel_matrix(v, cfg))
        perms = [rng.permutation(m) for _ in range(num_permutations)]
        null_chunks = []
        for chunk in chunk_list(perms, PERMUTATION_CHUNK_SIZE):
            index = torch.as_tensor(np.stack(chunk), dtype=torch.long)
            # permuting v permutes rows and columns of its centered kernel
            Lc_perm = Lc[index.unsqueeze(-1), index.unsqueeze(-2)]
            null_chunks.append(hsic_from_centered(Kc.unsqueeze(0), Lc_perm).numpy())
        null = np.concatenate(null_chunks)
    p_value = (1 + int((null >= statistic).sum())) / (1 + num_permutations)
    return PermutationTestResult(statistic=statistic, p_value=p_value, null_distribution=null)
