"""
Fuzzy C-means codebook update

Every codebook vector moves toward the membership-weighted mean of the batch
subvectors, with a step size that shrinks as the vector's use rate grows.
"""

import logging
from typing import Optional

import torch

from .vqvae import CodebookSet

__all__ = ['membership', 'step_size', 'fcm_update', 'FuzzyCodebookUpdate']

logger = logging.getLogger(__name__)


def membership(z_h: torch.Tensor, codebook: torch.Tensor) -> torch.Tensor:
    """
    Membership rows f_hk proportional to d_k^-2, normalized over the codebook.

    A subvector that coincides with one or more codebook vectors gives them the
    whole membership, split equally among ties.

    Args:
        z_h: Subvectors [B, dim]
        codebook: Codebook vectors [N, dim]

    Returns:
        Memberships [B, N], rows sum to one
    """
    if z_h.shape[-1] != codebook.shape[-1]:
        raise ValueError(f'Subvector width {z_h.shape[-1]} != codebook width {codebook.shape[-1]}')

    sq_dist = (z_h.unsqueeze(-2) - codebook).pow(2).sum(-1)
    nearest = sq_dist.min(dim=-1, keepdim=True).values

    # Scaling by the nearest distance keeps every ratio in (0, 1]
    ratio = nearest / sq_dist.clamp_min(torch.finfo(sq_dist.dtype).tiny)
    fuzzy = ratio / ratio.sum(dim=-1, keepdim=True)

    exact = (sq_dist == 0).to(sq_dist.dtype)
    crisp = exact / exact.sum(dim=-1, keepdim=True).clamp_min(1)

    return torch.where(nearest == 0, crisp, fuzzy)


def step_size(use_rate: torch.Tensor, num_vectors: int, decay: float = 0.99) -> torch.Tensor:
    """alpha_step = exp(-10 N R_k / (1 - eps) - 1e-3); underflows to 0 for busy vectors"""
    use_rate = torch.as_tensor(use_rate, dtype=torch.float64)
    return torch.exp(-10.0 * num_vectors * use_rate / (1.0 - decay) - 1e-3)


@torch.no_grad()
def fcm_update(codebook: torch.Tensor,
               z_h: torch.Tensor,
               use_rate: torch.Tensor,
               decay: float = 0.99) -> torch.Tensor:
    """
    One FCM step on a single codebook.

    e_k <- (1 - alpha_k) e_k + alpha_k * sum_b f_bk^2 z_b / sum_b f_bk^2

    Squared memberships give the fuzzy C-means centre for fuzzifier m = 2, the
    exponent the d^-2 memberships are derived from. Latents far from a vector
    contribute little to its centre, so a step lands near the latents it covers.

    Args:
        codebook: Codebook vectors [N, dim]
        z_h: Batch of subvectors [B, dim]
        use_rate: R_k per vector [N]
        decay: eps of the step-size schedule

    Returns:
        Updated codebook [N, dim]; the input is left untouched
    """
    if z_h.numel() == 0:
        return codebook.clone()

    z_h = z_h.reshape(-1, codebook.shape[-1]).to(codebook.dtype)
    f = membership(z_h, codebook).pow(2)
    weight = f.sum(dim=0)
    target = (f.t() @ z_h) / weight.clamp_min(torch.finfo(f.dtype).tiny).unsqueeze(-1)

    alpha = step_size(use_rate, codebook.shape[0], decay).to(codebook.dtype).unsqueeze(-1)
    updated = (1.0 - alpha) * codebook + alpha * target

    # Vectors with no membership mass keep their position
    return torch.where(weight.unsqueeze(-1) > 0, updated, codebook)


class FuzzyCodebookUpdate:
    """Applies the FCM step to all codebooks of a CodebookSet, then records usage"""

    def __init__(self, codebooks: CodebookSet, enabled: bool = True):
        self.codebooks = codebooks
        self.enabled = enabled
        self.updates = 0

    @torch.no_grad()
    def __call__(self, z_e: torch.Tensor, labels: torch.Tensor) -> Optional[torch.Tensor]:
        """
        Args:
            z_e: Encoder outputs of the batch [B, d_lat]
            labels: Argmin labels of the same batch [B, H]

        Returns:
            Mean step size per codebook [H] when enabled, else None
        """
        if z_e.shape[0] == 0:
            return None

        steps = None
        if self.enabled:
            rates = self.codebooks.use_rates()
            parts = torch.chunk(z_e.detach(), self.codebooks.num_codebooks, dim=-1)
            steps = torch.zeros(self.codebooks.num_codebooks, dtype=torch.float64)
            for h, z_h in enumerate(parts):
                self.codebooks.vectors[h].copy_(
                    fcm_update(self.codebooks.vectors[h], z_h, rates[h], self.codebooks.decay))
                steps[h] = step_size(rates[h], self.codebooks.num_vectors, self.codebooks.decay).mean()

        self.codebooks.record(labels)
        self.updates += 1
        return steps
