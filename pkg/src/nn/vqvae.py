"""
Conditional multi-codebook VQVAE

(state, action) -> encoder -> z_e -> H contiguous subspaces -> nearest vector of
each codebook -> z_q -> decoder(z_q, state) -> reconstructed action.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import torch
import torch.nn as nn

from ..core import register
from .dense import DenseNet

__all__ = [
    'LatentPartition', 'QuantizationResult', 'VQVAEOutput', 'CodebookSet',
    'MultiCodebookVQVAE', 'partition', 'quantize_subspace', 'kmeans_plus_plus',
]


@dataclass
class LatentPartition:
    """Encoder output split into H equal-width contiguous subvectors"""
    z_e: torch.Tensor
    subvectors: Tuple[torch.Tensor, ...]

    def concat(self) -> torch.Tensor:
        return torch.cat(self.subvectors, dim=-1)


@dataclass
class QuantizationResult:
    """Selected codebook vectors, their labels and the distances used for selection"""
    z_q: torch.Tensor              # [..., d_lat]
    labels: torch.Tensor           # [..., H] int64
    distances: torch.Tensor        # [..., H, N] Euclidean
    subvectors: Tuple[torch.Tensor, ...]


@dataclass
class VQVAEOutput:
    partition: LatentPartition
    quantization: QuantizationResult
    recon: torch.Tensor

    @property
    def z_e(self) -> torch.Tensor:
        return self.partition.z_e

    @property
    def labels(self) -> torch.Tensor:
        return self.quantization.labels


def partition(z_e: torch.Tensor, num_codebooks: int) -> LatentPartition:
    """Uniform sequential split of the last axis into ``num_codebooks`` slices"""
    if z_e.shape[-1] % num_codebooks != 0:
        raise ValueError(f'Latent width {z_e.shape[-1]} is not divisible by {num_codebooks} codebooks')
    return LatentPartition(z_e=z_e, subvectors=tuple(torch.chunk(z_e, num_codebooks, dim=-1)))


def quantize_subspace(z_h: torch.Tensor, codebook: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Nearest-vector lookup in one codebook.

    Args:
        z_h: Subvectors [..., dim]
        codebook: Codebook vectors [N, dim]

    Returns:
        (z_q_h [..., dim], labels [...], distances [..., N]); exact ties go to the lowest index
    """
    if z_h.shape[-1] != codebook.shape[-1]:
        raise ValueError(f'Subvector width {z_h.shape[-1]} != codebook width {codebook.shape[-1]}')

    sq_dist = (z_h.unsqueeze(-2) - codebook).pow(2).sum(-1)
    # argmin returns the first minimal index
    labels = sq_dist.argmin(dim=-1)
    z_q_h = codebook[labels]
    return z_q_h, labels, sq_dist.sqrt()


def kmeans_plus_plus(points: torch.Tensor,
                     k: int,
                     generator: Optional[torch.Generator] = None,
                     local_trials: Optional[int] = None) -> torch.Tensor:
    """
    Greedy D^2-weighted seeding of ``k`` centres drawn from ``points`` [M, dim].

    Each new centre is the best of ``local_trials`` D^2-sampled candidates, the one
    leaving the smallest summed squared distance; defaults to 2 + ln(k).
    """
    num_points = points.shape[0]
    if num_points == 0:
        raise ValueError('Cannot seed a codebook from an empty batch')
    trials = 2 + int(math.log(k)) if local_trials is None else int(local_trials)
    if trials < 1:
        raise ValueError(f'local_trials must be >= 1, got {local_trials}')

    first = torch.randint(num_points, (1,), generator=generator).item()
    centers = [points[first]]
    min_sq = (points - points[first]).pow(2).sum(-1)

    for _ in range(1, k):
        total = min_sq.sum()
        if total <= 0:
            idx = torch.randint(num_points, (1,), generator=generator).item()
            min_sq = torch.minimum(min_sq, (points - points[idx]).pow(2).sum(-1))
        else:
            candidates = torch.multinomial(min_sq / total, trials, replacement=True, generator=generator)
            # [trials, M] potential after adding each candidate
            to_candidates = (points.unsqueeze(0) - points[candidates].unsqueeze(1)).pow(2).sum(-1)
            candidate_sq = torch.minimum(min_sq, to_candidates)
            best = candidate_sq.sum(-1).argmin().item()
            idx = candidates[best].item()
            min_sq = candidate_sq[best]
        centers.append(points[idx])

    return torch.stack(centers)


class CodebookSet(nn.Module):
    """H codebooks of N vectors each, with usage statistics"""

    def __init__(self,
                 num_codebooks: int = 4,
                 num_vectors: int = 256,
                 dim: int = 16,
                 decay: float = 0.99,
                 dtype: torch.dtype = torch.float32):
        super().__init__()

        self.num_codebooks = num_codebooks
        self.num_vectors = num_vectors
        self.dim = dim
        self.decay = decay

        # Trainable only on the conventional (non-FCM) update path
        self.vectors = nn.Parameter(torch.zeros(num_codebooks, num_vectors, dim, dtype=dtype),
                                    requires_grad=False)
        # eps-decayed selection counts N^u_k; their row sums are N^a_k
        self.register_buffer('usage', torch.zeros(num_codebooks, num_vectors, dtype=torch.float64))
        # Lifetime selection counts
        self.register_buffer('counts', torch.zeros(num_codebooks, num_vectors, dtype=torch.int64))

    @property
    def totals(self) -> torch.Tensor:
        return self.usage.sum(-1)

    def use_rates(self) -> torch.Tensor:
        """R_k = N^u_k / N^a_k per codebook, zero for codebooks not used yet"""
        totals = self.totals.unsqueeze(-1)
        return torch.where(totals > 0, self.usage / totals.clamp_min(1e-300), torch.zeros_like(self.usage))

    @torch.no_grad()
    def record(self, labels: torch.Tensor):
        """Decay usage by eps, then count one selection per sample and codebook"""
        labels = labels.reshape(-1, self.num_codebooks)
        hits = torch.zeros_like(self.counts)
        for h in range(self.num_codebooks):
            hits[h] = torch.bincount(labels[:, h], minlength=self.num_vectors)
        self.usage.mul_(self.decay).add_(hits.to(self.usage.dtype))
        self.counts.add_(hits)

    @torch.no_grad()
    def initialize_from(self, z_e: torch.Tensor, generator: Optional[torch.Generator] = None):
        """Seed every codebook from encoder outputs of a warmup batch [M, d_lat]"""
        parts = torch.chunk(z_e.detach(), self.num_codebooks, dim=-1)
        for h, part in enumerate(parts):
            self.vectors[h].copy_(kmeans_plus_plus(part.to(self.vectors.dtype), self.num_vectors, generator))
        self.usage.zero_()
        self.counts.zero_()

    def set_trainable(self, trainable: bool):
        self.vectors.requires_grad_(trainable)

    def extra_repr(self) -> str:
        return f'H={self.num_codebooks}, N={self.num_vectors}, dim={self.dim}, decay={self.decay}'


@register()
class MultiCodebookVQVAE(nn.Module):
    """Conditional VQVAE reconstructing the action from (z_q, state)"""

    def __init__(self,
                 state_dim: int,
                 action_dim: int,
                 latent_dim: int = 64,
                 num_codebooks: int = 4,
                 num_vectors: int = 256,
                 hidden_dims: Sequence[int] = (256, 256),
                 decay: float = 0.99,
                 activation: str = 'relu',
                 seed: Optional[int] = None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()

        if latent_dim % num_codebooks != 0:
            raise ValueError(f'latent_dim={latent_dim} is not divisible by num_codebooks={num_codebooks}')

        self.state_dim = state_dim
        self.action_dim = action_dim
        self.latent_dim = latent_dim
        self.num_codebooks = num_codebooks
        self.num_vectors = num_vectors

        hidden_dims = list(hidden_dims)
        self.encoder = DenseNet([state_dim + action_dim, *hidden_dims, latent_dim],
                                activation=activation, seed=seed, dtype=dtype)
        self.decoder = DenseNet([latent_dim + state_dim, *hidden_dims, action_dim],
                                activation=activation, seed=None if seed is None else seed + 1, dtype=dtype)
        self.codebooks = CodebookSet(num_codebooks, num_vectors, latent_dim // num_codebooks,
                                     decay=decay, dtype=dtype)

    @property
    def codebook_dim(self) -> int:
        return self.latent_dim // self.num_codebooks

    def _check(self, tensor: torch.Tensor, width: int, name: str):
        if tensor.shape[-1] != width:
            raise ValueError(f'Expected {name} width {width}, got {tuple(tensor.shape)}')

    def encode(self, state: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        self._check(state, self.state_dim, 'state')
        self._check(action, self.action_dim, 'action')
        return self.encoder(torch.cat([state, action], dim=-1))

    def partition(self, z_e: torch.Tensor) -> LatentPartition:
        self._check(z_e, self.latent_dim, 'latent')
        return partition(z_e, self.num_codebooks)

    def quantize(self, z_e: torch.Tensor) -> QuantizationResult:
        parts = self.partition(z_e)
        selected, labels, distances = [], [], []
        for h, z_h in enumerate(parts.subvectors):
            z_q_h, labels_h, dist_h = quantize_subspace(z_h, self.codebooks.vectors[h])
            selected.append(z_q_h)
            labels.append(labels_h)
            distances.append(dist_h)
        return QuantizationResult(
            z_q=torch.cat(selected, dim=-1),
            labels=torch.stack(labels, dim=-1),
            distances=torch.stack(distances, dim=-2),
            subvectors=tuple(selected),
        )

    def decode(self, z_q: torch.Tensor, state: torch.Tensor) -> torch.Tensor:
        self._check(z_q, self.latent_dim, 'latent')
        self._check(state, self.state_dim, 'state')
        return self.decoder(torch.cat([z_q, state], dim=-1))

    def forward(self, state: torch.Tensor, action: torch.Tensor) -> VQVAEOutput:
        z_e = self.encode(state, action)
        parts = self.partition(z_e)
        quantization = self.quantize(z_e)
        # Straight-through: decoder gradients are copied onto z_e
        z_q_st = z_e + (quantization.z_q - z_e).detach()
        recon = self.decode(z_q_st, state)
        return VQVAEOutput(partition=parts, quantization=quantization, recon=recon)

    @torch.no_grad()
    def labels(self, state: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        """Label sequences [..., H] of state-action pairs"""
        return self.quantize(self.encode(state, action)).labels

    def freeze(self) -> 'MultiCodebookVQVAE':
        self.eval()
        for p in self.parameters():
            p.requires_grad_(False)
        return self
