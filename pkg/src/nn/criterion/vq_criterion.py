"""
Three-term VQVAE loss
Reconstruction + codebook + commitment, summed over all codebooks
"""

from dataclasses import dataclass
from typing import Dict

import torch
import torch.nn as nn

from ...core import register
from ..vqvae import LatentPartition, QuantizationResult, VQVAEOutput

__all__ = ['VQLossOutput', 'vq_loss', 'VQCriterion']


@dataclass
class VQLossOutput:
    total: torch.Tensor
    recon: torch.Tensor
    codebook: torch.Tensor
    commitment: torch.Tensor

    def as_dict(self) -> Dict[str, torch.Tensor]:
        return {
            'loss': self.total,
            'loss_recon': self.recon,
            'loss_codebook': self.codebook,
            'loss_commitment': self.commitment,
        }


def vq_loss(action: torch.Tensor,
            recon: torch.Tensor,
            partition: LatentPartition,
            quantization: QuantizationResult,
            commitment: float = 0.25,
            reduction: str = 'mean') -> VQLossOutput:
    """
    total = ||a - a_hat||^2 + sum_h ||sg[z_e^h] - e^h||^2 + commitment * sum_h ||z_e^h - sg[e^h]||^2

    Args:
        action: Target actions [B, A]
        recon: Reconstructed actions [B, A]
        partition: Encoder output split per codebook
        quantization: Selected vectors of the same partition
        commitment: Weight of the commitment term
        reduction: 'mean' over the batch, 'sum', or 'none' for per-sample losses [B]
    """
    if reduction not in ('mean', 'sum', 'none'):
        raise ValueError(f'Unknown reduction: {reduction}')
    if len(partition.subvectors) != len(quantization.subvectors):
        raise ValueError('Partition and quantization disagree on the number of codebooks')

    recon_loss = (action - recon).pow(2).sum(-1)

    codebook_loss = torch.zeros_like(recon_loss)
    commit_loss = torch.zeros_like(recon_loss)
    for z_h, e_h in zip(partition.subvectors, quantization.subvectors):
        codebook_loss = codebook_loss + (z_h.detach() - e_h).pow(2).sum(-1)
        commit_loss = commit_loss + (z_h - e_h.detach()).pow(2).sum(-1)
    commit_loss = commitment * commit_loss

    terms = [recon_loss, codebook_loss, commit_loss]
    if reduction == 'mean':
        terms = [term.mean() for term in terms]
    elif reduction == 'sum':
        terms = [term.sum() for term in terms]

    recon_loss, codebook_loss, commit_loss = terms
    return VQLossOutput(
        total=recon_loss + codebook_loss + commit_loss,
        recon=recon_loss,
        codebook=codebook_loss,
        commitment=commit_loss,
    )


@register()
class VQCriterion(nn.Module):
    """Loss module for VQVAE pretraining and OOD scoring"""

    def __init__(self, commitment: float = 0.25, reduction: str = 'mean'):
        super().__init__()
        if commitment < 0:
            raise ValueError(f'commitment must be >= 0, got {commitment}')
        self.commitment = commitment
        self.reduction = reduction

    def forward(self, outputs: VQVAEOutput, action: torch.Tensor) -> Dict[str, torch.Tensor]:
        return vq_loss(action, outputs.recon, outputs.partition, outputs.quantization,
                       commitment=self.commitment, reduction=self.reduction).as_dict()

    def extra_repr(self) -> str:
        return f'commitment={self.commitment}, reduction={self.reduction}'
