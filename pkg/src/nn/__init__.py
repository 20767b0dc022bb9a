"""Networks: dense stack, conditional multi-codebook VQVAE, FCM update, actor-critic"""

from .dense import DenseNet, compute_gradients
from .vqvae import (LatentPartition, QuantizationResult, VQVAEOutput, CodebookSet,
                    MultiCodebookVQVAE, partition, quantize_subspace, kmeans_plus_plus)
from .fcm import membership, step_size, fcm_update, FuzzyCodebookUpdate
from .agent import GaussianPolicy, Critic, SACAgent
from . import criterion

__all__ = [
    'DenseNet', 'compute_gradients',
    'LatentPartition', 'QuantizationResult', 'VQVAEOutput', 'CodebookSet',
    'MultiCodebookVQVAE', 'partition', 'quantize_subspace', 'kmeans_plus_plus',
    'membership', 'step_size', 'fcm_update', 'FuzzyCodebookUpdate',
    'GaussianPolicy', 'Critic', 'SACAgent',
    'criterion',
]
