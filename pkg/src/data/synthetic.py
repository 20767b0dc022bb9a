"""
Synthetic state-conditioned action mixtures for VQVAE experiments
"""

from typing import Optional

import numpy as np

from ..core.workspace import register
from .dataset import OfflineDataset

__all__ = ['mixture_centers', 'make_mixture_dataset', 'gaussian_blobs']


def mixture_centers(num_modes: int, action_dim: int, radius: float = 0.6) -> np.ndarray:
    """Modes spread evenly on a circle in the first two action axes"""
    angles = 2 * np.pi * np.arange(num_modes) / num_modes
    centers = np.zeros((num_modes, action_dim))
    centers[:, 0] = radius * np.cos(angles)
    if action_dim > 1:
        centers[:, 1] = radius * np.sin(angles)
    return centers


@register()
def make_mixture_dataset(num_samples: int = 20000,
                         state_dim: int = 2,
                         action_dim: int = 2,
                         num_modes: int = 8,
                         noise: float = 0.05,
                         seed: int = 0,
                         rng: Optional[np.random.Generator] = None) -> OfflineDataset:
    """
    States uniform in [-1, 1]^state_dim; each action sits near one of ``num_modes``
    centres, shifted by a small state-dependent offset, clipped to [-1, 1].
    Rewards are zero and every transition is terminal.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    centers = mixture_centers(num_modes, action_dim)

    states = rng.uniform(-1.0, 1.0, size=(num_samples, state_dim))
    modes = rng.integers(0, num_modes, size=num_samples)
    offset = np.zeros((num_samples, action_dim))
    width = min(state_dim, action_dim)
    offset[:, :width] = 0.1 * states[:, :width]
    actions = np.clip(centers[modes] + offset + noise * rng.standard_normal((num_samples, action_dim)), -1.0, 1.0)

    metadata = {
        'env_id': 'synthetic_mixture',
        'state_dim': state_dim,
        'action_dim': action_dim,
        'policy': f'mixture{num_modes}',
        'seed': int(seed),
        'num_modes': num_modes,
        'noise': float(noise),
        'episode_lengths': [int(num_samples)],
    }
    return OfflineDataset(states, actions, np.zeros(num_samples), states.copy(), np.ones(num_samples), metadata)


def gaussian_blobs(means: np.ndarray, sigma: float, samples_per_blob: int, rng: np.random.Generator) -> np.ndarray:
    """Isotropic Gaussian clusters around ``means`` [K, dim], shuffled"""
    means = np.asarray(means, dtype=np.float64)
    points = means[:, None, :] + sigma * rng.standard_normal((means.shape[0], samples_per_blob, means.shape[1]))
    points = points.reshape(-1, means.shape[1])
    return points[rng.permutation(points.shape[0])]
