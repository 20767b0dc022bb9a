"""
Pseudo-counting of state-action pairs through their label sequences
"""

import logging
from typing import Union

import numpy as np
import torch

from ..core import register
from ..nn.vqvae import MultiCodebookVQVAE
from .bloom import CountingBloomFilter, serialize_batch

__all__ = ['VQVAELabeler', 'GridLabeler', 'PseudoCounter']

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, torch.Tensor]


def _as_tensor(x: ArrayLike, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x.detach().to(dtype)
    return torch.as_tensor(np.asarray(x), dtype=dtype)


@register()
class VQVAELabeler:
    """Label sequences from a frozen multi-codebook VQVAE"""

    def __init__(self, model: MultiCodebookVQVAE):
        self.model = model.freeze()
        self.num_vectors = model.num_vectors
        self.num_codebooks = model.num_codebooks
        self.dtype = next(model.parameters()).dtype

    def __call__(self, state: ArrayLike, action: ArrayLike) -> torch.Tensor:
        state = _as_tensor(state, self.dtype)
        action = _as_tensor(action, self.dtype)
        return self.model.labels(state.reshape(-1, self.model.state_dim),
                                 action.reshape(-1, self.model.action_dim))


@register()
class GridLabeler:
    """Direct discrete label sequence (x, y, action) of a Grid World pair"""

    num_codebooks = 3

    def __init__(self, size: int, num_actions: int = 4):
        self.size = size
        self.num_actions = num_actions
        self.num_vectors = max(size, num_actions)

    def __call__(self, state: ArrayLike, action: ArrayLike) -> torch.Tensor:
        state = _as_tensor(state, torch.float64).reshape(-1, 2).round().to(torch.int64)
        action = _as_tensor(action, torch.float64).reshape(-1, 1).round().to(torch.int64)
        if ((state < 0) | (state >= self.size)).any():
            raise ValueError(f'Grid states must lie in [0, {self.size})')
        if ((action < 0) | (action >= self.num_actions)).any():
            raise ValueError(f'Grid actions must lie in [0, {self.num_actions})')
        return torch.cat([state, action], dim=-1)


class PseudoCounter:
    """n(s, a) = CBF query of the serialized label sequence of (s, a)"""

    def __init__(self, labeler, cbf: CountingBloomFilter):
        self.labeler = labeler
        self.cbf = cbf

    def keys(self, state: ArrayLike, action: ArrayLike):
        return serialize_batch(self.labeler(state, action), self.labeler.num_vectors)

    def pseudo_count(self, state: ArrayLike, action: ArrayLike, insert: bool = False) -> np.ndarray:
        """
        Counts of a batch of pairs [B]; with ``insert`` every pair is added before it is queried.
        """
        keys = self.keys(state, action)
        if insert:
            self.cbf.insert_many(keys)
        return self.cbf.query_many(keys)

    def count_tensor(self, state: ArrayLike, action: ArrayLike, dtype: torch.dtype = torch.float32) -> torch.Tensor:
        return torch.from_numpy(self.pseudo_count(state, action)).to(dtype)

    def populate(self, dataset, batch_size: int = 4096) -> 'PseudoCounter':
        """Insert every (s, a) of an offline dataset once, then freeze the filter"""
        states, actions = dataset.states, dataset.actions
        for start in range(0, len(dataset), batch_size):
            self.cbf.insert_many(self.keys(states[start:start + batch_size], actions[start:start + batch_size]))
        self.cbf.freeze()
        logger.info(f'Pseudo-counter populated with {len(dataset)} pairs ({self.cbf})')
        return self
