"""
Offline transition datasets

Binary layout:
    b'VQDS' | u16 version | u32 metadata length | metadata (YAML, utf-8) | u64 n
    then n records of '<f8': state, action, reward, next state, done
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Sequence, Tuple, Union

import numpy as np
import torch
import torch.utils.data as data
import yaml

from ..core.workspace import register

__all__ = ['Transition', 'TransitionBatch', 'OfflineDataset', 'DATASET_VERSION']

logger = logging.getLogger(__name__)

DATASET_MAGIC = b'VQDS'
DATASET_VERSION = 1

REQUIRED_METADATA = ('env_id', 'state_dim', 'action_dim', 'policy', 'seed')


def _as_rows(arr) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    return arr[:, None] if arr.ndim == 1 else arr


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


@dataclass
class TransitionBatch:
    states: torch.Tensor
    actions: torch.Tensor
    rewards: torch.Tensor
    next_states: torch.Tensor
    dones: torch.Tensor

    def __len__(self) -> int:
        return self.states.shape[0]


@register()
class OfflineDataset(data.Dataset):
    """Fixed set of transitions plus metadata (env id, dims, behavior policy, seed, returns)"""

    def __init__(self,
                 states: np.ndarray,
                 actions: np.ndarray,
                 rewards: np.ndarray,
                 next_states: np.ndarray,
                 dones: np.ndarray,
                 metadata: Dict[str, Any]):
        self.states = _as_rows(states)
        self.actions = _as_rows(actions)
        self.rewards = np.asarray(rewards, dtype=np.float64).reshape(-1)
        self.next_states = _as_rows(next_states)
        self.dones = np.asarray(dones, dtype=np.float64).reshape(-1)
        self.metadata = dict(metadata)
        self.validate()

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition], metadata: Dict[str, Any]) -> 'OfflineDataset':
        state_dim, action_dim = int(metadata['state_dim']), int(metadata['action_dim'])
        if not transitions:
            empty = np.zeros((0, state_dim))
            return cls(empty, np.zeros((0, action_dim)), np.zeros(0), empty.copy(), np.zeros(0), metadata)
        return cls(
            states=np.stack([np.asarray(t.state, dtype=np.float64) for t in transitions]),
            actions=np.stack([np.atleast_1d(np.asarray(t.action, dtype=np.float64)) for t in transitions]),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            next_states=np.stack([np.asarray(t.next_state, dtype=np.float64) for t in transitions]),
            dones=np.array([float(t.done) for t in transitions], dtype=np.float64),
            metadata=metadata,
        )

    # Metadata views

    @property
    def env_id(self) -> str:
        return str(self.metadata['env_id'])

    @property
    def state_dim(self) -> int:
        return int(self.metadata['state_dim'])

    @property
    def action_dim(self) -> int:
        return int(self.metadata['action_dim'])

    @property
    def is_discrete(self) -> bool:
        return bool(self.metadata.get('discrete', False))

    @property
    def record_width(self) -> int:
        return 2 * self.state_dim + self.action_dim + 2

    def validate(self):
        missing = [k for k in REQUIRED_METADATA if k not in self.metadata]
        if missing:
            raise ValueError(f'Dataset metadata misses {missing}')

        n = self.states.shape[0]
        for name, arr in (('actions', self.actions), ('rewards', self.rewards),
                          ('next_states', self.next_states), ('dones', self.dones)):
            if arr.shape[0] != n:
                raise ValueError(f'{name} holds {arr.shape[0]} rows, states hold {n}')
        if n and self.states.shape[1] != self.state_dim:
            raise ValueError(f'State width {self.states.shape[1]} != metadata state_dim {self.state_dim}')
        if n and self.next_states.shape[1] != self.state_dim:
            raise ValueError(f'Next-state width {self.next_states.shape[1]} != metadata state_dim {self.state_dim}')
        if n and self.actions.shape[1] != self.action_dim:
            raise ValueError(f'Action width {self.actions.shape[1]} != metadata action_dim {self.action_dim}')

        lengths = self.metadata.get('episode_lengths')
        if lengths is not None and sum(lengths) != n:
            raise ValueError(f'Episode lengths sum to {sum(lengths)}, dataset holds {n} transitions')

    # torch Dataset interface

    def __len__(self) -> int:
        return self.states.shape[0]

    def __getitem__(self, idx: int) -> Transition:
        return Transition(self.states[idx], self.actions[idx], float(self.rewards[idx]),
                          self.next_states[idx], bool(self.dones[idx]))

    def __iter__(self) -> Iterator[Transition]:
        for idx in range(len(self)):
            yield self[idx]

    def sample(self,
               batch_size: int,
               rng: np.random.Generator,
               dtype: torch.dtype = torch.float32,
               device: Union[str, torch.device] = 'cpu') -> TransitionBatch:
        """Uniform minibatch with replacement"""
        if len(self) == 0:
            raise ValueError('Cannot sample from an empty dataset')
        idx = rng.integers(0, len(self), size=batch_size)
        return self.batch(idx, dtype=dtype, device=device)

    def batch(self, idx: np.ndarray, dtype: torch.dtype = torch.float32,
              device: Union[str, torch.device] = 'cpu') -> TransitionBatch:
        def to_tensor(arr):
            return torch.as_tensor(arr[idx], dtype=dtype, device=device)

        return TransitionBatch(to_tensor(self.states), to_tensor(self.actions), to_tensor(self.rewards),
                               to_tensor(self.next_states), to_tensor(self.dones))

    def state_actions(self) -> np.ndarray:
        return np.concatenate([self.states, self.actions], axis=-1)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-column (low, high) of the concatenated (state, action) data"""
        sa = self.state_actions()
        return sa.min(axis=0), sa.max(axis=0)

    def episode_returns(self) -> np.ndarray:
        """Undiscounted return of every stored episode"""
        lengths = self.metadata.get('episode_lengths') or [len(self)]
        bounds = np.cumsum([0, *lengths])
        return np.array([self.rewards[a:b].sum() for a, b in zip(bounds[:-1], bounds[1:])], dtype=np.float64)

    # File I/O

    def to_records(self) -> np.ndarray:
        return np.concatenate([self.states, self.actions, self.rewards[:, None],
                               self.next_states, self.dones[:, None]], axis=-1)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        meta = yaml.safe_dump(self.metadata, sort_keys=True).encode('utf-8')
        with open(path, 'wb') as f:
            f.write(DATASET_MAGIC)
            f.write(struct.pack('<HI', DATASET_VERSION, len(meta)))
            f.write(meta)
            f.write(struct.pack('<Q', len(self)))
            f.write(np.ascontiguousarray(self.to_records(), dtype='<f8').tobytes())
        logger.info(f'Dataset saved: {path} ({len(self)} transitions)')
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'OfflineDataset':
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f'Dataset not found: {path}')

        raw = path.read_bytes()
        if raw[:4] != DATASET_MAGIC:
            raise ValueError(f'Not a dataset file: {path}')
        version, meta_len = struct.unpack_from('<HI', raw, 4)
        if version != DATASET_VERSION:
            raise ValueError(f'Unsupported dataset version {version}')

        offset = 4 + struct.calcsize('<HI')
        metadata = yaml.safe_load(raw[offset:offset + meta_len].decode('utf-8')) or {}
        offset += meta_len
        n, = struct.unpack_from('<Q', raw, offset)
        offset += 8

        state_dim, action_dim = int(metadata['state_dim']), int(metadata['action_dim'])
        width = 2 * state_dim + action_dim + 2
        if len(raw) - offset != 8 * n * width:
            raise ValueError(f'Dataset body holds {len(raw) - offset} bytes, expected {8 * n * width}')

        records = np.frombuffer(raw, dtype='<f8', count=n * width, offset=offset).reshape(n, width)
        columns = np.cumsum([0, state_dim, action_dim, 1, state_dim, 1])
        parts = [records[:, a:b].astype(np.float64) for a, b in zip(columns[:-1], columns[1:])]
        return cls(parts[0], parts[1], parts[2], parts[3], parts[4], metadata)

    def column_names(self) -> List[str]:
        return ([f's{i}' for i in range(self.state_dim)] + [f'a{i}' for i in range(self.action_dim)] + ['r']
                + [f'next_s{i}' for i in range(self.state_dim)] + ['done'])

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Human-readable mirror of the binary file"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, self.to_records(), fmt='%.17g', delimiter=',',
                   header=','.join(self.column_names()), comments='')
        return path

    def __repr__(self) -> str:
        return (f'OfflineDataset(env_id={self.env_id}, policy={self.metadata.get("policy")}, '
                f'n={len(self)}, state_dim={self.state_dim}, action_dim={self.action_dim})')
