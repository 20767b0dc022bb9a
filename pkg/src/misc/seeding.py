"""
Seed substreams
All randomness of a run flows from one root seed through named substreams
"""

import random
import zlib
from typing import Union

import numpy as np
import torch

__all__ = ['SUBSTREAMS', 'substream_seed', 'make_rng', 'make_generator', 'set_random_seed']

SUBSTREAMS = ('dataset', 'init', 'training', 'eval')


def substream_seed(root: int, name: str) -> int:
    """Stable 63-bit seed of substream ``name`` under ``root``"""
    entropy = [int(root) & 0xFFFFFFFF, zlib.crc32(name.encode('utf-8'))]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & 0x7FFF_FFFF_FFFF_FFFF


def make_rng(root: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(root, name))


def make_generator(root: Union[int, None], name: str, device: str = 'cpu') -> torch.Generator:
    generator = torch.Generator(device=device)
    generator.manual_seed(substream_seed(0 if root is None else root, name))
    return generator


def set_random_seed(seed: int, deterministic: bool = True):
    """Seed the global generators and pin deterministic kernels"""
    random.seed(seed)
    np.random.seed(seed & 0xFFFFFFFF)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
