"""Count-based anti-exploration for offline RL with a multi-codebook VQVAE and a Counting Bloom Filter"""

from . import core, nn, optim, counting, data, envs, misc, solver

__all__ = ['core', 'nn', 'optim', 'counting', 'data', 'envs', 'misc', 'solver']
