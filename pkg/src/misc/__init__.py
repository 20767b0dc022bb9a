"""Checkpoints, seeds and logging helpers"""

from .seeding import SUBSTREAMS, substream_seed, make_rng, make_generator, set_random_seed
from .logger import LOG_FORMAT, setup_logging, format_value, MetricWriter
from .checkpoint import (CHECKPOINT_VERSION, write_dense, read_dense, write_codebooks, read_codebooks,
                         save_vqvae, load_vqvae, save_agent, load_agent)

__all__ = [
    'SUBSTREAMS', 'substream_seed', 'make_rng', 'make_generator', 'set_random_seed',
    'LOG_FORMAT', 'setup_logging', 'format_value', 'MetricWriter',
    'CHECKPOINT_VERSION', 'write_dense', 'read_dense', 'write_codebooks', 'read_codebooks',
    'save_vqvae', 'load_vqvae', 'save_agent', 'load_agent',
]
