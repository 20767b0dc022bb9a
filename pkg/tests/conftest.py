"""Shared fixtures and markers."""

import os
import sys

import numpy as np
import pytest
import torch

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

slow = pytest.mark.skipif(os.environ.get('RUN_SLOW') != '1', reason='experiment-scale, set RUN_SLOW=1')


def central_difference(fn, tensor: torch.Tensor, index, eps: float = 1e-6) -> float:
    """d fn / d tensor[index] by central differences; ``tensor`` is restored afterwards"""
    with torch.no_grad():
        original = tensor[index].item()
        tensor[index] = original + eps
        plus = fn().item()
        tensor[index] = original - eps
        minus = fn().item()
        tensor[index] = original
    return (plus - minus) / (2 * eps)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def generator():
    g = torch.Generator()
    g.manual_seed(1234)
    return g
