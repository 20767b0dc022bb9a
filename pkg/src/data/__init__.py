"""Offline datasets: transitions, binary/CSV I/O, synthetic mixtures"""

from .dataset import Transition, TransitionBatch, OfflineDataset, DATASET_VERSION
from .synthetic import mixture_centers, make_mixture_dataset, gaussian_blobs

__all__ = [
    'Transition', 'TransitionBatch', 'OfflineDataset', 'DATASET_VERSION',
    'mixture_centers', 'make_mixture_dataset', 'gaussian_blobs',
]
