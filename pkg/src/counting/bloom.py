"""
Counting Bloom Filter over serialized label sequences

Counters are saturating unsigned 32-bit integers addressed by ``num_hashes``
MurmurHash3 (x64, 128-bit, low word) hashes of ``seed_i || key``. A query is the
minimum of the addressed counters, so it never undercounts.
"""

import logging
import struct
from pathlib import Path
from typing import Iterable, List, Sequence, Union

import mmh3
import numpy as np
import torch

__all__ = ['label_dtype', 'serialize', 'serialize_batch', 'CountingBloomFilter']

logger = logging.getLogger(__name__)

FILTER_MAGIC = b'CBF1'
FILTER_VERSION = 1
COUNTER_MAX = np.iinfo(np.uint32).max

LabelsLike = Union[Sequence[int], np.ndarray, torch.Tensor]


def label_dtype(num_vectors: int) -> np.dtype:
    """Fixed little-endian width per label: 16 bits up to 65536 vectors, else 32"""
    if num_vectors < 1:
        raise ValueError(f'num_vectors must be positive, got {num_vectors}')
    return np.dtype('<u2') if num_vectors <= 1 << 16 else np.dtype('<u4')


def _as_label_array(labels: LabelsLike, num_vectors: int) -> np.ndarray:
    if isinstance(labels, torch.Tensor):
        labels = labels.detach().cpu().numpy()
    labels = np.asarray(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= num_vectors):
        raise ValueError(f'Labels must lie in [0, {num_vectors}), got range '
                         f'[{labels.min()}, {labels.max()}]')
    return labels.astype(label_dtype(num_vectors))


def serialize(labels: LabelsLike, num_vectors: int = 256) -> bytes:
    """Injective byte encoding of one label sequence"""
    labels = _as_label_array(labels, num_vectors)
    if labels.ndim != 1:
        raise ValueError(f'Expected one label sequence, got shape {labels.shape}')
    return labels.tobytes()


def serialize_batch(labels: LabelsLike, num_vectors: int = 256) -> List[bytes]:
    """Serialize each row of a [B, H] label matrix"""
    labels = _as_label_array(labels, num_vectors)
    if labels.ndim != 2:
        raise ValueError(f'Expected a [B, H] label matrix, got shape {labels.shape}')
    return [row.tobytes() for row in labels]


class CountingBloomFilter:
    """
    Insert-only counting Bloom filter.

    Args:
        num_counters: N_c, size of the counter array
        num_hashes: e, counters touched per key
        seed: Root seed the e hash seeds are derived from
    """

    def __init__(self, num_counters: int = 1 << 20, num_hashes: int = 4, seed: int = 0):
        if num_counters < 1:
            raise ValueError(f'num_counters must be positive, got {num_counters}')
        if num_hashes < 1:
            raise ValueError(f'num_hashes must be >= 1, got {num_hashes}')

        self.num_counters = int(num_counters)
        self.num_hashes = int(num_hashes)
        self.seed = int(seed)
        self.hash_seeds = np.random.SeedSequence(self.seed).generate_state(self.num_hashes, dtype=np.uint64)
        self._seed_prefixes = [int(s).to_bytes(8, 'little') for s in self.hash_seeds]

        self.counters = np.zeros(self.num_counters, dtype=np.uint32)
        self.inserts = 0
        self.frozen = False

    def indices(self, key: bytes) -> List[int]:
        """Counter positions addressed by ``key``; repeats are possible"""
        return [mmh3.hash64(prefix + key, signed=False)[0] % self.num_counters
                for prefix in self._seed_prefixes]

    def insert(self, key: bytes):
        if self.frozen:
            raise RuntimeError('Cannot insert into a frozen filter')
        for idx in self.indices(key):
            if self.counters[idx] < COUNTER_MAX:
                self.counters[idx] += 1
        self.inserts += 1

    def query(self, key: bytes) -> int:
        return int(min(self.counters[idx] for idx in self.indices(key)))

    def insert_many(self, keys: Iterable[bytes]):
        for key in keys:
            self.insert(key)

    def query_many(self, keys: Iterable[bytes]) -> np.ndarray:
        return np.fromiter((self.query(key) for key in keys), dtype=np.int64)

    def __contains__(self, key: bytes) -> bool:
        return self.query(key) > 0

    def freeze(self) -> 'CountingBloomFilter':
        """Stop accepting inserts; queries stay available"""
        self.frozen = True
        return self

    def save(self, path: Union[str, Path]) -> Path:
        """Snapshot: magic, version, N_c, e, seed, hash seeds, inserts, then the raw counters"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(FILTER_MAGIC)
            f.write(struct.pack('<HQIqQ', FILTER_VERSION, self.num_counters, self.num_hashes,
                                self.seed, self.inserts))
            f.write(self.hash_seeds.astype('<u8').tobytes())
            f.write(self.counters.astype('<u4').tobytes())
        logger.info(f'Filter snapshot saved: {path}')
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'CountingBloomFilter':
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f'Filter snapshot not found: {path}')

        data = path.read_bytes()
        if data[:4] != FILTER_MAGIC:
            raise ValueError(f'Not a filter snapshot: {path}')
        header = struct.Struct('<HQIqQ')
        version, num_counters, num_hashes, seed, inserts = header.unpack_from(data, 4)
        if version != FILTER_VERSION:
            raise ValueError(f'Unsupported filter snapshot version {version}')

        offset = 4 + header.size
        seeds = np.frombuffer(data, dtype='<u8', count=num_hashes, offset=offset)
        offset += 8 * num_hashes
        if len(data) - offset != 4 * num_counters:
            raise ValueError(f'Truncated filter snapshot: {path}')

        cbf = cls(num_counters, num_hashes, seed)
        if not np.array_equal(seeds, cbf.hash_seeds):
            raise ValueError('Stored hash seeds do not match the stored root seed')
        cbf.counters = np.frombuffer(data, dtype='<u4', count=num_counters, offset=offset).astype(np.uint32)
        cbf.inserts = inserts
        return cbf

    def __repr__(self) -> str:
        return (f'CountingBloomFilter(num_counters={self.num_counters}, num_hashes={self.num_hashes}, '
                f'inserts={self.inserts}, frozen={self.frozen})')
