"""Label serialization, Counting Bloom Filter and pseudo-counter"""

from .bloom import label_dtype, serialize, serialize_batch, CountingBloomFilter
from .pseudo_count import VQVAELabeler, GridLabeler, PseudoCounter

__all__ = [
    'label_dtype', 'serialize', 'serialize_batch', 'CountingBloomFilter',
    'VQVAELabeler', 'GridLabeler', 'PseudoCounter',
]
