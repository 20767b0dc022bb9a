"""
Shared trainer plumbing: output directory, metric logs, divergence checks
"""

import logging
import math
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import torch

from ..misc.logger import MetricWriter

__all__ = ['TrainingDivergedError', 'BaseTrainer', 'check_finite']

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """A loss or parameter became NaN/Inf"""


def check_finite(values: Mapping[str, Union[float, torch.Tensor]], where: str):
    bad = {}
    for name, value in values.items():
        value = value.item() if isinstance(value, torch.Tensor) and value.numel() == 1 else value
        if isinstance(value, torch.Tensor):
            if not torch.isfinite(value).all():
                bad[name] = 'non-finite tensor'
        elif not math.isfinite(float(value)):
            bad[name] = value
    if bad:
        raise TrainingDivergedError(f'Non-finite values at {where}: {bad}')


class BaseTrainer:
    """Owns the output directory and the metric writers of one run"""

    def __init__(self,
                 output_dir: Union[str, Path] = './outputs',
                 print_freq: int = 100,
                 use_tensorboard: bool = False):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.print_freq = max(int(print_freq), 1)
        self.use_tensorboard = use_tensorboard
        self.global_step = 0
        self._writers: Dict[str, MetricWriter] = {}

    def metric_writer(self, name: str, columns: Sequence[str]) -> MetricWriter:
        if name not in self._writers:
            tb_dir = self.output_dir / 'summary' if self.use_tensorboard else None
            self._writers[name] = MetricWriter(self.output_dir / name, columns, tensorboard_dir=tb_dir)
        return self._writers[name]

    def close(self):
        for writer in self._writers.values():
            writer.close()
        self._writers.clear()

    def log_step(self, prefix: str, step: int, total: int, metrics: Mapping[str, float], epoch: Optional[int] = None):
        if step % self.print_freq != 0:
            return
        head = f'Epoch [{epoch}] ' if epoch is not None else ''
        body = ' '.join(f'{k}: {v:.4f}' for k, v in metrics.items())
        logger.info(f'{prefix} {head}Step [{step}/{total}] {body}')
