"""
Logging setup and metric writers
"""

import csv
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from torch.utils.tensorboard import SummaryWriter

__all__ = ['LOG_FORMAT', 'setup_logging', 'format_value', 'MetricWriter']

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(debug: bool = False, log_file: Optional[Union[str, Path]] = None):
    """Setup logging configuration."""
    level = logging.DEBUG if debug else logging.INFO
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, mode='w', encoding='utf-8'))

    logging.basicConfig(level=level, format=LOG_FORMAT, handlers=handlers, force=True)


def format_value(value: Any) -> str:
    """Fixed textual form so identical runs give byte-identical CSVs"""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return format(value, '.10g')
    if hasattr(value, 'item'):
        return format_value(value.item())
    return str(value)


class MetricWriter:
    """
    CSV metric log with a fixed column order, optionally mirrored to TensorBoard.

    Wall-clock quantities never enter the CSV.
    """

    def __init__(self,
                 path: Union[str, Path],
                 columns: Sequence[str],
                 tensorboard_dir: Optional[Union[str, Path]] = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.columns = list(columns)
        self._file = open(self.path, 'w', newline='', encoding='utf-8')
        self._csv = csv.writer(self._file, lineterminator='\n')
        self._csv.writerow(self.columns)
        self.rows = 0

        self.writer = SummaryWriter(str(tensorboard_dir)) if tensorboard_dir is not None else None

    def write(self, row: Dict[str, Any], step: Optional[int] = None):
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise ValueError(f'Metric row misses columns {missing}')

        self._csv.writerow([format_value(row[c]) for c in self.columns])
        self._file.flush()

        if self.writer is not None:
            step = self.rows if step is None else step
            for key in self.columns:
                value = row[key]
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    self.writer.add_scalar(f'{self.path.stem}/{key}', value, step)
        self.rows += 1

    def close(self):
        if not self._file.closed:
            self._file.close()
        if self.writer is not None:
            self.writer.close()

    def __enter__(self) -> 'MetricWriter':
        return self

    def __exit__(self, *exc):
        self.close()
