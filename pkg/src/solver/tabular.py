"""
Tabular penalized Q-learning on Grid World

Same penalty and clamped OOD targets as the neural learner, with a Q table in
place of the critics and the greedy action in place of the policy sample.
"""

import logging
from typing import Dict, List, Optional

import numpy as np

from ..core.workspace import register
from ..counting.pseudo_count import PseudoCounter
from ..data.dataset import OfflineDataset
from ..envs.gridworld import GridWorld, NUM_ACTIONS
from ..nn.criterion.penalty import NEXT_STATE_PENALTY_SCALE, PenaltyConfig
from .base import BaseTrainer, check_finite
from .evaluator import rollout_returns

__all__ = ['TabularQLearner', 'TABULAR_COLUMNS']

logger = logging.getLogger(__name__)

TABULAR_COLUMNS = ('step', 'bellman_error', 'ood_error', 'mean_penalty', 'mean_count', 'eval_return')


@register()
class TabularQLearner(BaseTrainer):
    """
    Q table indexed [x, y, action], initialised optimistically at ``q_init`` so
    pairs absent from the data look attractive until the penalty removes them.
    """

    def __init__(self,
                 world: GridWorld,
                 counter: Optional[PseudoCounter] = None,
                 lr: float = 0.5,
                 q_init: float = 1.0,
                 beta: float = 1.0,
                 n_floor: float = 1.0,
                 use_penalty: bool = True,
                 discount: float = 0.99,
                 batch_size: int = 256,
                 steps: int = 2000,
                 eval_freq: int = 100,
                 output_dir: str = './outputs',
                 print_freq: int = 100,
                 use_tensorboard: bool = False):
        super().__init__(output_dir, print_freq, use_tensorboard)
        if use_penalty and counter is None:
            raise ValueError('The penalized learner needs a pseudo-counter')

        self.world = world
        self.counter = counter
        self.lr = lr
        self.penalty_cfg = PenaltyConfig(beta=beta, n_floor=n_floor)
        self.use_penalty = use_penalty
        self.discount = discount
        self.batch_size = batch_size
        self.steps = steps
        self.eval_freq = max(int(eval_freq), 1)

        self.q = np.full((world.size, world.size, NUM_ACTIONS), float(q_init), dtype=np.float64)
        self.t = 1

    def greedy(self, xy: np.ndarray) -> np.ndarray:
        """argmax over actions, lowest action id on ties"""
        return self.q[xy[:, 0], xy[:, 1]].argmax(-1)

    def penalties(self, xy: np.ndarray, actions: np.ndarray):
        if not self.use_penalty:
            zeros = np.zeros(xy.shape[0])
            return zeros, zeros
        counts = self.counter.pseudo_count(xy.astype(np.float64), actions[:, None].astype(np.float64))
        counts = counts.astype(np.float64)
        return counts, self.penalty_cfg.at(self.t)(counts).numpy()

    def train_step(self, batch_idx: np.ndarray, dataset: OfflineDataset) -> Dict[str, float]:
        xy = dataset.states[batch_idx].round().astype(np.int64)
        a = dataset.actions[batch_idx, 0].round().astype(np.int64)
        r = dataset.rewards[batch_idx]
        xy_next = dataset.next_states[batch_idx].round().astype(np.int64)
        done = dataset.dones[batch_idx]

        a_new = self.greedy(xy)
        a_next = self.greedy(xy_next)
        n, p = self.penalties(xy, a_new)
        _, p_next = self.penalties(xy_next, a_next)

        q_next = self.q[xy_next[:, 0], xy_next[:, 1], a_next]
        y = r + self.discount * (1.0 - done) * q_next

        q_new = self.q[xy[:, 0], xy[:, 1], a_new]
        target_new = np.maximum(q_new - p, 0.0)
        target_next = np.maximum(q_next - NEXT_STATE_PENALTY_SCALE * p_next, 0.0)

        # Mean target per touched cell, applied as one synchronous update
        cells = np.concatenate([
            np.stack([xy[:, 0], xy[:, 1], a], -1),
            np.stack([xy[:, 0], xy[:, 1], a_new], -1),
            np.stack([xy_next[:, 0], xy_next[:, 1], a_next], -1),
        ])
        targets = np.concatenate([y, target_new, target_next])
        flat = np.ravel_multi_index(cells.T, self.q.shape)
        sums = np.bincount(flat, weights=targets, minlength=self.q.size)
        hits = np.bincount(flat, minlength=self.q.size)
        touched = hits > 0

        before = self.q.copy()
        q_flat = self.q.reshape(-1)
        q_flat[touched] += self.lr * (sums[touched] / hits[touched] - q_flat[touched])

        metrics = {
            'bellman_error': float(np.mean((before[xy[:, 0], xy[:, 1], a] - y) ** 2)),
            'ood_error': float(np.mean((q_new - target_new) ** 2) + np.mean((q_next - target_next) ** 2)),
            'mean_penalty': float(np.mean(p)),
            'mean_count': float(np.mean(n)),
        }
        check_finite(metrics, f'tabular step {self.t}')
        self.t += 1
        return metrics

    def act(self, state: np.ndarray) -> np.ndarray:
        xy = np.asarray(state).round().astype(np.int64)[None]
        return np.array([float(self.greedy(xy)[0])])

    def evaluate(self, episodes: int = 1, rng: Optional[np.random.Generator] = None) -> float:
        rng = np.random.default_rng(0) if rng is None else rng
        return float(np.mean(rollout_returns(self.world, self.act, episodes, rng)))

    def fit(self, dataset: OfflineDataset, rng: np.random.Generator,
            metrics_log: Optional[str] = 'tabular_metrics.csv') -> List[Dict[str, float]]:
        if not dataset.is_discrete:
            raise ValueError(f'Tabular learning needs a discrete dataset, got {dataset.env_id}')

        writer = self.metric_writer(metrics_log, TABULAR_COLUMNS) if metrics_log else None
        history = []
        for step in range(self.steps):
            idx = rng.integers(0, len(dataset), size=self.batch_size)
            metrics = self.train_step(idx, dataset)
            self.log_step('Tabular', step, self.steps, metrics)
            if (step + 1) % self.eval_freq == 0 or step + 1 == self.steps:
                row = {'step': step + 1, **metrics, 'eval_return': self.evaluate()}
                history.append(row)
                if writer is not None:
                    writer.write(row, step=step + 1)

        logger.info(f'Tabular learner finished: penalty={self.use_penalty}, '
                    f'final return {history[-1]["eval_return"]:.3f}')
        self.close()
        return history
