"""
Offline anti-exploration actor-critic training loop
"""

import copy
import itertools
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import torch
from tqdm import tqdm

from ..core.workspace import register
from ..counting.pseudo_count import PseudoCounter
from ..data.dataset import OfflineDataset, TransitionBatch
from ..misc.checkpoint import save_agent
from ..nn.agent import SACAgent
from ..nn.criterion import (PenaltyConfig, actor_loss, bellman_target, critic_loss, ood_targets,
                            temperature_loss)
from ..optim.optimizer import build_optimizer, opt_step
from .base import BaseTrainer, TrainingDivergedError, check_finite
from .evaluator import evaluate_agent

__all__ = ['AntiExplorationTrainer', 'METRIC_COLUMNS']

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ('epoch', 'critic_loss', 'ood_loss', 'actor_loss', 'mean_penalty', 'mean_count',
                  'eval_return_mean', 'eval_return_std')


@register()
class AntiExplorationTrainer(BaseTrainer):
    """
    Per step: sample a minibatch, adjust the temperature, sample a_new and a'_new,
    pseudo-count both pairs, turn the counts into penalties, update the critics,
    update the actor, soft-update the targets.

    Bellman targets shift every reward by the constant ``reward_offset``, which moves
    all Q values by reward_offset / (1 - discount) and leaves the policy unchanged.
    Offsets no smaller than minus the lowest reward keep Q non-negative under the
    0 clamp of the OOD targets.
    """

    def __init__(self,
                 agent: SACAgent,
                 counter: PseudoCounter,
                 env=None,
                 lr: float = 1e-3,
                 beta: float = 0.2,
                 n_floor: float = 1.0,
                 use_penalty: bool = True,
                 reward_offset: float = 0.0,
                 discount: float = 0.99,
                 batch_size: int = 256,
                 epochs: int = 1000,
                 steps_per_epoch: int = 1000,
                 eval_episodes: int = 10,
                 output_dir: str = './outputs',
                 print_freq: int = 100,
                 use_tensorboard: bool = False,
                 show_progress: bool = True):
        super().__init__(output_dir, print_freq, use_tensorboard)
        self.agent = agent
        self.counter = counter
        self.env = env
        self.penalty_cfg = PenaltyConfig(beta=beta, n_floor=n_floor)
        self.use_penalty = use_penalty
        self.reward_offset = reward_offset
        self.discount = discount
        self.batch_size = batch_size
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.eval_episodes = eval_episodes
        self.show_progress = show_progress

        self.critic_optimizer = build_optimizer(
            itertools.chain(agent.q1.parameters(), agent.q2.parameters()), lr=lr)
        self.actor_optimizer = build_optimizer(agent.policy.parameters(), lr=lr)
        self.alpha_optimizer = build_optimizer([agent.log_alpha], lr=lr)

        self.dtype = agent.log_alpha.dtype
        self._last_good = copy.deepcopy(agent.state_dict())

    def penalties(self, states: torch.Tensor, actions: torch.Tensor):
        """(pseudo-counts, penalties) of a batch of pairs at the current step"""
        counts = self.counter.count_tensor(states, actions, dtype=torch.float64)
        if not self.use_penalty:
            return counts, torch.zeros_like(counts)
        return counts, self.penalty_cfg.at(self.agent.t)(counts)

    def train_step(self, batch: TransitionBatch, generator: Optional[torch.Generator] = None) -> Dict[str, float]:
        agent = self.agent
        s, a, r, s_next, done = batch.states, batch.actions, batch.rewards, batch.next_states, batch.dones

        # Temperature
        a_new, log_prob = agent.policy.sample(s, generator)
        opt_step(self.alpha_optimizer, temperature_loss(agent.log_alpha, log_prob, agent.target_entropy))
        alpha = agent.alpha.detach()
        a_new = a_new.detach()

        with torch.no_grad():
            a_next, log_prob_next = agent.policy.sample(s_next, generator)

            n, p = self.penalties(s, a_new)
            n_next, p_next = self.penalties(s_next, a_next)

            q_next = [target(s_next, a_next) for target in agent.targets()]
            y = bellman_target(r, done, torch.min(*q_next), log_prob_next, alpha, self.discount,
                               reward_offset=self.reward_offset)

        # Critics
        q_data = [critic(s, a) for critic in agent.critics()]
        ood = [ood_targets(critic(s, a_new), q_next_i, p, p_next)
               for critic, q_next_i in zip(agent.critics(), q_next)]
        try:
            critic_out = critic_loss(q_data, y, ood)
        except FloatingPointError as e:
            raise TrainingDivergedError(str(e)) from e
        opt_step(self.critic_optimizer, critic_out.total)

        # Actor
        a_pi, log_prob_pi = agent.policy.sample(s, generator)
        loss_pi = actor_loss(log_prob_pi, agent.min_q(s, a_pi), alpha)
        opt_step(self.actor_optimizer, loss_pi)

        agent.update_targets()
        agent.tick()
        self.global_step += 1

        metrics = {
            'critic_loss': float(critic_out.total.item()),
            'ood_loss': float(critic_out.ood.item()),
            'bellman_loss': float(critic_out.bellman.item()),
            'actor_loss': float(loss_pi.item()),
            'alpha': float(alpha.item()),
            'mean_penalty': float(p.mean().item()),
            'mean_count': float(n.mean().item()),
            'min_ood_target': float(min(o.q_target.min().item() for o in ood)),
        }
        check_finite(metrics, f'agent step {agent.t - 1}')
        return metrics

    def _diverged(self, error: TrainingDivergedError):
        self.agent.load_state_dict(self._last_good)
        path = save_agent(self.output_dir / 'last_good.ckpt', self.agent)
        self.close()
        raise TrainingDivergedError(f'{error}; last good checkpoint: {path}') from error

    def fit(self, dataset: OfflineDataset, rng: np.random.Generator, eval_rng: np.random.Generator,
            generator: Optional[torch.Generator] = None) -> List[Dict[str, float]]:
        if dataset.state_dim != self.agent.state_dim or dataset.action_dim != self.agent.action_dim:
            raise ValueError(f'Dataset dims ({dataset.state_dim}, {dataset.action_dim}) do not match the agent '
                             f'({self.agent.state_dim}, {self.agent.action_dim})')

        writer = self.metric_writer('metrics.csv', METRIC_COLUMNS)
        history = []
        logger.info(f'Training agent for {self.epochs} epochs x {self.steps_per_epoch} steps '
                    f'(beta={self.penalty_cfg.beta}, penalty={self.use_penalty}, '
                    f'reward offset={self.reward_offset})')

        for epoch in range(self.epochs):
            sums: Dict[str, float] = {}
            steps = tqdm(range(self.steps_per_epoch), desc=f'Agent epoch {epoch}',
                         disable=not self.show_progress, leave=False)
            try:
                for step in steps:
                    batch = dataset.sample(self.batch_size, rng, dtype=self.dtype)
                    metrics = self.train_step(batch, generator)
                    for key, value in metrics.items():
                        sums[key] = sums.get(key, 0.0) + value
                    self.log_step('Agent', step, self.steps_per_epoch, metrics, epoch)
                if not self.agent.is_finite():
                    raise TrainingDivergedError(f'Non-finite agent parameters after epoch {epoch}')
            except TrainingDivergedError as e:
                self._diverged(e)

            self._last_good = copy.deepcopy(self.agent.state_dict())

            returns = (evaluate_agent(self.env, self.agent, self.eval_episodes, eval_rng)
                       if self.env is not None and self.eval_episodes > 0 else np.array([np.nan]))
            mean = {k: v / self.steps_per_epoch for k, v in sums.items()}
            row = {
                'epoch': epoch,
                'critic_loss': mean['critic_loss'],
                'ood_loss': mean['ood_loss'],
                'actor_loss': mean['actor_loss'],
                'mean_penalty': mean['mean_penalty'],
                'mean_count': mean['mean_count'],
                'eval_return_mean': float(np.mean(returns)),
                'eval_return_std': float(np.std(returns)),
            }
            writer.write(row, step=epoch)
            history.append(row)
            logger.info(f'Agent epoch [{epoch}/{self.epochs}] critic: {row["critic_loss"]:.4f} '
                        f'ood: {row["ood_loss"]:.4f} actor: {row["actor_loss"]:.4f} '
                        f'alpha: {mean["alpha"]:.4f} penalty: {row["mean_penalty"]:.4f} '
                        f'return: {row["eval_return_mean"]:.3f} +- {row["eval_return_std"]:.3f}')

        self.close()
        return history

    def save(self, path: Optional[Path] = None) -> Path:
        return save_agent(path or self.output_dir / 'agent.ckpt', self.agent)
