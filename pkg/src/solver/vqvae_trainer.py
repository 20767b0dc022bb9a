"""
Multi-codebook VQVAE pretraining
"""

import logging
from typing import Dict, List, Optional

import numpy as np
import torch
from tqdm import tqdm

from ..core.workspace import register
from ..data.dataset import OfflineDataset
from ..nn.criterion import VQCriterion
from ..nn.fcm import FuzzyCodebookUpdate
from ..nn.vqvae import MultiCodebookVQVAE
from ..optim.optimizer import build_optimizer
from .base import BaseTrainer, TrainingDivergedError, check_finite

__all__ = ['VQVAETrainer', 'LOSS_COLUMNS']

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ('epoch', 'loss', 'recon', 'codebook', 'commitment', 'mean_step', 'active_vectors')


@register()
class VQVAETrainer(BaseTrainer):
    """
    Trains encoder and decoder by Adam on the three-term loss with a
    straight-through quantizer. Codebooks move by the FCM rule, or by Adam on
    the codebook term when ``use_fcm`` is off.

    With FCM on, training ends with ``refine_steps`` FCM-only passes over a frozen
    encoder. Vectors left behind by encoder drift see their usage decay, regain a
    step size near one and move onto latents the final encoder emits.
    """

    def __init__(self,
                 model: MultiCodebookVQVAE,
                 lr: float = 1e-3,
                 commitment: float = 0.25,
                 use_fcm: bool = True,
                 batch_size: int = 256,
                 epochs: int = 20,
                 steps_per_epoch: int = 100,
                 warmup_samples: int = 4096,
                 refine_steps: int = 0,
                 output_dir: str = './outputs',
                 print_freq: int = 100,
                 use_tensorboard: bool = False,
                 show_progress: bool = True):
        super().__init__(output_dir, print_freq, use_tensorboard)
        self.model = model
        self.criterion = VQCriterion(commitment=commitment)
        self.use_fcm = use_fcm
        self.batch_size = batch_size
        self.epochs = epochs
        self.steps_per_epoch = steps_per_epoch
        self.warmup_samples = warmup_samples
        self.refine_steps = refine_steps
        self.show_progress = show_progress

        self.model.codebooks.set_trainable(not use_fcm)
        self.optimizer = build_optimizer(self.model.parameters(), lr=lr)
        self.codebook_update = FuzzyCodebookUpdate(self.model.codebooks, enabled=use_fcm)
        self.dtype = next(model.parameters()).dtype

    @torch.no_grad()
    def initialize_codebooks(self, dataset: OfflineDataset, rng: np.random.Generator,
                             generator: Optional[torch.Generator] = None):
        """k-means++ seeding of every codebook from encoder outputs of a warmup batch"""
        num = max(self.warmup_samples, self.model.num_vectors)
        batch = dataset.sample(num, rng, dtype=self.dtype)
        z_e = self.model.encode(batch.states, batch.actions)
        self.model.codebooks.initialize_from(z_e, generator)
        logger.info(f'Codebooks seeded from {num} encoder outputs '
                    f'(H={self.model.num_codebooks}, N={self.model.num_vectors})')

    def train_step(self, states: torch.Tensor, actions: torch.Tensor) -> Dict[str, float]:
        self.model.train()
        outputs = self.model(states, actions)
        losses = self.criterion(outputs, actions)
        try:
            check_finite(losses, f'VQVAE step {self.global_step}')
        except TrainingDivergedError:
            logger.error(f'VQVAE loss diverged at step {self.global_step}: '
                         f'{ {k: float(v) for k, v in losses.items()} }')
            raise

        self.optimizer.zero_grad(set_to_none=True)
        losses['loss'].backward()
        self.optimizer.step()

        steps = self.codebook_update(outputs.z_e.detach(), outputs.labels)
        self.global_step += 1

        metrics = {k: float(v.item()) for k, v in losses.items()}
        metrics['mean_step'] = float(steps.mean().item()) if steps is not None else 0.0
        return metrics

    @torch.no_grad()
    def refine_codebooks(self, dataset: OfflineDataset, rng: np.random.Generator) -> Dict[str, float]:
        """FCM updates on encoder outputs with encoder and decoder held fixed"""
        self.model.eval()
        counts_before = self.model.codebooks.counts.clone()
        step_sum = 0.0
        steps = tqdm(range(self.refine_steps), desc='Codebook refinement',
                     disable=not self.show_progress, leave=False)
        for _ in steps:
            batch = dataset.sample(self.batch_size, rng, dtype=self.dtype)
            z_e = self.model.encode(batch.states, batch.actions)
            step = self.codebook_update(z_e, self.model.quantize(z_e).labels)
            step_sum += float(step.mean().item())

        active = int(((self.model.codebooks.counts - counts_before) > 0).sum().item())
        result = {'mean_step': step_sum / max(self.refine_steps, 1), 'active_vectors': active}
        logger.info(f'Codebook refinement over {self.refine_steps} steps: mean step {result["mean_step"]:.4f}, '
                    f'active vectors: {active}')
        return result

    def fit(self, dataset: OfflineDataset, rng: np.random.Generator,
            generator: Optional[torch.Generator] = None, loss_log: str = 'vqvae_loss.csv') -> List[Dict[str, float]]:
        if dataset.state_dim != self.model.state_dim or dataset.action_dim != self.model.action_dim:
            raise ValueError(f'Dataset dims ({dataset.state_dim}, {dataset.action_dim}) do not match the model '
                             f'({self.model.state_dim}, {self.model.action_dim})')

        self.initialize_codebooks(dataset, rng, generator)
        writer = self.metric_writer(loss_log, LOSS_COLUMNS)
        history = []

        logger.info(f'Pretraining VQVAE for {self.epochs} epochs x {self.steps_per_epoch} steps '
                    f'(fcm={self.use_fcm})')
        for epoch in range(self.epochs):
            sums: Dict[str, float] = {}
            counts_before = self.model.codebooks.counts.clone()
            steps = tqdm(range(self.steps_per_epoch), desc=f'VQVAE epoch {epoch}',
                         disable=not self.show_progress, leave=False)
            for step in steps:
                batch = dataset.sample(self.batch_size, rng, dtype=self.dtype)
                metrics = self.train_step(batch.states, batch.actions)
                for key, value in metrics.items():
                    sums[key] = sums.get(key, 0.0) + value
                self.log_step('VQVAE', step, self.steps_per_epoch, metrics, epoch)

            mean = {k: v / self.steps_per_epoch for k, v in sums.items()}
            active = int(((self.model.codebooks.counts - counts_before) > 0).sum().item())
            row = {
                'epoch': epoch,
                'loss': mean['loss'],
                'recon': mean['loss_recon'],
                'codebook': mean['loss_codebook'],
                'commitment': mean['loss_commitment'],
                'mean_step': mean['mean_step'],
                'active_vectors': active,
            }
            writer.write(row, step=epoch)
            history.append(row)
            logger.info(f'VQVAE epoch [{epoch}/{self.epochs}] loss: {row["loss"]:.6f} recon: {row["recon"]:.6f} '
                        f'commitment: {row["commitment"]:.6f} active vectors: {active}')

        if self.use_fcm and self.refine_steps > 0:
            self.refine_codebooks(dataset, rng)

        self.close()
        return history
