"""
Evaluators: policy rollouts, codebook use rates, OOD loss scoring, count accuracy
"""

import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import torch
from PIL import Image
from tqdm import tqdm

from ..core.workspace import register
from ..counting.pseudo_count import PseudoCounter
from ..data.dataset import OfflineDataset
from ..envs.gridworld import ACTION_NAMES
from ..nn.criterion import vq_loss
from ..nn.vqvae import MultiCodebookVQVAE

__all__ = [
    'rollout_returns', 'evaluate_agent', 'UseRateEvaluator', 'OOD_CONDITIONS', 'perturbation_sets',
    'ood_losses', 'loss_histogram', 'CountEvaluator', 'write_count_table', 'write_pgm',
]

logger = logging.getLogger(__name__)


def rollout_returns(env, act: Callable[[np.ndarray], np.ndarray], episodes: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Undiscounted returns of ``episodes`` rollouts capped at the env horizon"""
    returns = np.zeros(episodes, dtype=np.float64)
    for episode in range(episodes):
        state = env.reset(rng)
        for _ in range(env.horizon):
            state, reward, done, _ = env.step(act(state))
            returns[episode] += reward
            if done:
                break
    return returns


def evaluate_agent(env, agent, episodes: int, rng: np.random.Generator) -> np.ndarray:
    """Deterministic-policy rollouts (squashed mean action)"""
    dtype = agent.log_alpha.dtype

    def act(state: np.ndarray) -> np.ndarray:
        obs = torch.as_tensor(state, dtype=dtype).unsqueeze(0)
        return agent.policy.act(obs)[0].double().numpy()

    return rollout_returns(env, act, episodes, rng)


@register()
class UseRateEvaluator:
    """Fraction of codebook vectors selected at least once over a query pass"""

    def __init__(self, model: MultiCodebookVQVAE, batch_size: int = 4096):
        self.model = model
        self.batch_size = batch_size
        self.reset()

    def reset(self):
        self.hits = torch.zeros(self.model.num_codebooks, self.model.num_vectors, dtype=torch.int64)
        self.queries = 0

    @torch.no_grad()
    def update(self, states: torch.Tensor, actions: torch.Tensor):
        for start in range(0, states.shape[0], self.batch_size):
            labels = self.model.labels(states[start:start + self.batch_size], actions[start:start + self.batch_size])
            for h in range(self.model.num_codebooks):
                self.hits[h] += torch.bincount(labels[:, h], minlength=self.model.num_vectors)
            self.queries += labels.shape[0]

    def compute(self) -> Dict[str, Union[float, List[float], List[int]]]:
        used = (self.hits > 0).sum(-1)
        return {
            'queries': self.queries,
            'use_rate': float(used.sum().item()) / (self.model.num_codebooks * self.model.num_vectors),
            'per_codebook_use_rate': [float(u) / self.model.num_vectors for u in used.tolist()],
            'per_codebook_used': [int(u) for u in used.tolist()],
            'per_codebook_selections': [int(s) for s in self.hits.sum(-1).tolist()],
        }


OOD_CONDITIONS = ('clean', 'noise_0.25', 'noise_0.5', 'random')


def perturbation_sets(dataset: OfflineDataset, num_queries: int,
                      rng: np.random.Generator) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
    """
    Query sets of (state, action): dataset samples, the same samples with additive
    zero-mean Gaussian noise of variance 0.25 and 0.5, and uniform draws over the
    data box widened by its extent on every side.
    """
    idx = rng.integers(0, len(dataset), size=num_queries)
    clean = dataset.state_actions()[idx]
    sets = {'clean': clean}
    for variance in (0.25, 0.5):
        sets[f'noise_{variance}'] = clean + np.sqrt(variance) * rng.standard_normal(clean.shape)

    low, high = dataset.bounds()
    extent = np.maximum(high - low, 1e-6)
    sets['random'] = rng.uniform(low - extent, high + extent, size=clean.shape)

    split = dataset.state_dim
    return {name: (sa[:, :split], sa[:, split:]) for name, sa in sets.items()}


@torch.no_grad()
def ood_losses(model: MultiCodebookVQVAE, states: np.ndarray, actions: np.ndarray,
               commitment: float = 0.25, batch_size: int = 4096, desc: Optional[str] = None) -> np.ndarray:
    """Per-sample three-term VQVAE loss [num_queries]"""
    model.eval()
    dtype = next(model.parameters()).dtype
    out = []
    for start in tqdm(range(0, states.shape[0], batch_size), desc=desc, disable=desc is None, leave=False):
        s = torch.as_tensor(states[start:start + batch_size], dtype=dtype)
        a = torch.as_tensor(actions[start:start + batch_size], dtype=dtype)
        outputs = model(s, a)
        loss = vq_loss(a, outputs.recon, outputs.partition, outputs.quantization,
                       commitment=commitment, reduction='none')
        out.append(loss.total.double().numpy())
    return np.concatenate(out) if out else np.zeros(0)


def loss_histogram(losses: Dict[str, np.ndarray], bins: int = 50) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """
    Shared log-spaced bins over all conditions; every sample lands in one bin.

    Returns:
        (bin edges [bins + 1], counts per condition [bins])
    """
    floor = 1e-12
    logs = {name: np.log10(np.maximum(values, floor)) for name, values in losses.items()}
    everything = np.concatenate(list(logs.values()))
    low, high = float(everything.min()), float(everything.max())
    if high <= low:
        high = low + 1.0
    edges = np.linspace(low, high, bins + 1)
    counts = {name: np.histogram(values, bins=edges)[0] for name, values in logs.items()}
    return np.power(10.0, edges), counts


def write_count_table(path: Union[str, Path], table: np.ndarray):
    """CSV rows (x, y, action, count) of a [size, size, actions] table"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    size, _, num_actions = table.shape
    xs, ys, acts = np.meshgrid(np.arange(size), np.arange(size), np.arange(num_actions), indexing='ij')
    rows = np.stack([xs.ravel(), ys.ravel(), acts.ravel(), table.ravel()], axis=-1)
    np.savetxt(path, rows, fmt='%d', delimiter=',', header='x,y,action,count', comments='')
    return path


def write_pgm(path: Union[str, Path], grid: np.ndarray, scale: int = 16, vmax: Optional[float] = None):
    """Portable graymap of a [size, size] grid indexed [x, y]; brighter is larger"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = np.asarray(grid, dtype=np.float64).T
    vmax = float(grid.max()) if vmax is None else vmax
    pixels = np.zeros_like(grid) if vmax <= 0 else np.clip(grid / vmax, 0.0, 1.0) * 255.0
    image = Image.fromarray(pixels.round().astype(np.uint8))
    image = image.resize((grid.shape[1] * scale, grid.shape[0] * scale), Image.Resampling.NEAREST)
    image.save(path, format='PPM')
    return path


@register()
class CountEvaluator:
    """Compares filter counts with exact counts over every (x, y, action) cell"""

    def __init__(self, counter: PseudoCounter, exact_counts: np.ndarray):
        self.counter = counter
        self.exact = np.asarray(exact_counts, dtype=np.int64)
        self.estimated = None
        self.seconds = 0.0

    def compute(self) -> Dict[str, Union[int, float]]:
        start = time.perf_counter()
        size, _, num_actions = self.exact.shape
        xs, ys, acts = np.meshgrid(np.arange(size), np.arange(size), np.arange(num_actions), indexing='ij')
        states = np.stack([xs.ravel(), ys.ravel()], axis=-1).astype(np.float64)
        actions = acts.ravel()[:, None].astype(np.float64)
        self.estimated = self.counter.pseudo_count(states, actions).reshape(self.exact.shape)
        self.seconds = time.perf_counter() - start

        visited = self.exact > 0
        diff = self.estimated - self.exact
        num_visited = int(visited.sum())
        return {
            'visited_pairs': num_visited,
            'exact_match_rate': float((diff[visited] == 0).sum()) / max(num_visited, 1),
            'overcount_rate': float((diff[visited] > 0).sum()) / max(num_visited, 1),
            'unvisited_false_positives': int((self.estimated[~visited] > 0).sum()),
            'underestimates': int((diff < 0).sum()),
            'total_exact': int(self.exact.sum()),
            'total_estimated_visited': int(self.estimated[visited].sum()),
        }

    def write_heatmaps(self, output_dir: Union[str, Path], scale: int = 16) -> List[Path]:
        """CSV tables and one graymap per action for exact, estimated and difference counts"""
        if self.estimated is None:
            self.compute()
        output_dir = Path(output_dir)
        tables = {'gt': self.exact, 'cbf': self.estimated, 'diff': self.estimated - self.exact}
        vmax = float(max(self.exact.max(), self.estimated.max()))
        written = []
        for name, table in tables.items():
            written.append(write_count_table(output_dir / f'counts_{name}.csv', table))
            for a, action_name in enumerate(ACTION_NAMES[:table.shape[-1]]):
                limit = None if name == 'diff' else vmax
                written.append(write_pgm(output_dir / f'heatmap_{name}_{action_name}.pgm',
                                         table[:, :, a], scale=scale, vmax=limit))
        return written
