"""Loss functions: VQVAE loss, anti-exploration penalty, actor-critic losses"""

from .vq_criterion import VQLossOutput, vq_loss, VQCriterion
from .penalty import PenaltyConfig, OODTargets, penalty, reference_penalty, ood_targets
from .sac_criterion import CriticLossOutput, bellman_target, critic_loss, actor_loss, temperature_loss

__all__ = [
    'VQLossOutput', 'vq_loss', 'VQCriterion',
    'PenaltyConfig', 'OODTargets', 'penalty', 'reference_penalty', 'ood_targets',
    'CriticLossOutput', 'bellman_target', 'critic_loss', 'actor_loss', 'temperature_loss',
]
