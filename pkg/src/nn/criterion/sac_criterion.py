"""
Actor-critic losses of the penalized offline learner
"""

from dataclasses import dataclass
from typing import Dict, Sequence

import torch

from .penalty import OODTargets

__all__ = ['CriticLossOutput', 'bellman_target', 'critic_loss', 'actor_loss', 'temperature_loss']


@torch.no_grad()
def bellman_target(reward: torch.Tensor,
                   done: torch.Tensor,
                   next_min_q: torch.Tensor,
                   next_log_prob: torch.Tensor,
                   alpha: torch.Tensor,
                   discount: float = 0.99,
                   reward_offset: float = 0.0) -> torch.Tensor:
    """
    y = r + discount * (1 - done) * (min_i Qbar_i(s', a'_new) - alpha * log pi(a'_new | s'))

    With a nonzero ``reward_offset`` c the reward becomes r + c and a terminal
    transition adds discount * c / (1 - discount), the value of receiving c forever
    after the end. Every fixed point then moves by exactly c / (1 - discount).
    """
    alpha = torch.as_tensor(alpha, dtype=next_min_q.dtype)
    y = reward + discount * (1.0 - done) * (next_min_q - alpha.detach() * next_log_prob)
    if reward_offset:
        y = y + reward_offset + done * discount * reward_offset / (1.0 - discount)
    return y


@dataclass
class CriticLossOutput:
    total: torch.Tensor
    bellman: torch.Tensor
    ood: torch.Tensor

    def as_dict(self) -> Dict[str, torch.Tensor]:
        return {'critic_loss': self.total, 'bellman_loss': self.bellman, 'ood_loss': self.ood}


def critic_loss(q_data: Sequence[torch.Tensor],
                y: torch.Tensor,
                ood: Sequence[OODTargets]) -> CriticLossOutput:
    """
    Sum over critics of E[(q_ood - q_target)^2] + E[(Q_i(s, a) - y)^2].

    Args:
        q_data: Q_i(s, a) on dataset actions, one tensor [B] per critic
        y: Bellman targets [B], carries no gradient
        ood: OOD targets, one per critic
    """
    if len(q_data) != len(ood):
        raise ValueError(f'Got {len(q_data)} critic values but {len(ood)} OOD target sets')

    y = y.detach()
    bellman = sum((q - y).pow(2).mean() for q in q_data)
    ood_loss = sum(o.loss() for o in ood)
    loss = bellman + ood_loss
    if not torch.isfinite(loss):
        raise FloatingPointError(f'Non-finite critic loss: bellman={bellman.item()}, ood={ood_loss.item()}')
    return CriticLossOutput(total=loss, bellman=bellman, ood=ood_loss)


def actor_loss(log_prob: torch.Tensor, min_q: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
    """L_pi = E[alpha * log pi(a_new | s) - min_i Q_i(s, a_new)]"""
    return (alpha.detach() * log_prob - min_q).mean()


def temperature_loss(log_alpha: torch.Tensor, log_prob: torch.Tensor, target_entropy: float) -> torch.Tensor:
    """Gradient on log_alpha is zero when the policy entropy equals ``target_entropy``"""
    return -(log_alpha * (log_prob + target_entropy).detach()).mean()
