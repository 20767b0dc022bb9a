"""
Count-based anti-exploration penalty and OOD critic targets
"""

import math
from dataclasses import dataclass
from typing import Union

import torch

__all__ = ['PenaltyConfig', 'OODTargets', 'penalty', 'reference_penalty', 'ood_targets', 'NEXT_STATE_PENALTY_SCALE']

# Scale applied to the next-state penalty p'
NEXT_STATE_PENALTY_SCALE = 0.1

Number = Union[float, int, torch.Tensor]


@dataclass
class PenaltyConfig:
    beta: float = 0.2
    t: int = 1
    n_floor: float = 1.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError(f'beta must be > 0, got {self.beta}')
        if self.t < 1:
            raise ValueError(f't must be >= 1, got {self.t}')
        if self.n_floor < 1:
            raise ValueError(f'n_floor must be >= 1, got {self.n_floor}')

    def __call__(self, n: Number) -> torch.Tensor:
        return penalty(n, self.t, self.beta, self.n_floor)

    def at(self, t: int) -> 'PenaltyConfig':
        """Same beta and n_floor at step t"""
        return PenaltyConfig(beta=self.beta, t=t, n_floor=self.n_floor)


def penalty(n: Number, t: int, beta: float, n_floor: float = 1.0) -> torch.Tensor:
    """
    p = beta * ln(t) / sqrt(max(n, n_floor))

    Non-increasing in n, non-decreasing in t, exactly zero at t = 1.
    """
    if t < 1:
        raise ValueError(f't must be >= 1, got {t}')
    n = torch.as_tensor(n, dtype=torch.float64)
    return beta * math.log(t) / n.clamp_min(n_floor).sqrt()


def reference_penalty(n: Number, beta: float, n_floor: float = 1.0) -> torch.Tensor:
    """Unscheduled form beta / sqrt(n), kept for comparison against the scheduled penalty"""
    n = torch.as_tensor(n, dtype=torch.float64)
    return beta / n.clamp_min(n_floor).sqrt()


@dataclass
class OODTargets:
    q_ood: torch.Tensor      # [2, B] current-state and next-state values
    q_target: torch.Tensor   # [2, B] penalized, clamped at 0, no gradient

    def loss(self) -> torch.Tensor:
        """Mean squared OOD error summed over the two value groups"""
        return (self.q_ood - self.q_target).pow(2).mean(-1).sum()


def ood_targets(q_new: torch.Tensor,
                q_next_target: torch.Tensor,
                p: Number,
                p_next: Number) -> OODTargets:
    """
    Regression targets for values of policy-proposed actions.

    q_ood    = [Q_i(s, a_new), Qbar_i(s', a'_new)]
    q_target = [max(Q_i(s, a_new) - p, 0), max(Qbar_i(s', a'_new) - 0.1 p', 0)]

    Args:
        q_new: Q_i(s, a_new) of one critic [B]
        q_next_target: Qbar_i(s', a'_new) of the matching target critic [B]
        p: Penalty of (s, a_new) [B] or scalar
        p_next: Penalty of (s', a'_new) [B] or scalar
    """
    p = torch.as_tensor(p, dtype=q_new.dtype, device=q_new.device)
    p_next = torch.as_tensor(p_next, dtype=q_new.dtype, device=q_new.device)
    if (p < 0).any() or (p_next < 0).any():
        raise ValueError('Penalties must be non-negative')

    q_ood = torch.stack([q_new, q_next_target.expand_as(q_new)])
    with torch.no_grad():
        q_target = torch.stack([
            (q_new - p).clamp_min(0.0),
            (q_next_target - NEXT_STATE_PENALTY_SCALE * p_next).clamp_min(0.0),
        ])
    return OODTargets(q_ood=q_ood, q_target=q_target)
