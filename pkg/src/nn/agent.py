"""
Actor-critic networks and agent state
Squashed-Gaussian policy, twin critics with soft-updated targets, entropy temperature
"""

import math
from typing import Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..core import register
from ..optim.optimizer import TargetNetwork
from .dense import DenseNet

__all__ = ['GaussianPolicy', 'Critic', 'SACAgent']

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


@register()
class GaussianPolicy(nn.Module):
    """State -> tanh-squashed Gaussian over actions"""

    def __init__(self,
                 state_dim: int,
                 action_dim: int,
                 hidden_dims: Sequence[int] = (256, 256),
                 seed: Optional[int] = None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.net = DenseNet([state_dim, *hidden_dims, 2 * action_dim], activation='relu', seed=seed, dtype=dtype)

    def forward(self, state: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        mean, log_std = self.net(state).chunk(2, dim=-1)
        return mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX)

    def sample(self, state: torch.Tensor, generator: Optional[torch.Generator] = None) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Reparameterized sample and its log-density.

        Returns:
            (action in (-1, 1) [..., A], log_prob [...])
        """
        mean, log_std = self(state)
        std = log_std.exp()
        noise = torch.randn(mean.shape, generator=generator, dtype=mean.dtype, device=mean.device)
        pre_tanh = mean + std * noise
        action = torch.tanh(pre_tanh)

        gaussian = -0.5 * noise.pow(2) - log_std - 0.5 * math.log(2 * math.pi)
        # log(1 - tanh(u)^2) written in a numerically stable form
        squash = 2.0 * (math.log(2.0) - pre_tanh - F.softplus(-2.0 * pre_tanh))
        log_prob = (gaussian - squash).sum(-1)
        return action, log_prob

    @torch.no_grad()
    def act(self, state: torch.Tensor) -> torch.Tensor:
        """Deterministic action: the squashed mean"""
        mean, _ = self(state)
        return torch.tanh(mean)


@register()
class Critic(nn.Module):
    """Q(s, a) -> scalar"""

    def __init__(self,
                 state_dim: int,
                 action_dim: int,
                 hidden_dims: Sequence[int] = (256, 256),
                 seed: Optional[int] = None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.net = DenseNet([state_dim + action_dim, *hidden_dims, 1], activation='relu', seed=seed, dtype=dtype)

    def forward(self, state: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        return self.net(torch.cat([state, action], dim=-1)).squeeze(-1)


@register()
class SACAgent(nn.Module):
    """Policy, twin critics, twin targets, entropy temperature and the step clock t"""

    def __init__(self,
                 state_dim: int,
                 action_dim: int,
                 hidden_dims: Sequence[int] = (256, 256),
                 init_temperature: float = 1.0,
                 tau: float = 0.005,
                 seed: int = 0,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        if init_temperature <= 0:
            raise ValueError(f'init_temperature must be > 0, got {init_temperature}')

        self.state_dim = state_dim
        self.action_dim = action_dim
        self.target_entropy = -float(action_dim)

        self.policy = GaussianPolicy(state_dim, action_dim, hidden_dims, seed=seed, dtype=dtype)
        self.q1 = Critic(state_dim, action_dim, hidden_dims, seed=seed + 1, dtype=dtype)
        self.q2 = Critic(state_dim, action_dim, hidden_dims, seed=seed + 2, dtype=dtype)
        self.q1_target = TargetNetwork(self.q1, tau=tau)
        self.q2_target = TargetNetwork(self.q2, tau=tau)

        self.log_alpha = nn.Parameter(torch.tensor(math.log(init_temperature), dtype=dtype))
        self.register_buffer('step', torch.tensor(1, dtype=torch.int64))

    @property
    def alpha(self) -> torch.Tensor:
        return self.log_alpha.exp()

    @property
    def t(self) -> int:
        return int(self.step.item())

    def tick(self):
        self.step.add_(1)

    def critics(self) -> Tuple[Critic, Critic]:
        return self.q1, self.q2

    def targets(self) -> Tuple[TargetNetwork, TargetNetwork]:
        return self.q1_target, self.q2_target

    def min_q(self, state: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        return torch.min(self.q1(state, action), self.q2(state, action))

    def min_target_q(self, state: torch.Tensor, action: torch.Tensor) -> torch.Tensor:
        return torch.min(self.q1_target(state, action), self.q2_target(state, action))

    def update_targets(self):
        self.q1_target.update(self.q1)
        self.q2_target.update(self.q2)

    def is_finite(self) -> bool:
        return all(torch.isfinite(p).all().item() for p in self.parameters())
