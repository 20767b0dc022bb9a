"""
Optimizers and target networks
Adam construction from the registry, a single optimization step, and soft-updated copies
"""

import copy
from typing import Dict, Iterable, Optional, Union

import torch
import torch.nn as nn

from ..core.workspace import create

__all__ = ['build_optimizer', 'opt_step', 'soft_update', 'TargetNetwork']


def build_optimizer(params: Union[Iterable[torch.Tensor], Iterable[dict]],
                    lr: float = 1e-3,
                    name: str = 'Adam',
                    **kwargs) -> torch.optim.Optimizer:
    """Create a registered torch optimizer (Adam by default) over ``params``"""
    params = [p for p in params if not isinstance(p, torch.Tensor) or p.requires_grad]
    if not params:
        raise ValueError('Optimizer got no trainable parameters')
    return create(name, params=params, lr=lr, **kwargs)


def opt_step(optimizer: torch.optim.Optimizer,
             loss: Optional[torch.Tensor] = None,
             grads: Optional[Dict[torch.Tensor, torch.Tensor]] = None) -> torch.optim.Optimizer:
    """
    One optimizer step, either from a scalar ``loss`` (backpropagated here) or
    from precomputed gradients keyed by parameter.
    """
    if (loss is None) == (grads is None):
        raise ValueError('opt_step needs exactly one of loss or grads')

    optimizer.zero_grad(set_to_none=True)
    if loss is not None:
        loss.backward()
    else:
        for param, grad in grads.items():
            if grad.shape != param.shape:
                raise ValueError(f'Gradient shape {tuple(grad.shape)} != parameter shape {tuple(param.shape)}')
            param.grad = grad.detach().clone()
    optimizer.step()
    return optimizer


@torch.no_grad()
def soft_update(source: nn.Module, target: nn.Module, tau: float):
    """target <- tau * source + (1 - tau) * target, parameter by parameter"""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f'tau must lie in [0, 1], got {tau}')

    for target_param, source_param in zip(target.parameters(), source.parameters()):
        if target_param.shape != source_param.shape:
            raise ValueError(f'Shape mismatch in soft update: {tuple(target_param.shape)} vs {tuple(source_param.shape)}')
        target_param.mul_(1.0 - tau).add_(source_param, alpha=tau)


class TargetNetwork(nn.Module):
    """Frozen copy of a network tracked by soft (Polyak) updates"""

    def __init__(self, model: nn.Module, tau: float = 0.005):
        super().__init__()
        self.tau = tau
        self.updates = 0

        self.module = copy.deepcopy(model)
        self.module.eval()
        for param in self.module.parameters():
            param.requires_grad_(False)

    def forward(self, *args, **kwargs):
        return self.module(*args, **kwargs)

    def update(self, model: nn.Module):
        soft_update(model, self.module, self.tau)
        self.updates += 1

    def extra_repr(self) -> str:
        return f'tau={self.tau}'
