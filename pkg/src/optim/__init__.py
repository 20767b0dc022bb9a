"""Optimizers and soft-updated target networks"""

from .optimizer import build_optimizer, opt_step, soft_update, TargetNetwork

__all__ = ['build_optimizer', 'opt_step', 'soft_update', 'TargetNetwork']
