"""
Component registry
Registration and config-driven construction of environments, networks and trainers
"""

import inspect
import copy
from typing import Any, Dict, Union

__all__ = ['register', 'create', 'GLOBAL_CONFIG']

# Global component registry
GLOBAL_CONFIG: Dict[str, Any] = {}


def register(dct: Dict[str, Any] = GLOBAL_CONFIG, name: str = None, force: bool = False):
    """
    Register a class or function under its name (or ``name``).

    Args:
        dct: Target registry
        name: Custom name for registration (uses class/function name if None)
        force: Whether to overwrite an existing registration

    Returns:
        Decorator function
    """
    def decorator(cls_or_func):
        register_name = cls_or_func.__name__ if name is None else name

        if not force:
            assert register_name not in dct, \
                f'{register_name} has already been registered'

        if not (inspect.isclass(cls_or_func) or inspect.isfunction(cls_or_func)):
            raise ValueError(f'Unsupported registration type: {type(cls_or_func)}')

        dct[register_name] = cls_or_func
        return cls_or_func

    return decorator


def create(type_or_cfg: Union[str, type, Dict[str, Any]], registry: Dict[str, Any] = None, **kwargs):
    """
    Create an instance from a registered name or a ``{'type': name, ...}`` section.

    Args:
        type_or_cfg: Registered name, class, or config section carrying ``type``
        registry: Registry to look the name up in
        **kwargs: Extra keyword arguments, they take precedence over the section

    Returns:
        Created instance
    """
    if registry is None:
        registry = GLOBAL_CONFIG

    if isinstance(type_or_cfg, dict):
        cfg = copy.deepcopy(type_or_cfg)
        if 'type' not in cfg:
            raise ValueError('Missing "type" in component config')
        name = str(cfg.pop('type'))
    elif isinstance(type_or_cfg, type):
        name, cfg = type_or_cfg.__name__, {}
    elif isinstance(type_or_cfg, str):
        name, cfg = type_or_cfg, {}
    else:
        raise ValueError(f'create() expects a name, class or dict, got {type(type_or_cfg)}')

    if name not in registry:
        raise ValueError(f'Module {name} is not registered')

    cfg.update(kwargs)
    return registry[name](**cfg)


def register_torch_optimizers():
    """Register the torch optimizers the trainers can be configured with"""
    import torch.optim as optim

    for optimizer_cls in (optim.Adam, optim.AdamW, optim.SGD):
        GLOBAL_CONFIG.setdefault(optimizer_cls.__name__, optimizer_cls)


register_torch_optimizers()
