"""Configuration and component registry"""

from .config import RunConfig, YAMLConfig, load_config, merge_dict, parse_cli
from .workspace import register, create, GLOBAL_CONFIG

__all__ = [
    'RunConfig', 'YAMLConfig', 'load_config', 'merge_dict', 'parse_cli',
    'register', 'create', 'GLOBAL_CONFIG'
]
