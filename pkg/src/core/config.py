"""
Run configuration
Dataclass defaults plus YAML loading with includes and CLI overrides
"""

import os
import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .workspace import create

__all__ = ['RunConfig', 'YAMLConfig', 'load_config', 'merge_dict', 'parse_cli']

INCLUDE_KEY = '__include__'

# Component sections kept as raw dicts and built through the registry
SECTION_KEYS = ('env',)


@dataclass
class RunConfig:
    """Resolved configuration of one run"""

    # Run
    env_id: str = 'pointmass'
    seed: int = 0
    output_dir: str = './outputs'
    use_tensorboard: bool = False
    print_freq: int = 100
    dataset_path: Optional[str] = None
    vqvae_path: Optional[str] = None

    # Dataset generation
    dataset_policy: str = 'medium'
    dataset_episodes: int = 200
    dataset_steps: int = 10000

    # Multi-codebook VQVAE
    latent_dim: int = 64
    num_codebooks: int = 4
    num_vectors: int = 256
    commitment: float = 0.25
    decay: float = 0.99
    lr: float = 0.001
    hidden_dims: Tuple[int, ...] = (256, 256)
    use_fcm: bool = True
    vq_epochs: int = 20
    vq_steps_per_epoch: int = 100
    vq_batch_size: int = 256
    vq_refine_steps: int = 1000

    # Counting Bloom Filter
    num_counters: int = 1 << 20
    num_hashes: int = 4
    hash_seed: int = 0x5EED_CBF
    label_source: str = 'direct'

    # Penalty
    beta: float = 0.2
    n_floor: float = 1.0
    use_penalty: bool = True
    reward_offset: float = 0.0

    # Agent
    epochs: int = 1000
    steps_per_epoch: int = 1000
    batch_size: int = 256
    discount: float = 0.99
    tau: float = 0.005
    init_temperature: float = 1.0
    eval_episodes: int = 10

    # Tabular Grid World learner
    tabular_lr: float = 0.5
    tabular_steps: int = 2000
    q_init: float = 1.0

    # Evaluation experiments
    num_queries: int = 100_000
    histogram_bins: int = 50

    def __post_init__(self):
        """Normalize YAML lists and check invariants"""
        self.validate()

    def validate(self):
        if isinstance(self.hidden_dims, list):
            self.hidden_dims = tuple(self.hidden_dims)
        if self.num_codebooks < 1 or self.latent_dim % self.num_codebooks != 0:
            raise ValueError(
                f'latent_dim={self.latent_dim} must be divisible by num_codebooks={self.num_codebooks}')
        if self.num_vectors < 1:
            raise ValueError(f'num_vectors must be positive, got {self.num_vectors}')
        if self.beta <= 0:
            raise ValueError(f'beta must be > 0, got {self.beta}')
        if self.n_floor < 1:
            raise ValueError(f'n_floor must be >= 1, got {self.n_floor}')
        if self.reward_offset < 0:
            raise ValueError(f'reward_offset must be >= 0, got {self.reward_offset}')
        if self.vq_refine_steps < 0:
            raise ValueError(f'vq_refine_steps must be >= 0, got {self.vq_refine_steps}')
        if not 0.0 < self.decay < 1.0:
            raise ValueError(f'decay must lie in (0, 1), got {self.decay}')
        if self.num_hashes < 1:
            raise ValueError(f'num_hashes must be >= 1, got {self.num_hashes}')
        if self.label_source not in ('direct', 'vqvae'):
            raise ValueError(f'label_source must be "direct" or "vqvae", got {self.label_source}')

    @property
    def is_discrete(self) -> bool:
        return self.env_id.startswith('gridworld')

    def resolve_dataset_path(self) -> Path:
        return Path(self.dataset_path) if self.dataset_path else Path(self.output_dir) / 'dataset.bin'

    def resolve_vqvae_path(self) -> Path:
        return Path(self.vqvae_path) if self.vqvae_path else Path(self.output_dir) / 'vqvae.ckpt'

    def to_dict(self) -> Dict[str, Any]:
        cfg = {}
        for f in dataclasses.fields(RunConfig):
            value = getattr(self, f.name)
            cfg[f.name] = list(value) if isinstance(value, tuple) else value
        return cfg

    def dump(self, path) -> Path:
        """Write the fully-resolved config next to the run outputs"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=True)
        return path

    def replace(self, **changes) -> 'RunConfig':
        new = copy.deepcopy(self)
        for key, value in changes.items():
            if not hasattr(new, key):
                raise ValueError(f'Unknown config key: {key}')
            setattr(new, key, value)
        new.validate()
        return new


class YAMLConfig(RunConfig):
    """YAML-based run configuration"""

    def __init__(self, cfg_path: Optional[str] = None, **kwargs):
        cfg = load_config(cfg_path) if cfg_path else {}
        cfg = merge_dict(cfg, kwargs)

        self.yaml_cfg = copy.deepcopy(cfg)

        super().__init__()

        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = [k for k in cfg if k not in known and k not in SECTION_KEYS]
        if unknown:
            raise ValueError(f'Unknown config keys: {sorted(unknown)}')

        for key, value in cfg.items():
            if key in known:
                setattr(self, key, value)

        self.validate()

    def make_env(self):
        """Build a fresh environment from the ``env`` section"""
        if 'env' not in self.yaml_cfg:
            raise ValueError('Config has no "env" section')
        return create(self.yaml_cfg['env'])

    def to_dict(self) -> Dict[str, Any]:
        cfg = super().to_dict()
        for key in SECTION_KEYS:
            if key in self.yaml_cfg:
                cfg[key] = copy.deepcopy(self.yaml_cfg[key])
        return cfg

    def replace(self, **changes) -> 'YAMLConfig':
        new = super().replace(**changes)
        new.yaml_cfg = merge_dict(copy.deepcopy(self.yaml_cfg), changes)
        return new


def load_config(file_path: str, cfg: dict = None) -> dict:
    """Load configuration from YAML file with include support"""
    if cfg is None:
        cfg = {}

    _, ext = os.path.splitext(file_path)
    assert ext in ['.yml', '.yaml'], "Only support YAML files"

    if not os.path.exists(file_path):
        raise FileNotFoundError(f'Config not found: {file_path}')

    with open(file_path, 'r', encoding='utf-8') as f:
        file_cfg = yaml.safe_load(f)
        if file_cfg is None:
            return {}

    if INCLUDE_KEY in file_cfg:
        base_yamls = list(file_cfg.pop(INCLUDE_KEY))
        for base_yaml in base_yamls:
            if base_yaml.startswith('~'):
                base_yaml = os.path.expanduser(base_yaml)

            if not base_yaml.startswith('/'):
                base_yaml = os.path.join(os.path.dirname(file_path), base_yaml)

            base_cfg = load_config(base_yaml, cfg)
            merge_dict(cfg, base_cfg)

    return merge_dict(cfg, file_cfg)


def merge_dict(dct: dict, another_dct: dict, inplace: bool = True) -> dict:
    """Merge another_dct into dct"""
    def _merge(dct, another):
        for k in another:
            if (k in dct and isinstance(dct[k], dict) and isinstance(another[k], dict)):
                _merge(dct[k], another[k])
            else:
                dct[k] = another[k]
        return dct

    if not inplace:
        dct = copy.deepcopy(dct)

    return _merge(dct, another_dct)


def parse_cli(nargs: List[str]) -> Dict:
    """Parse ``key=value`` overrides, dotted keys address nested sections"""
    def dictify(s: str, v: Any) -> Dict:
        if '.' not in s:
            return {s: v}
        key, rest = s.split('.', 1)
        return {key: dictify(rest, v)}

    cfg = {}
    if nargs is None or len(nargs) == 0:
        return cfg

    for s in nargs:
        s = s.strip()
        if '=' not in s:
            raise ValueError(f'Override must look like key=value, got "{s}"')
        k, v = s.split('=', 1)
        d = dictify(k, yaml.safe_load(v))
        cfg = merge_dict(cfg, d)

    return cfg
