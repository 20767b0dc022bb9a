"""Unit tests for configuration loading and the component registry."""

from pathlib import Path

import pytest
import yaml

from src.core import GLOBAL_CONFIG, create, register
from src.core.config import RunConfig, YAMLConfig, load_config, merge_dict, parse_cli
from src.envs.gridworld import GridWorld
from src.envs.pointmass import PointMass

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'


class TestLoadConfig:
    """Test YAML loading with includes."""

    def test_include_and_override(self, tmp_path):
        """Included values load first and the including file wins."""
        (tmp_path / 'base.yml').write_text('beta: 0.2\nnum_codebooks: 4\nenv: {type: PointMass, dt: 0.1}\n')
        (tmp_path / 'run.yml').write_text("__include__: ['base.yml']\nbeta: 0.5\nenv: {horizon: 20}\n")
        cfg = load_config(str(tmp_path / 'run.yml'))
        assert cfg['beta'] == 0.5
        assert cfg['num_codebooks'] == 4
        assert cfg['env'] == {'type': 'PointMass', 'dt': 0.1, 'horizon': 20}
        assert '__include__' not in cfg

    def test_missing_and_empty(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(str(tmp_path / 'none.yml'))
        (tmp_path / 'empty.yml').write_text('')
        assert load_config(str(tmp_path / 'empty.yml')) == {}

    def test_merge_dict(self):
        base = {'a': 1, 'env': {'type': 'x', 'size': 8}}
        merged = merge_dict(base, {'env': {'size': 16}, 'b': 2}, inplace=False)
        assert merged == {'a': 1, 'b': 2, 'env': {'type': 'x', 'size': 16}}
        assert base['env']['size'] == 8

    def test_parse_cli(self):
        """key=value pairs parse as YAML scalars; dotted keys nest."""
        assert parse_cli(['beta=0.5', 'use_fcm=false', 'env.size=16', 'hidden_dims=[8, 8]']) == {
            'beta': 0.5, 'use_fcm': False, 'env': {'size': 16}, 'hidden_dims': [8, 8]}
        assert parse_cli([]) == {}
        with pytest.raises(ValueError):
            parse_cli(['beta'])


class TestYAMLConfig:
    """Test the resolved run configuration."""

    def test_shipped_configs_load(self):
        """Every shipped config resolves and validates."""
        for path in sorted(CONFIG_DIR.glob('*.yml')):
            cfg = YAMLConfig(str(path))
            assert cfg.latent_dim % cfg.num_codebooks == 0, path.name

    def test_defaults(self):
        """Shared defaults match the documented hyperparameters."""
        cfg = YAMLConfig(str(CONFIG_DIR / 'base.yml'))
        assert (cfg.latent_dim, cfg.num_codebooks, cfg.num_vectors) == (64, 4, 256)
        assert (cfg.commitment, cfg.decay, cfg.lr, cfg.beta) == (0.25, 0.99, 0.001, 0.2)
        assert cfg.hidden_dims == (256, 256)
        assert (cfg.num_counters, cfg.num_hashes) == (1 << 20, 4)

    def test_kwargs_override_file(self):
        cfg = YAMLConfig(str(CONFIG_DIR / 'pointmass_medium.yml'), beta=0.4, env={'horizon': 10})
        assert cfg.beta == 0.4
        assert cfg.reward_offset == 2.2
        env = cfg.make_env()
        assert isinstance(env, PointMass)
        assert env.horizon == 10

    def test_make_env(self):
        assert isinstance(YAMLConfig(str(CONFIG_DIR / 'gridworld_trap.yml')).make_env(), GridWorld)
        with pytest.raises(ValueError):
            YAMLConfig(str(CONFIG_DIR / 'synthetic_mixture.yml')).make_env()

    def test_invalid(self):
        """Unknown keys and broken invariants are rejected."""
        with pytest.raises(ValueError):
            YAMLConfig(None, learning_rate=0.1)
        with pytest.raises(ValueError):
            YAMLConfig(None, latent_dim=10, num_codebooks=4)
        with pytest.raises(ValueError):
            YAMLConfig(None, beta=0.0)
        with pytest.raises(ValueError):
            YAMLConfig(None, decay=1.0)
        with pytest.raises(ValueError):
            YAMLConfig(None, label_source='hash')
        with pytest.raises(ValueError):
            YAMLConfig(None, reward_offset=-1.0)

    def test_replace(self):
        cfg = YAMLConfig(str(CONFIG_DIR / 'gridworld_8x8.yml'))
        changed = cfg.replace(num_codebooks=1, output_dir='elsewhere')
        assert changed.num_codebooks == 1 and cfg.num_codebooks == 4
        assert changed.make_env().size == 8
        with pytest.raises(ValueError):
            cfg.replace(gamma=0.9)
        with pytest.raises(ValueError):
            cfg.replace(num_codebooks=3)

    def test_dump(self, tmp_path):
        """The dumped config reloads to the same values."""
        cfg = YAMLConfig(str(CONFIG_DIR / 'gridworld_trap.yml'), seed=7)
        dumped = yaml.safe_load(cfg.dump(tmp_path / 'config.yml').read_text())
        assert dumped['seed'] == 7
        assert dumped['env']['type'] == 'make_trap_world'
        assert YAMLConfig(str(tmp_path / 'config.yml')).to_dict() == cfg.to_dict()

    def test_paths(self):
        cfg = RunConfig(output_dir='runs/a')
        assert cfg.resolve_dataset_path() == Path('runs/a/dataset.bin')
        assert cfg.replace(vqvae_path='x.ckpt').resolve_vqvae_path() == Path('x.ckpt')
        assert cfg.replace(env_id='gridworld_16x16').is_discrete


class TestRegistry:
    """Test registration and config-driven construction."""

    def test_create_from_section(self):
        world = create({'type': 'GridWorld', 'size': 4, 'start': [0, 0]})
        assert world.size == 4 and world.start == (0, 0)
        assert create('PointMass', horizon=7).horizon == 7

    def test_register_and_errors(self):
        registry = {}

        @register(registry)
        class Widget:
            def __init__(self, size: int = 1):
                self.size = size

        assert create({'type': 'Widget', 'size': 3}, registry).size == 3
        with pytest.raises(AssertionError):
            register(registry)(Widget)
        with pytest.raises(ValueError):
            create({'size': 3}, registry)
        with pytest.raises(ValueError):
            create('Gadget', registry)
        assert 'Widget' not in GLOBAL_CONFIG
