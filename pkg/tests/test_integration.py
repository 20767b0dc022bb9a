"""Integration tests for the command-line pipeline."""

import csv
from pathlib import Path

import numpy as np
import pytest
import yaml

from src.core.config import YAMLConfig
from src.data.dataset import OfflineDataset
from src.solver.commands import (cmd_gen_data, cmd_ood_eval, cmd_pretrain_vqvae, cmd_train_agent,
                                 cmd_usage_report, main)
from tests.conftest import slow

CONFIG_DIR = Path(__file__).resolve().parent.parent / 'configs'

TINY_VQVAE = ['latent_dim=8', 'num_codebooks=4', 'num_vectors=16', 'hidden_dims=[16]', 'vq_epochs=1',
              'vq_steps_per_epoch=3', 'vq_batch_size=16', 'vq_refine_steps=5', 'num_counters=4096',
              'print_freq=1000']
TINY_AGENT = ['epochs=1', 'steps_per_epoch=3', 'batch_size=8', 'eval_episodes=1', 'env.horizon=10']
TINY_POINTMASS = ['dataset_episodes=4', 'num_queries=50', 'histogram_bins=5'] + TINY_VQVAE + TINY_AGENT


def _config(name: str) -> str:
    return str(CONFIG_DIR / name)


def _rows(path: Path):
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))


def _cli(command: str, config: str, output_dir: Path, updates=(), *extra) -> int:
    return main([command, '-c', _config(config), '--output-dir', str(output_dir), '-u', *updates, 'seed=0', *extra])


class TestGridWorldCommands:
    """gen-data, count-eval and tabular train-agent on Grid World."""

    def test_gen_data(self, tmp_path):
        assert _cli('gen-data', 'gridworld_8x8_obstacles.yml', tmp_path, ['dataset_steps=500']) == 0
        dataset = OfflineDataset.load(tmp_path / 'dataset.bin')
        assert len(dataset) == 500
        assert dataset.env_id == 'gridworld_8x8_obstacles'
        counts = _rows(tmp_path / 'exact_counts.csv')
        assert sum(int(r['count']) for r in counts) == 500
        assert (tmp_path / 'dataset.csv').exists()
        assert yaml.safe_load((tmp_path / 'config.yml').read_text())['dataset_steps'] == 500
        assert (tmp_path / 'gen_data.log').exists()

    def test_count_eval(self, tmp_path):
        """Filter counts are exact or above, never below, with runtime kept out of the CSV."""
        code = _cli('count-eval', 'gridworld_8x8.yml', tmp_path, ['dataset_steps=2000'],
                    '--maps', 'gridworld_8x8', 'gridworld_16x16_obstacles')
        assert code == 0

        rows = _rows(tmp_path / 'count_report.csv')
        assert [r['map'] for r in rows] == ['gridworld_8x8', 'gridworld_16x16_obstacles']
        for row in rows:
            assert int(row['underestimates']) == 0
            assert int(row['total_exact']) == 2000
            assert float(row['exact_match_rate']) >= 0.999
        assert 'seconds' not in rows[0]

        runtime = yaml.safe_load((tmp_path / 'count_runtime.yml').read_text())
        assert set(runtime) == {'gridworld_8x8', 'gridworld_16x16_obstacles'}
        assert (tmp_path / 'gridworld_8x8' / 'heatmap_gt_up.pgm').exists()

    def test_trap_world_tabular(self, tmp_path):
        updates = ['dataset_episodes=20', 'tabular_steps=50', 'batch_size=32']
        assert _cli('gen-data', 'gridworld_trap.yml', tmp_path, updates) == 0
        assert _cli('train-agent', 'gridworld_trap.yml', tmp_path, updates) == 0
        assert np.load(tmp_path / 'q_table.npy').shape == (8, 8, 4)
        summary = _rows(tmp_path / 'summary.csv')
        assert len(summary) == 1 and summary[0]['num_codebooks'] == '3'
        assert (tmp_path / 'tabular_metrics.csv').exists()


class TestPointMassCommands:
    """The full continuous pipeline on a tiny configuration."""

    def test_pipeline(self, tmp_path):
        for command in ('gen-data', 'pretrain-vqvae', 'train-agent', 'ood-eval', 'usage-report'):
            assert _cli(command, 'pointmass_medium.yml', tmp_path, TINY_POINTMASS) == 0, command

        assert len(_rows(tmp_path / 'vqvae_loss.csv')) == 1
        assert (tmp_path / 'vqvae.ckpt').read_bytes()[:4] == b'VQVA'
        assert (tmp_path / 'agent.ckpt').read_bytes()[:4] == b'SACA'
        assert len(_rows(tmp_path / 'metrics.csv')) == 1

        summary = _rows(tmp_path / 'summary.csv')
        assert summary[0]['num_codebooks'] == '4'

        histogram = _rows(tmp_path / 'ood_histogram.csv')
        assert len(histogram) == 5
        for condition in ('clean', 'noise_0.25', 'noise_0.5', 'random'):
            assert sum(int(r[condition]) for r in histogram) == 50

        usage = _rows(tmp_path / 'usage_report.csv')
        assert [r['codebook'] for r in usage] == ['0', '1', '2', '3', 'all']
        assert 0.0 < float(usage[-1]['use_rate']) <= 1.0

    def test_train_agent_pretrains_when_missing(self, tmp_path):
        """train-agent pretrains a VQVAE first when none exists."""
        assert _cli('train-agent', 'pointmass_medium.yml', tmp_path, TINY_POINTMASS) == 0
        assert (tmp_path / 'dataset.bin').exists()
        assert (tmp_path / 'vqvae.ckpt').exists()

    def test_codebook_sweep(self, tmp_path):
        code = _cli('train-agent', 'pointmass_medium.yml', tmp_path, TINY_POINTMASS, '--sweep-codebooks', '1', '2')
        assert code == 0
        assert (tmp_path / 'H1' / 'vqvae.ckpt').exists() and (tmp_path / 'H2' / 'agent.ckpt').exists()
        assert [r['num_codebooks'] for r in _rows(tmp_path / 'summary.csv')] == ['1', '2']

    def test_ablation_flags(self, tmp_path):
        code = _cli('train-agent', 'pointmass_medium.yml', tmp_path, TINY_POINTMASS, '--no-fcm', '--no-penalty')
        assert code == 0
        config = yaml.safe_load((tmp_path / 'config.yml').read_text())
        assert config['use_fcm'] is False and config['use_penalty'] is False
        assert all(float(r['mean_penalty']) == 0.0 for r in _rows(tmp_path / 'metrics.csv'))


class TestReproducibility:
    """Identical seeds give identical artifacts."""

    def test_byte_identical_runs(self, tmp_path):
        for run in ('a', 'b'):
            for command in ('gen-data', 'pretrain-vqvae', 'usage-report'):
                assert _cli(command, 'synthetic_mixture.yml', tmp_path / run,
                            ['dataset_steps=300', 'num_queries=100'] + TINY_VQVAE) == 0

        for name in ('dataset.bin', 'dataset.csv', 'vqvae.ckpt', 'vqvae_loss.csv', 'usage_report.csv'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes(), name

    def test_byte_identical_agent_and_eval_outputs(self, tmp_path):
        """train-agent, ood-eval and count-eval write the same CSVs twice."""
        for run in ('a', 'b'):
            for command in ('gen-data', 'train-agent', 'ood-eval'):
                assert _cli(command, 'pointmass_medium.yml', tmp_path / run / 'pointmass', TINY_POINTMASS) == 0
            assert _cli('count-eval', 'gridworld_8x8.yml', tmp_path / run / 'grid', ['dataset_steps=500'],
                        '--maps', 'gridworld_8x8') == 0

        for name in ('pointmass/metrics.csv', 'pointmass/summary.csv', 'pointmass/agent.ckpt',
                     'pointmass/ood_histogram.csv', 'pointmass/ood_summary.csv', 'grid/count_report.csv'):
            assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes(), name

    def test_seed_list(self, tmp_path):
        assert main(['gen-data', '-c', _config('gridworld_8x8.yml'), '--output-dir', str(tmp_path),
                     '-u', 'dataset_steps=200', '--seeds', '1', '2']) == 0
        one = (tmp_path / 'seed1' / 'dataset.bin').read_bytes()
        two = (tmp_path / 'seed2' / 'dataset.bin').read_bytes()
        assert one != two


class TestFailures:
    """Bad inputs end with exit code 1."""

    def test_missing_config(self, tmp_path):
        assert main(['gen-data', '-c', str(tmp_path / 'none.yml'), '--output-dir', str(tmp_path)]) == 1

    def test_invalid_override(self, tmp_path):
        assert _cli('gen-data', 'pointmass_medium.yml', tmp_path, ['latent_dim=10', 'num_codebooks=4']) == 1
        assert _cli('gen-data', 'pointmass_medium.yml', tmp_path, ['no_such_key=1']) == 1

    def test_missing_checkpoint(self, tmp_path):
        assert _cli('ood-eval', 'synthetic_mixture.yml', tmp_path, ['dataset_steps=100']) == 1


@slow
class TestExperiments:
    """Experiment-scale acceptance checks, run with RUN_SLOW=1."""

    def test_fcm_use_rate(self, tmp_path):
        """Over 100k queries FCM keeps at least 95% of the vectors in use and beats gradient-trained codebooks."""
        rates = {}
        for use_fcm in (True, False):
            cfg = YAMLConfig(_config('synthetic_mixture.yml'), output_dir=str(tmp_path / str(use_fcm)),
                             use_fcm=use_fcm, num_queries=100_000)
            cmd_gen_data(cfg)
            cmd_pretrain_vqvae(cfg)
            report = cmd_usage_report(cfg)
            assert report['queries'] == 100_000
            rates[use_fcm] = report['use_rate']
        assert rates[True] >= 0.95
        assert rates[True] > rates[False]

    def test_ood_ordering(self, tmp_path):
        """Over 100k queries the median loss grows from clean to noisy to random, clean under 10% of random."""
        cfg = YAMLConfig(_config('synthetic_mixture.yml'), output_dir=str(tmp_path), num_queries=100_000)
        cmd_gen_data(cfg)
        cmd_pretrain_vqvae(cfg)
        medians = cmd_ood_eval(cfg)
        assert medians['clean'] < medians['noise_0.25'] < medians['noise_0.5'] < medians['random']
        assert medians['clean'] < 0.1 * medians['random']

        histogram = _rows(tmp_path / 'ood_histogram.csv')
        for condition in ('clean', 'noise_0.25', 'noise_0.5', 'random'):
            assert sum(int(r[condition]) for r in histogram) == 100_000

    def test_pointmass_scores(self, tmp_path):
        """Median over five seeds: four codebooks beat one, the penalized agent reaches 90% of the best trajectory."""
        base = YAMLConfig(_config('pointmass_medium.yml'), output_dir=str(tmp_path))
        returns = {1: [], 4: []}
        scores = []
        for seed in range(5):
            cfg = base.replace(seed=seed, output_dir=str(tmp_path / f'seed{seed}'))
            cmd_gen_data(cfg)
            for row in cmd_train_agent(cfg, sweep=[1, 4]):
                returns[row['num_codebooks']].append(row['final_return'])
                if row['num_codebooks'] == 4:
                    scores.append(row['normalized_score'])
        assert np.median(returns[4]) > np.median(returns[1])
        assert np.median(scores) >= 0.9
