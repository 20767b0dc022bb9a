"""
Command entry points: gen-data, pretrain-vqvae, train-agent, count-eval, ood-eval, usage-report

Each command takes a resolved config, writes its artifacts and the resolved
config into ``output_dir`` and returns a small summary. ``main`` wires them to
argparse subcommands and turns any failure into a logged diagnostic and exit
code 1.
"""

import argparse
import copy
import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import yaml

from ..core.config import RunConfig, YAMLConfig, parse_cli
from ..counting.bloom import CountingBloomFilter
from ..counting.pseudo_count import GridLabeler, PseudoCounter, VQVAELabeler
from ..data.dataset import OfflineDataset
from ..data.synthetic import make_mixture_dataset
from ..envs.gridworld import (MAPS, GridWorld, exact_count_oracle, generate_grid_dataset, generate_trap_dataset,
                              make_map, make_trap_world)
from ..envs.pointmass import PointMass, generate_pointmass_dataset, normalized_score
from ..misc.checkpoint import load_vqvae, save_vqvae
from ..misc.logger import MetricWriter, setup_logging
from ..misc.seeding import make_generator, make_rng, set_random_seed, substream_seed
from ..nn.agent import SACAgent
from ..nn.vqvae import MultiCodebookVQVAE
from .agent_trainer import AntiExplorationTrainer
from .evaluator import (OOD_CONDITIONS, CountEvaluator, UseRateEvaluator, loss_histogram, ood_losses,
                        perturbation_sets, write_count_table)
from .tabular import TabularQLearner
from .vqvae_trainer import VQVAETrainer

__all__ = [
    'build_env', 'generate_dataset', 'load_dataset', 'build_counter',
    'cmd_gen_data', 'cmd_pretrain_vqvae', 'cmd_train_agent', 'cmd_count_eval', 'cmd_ood_eval',
    'cmd_usage_report', 'COMMANDS', 'main',
]

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ('num_codebooks', 'seed', 'final_return', 'normalized_score')
COUNT_REPORT_COLUMNS = ('map', 'visited_pairs', 'exact_match_rate', 'overcount_rate',
                        'unvisited_false_positives', 'underestimates', 'total_exact', 'total_estimated_visited')
USAGE_COLUMNS = ('codebook', 'used', 'use_rate', 'selections', 'lifetime_selections')


def _seed32(root: int, name: str) -> int:
    return substream_seed(root, name) & 0x7FFF_FFFF


def build_env(cfg: RunConfig):
    """Environment of a run: the ``env`` section when present, else derived from ``env_id``"""
    sections = getattr(cfg, 'yaml_cfg', {})
    if 'env' in sections:
        return cfg.make_env()
    if cfg.env_id in MAPS:
        return make_map(cfg.env_id)
    if cfg.env_id == 'gridworld_trap':
        return make_trap_world()
    if cfg.env_id == 'pointmass':
        return PointMass()
    return None


def generate_dataset(cfg: RunConfig, env=None) -> Tuple[OfflineDataset, Optional[np.ndarray]]:
    """
    Offline data of the configured environment from the ``dataset`` substream.

    Returns:
        (dataset, exact counts [size, size, 4] for Grid World, else None)
    """
    rng = make_rng(cfg.seed, 'dataset')
    if cfg.env_id == 'synthetic_mixture':
        return make_mixture_dataset(num_samples=cfg.dataset_steps, seed=cfg.seed, rng=rng), None

    env = build_env(cfg) if env is None else env
    if isinstance(env, PointMass):
        dataset = generate_pointmass_dataset(cfg.dataset_policy, cfg.dataset_episodes, cfg.seed, env=env, rng=rng)
        return dataset, None
    if isinstance(env, GridWorld):
        if env.goal is not None or env.traps:
            dataset = generate_trap_dataset(copy.copy(env), episodes=cfg.dataset_episodes, seed=cfg.seed, rng=rng)
            return dataset, exact_count_oracle(dataset)
        return generate_grid_dataset(env, steps=cfg.dataset_steps, seed=cfg.seed, rng=rng)
    raise ValueError(f'No dataset generator for env_id={cfg.env_id}')


def load_dataset(cfg: RunConfig) -> OfflineDataset:
    """Dataset at the configured path, generated and saved there first if missing"""
    path = cfg.resolve_dataset_path()
    if path.exists():
        return OfflineDataset.load(path)
    logger.info(f'No dataset at {path}, generating one for {cfg.env_id}')
    dataset, _ = generate_dataset(cfg)
    dataset.save(path)
    return dataset


def build_counter(cfg: RunConfig, dataset: OfflineDataset, model: Optional[MultiCodebookVQVAE] = None,
                  grid_size: Optional[int] = None) -> PseudoCounter:
    """Pseudo-counter holding every (s, a) of ``dataset``, frozen afterwards"""
    if model is not None:
        labeler = VQVAELabeler(model)
    elif grid_size is not None:
        labeler = GridLabeler(grid_size)
    else:
        raise ValueError('A pseudo-counter needs a VQVAE or a grid size')
    cbf = CountingBloomFilter(cfg.num_counters, cfg.num_hashes, seed=cfg.hash_seed)
    return PseudoCounter(labeler, cbf).populate(dataset)


def _vqvae_for(cfg: RunConfig, dataset: OfflineDataset, output_dir: Path, path: Path) -> MultiCodebookVQVAE:
    if not path.exists():
        logger.info(f'No VQVAE at {path}, pretraining H={cfg.num_codebooks}')
        _pretrain_one(cfg, dataset, output_dir, path)
    return load_vqvae(path)


def cmd_gen_data(cfg: RunConfig) -> Dict[str, Path]:
    output_dir = Path(cfg.output_dir)
    dataset, counts = generate_dataset(cfg)
    written = {
        'dataset': dataset.save(cfg.resolve_dataset_path()),
        'csv': dataset.to_csv(output_dir / 'dataset.csv'),
    }
    if counts is not None:
        written['exact_counts'] = write_count_table(output_dir / 'exact_counts.csv', counts)
    if 'best_return' in dataset.metadata:
        logger.info(f'Best trajectory return {dataset.metadata["best_return"]:.4f}')
    logger.info(f'gen-data wrote {", ".join(str(p) for p in written.values())}')
    return written


def _pretrain_one(cfg: RunConfig, dataset: OfflineDataset, output_dir: Path,
                  path: Optional[Path] = None) -> List[Dict[str, float]]:
    model = MultiCodebookVQVAE(
        dataset.state_dim, dataset.action_dim,
        latent_dim=cfg.latent_dim,
        num_codebooks=cfg.num_codebooks,
        num_vectors=cfg.num_vectors,
        hidden_dims=cfg.hidden_dims,
        decay=cfg.decay,
        seed=_seed32(cfg.seed, 'init'),
    )
    trainer = VQVAETrainer(
        model,
        lr=cfg.lr,
        commitment=cfg.commitment,
        use_fcm=cfg.use_fcm,
        batch_size=cfg.vq_batch_size,
        epochs=cfg.vq_epochs,
        steps_per_epoch=cfg.vq_steps_per_epoch,
        refine_steps=cfg.vq_refine_steps,
        output_dir=str(output_dir),
        print_freq=cfg.print_freq,
        use_tensorboard=cfg.use_tensorboard,
        show_progress=False,
    )
    history = trainer.fit(dataset, make_rng(cfg.seed, 'training'), make_generator(cfg.seed, 'training'))
    save_vqvae(path or output_dir / 'vqvae.ckpt', model)
    return history


def cmd_pretrain_vqvae(cfg: RunConfig, sweep: Optional[Sequence[int]] = None) -> Dict[int, List[Dict[str, float]]]:
    """One pretraining run, or one per codebook count into ``H<k>/`` when sweeping"""
    dataset = load_dataset(cfg)
    output_dir = Path(cfg.output_dir)
    results = {}
    for num_codebooks in (sweep or [cfg.num_codebooks]):
        run_cfg = cfg.replace(num_codebooks=int(num_codebooks))
        run_dir = output_dir / f'H{num_codebooks}' if sweep else output_dir
        path = run_dir / 'vqvae.ckpt' if sweep else cfg.resolve_vqvae_path()
        results[int(num_codebooks)] = _pretrain_one(run_cfg, dataset, run_dir, path)
    return results


def _train_tabular(cfg: RunConfig, dataset: OfflineDataset, world: GridWorld, output_dir: Path) -> Dict[str, float]:
    counter = build_counter(cfg, dataset, grid_size=world.size) if cfg.use_penalty else None
    learner = TabularQLearner(
        world, counter,
        lr=cfg.tabular_lr,
        q_init=cfg.q_init,
        beta=cfg.beta,
        n_floor=cfg.n_floor,
        use_penalty=cfg.use_penalty,
        discount=cfg.discount,
        batch_size=cfg.batch_size,
        steps=cfg.tabular_steps,
        output_dir=str(output_dir),
        print_freq=cfg.print_freq,
        use_tensorboard=cfg.use_tensorboard,
    )
    history = learner.fit(dataset, make_rng(cfg.seed, 'training'))
    np.save(output_dir / 'q_table.npy', learner.q)
    return {'num_codebooks': GridLabeler.num_codebooks, 'seed': cfg.seed,
            'final_return': history[-1]['eval_return'], 'normalized_score': float('nan')}


def _train_neural(cfg: RunConfig, dataset: OfflineDataset, env, output_dir: Path,
                  vqvae_path: Path) -> Dict[str, float]:
    model = _vqvae_for(cfg, dataset, output_dir, vqvae_path)
    counter = build_counter(cfg, dataset, model=model)
    agent = SACAgent(dataset.state_dim, dataset.action_dim,
                     hidden_dims=cfg.hidden_dims,
                     init_temperature=cfg.init_temperature,
                     tau=cfg.tau,
                     seed=_seed32(cfg.seed, 'init'))
    trainer = AntiExplorationTrainer(
        agent, counter, env,
        lr=cfg.lr,
        beta=cfg.beta,
        n_floor=cfg.n_floor,
        use_penalty=cfg.use_penalty,
        reward_offset=cfg.reward_offset,
        discount=cfg.discount,
        batch_size=cfg.batch_size,
        epochs=cfg.epochs,
        steps_per_epoch=cfg.steps_per_epoch,
        eval_episodes=cfg.eval_episodes,
        output_dir=str(output_dir),
        print_freq=cfg.print_freq,
        use_tensorboard=cfg.use_tensorboard,
        show_progress=False,
    )
    history = trainer.fit(dataset, make_rng(cfg.seed, 'training'), make_rng(cfg.seed, 'eval'),
                          make_generator(cfg.seed, 'training'))
    trainer.save()

    final = history[-1]['eval_return_mean'] if history else float('nan')
    meta = dataset.metadata
    score = float('nan')
    if 'best_return' in meta and 'random_return' in meta and meta['best_return'] > meta['random_return']:
        score = normalized_score(final, meta['random_return'], meta['best_return'])
    return {'num_codebooks': model.num_codebooks, 'seed': cfg.seed, 'final_return': final,
            'normalized_score': score}


def cmd_train_agent(cfg: RunConfig, sweep: Optional[Sequence[int]] = None) -> List[Dict[str, float]]:
    """
    Penalized offline training. Grid World runs the tabular learner, continuous
    envs the actor-critic with a VQVAE pseudo-counter; a sweep trains one agent
    per codebook count and collects final returns in ``summary.csv``.
    """
    dataset = load_dataset(cfg)
    env = build_env(cfg)
    output_dir = Path(cfg.output_dir)

    rows = []
    if isinstance(env, GridWorld):
        if sweep:
            logger.warning('Codebook sweep ignored: Grid World pairs are counted by direct labels')
        rows.append(_train_tabular(cfg, dataset, env, output_dir))
    else:
        for num_codebooks in (sweep or [cfg.num_codebooks]):
            run_cfg = cfg.replace(num_codebooks=int(num_codebooks))
            run_dir = output_dir / f'H{num_codebooks}' if sweep else output_dir
            run_dir.mkdir(parents=True, exist_ok=True)
            path = run_dir / 'vqvae.ckpt' if sweep else cfg.resolve_vqvae_path()
            rows.append(_train_neural(run_cfg, dataset, env, run_dir, path))

    with MetricWriter(output_dir / 'summary.csv', SUMMARY_COLUMNS) as writer:
        for row in rows:
            writer.write(row)
    for row in rows:
        logger.info(f'H={row["num_codebooks"]} seed={row["seed"]} final return {row["final_return"]:.4f} '
                    f'normalized {row["normalized_score"]:.4f}')
    return rows


def cmd_count_eval(cfg: RunConfig, maps: Optional[Sequence[str]] = None) -> Dict[str, Dict[str, float]]:
    """Filter counts against exact counts on uniform-random Grid World data, per map"""
    output_dir = Path(cfg.output_dir)
    maps = list(maps or MAPS)
    model = load_vqvae(cfg.resolve_vqvae_path()) if cfg.label_source == 'vqvae' else None

    reports, runtimes = {}, {}
    with MetricWriter(output_dir / 'count_report.csv', COUNT_REPORT_COLUMNS) as writer:
        for name in maps:
            start = time.perf_counter()
            world = make_map(name)
            dataset, exact = generate_grid_dataset(world, steps=cfg.dataset_steps, seed=cfg.seed,
                                                   rng=make_rng(cfg.seed, 'dataset'))
            counter = build_counter(cfg, dataset, model=model, grid_size=world.size)
            evaluator = CountEvaluator(counter, exact)
            report = evaluator.compute()
            runtimes[name] = time.perf_counter() - start

            evaluator.write_heatmaps(output_dir / name)
            writer.write({'map': name, **report})
            reports[name] = report
            logger.info(f'{name}: exact {report["exact_match_rate"]:.4%} over {report["visited_pairs"]} pairs, '
                        f'overcount {report["overcount_rate"]:.4%}, underestimates {report["underestimates"]}, '
                        f'total {report["total_exact"]}, {runtimes[name]:.2f}s')

    # Wall-clock kept out of the CSV
    with open(output_dir / 'count_runtime.yml', 'w', encoding='utf-8') as f:
        yaml.safe_dump({name: round(seconds, 4) for name, seconds in runtimes.items()}, f)
    return reports


def cmd_ood_eval(cfg: RunConfig) -> Dict[str, float]:
    """Per-sample VQVAE loss of clean, noisy and random queries; shared-bin histogram and medians"""
    output_dir = Path(cfg.output_dir)
    dataset = load_dataset(cfg)
    model = load_vqvae(cfg.resolve_vqvae_path())

    sets = perturbation_sets(dataset, cfg.num_queries, make_rng(cfg.seed, 'eval'))
    losses = {name: ood_losses(model, *sets[name], commitment=cfg.commitment, desc=name)
              for name in OOD_CONDITIONS}
    edges, counts = loss_histogram(losses, bins=cfg.histogram_bins)

    with MetricWriter(output_dir / 'ood_histogram.csv', ('bin_low', 'bin_high', *OOD_CONDITIONS)) as writer:
        for i in range(len(edges) - 1):
            writer.write({'bin_low': float(edges[i]), 'bin_high': float(edges[i + 1]),
                          **{name: int(counts[name][i]) for name in OOD_CONDITIONS}})

    medians = {name: float(np.median(values)) for name, values in losses.items()}
    with MetricWriter(output_dir / 'ood_summary.csv', ('condition', 'median', 'mean', 'count')) as writer:
        for name in OOD_CONDITIONS:
            writer.write({'condition': name, 'median': medians[name], 'mean': float(np.mean(losses[name])),
                          'count': int(losses[name].size)})
    logger.info('OOD medians: ' + ', '.join(f'{k}={v:.6g}' for k, v in medians.items()))
    return medians


def cmd_usage_report(cfg: RunConfig) -> Dict:
    """Use rate of every codebook over ``num_queries`` dataset pairs"""
    output_dir = Path(cfg.output_dir)
    dataset = load_dataset(cfg)
    model = load_vqvae(cfg.resolve_vqvae_path())
    dtype = next(model.parameters()).dtype

    idx = make_rng(cfg.seed, 'eval').integers(0, len(dataset), size=cfg.num_queries)
    evaluator = UseRateEvaluator(model)
    evaluator.update(torch.as_tensor(dataset.states[idx], dtype=dtype),
                     torch.as_tensor(dataset.actions[idx], dtype=dtype))
    report = evaluator.compute()
    lifetime = model.codebooks.counts.sum(-1).tolist()

    with MetricWriter(output_dir / 'usage_report.csv', USAGE_COLUMNS) as writer:
        for h in range(model.num_codebooks):
            writer.write({'codebook': h, 'used': report['per_codebook_used'][h],
                          'use_rate': report['per_codebook_use_rate'][h],
                          'selections': report['per_codebook_selections'][h],
                          'lifetime_selections': int(lifetime[h])})
        writer.write({'codebook': 'all', 'used': sum(report['per_codebook_used']), 'use_rate': report['use_rate'],
                      'selections': sum(report['per_codebook_selections']),
                      'lifetime_selections': int(sum(lifetime))})
    logger.info(f'Codebook use rate {report["use_rate"]:.4%} over {report["queries"]} queries')
    return report


COMMANDS: Dict[str, Callable] = {
    'gen-data': cmd_gen_data,
    'pretrain-vqvae': cmd_pretrain_vqvae,
    'train-agent': cmd_train_agent,
    'count-eval': cmd_count_eval,
    'ood-eval': cmd_ood_eval,
    'usage-report': cmd_usage_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Count-based anti-exploration for offline RL')
    subparsers = parser.add_subparsers(dest='command', required=True)

    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument('-c', '--config', help='Path to a YAML config')
        sub.add_argument('-u', '--update', nargs='+', default=[], help='Config overrides key=value')
        sub.add_argument('--seed', type=int, help='Root seed (override config)')
        sub.add_argument('--seeds', type=int, nargs='+', help='Run once per seed into seed<k>/')
        sub.add_argument('--output-dir', help='Output directory (override config)')
        sub.add_argument('--debug', action='store_true', help='Enable debug logging')

        if name in ('pretrain-vqvae', 'train-agent'):
            sub.add_argument('--no-fcm', action='store_true', help='Train codebooks by gradient instead of FCM')
            sub.add_argument('--sweep-codebooks', type=int, nargs='+', help='Codebook counts to sweep')
        if name == 'train-agent':
            sub.add_argument('--no-penalty', action='store_true', help='Unpenalized ablation')
        if name == 'count-eval':
            sub.add_argument('--maps', nargs='+', choices=MAPS, help='Grid World maps to evaluate')
            sub.add_argument('--label-source', choices=('direct', 'vqvae'), help='How grid pairs are labelled')

    return parser


def resolve_config(args: argparse.Namespace) -> YAMLConfig:
    overrides = parse_cli(args.update)
    for key in ('seed', 'output_dir'):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    if getattr(args, 'no_fcm', False):
        overrides['use_fcm'] = False
    if getattr(args, 'no_penalty', False):
        overrides['use_penalty'] = False
    if getattr(args, 'label_source', None):
        overrides['label_source'] = args.label_source
    return YAMLConfig(args.config, **overrides)


def _run(command: str, cfg: YAMLConfig, args: argparse.Namespace):
    output_dir = Path(cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    setup_logging(args.debug, output_dir / f'{command.replace("-", "_")}.log')
    cfg.dump(output_dir / 'config.yml')
    set_random_seed(cfg.seed)

    logger.info(f'{command}: env={cfg.env_id} seed={cfg.seed} output={output_dir}')
    fn = COMMANDS[command]
    if command in ('pretrain-vqvae', 'train-agent'):
        return fn(cfg, sweep=args.sweep_codebooks)
    if command == 'count-eval':
        return fn(cfg, maps=args.maps)
    return fn(cfg)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.seeds:
            root = Path(cfg.output_dir)
            for seed in args.seeds:
                _run(args.command, cfg.replace(seed=seed, output_dir=str(root / f'seed{seed}')), args)
        else:
            _run(args.command, cfg, args)
    except Exception as e:
        if not logging.getLogger().handlers:
            setup_logging(args.debug)
        logger.exception(f'{args.command} failed: {e}')
        return 1
    return 0
