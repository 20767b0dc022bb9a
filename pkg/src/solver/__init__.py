"""Trainers, evaluators and command entry points"""

from .base import TrainingDivergedError, BaseTrainer, check_finite
from .vqvae_trainer import VQVAETrainer, LOSS_COLUMNS
from .agent_trainer import AntiExplorationTrainer, METRIC_COLUMNS
from .tabular import TabularQLearner, TABULAR_COLUMNS
from .evaluator import (rollout_returns, evaluate_agent, UseRateEvaluator, OOD_CONDITIONS, perturbation_sets,
                        ood_losses, loss_histogram, CountEvaluator, write_count_table, write_pgm)
from .commands import (build_env, generate_dataset, load_dataset, build_counter, cmd_gen_data, cmd_pretrain_vqvae,
                       cmd_train_agent, cmd_count_eval, cmd_ood_eval, cmd_usage_report, COMMANDS, main)

__all__ = [
    'TrainingDivergedError', 'BaseTrainer', 'check_finite',
    'VQVAETrainer', 'LOSS_COLUMNS',
    'AntiExplorationTrainer', 'METRIC_COLUMNS',
    'TabularQLearner', 'TABULAR_COLUMNS',
    'rollout_returns', 'evaluate_agent', 'UseRateEvaluator', 'OOD_CONDITIONS', 'perturbation_sets',
    'ood_losses', 'loss_histogram', 'CountEvaluator', 'write_count_table', 'write_pgm',
    'build_env', 'generate_dataset', 'load_dataset', 'build_counter', 'cmd_gen_data', 'cmd_pretrain_vqvae',
    'cmd_train_agent', 'cmd_count_eval', 'cmd_ood_eval', 'cmd_usage_report', 'COMMANDS', 'main',
]
