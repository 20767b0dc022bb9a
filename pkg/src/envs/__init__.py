"""Desk-scale environments and behavior datasets"""

from .gridworld import (ACTIONS, ACTION_NAMES, NUM_ACTIONS, OBSTACLE_LAYOUTS, MAPS, parse_layout, move,
                        GridWorld, grid_step, make_map, make_trap_world, generate_grid_dataset,
                        exact_count_oracle, corridor_policy, generate_trap_dataset)
from .pointmass import (PointMass, expert_controller, random_controller, generate_pointmass_dataset,
                        normalized_score, POLICY_TAGS)

__all__ = [
    'ACTIONS', 'ACTION_NAMES', 'NUM_ACTIONS', 'OBSTACLE_LAYOUTS', 'MAPS', 'parse_layout', 'move',
    'GridWorld', 'grid_step', 'make_map', 'make_trap_world', 'generate_grid_dataset',
    'exact_count_oracle', 'corridor_policy', 'generate_trap_dataset',
    'PointMass', 'expert_controller', 'random_controller', 'generate_pointmass_dataset',
    'normalized_score', 'POLICY_TAGS',
]
