"""
Grid World

States are integer coordinates (x, y) with x to the right and y downwards,
actions are {0: up, 1: down, 2: left, 3: right}. A move that would leave the
grid or enter an obstacle leaves the position unchanged; the pair is still a
transition of its own.
"""

import copy
import logging
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from ..core.workspace import register
from ..data.dataset import OfflineDataset, Transition

__all__ = [
    'ACTIONS', 'ACTION_NAMES', 'NUM_ACTIONS', 'OBSTACLE_LAYOUTS', 'MAPS',
    'parse_layout', 'move', 'GridWorld', 'grid_step', 'make_map', 'make_trap_world',
    'generate_grid_dataset', 'exact_count_oracle', 'corridor_policy', 'generate_trap_dataset',
]

logger = logging.getLogger(__name__)

ACTIONS = ((0, -1), (0, 1), (-1, 0), (1, 0))
ACTION_NAMES = ('up', 'down', 'left', 'right')
NUM_ACTIONS = len(ACTIONS)

# Repo-defined layouts, '#' marks an obstacle
OBSTACLE_LAYOUTS = {
    8: (
        '........',
        '.##..#..',
        '.#...#..',
        '....##..',
        '.#......',
        '.#..###.',
        '........',
        '...#....',
    ),
    16: (
        '................',
        '.###......##....',
        '...#..........#.',
        '...#...####...#.',
        '..............#.',
        '.##....#........',
        '.......#...###..',
        '...#...#........',
        '...#.......#....',
        '...####....#..#.',
        '..............#.',
        '.#....##......#.',
        '.#.........###..',
        '.#..#...........',
        '....#....##.....',
        '................',
    ),
}

MAPS = ('gridworld_8x8', 'gridworld_8x8_obstacles', 'gridworld_16x16', 'gridworld_16x16_obstacles')


def parse_layout(rows: Iterable[str]) -> np.ndarray:
    """Boolean obstacle mask indexed [x, y]"""
    rows = list(rows)
    size = len(rows)
    if any(len(row) != size for row in rows):
        raise ValueError('Grid layouts must be square')
    return np.array([[rows[y][x] == '#' for y in range(size)] for x in range(size)], dtype=bool)


def move(position: Tuple[int, int], action: int, obstacles: np.ndarray) -> Tuple[int, int]:
    """Pure grid dynamics: next position of ``position`` under ``action``"""
    if not 0 <= int(action) < NUM_ACTIONS:
        raise ValueError(f'Invalid grid action {action}')
    size = obstacles.shape[0]
    dx, dy = ACTIONS[int(action)]
    x, y = position[0] + dx, position[1] + dy
    if not (0 <= x < size and 0 <= y < size) or obstacles[x, y]:
        return position
    return (x, y)


@register()
class GridWorld:
    """
    Square grid with optional obstacles, goal and trap cells.

    Args:
        size: Grid side length
        obstacles: Use the repo-defined obstacle layout of this size
        start: Fixed start cell; random free cell on reset when None
        goal: Terminal cell paying ``goal_reward``
        traps: Terminal cells paying ``trap_reward``
        step_reward: Reward of every other move
        horizon: Episode length cap for rollouts
    """

    def __init__(self,
                 size: int = 8,
                 obstacles: bool = False,
                 start: Optional[Tuple[int, int]] = None,
                 goal: Optional[Tuple[int, int]] = None,
                 traps: Optional[Iterable[Tuple[int, int]]] = None,
                 goal_reward: float = 1.0,
                 trap_reward: float = -1.0,
                 step_reward: float = 0.0,
                 horizon: int = 50):
        if obstacles and size not in OBSTACLE_LAYOUTS:
            raise ValueError(f'No obstacle layout for size {size}')

        self.size = size
        self.has_obstacles = obstacles
        self.obstacles = parse_layout(OBSTACLE_LAYOUTS[size]) if obstacles else np.zeros((size, size), dtype=bool)
        self.start = tuple(start) if start is not None else None
        self.goal = tuple(goal) if goal is not None else None
        self.traps = frozenset(tuple(t) for t in (traps or ()))
        self.goal_reward = goal_reward
        self.trap_reward = trap_reward
        self.step_reward = step_reward
        self.horizon = horizon

        for cell in [c for c in (self.start, self.goal) if c is not None] + list(self.traps):
            self._check_free(cell)

        self.position = self.start if self.start is not None else (0, 0)

    state_dim = 2
    action_dim = 1
    is_discrete = True

    @property
    def env_id(self) -> str:
        return f'gridworld_{self.size}x{self.size}' + ('_obstacles' if self.has_obstacles else '')

    def _check_free(self, cell: Tuple[int, int]):
        x, y = cell
        if not (0 <= x < self.size and 0 <= y < self.size):
            raise ValueError(f'Cell {cell} lies outside the {self.size}x{self.size} grid')
        if self.obstacles[x, y]:
            raise ValueError(f'Cell {cell} is an obstacle')

    def free_cells(self) -> List[Tuple[int, int]]:
        return [(x, y) for x in range(self.size) for y in range(self.size) if not self.obstacles[x, y]]

    def reset(self, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        if self.start is not None:
            self.position = self.start
        else:
            cells = self.free_cells()
            rng = np.random.default_rng() if rng is None else rng
            self.position = cells[int(rng.integers(len(cells)))]
        return self.state

    @property
    def state(self) -> np.ndarray:
        return np.array(self.position, dtype=np.float64)

    def reward(self, position: Tuple[int, int]) -> Tuple[float, bool]:
        if position == self.goal:
            return self.goal_reward, True
        if position in self.traps:
            return self.trap_reward, True
        return self.step_reward, False

    def step(self, action) -> Tuple[np.ndarray, float, bool, Dict]:
        action = int(np.asarray(action).reshape(-1)[0])
        nxt = move(self.position, action, self.obstacles)
        blocked = nxt == self.position
        self.position = nxt
        reward, done = self.reward(self.position)
        return self.state, reward, done, {'blocked': blocked}


def grid_step(world: GridWorld, action: int) -> Tuple[GridWorld, Transition]:
    """Value-style step: returns the moved world and the emitted transition; ``world`` is untouched"""
    nxt = copy.copy(world)
    state = world.state
    next_state, reward, done, _ = nxt.step(action)
    return nxt, Transition(state, np.array([float(action)]), reward, next_state, done)


@register()
def make_map(name: str) -> GridWorld:
    """One of the four count-experiment maps by name"""
    if name not in MAPS:
        raise ValueError(f'Unknown map {name}, choose from {MAPS}')
    size = 16 if '16x16' in name else 8
    return GridWorld(size=size, obstacles=name.endswith('_obstacles'))


@register()
def make_trap_world(size: int = 8, step_reward: float = -0.01, horizon: int = 50) -> GridWorld:
    """
    Safe corridor along the top row and the right column to the goal in the
    bottom-right corner; every other cell is a terminal trap.
    """
    corridor = {(x, 0) for x in range(size)} | {(size - 1, y) for y in range(size)}
    traps = [(x, y) for x in range(size) for y in range(size) if (x, y) not in corridor]
    return GridWorld(size=size, start=(0, 0), goal=(size - 1, size - 1), traps=traps,
                     goal_reward=1.0, trap_reward=-1.0, step_reward=step_reward, horizon=horizon)


def _grid_metadata(world: GridWorld, policy: str, seed: int, lengths: List[int]) -> Dict:
    return {
        'env_id': world.env_id,
        'state_dim': 2,
        'action_dim': 1,
        'policy': policy,
        'seed': int(seed),
        'discrete': True,
        'grid_size': world.size,
        'num_actions': NUM_ACTIONS,
        'obstacles': bool(world.has_obstacles),
        'episode_lengths': [int(n) for n in lengths],
    }


def generate_grid_dataset(world: GridWorld,
                          steps: int = 10000,
                          seed: int = 0,
                          rng: Optional[np.random.Generator] = None) -> Tuple[OfflineDataset, np.ndarray]:
    """
    One continuing uniform-random trajectory from a random free start.

    Returns:
        (dataset, exact counts [size, size, 4] indexed [x, y, action])
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    cells = world.free_cells()
    world = copy.copy(world)
    world.position = cells[int(rng.integers(len(cells)))]

    counts = np.zeros((world.size, world.size, NUM_ACTIONS), dtype=np.int64)
    actions = rng.integers(0, NUM_ACTIONS, size=steps)
    transitions = []
    for action in actions:
        x, y = world.position
        counts[x, y, action] += 1
        nxt = move(world.position, int(action), world.obstacles)
        transitions.append(Transition(np.array([x, y], dtype=np.float64), np.array([float(action)]), 0.0,
                                      np.array(nxt, dtype=np.float64), False))
        world.position = nxt

    dataset = OfflineDataset.from_transitions(transitions, _grid_metadata(world, 'uniform', seed, [steps]))
    logger.info(f'{world.env_id}: {steps} uniform-random steps, {int((counts > 0).sum())} distinct pairs')
    return dataset, counts


def exact_count_oracle(dataset: OfflineDataset) -> np.ndarray:
    """Exact multiset counts per (x, y, action) of a discrete dataset"""
    if not dataset.is_discrete:
        raise NotImplementedError(f'Exact counts need a discrete environment, got {dataset.env_id}')

    size = int(dataset.metadata['grid_size'])
    num_actions = int(dataset.metadata.get('num_actions', NUM_ACTIONS))
    counts = np.zeros((size, size, num_actions), dtype=np.int64)
    if len(dataset) == 0:
        return counts

    xy = dataset.states.round().astype(np.int64)
    a = dataset.actions[:, 0].round().astype(np.int64)
    np.add.at(counts, (xy[:, 0], xy[:, 1], a), 1)
    return counts


def corridor_policy(world: GridWorld, position: Tuple[int, int], rng: np.random.Generator,
                    progress: float = 0.7) -> int:
    """
    Behavior policy of the trap world: mostly moves along the corridor, otherwise
    bumps into the outer wall. It never steps into a trap.
    """
    x, y = position
    last = world.size - 1
    if y == 0 and x < last:
        forward, bump = 3, 0
    else:
        forward, bump = 1, 3
    return forward if rng.random() < progress else bump


def generate_trap_dataset(world: GridWorld,
                          episodes: int = 200,
                          seed: int = 0,
                          rng: Optional[np.random.Generator] = None) -> OfflineDataset:
    """Episodes of the corridor behavior policy from the fixed start"""
    rng = np.random.default_rng(seed) if rng is None else rng
    transitions, lengths = [], []
    for _ in range(episodes):
        world.reset()
        length = 0
        for _ in range(world.horizon):
            action = corridor_policy(world, world.position, rng)
            world, transition = grid_step(world, action)
            transitions.append(transition)
            length += 1
            if transition.done:
                break
        lengths.append(length)

    metadata = _grid_metadata(world, 'corridor', seed, lengths)
    dataset = OfflineDataset.from_transitions(transitions, metadata)
    returns = dataset.episode_returns()
    dataset.metadata['best_return'] = float(returns.max())
    return dataset
