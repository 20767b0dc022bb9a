"""
Point-mass navigation

State (x, y, vx, vy) in a clipped box, action (ax, ay) in [-1, 1]^2.
Reward is the negative distance to the goal per step, plus a terminal bonus
inside the goal radius.
"""

import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from ..core.workspace import register
from ..data.dataset import OfflineDataset

__all__ = ['PointMass', 'expert_controller', 'random_controller', 'generate_pointmass_dataset',
           'normalized_score', 'POLICY_TAGS']

logger = logging.getLogger(__name__)

POLICY_TAGS = ('random', 'medium', 'expert')


@register()
class PointMass:
    def __init__(self,
                 dt: float = 0.1,
                 bound: float = 1.0,
                 max_speed: float = 1.0,
                 start: Tuple[float, float] = (-0.5, -0.5),
                 start_noise: float = 0.1,
                 goal: Tuple[float, float] = (0.5, 0.5),
                 goal_radius: float = 0.1,
                 goal_bonus: float = 10.0,
                 horizon: int = 100):
        self.dt = dt
        self.bound = bound
        self.max_speed = max_speed
        self.start = np.asarray(start, dtype=np.float64)
        self.start_noise = start_noise
        self.goal = np.asarray(goal, dtype=np.float64)
        self.goal_radius = goal_radius
        self.goal_bonus = goal_bonus
        self.horizon = horizon

        self._state = np.zeros(4)
        self.steps = 0

    env_id = 'pointmass'
    state_dim = 4
    action_dim = 2
    is_discrete = False

    @property
    def state(self) -> np.ndarray:
        return self._state.copy()

    def reset(self, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        rng = np.random.default_rng() if rng is None else rng
        position = self.start + rng.uniform(-self.start_noise, self.start_noise, size=2)
        self._state = np.concatenate([position, np.zeros(2)])
        self.steps = 0
        return self.state

    def dynamics(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        """Pure clipped double-integrator step"""
        action = np.clip(np.asarray(action, dtype=np.float64).reshape(2), -1.0, 1.0)
        velocity = np.clip(state[2:] + action * self.dt, -self.max_speed, self.max_speed)
        position = np.clip(state[:2] + velocity * self.dt, -self.bound, self.bound)
        # Hitting a wall kills the velocity component into it
        velocity = np.where(np.abs(position) >= self.bound, 0.0, velocity)
        return np.concatenate([position, velocity])

    def step(self, action) -> Tuple[np.ndarray, float, bool, Dict]:
        self._state = self.dynamics(self._state, action)
        self.steps += 1
        distance = float(np.linalg.norm(self._state[:2] - self.goal))
        reached = distance <= self.goal_radius
        reward = -distance + (self.goal_bonus if reached else 0.0)
        timeout = self.steps >= self.horizon
        return self.state, reward, reached, {'timeout': timeout and not reached, 'distance': distance}


def expert_controller(env: PointMass, kp: float = 3.0, kd: float = 2.5) -> Callable[[np.ndarray], np.ndarray]:
    """PD control toward the goal"""
    def act(state: np.ndarray) -> np.ndarray:
        return np.clip(kp * (env.goal - state[:2]) - kd * state[2:], -1.0, 1.0)
    return act


def random_controller(rng: np.random.Generator) -> Callable[[np.ndarray], np.ndarray]:
    def act(state: np.ndarray) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=2)
    return act


def _run_episode(env: PointMass, controller, rng: np.random.Generator):
    state = env.reset(rng)
    states, actions, rewards, next_states, dones = [], [], [], [], []
    for _ in range(env.horizon):
        action = controller(state)
        next_state, reward, done, _ = env.step(action)
        states.append(state)
        actions.append(action)
        rewards.append(reward)
        next_states.append(next_state)
        dones.append(float(done))
        state = next_state
        if done:
            break
    return states, actions, rewards, next_states, dones


def normalized_score(episode_return: float, random_return: float, best_return: float) -> float:
    """0 at the random reference, 1 at the dataset's best trajectory"""
    span = best_return - random_return
    if span <= 0:
        raise ValueError(f'Best return {best_return} does not exceed random return {random_return}')
    return (episode_return - random_return) / span


def generate_pointmass_dataset(policy_tag: str = 'medium',
                               episodes: int = 200,
                               seed: int = 0,
                               env: Optional[PointMass] = None,
                               rng: Optional[np.random.Generator] = None,
                               reference_episodes: int = 20) -> OfflineDataset:
    """
    Offline data of one behavior tier.

    random: uniform actions; expert: PD controller; medium: each episode flips
    a fair coin between the two and the tag is recorded. Metadata keeps the
    best trajectory return and a random-policy reference return.
    """
    if policy_tag not in POLICY_TAGS:
        raise ValueError(f'Unknown policy tag {policy_tag}, choose from {POLICY_TAGS}')

    env = PointMass() if env is None else env
    rng = np.random.default_rng(seed) if rng is None else rng
    expert = expert_controller(env)
    random_policy = random_controller(rng)

    columns = [[], [], [], [], []]
    tags, lengths, returns = [], [], []
    for _ in range(episodes):
        if policy_tag == 'medium':
            tag = 'expert' if rng.random() < 0.5 else 'random'
        else:
            tag = policy_tag
        episode = _run_episode(env, expert if tag == 'expert' else random_policy, rng)
        for column, values in zip(columns, episode):
            column.extend(values)
        tags.append(tag)
        lengths.append(len(episode[0]))
        returns.append(float(np.sum(episode[2])))

    reference = [float(np.sum(_run_episode(env, random_policy, rng)[2])) for _ in range(reference_episodes)]

    metadata = {
        'env_id': env.env_id,
        'state_dim': env.state_dim,
        'action_dim': env.action_dim,
        'policy': policy_tag,
        'seed': int(seed),
        'discrete': False,
        'episode_lengths': lengths,
        'episode_tags': tags,
        'best_return': max(returns),
        'random_return': float(np.mean(reference)),
        'horizon': env.horizon,
    }
    states, actions, rewards, next_states, dones = (np.asarray(c, dtype=np.float64) for c in columns)
    dataset = OfflineDataset(states, actions, rewards, next_states, dones, metadata)
    logger.info(f'pointmass/{policy_tag}: {episodes} episodes, {len(dataset)} transitions, '
                f'best return {metadata["best_return"]:.3f}')
    return dataset
