"""Unit tests for the count penalty, OOD targets and actor-critic losses."""

import math

import numpy as np
import pytest
import torch

from src.nn.criterion import (PenaltyConfig, actor_loss, bellman_target, critic_loss, ood_targets, penalty,
                              reference_penalty, temperature_loss)
from src.nn.agent import Critic, GaussianPolicy
from src.nn.criterion.penalty import NEXT_STATE_PENALTY_SCALE, OODTargets
from src.nn.dense import compute_gradients
from tests.conftest import central_difference


class TestPenalty:
    """Test p(n, t) = beta ln t / sqrt(max(n, n_floor))."""

    def test_zero_at_first_step(self):
        """ln 1 = 0, whatever the count."""
        assert torch.equal(penalty(torch.tensor([0.0, 1.0, 1e6]), 1, 0.2), torch.zeros(3, dtype=torch.float64))

    def test_value(self):
        """p(n=4, t=20) = beta ln 20 / 2."""
        assert penalty(4, 20, 0.2).item() == pytest.approx(0.2 * math.log(20) / 2.0, rel=1e-12)

    def test_count_scaling(self):
        """Doubling n scales p by 1/sqrt(2), quadrupling by 1/2."""
        p1, p2, p4 = penalty(torch.tensor([10.0, 20.0, 40.0]), 100, 0.2).tolist()
        assert p2 / p1 == pytest.approx(1 / math.sqrt(2), rel=1e-12)
        assert p4 / p1 == pytest.approx(0.5, rel=1e-12)

    def test_monotone(self):
        """Non-increasing in n and non-decreasing in t."""
        n = torch.arange(0, 200, dtype=torch.float64)
        p = penalty(n, 50, 0.2)
        assert (p[1:] <= p[:-1]).all()
        by_t = torch.stack([penalty(5.0, t, 0.2) for t in range(1, 100)])
        assert (by_t[1:] >= by_t[:-1]).all()

    def test_count_floor(self):
        """Unseen pairs are treated as counted n_floor times."""
        assert penalty(0.0, 10, 0.2).item() == penalty(1.0, 10, 0.2).item()
        assert penalty(2.0, 10, 0.2, n_floor=4.0).item() == penalty(4.0, 10, 0.2).item()
        assert math.isfinite(penalty(0.0, 10, 0.2).item())

    def test_bad_step(self):
        """t below 1 is rejected."""
        with pytest.raises(ValueError):
            penalty(1.0, 0, 0.2)

    def test_config(self):
        """PenaltyConfig validates and evaluates at its own t."""
        cfg = PenaltyConfig(beta=0.5, t=7)
        assert cfg(9.0).item() == pytest.approx(0.5 * math.log(7) / 3.0)
        for bad in ({'beta': 0.0}, {'t': 0}, {'n_floor': 0.5}):
            with pytest.raises(ValueError):
                PenaltyConfig(**bad)

    def test_config_at_step(self):
        """at(t) keeps beta and n_floor and matches penalty() at the new step."""
        cfg = PenaltyConfig(beta=0.5, n_floor=2.0)
        later = cfg.at(20)
        assert (later.beta, later.t, later.n_floor) == (0.5, 20, 2.0)
        counts = torch.tensor([0.0, 1.0, 9.0, 100.0])
        assert torch.equal(later(counts), penalty(counts, 20, 0.5, n_floor=2.0))
        assert cfg.t == 1
        with pytest.raises(ValueError):
            cfg.at(0)

    def test_reference_penalty(self):
        """beta / sqrt(n), floored."""
        assert reference_penalty(torch.tensor([4.0, 0.0]), 0.2).tolist() == pytest.approx([0.1, 0.2])


class TestOODTargets:
    """Test the penalized regression targets of policy actions."""

    def test_targets_and_shapes(self):
        """Targets are Q - p and Qbar' - 0.1 p'."""
        q_new = torch.tensor([5.0, 6.0], dtype=torch.float64)
        q_next = torch.tensor([4.0, 3.0], dtype=torch.float64)
        out = ood_targets(q_new, q_next, p=torch.tensor([1.0, 2.0]), p_next=torch.tensor([10.0, 0.0]))
        assert out.q_ood.shape == out.q_target.shape == (2, 2)
        assert out.q_target[0].tolist() == pytest.approx([4.0, 4.0])
        assert out.q_target[1].tolist() == pytest.approx([4.0 - NEXT_STATE_PENALTY_SCALE * 10.0, 3.0])

    def test_clamped_at_zero(self):
        """Large penalties never push a target below zero."""
        out = ood_targets(torch.tensor([0.5, -1.0]), torch.tensor([0.1, 0.0]), p=5.0, p_next=100.0)
        assert (out.q_target >= 0).all()
        assert out.q_target.tolist() == [[0.0, 0.0], [0.0, 0.0]]

    def test_targets_carry_no_gradient(self):
        """Gradient flows through q_ood only."""
        q_new = torch.tensor([2.0, 3.0], requires_grad=True)
        out = ood_targets(q_new, torch.tensor([1.0, 1.0]), p=0.5, p_next=0.5)
        assert not out.q_target.requires_grad
        out.loss().backward()
        # d/dq sum over rows of mean (q - (q - p))^2 with the target detached
        assert q_new.grad.tolist() == pytest.approx([0.5, 0.5])

    def test_zero_penalty_zero_loss(self):
        """With p = 0 and non-negative values the OOD loss vanishes."""
        out = ood_targets(torch.tensor([1.0, 2.0]), torch.tensor([3.0, 4.0]), p=0.0, p_next=0.0)
        assert out.loss().item() == 0.0

    def test_negative_penalty(self):
        """Negative penalties are rejected."""
        with pytest.raises(ValueError):
            ood_targets(torch.ones(2), torch.ones(2), p=-0.1, p_next=0.0)
        with pytest.raises(ValueError):
            ood_targets(torch.ones(2), torch.ones(2), p=0.0, p_next=torch.tensor([0.0, -1.0]))


class TestActorCriticLosses:
    """Test Bellman targets and the three losses."""

    def test_bellman_target(self):
        """Terminal transitions drop the bootstrap term."""
        y = bellman_target(reward=torch.tensor([1.0, 1.0]), done=torch.tensor([0.0, 1.0]),
                           next_min_q=torch.tensor([2.0, 2.0]), next_log_prob=torch.tensor([-1.0, -1.0]),
                           alpha=torch.tensor(0.5), discount=0.9)
        assert y.tolist() == pytest.approx([1.0 + 0.9 * 2.5, 1.0])
        assert not y.requires_grad

    def test_critic_loss(self):
        """Bellman and OOD parts add up."""
        q1 = torch.tensor([1.0, 2.0], requires_grad=True)
        q2 = torch.tensor([0.0, 0.0], requires_grad=True)
        y = torch.tensor([1.0, 1.0])
        ood = [ood_targets(q, torch.zeros(2), p=0.0, p_next=0.0) for q in (q1, q2)]
        out = critic_loss([q1, q2], y, ood)
        assert out.bellman.item() == pytest.approx(0.5 + 1.0)
        assert out.total.item() == pytest.approx(out.bellman.item() + out.ood.item())
        assert set(out.as_dict()) == {'critic_loss', 'bellman_loss', 'ood_loss'}

    def test_critic_loss_errors(self):
        """Mismatched lists and non-finite losses raise."""
        q = torch.ones(2)
        ood = ood_targets(q, q, p=0.0, p_next=0.0)
        with pytest.raises(ValueError):
            critic_loss([q, q], q, [ood])
        with pytest.raises(FloatingPointError):
            critic_loss([torch.tensor([float('nan'), 1.0])], q, [ood])

    def test_critic_gradient(self):
        """Dataset values match central differences; policy values see a fixed target."""
        torch.manual_seed(0)
        q_data = torch.randn(4, dtype=torch.float64)
        q_new = torch.randn(4, dtype=torch.float64) + 3.0
        y = torch.randn(4, dtype=torch.float64)
        q_next = torch.randn(4, dtype=torch.float64) + 3.0

        def loss_fn():
            ood = ood_targets(q_new, q_next, p=0.3, p_next=0.3)
            return critic_loss([q_data], y, [ood]).total

        q_data.requires_grad_(True)
        (grad,) = torch.autograd.grad(loss_fn(), q_data)
        q_data.requires_grad_(False)
        for i in range(4):
            numeric = central_difference(loss_fn, q_data, (i,))
            assert grad[i].item() == pytest.approx(numeric, abs=1e-6)

        # 2 (q - (q - p)) / B per element
        q_new.requires_grad_(True)
        (grad,) = torch.autograd.grad(loss_fn(), q_new)
        assert grad.tolist() == pytest.approx([2 * 0.3 / 4] * 4)

    def test_actor_loss(self):
        """alpha is treated as a constant."""
        alpha = torch.tensor(0.5, requires_grad=True)
        log_prob = torch.tensor([-1.0, -2.0])
        loss = actor_loss(log_prob, torch.tensor([1.0, 2.0]), alpha)
        assert loss.item() == pytest.approx((-0.5 - 1.0 - 1.0 - 2.0) / 2)
        assert not loss.requires_grad

    def test_temperature_loss(self):
        """Entropy below target raises alpha, above target lowers it."""
        # d loss / d log_alpha = -(log_prob + target_entropy)
        for log_prob, expected_grad in ((-1.0, 3.0), (3.0, -1.0), (2.0, 0.0)):
            log_alpha = torch.zeros((), requires_grad=True)
            temperature_loss(log_alpha, torch.tensor([log_prob]), target_entropy=-2.0).backward()
            assert log_alpha.grad.item() == pytest.approx(expected_grad)

    def test_bellman_value_iteration(self):
        """Iterating the targets on a deterministic 2-state chain reaches the soft value-iteration solution."""
        # 0 -> 1 with reward 1, 1 -> 0 with reward 2, never terminal
        rewards = torch.tensor([1.0, 2.0], dtype=torch.float64)
        next_state = torch.tensor([1, 0])
        log_prob = torch.tensor([-0.7, 0.3], dtype=torch.float64)
        alpha, discount = torch.tensor(0.5, dtype=torch.float64), 0.9

        q = torch.zeros(2, dtype=torch.float64)
        for _ in range(400):
            q = bellman_target(rewards, torch.zeros(2, dtype=torch.float64), q[next_state],
                               log_prob[next_state], alpha, discount)

        # Q = r + discount * P (Q - alpha log pi), solved directly
        transition = np.array([[0.0, 1.0], [1.0, 0.0]])
        bonus = -0.5 * transition @ log_prob.numpy()
        oracle = np.linalg.solve(np.eye(2) - discount * transition, rewards.numpy() + discount * bonus)
        assert np.abs(q.numpy() - oracle).max() <= 1e-6

    def test_bellman_value_iteration_terminal(self):
        """A terminal successor contributes only its reward."""
        rewards = torch.tensor([1.0, 2.0], dtype=torch.float64)
        done = torch.tensor([0.0, 1.0], dtype=torch.float64)
        q = torch.zeros(2, dtype=torch.float64)
        for _ in range(50):
            q = bellman_target(rewards, done, q[torch.tensor([1, 1])], torch.zeros(2, dtype=torch.float64),
                               torch.tensor(0.0), discount=0.9)
        assert q.tolist() == pytest.approx([1.0 + 0.9 * 2.0, 2.0], abs=1e-12)

    def test_critic_network_gradient(self, rng):
        """The full critic loss on twin critic nets matches central differences with targets held fixed."""
        critics = [Critic(3, 2, hidden_dims=(8,), seed=seed, dtype=torch.float64) for seed in (0, 1)]
        s = torch.as_tensor(rng.normal(size=(6, 3)))
        a = torch.as_tensor(rng.uniform(-1, 1, size=(6, 2)))
        a_new = torch.as_tensor(rng.uniform(-1, 1, size=(6, 2)))
        y = torch.as_tensor(rng.normal(size=6))
        q_next = torch.as_tensor(rng.normal(size=6)) + 1.0
        p = torch.as_tensor(rng.uniform(0, 0.5, size=6))
        fixed = [ood_targets(c(s, a_new), q_next, p, p).q_target for c in critics]

        def loss_fn():
            ood = [OODTargets(q_ood=torch.stack([c(s, a_new), q_next]), q_target=target)
                   for c, target in zip(critics, fixed)]
            return critic_loss([c(s, a) for c in critics], y, ood).total

        loss = loss_fn()
        grads = [compute_gradients(c, loss, retain_graph=True) for c in critics]
        for trial in range(60):
            k = trial % 2
            named = list(critics[k].named_parameters())
            name, param = named[int(rng.integers(0, len(named)))]
            index = tuple(int(rng.integers(0, s_)) for s_ in param.shape)
            numeric = central_difference(loss_fn, param.data, index)
            assert grads[k][name][index].item() == pytest.approx(numeric, abs=1e-6, rel=1e-5), (k, name, index)

    def test_actor_network_gradient(self, rng):
        """The actor loss through the reparameterized policy matches central differences."""
        policy = GaussianPolicy(3, 2, hidden_dims=(8,), seed=0, dtype=torch.float64)
        critics = [Critic(3, 2, hidden_dims=(8,), seed=seed, dtype=torch.float64) for seed in (1, 2)]
        s = torch.as_tensor(rng.normal(size=(6, 3)))
        alpha = torch.tensor(0.3, dtype=torch.float64)

        def loss_fn():
            # Same noise on every evaluation
            action, log_prob = policy.sample(s, torch.Generator().manual_seed(11))
            return actor_loss(log_prob, torch.min(*(c(s, action) for c in critics)), alpha)

        grads = compute_gradients(policy, loss_fn())
        named = list(policy.named_parameters())
        for trial in range(60):
            name, param = named[trial % len(named)]
            index = tuple(int(rng.integers(0, s_)) for s_ in param.shape)
            numeric = central_difference(loss_fn, param.data, index)
            assert grads[name][index].item() == pytest.approx(numeric, abs=1e-6, rel=1e-5), (name, index)

    def test_reward_offset_shifts_fixed_point(self):
        """An offset c moves both the looping and the terminal fixed point by c / (1 - discount)."""
        discount, offset = 0.9, 2.2
        rewards = torch.tensor([-1.5, -0.5], dtype=torch.float64)
        done = torch.tensor([0.0, 1.0], dtype=torch.float64)
        log_prob = torch.tensor([-0.4, -0.4], dtype=torch.float64)
        alpha = torch.tensor(0.2, dtype=torch.float64)

        def solve(c):
            q = torch.zeros(2, dtype=torch.float64)
            for _ in range(400):
                # state 0 loops on itself, state 1 ends the episode
                q = bellman_target(rewards, done, q[torch.tensor([0, 1])], log_prob, alpha, discount,
                                   reward_offset=c)
            return q

        plain, shifted = solve(0.0), solve(offset)
        assert (shifted - plain).tolist() == pytest.approx([offset / (1 - discount)] * 2, abs=1e-9)
        assert (shifted >= 0).all() and (plain < 0).any()
