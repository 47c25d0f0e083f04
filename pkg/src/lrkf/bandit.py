"""Contextual bandit harness over a classification stream.

The environment presents a context; the agent picks one of A actions and
receives reward 1 when the action equals the hidden label, else 0. The
reward is modeled as nonlinear Gaussian regression with one output head
per action; after acting, the learner sees only the chosen head's reward,
so the update masks the Jacobian down to that single row.

Policies: Thompson sampling (act greedily under one posterior draw) and
epsilon-greedy (uniform exploration with probability epsilon, otherwise
greedy under the point estimate).
"""

from dataclasses import dataclass

import numpy as np

from .belief import sample_parameters
from .models import Linearization

# Largest variance of a Bernoulli reward; a reasonable fixed observation
# noise when modeling 0/1 rewards with a Gaussian.
DEFAULT_REWARD_VARIANCE = 0.25


@dataclass(frozen=True)
class BanditEnv:
    """Contexts with hidden labels and 0/1 reward on a correct guess."""

    contexts: np.ndarray  # (T, D)
    true_labels: np.ndarray  # (T,) ints, never shown to the agent
    num_actions: int

    def __post_init__(self):
        labels = np.asarray(self.true_labels)
        if labels.min() < 0 or labels.max() >= self.num_actions:
            raise ValueError("labels out of range")

    def __len__(self):
        return self.contexts.shape[0]

    def reward(self, t, action):
        return 1.0 if int(action) == int(self.true_labels[t]) else 0.0


def env_from_stream(events, num_actions):
    contexts = np.stack([ev.x for ev in events])
    labels = np.array([int(np.argmax(ev.y)) for ev in events])
    return BanditEnv(contexts, labels, num_actions)


def thompson_act(belief, model, x, seed):
    """Greedy action under a single posterior parameter draw."""
    theta = sample_parameters(belief, 1, seed)[0]
    values = model.forward(x, theta)
    return int(np.argmax(values))  # argmax takes the lowest index on ties


def epsilon_greedy_act(point_estimate, model, x, epsilon, seed):
    """Uniform exploration with probability epsilon, else greedy."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    values = model.forward(x, point_estimate)
    rng = np.random.default_rng(seed)
    if rng.random() < epsilon:
        return int(rng.integers(values.shape[0]))
    return int(np.argmax(values))


def masked_reward_linearization(model, x, mean, action, reward_variance):
    """Linearization of the chosen head as a scalar Gaussian observation."""
    values = model.forward(x, mean)
    jac = model.jacobian(x, mean)[action : action + 1, :]
    cov = np.array([[reward_variance]])
    whitener = np.array([[1.0 / np.sqrt(reward_variance)]])
    return Linearization(values[action : action + 1], jac, cov, whitener)


class FilterBanditAgent:
    """Bayesian filter over the reward network; supports both policies."""

    def __init__(self, learner, reward_variance=DEFAULT_REWARD_VARIANCE):
        self.learner = learner
        self.reward_variance = reward_variance

    @property
    def model(self):
        return self.learner.model

    def act(self, x, policy, epsilon, seed):
        pred = self.learner.predicted_belief()
        if policy == "thompson":
            return thompson_act(pred, self.model, x, seed)
        return epsilon_greedy_act(pred.mean, self.model, x, epsilon, seed)

    def learn(self, x, action, reward):
        pred = self.learner.predicted_belief()
        lin = masked_reward_linearization(
            self.model, x, pred.mean, action, self.reward_variance
        )
        self.learner.apply_update(pred, lin, np.array([reward]))


class SgdBanditAgent:
    """Point-estimate agent: replay buffer SGD on the chosen head only."""

    def __init__(self, learner, reward_variance=DEFAULT_REWARD_VARIANCE):
        self.learner = learner
        self.reward_variance = reward_variance

    @property
    def model(self):
        return self.learner.model

    def act(self, x, policy, epsilon, seed):
        if policy == "thompson":
            raise ValueError("Thompson sampling needs a posterior; use epsilon_greedy")
        return epsilon_greedy_act(self.learner.params, self.model, x, epsilon, seed)

    def learn(self, x, action, reward):
        buf = self.learner.buffer
        buf.append(x, np.array([action, reward]))
        for _ in range(self.learner.inner_iters):
            grads = []
            for bx, ar in buf:
                a, r = int(ar[0]), ar[1]
                values = self.model.forward(bx, self.learner.params)
                row = self.model.jacobian(bx, self.learner.params)[a]
                grads.append(row * (values[a] - r) / self.reward_variance)
            self.learner.params = self.learner.optimizer.step(
                self.learner.params, np.mean(grads, axis=0)
            )


def run_bandit(env, agent, policy, steps, seed, epsilon=0.1):
    """Play the environment; returns the per-step reward trace.

    The agent never sees the hidden label, only the reward of its own
    action. Per-step policy randomness comes from child seeds of
    ``seed`` so runs are reproducible.
    """
    steps = min(steps, len(env))
    rewards = np.zeros(steps)
    for t in range(steps):
        x = env.contexts[t]
        action = agent.act(x, policy, epsilon, seed=[seed, t])
        r = env.reward(t, action)
        agent.learn(x, action, r)
        rewards[t] = r
    return rewards
