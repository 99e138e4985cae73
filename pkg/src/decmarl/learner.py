"""Per-agent actor-critic: action selection, rewards and the DDPG-style update.

The action set is discrete, so the DDPG recipe is adapted in the usual
way: the target action is the argmax of the target actor's logits, and
the actor is trained through the critic by feeding it the
softmax-weighted mix of action embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .encoding import ACTOR_INPUT_DIM
from .gridworld import Action, GridWorld, MaskLabel, MoveKind, bfs_distances
from .mental_state import MentalState
from .neural import Adam, Mlp, ReplayBuffer, soft_update

N_ACTIONS = len(Action)


@dataclass
class RewardParams:
    alpha: float = 0.1
    lambda_stay: float = 0.5
    delta_max: int = 20

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.lambda_stay < 1.0:
            raise ValueError("lambda_stay must lie in (0, 1)")
        if self.delta_max < 1:
            raise ValueError("delta_max must be positive")


class UpdateStats(NamedTuple):
    critic_loss: float
    actor_loss: float


class AgentBrain:
    """Actor, critic, their targets, two Adam states and a replay buffer."""

    def __init__(self, action_table: np.ndarray, rng: np.random.Generator, *,
                 hidden: tuple[int, ...] = (128, 128), actor_lr: float = 1e-4, critic_lr: float = 1e-3,
                 gamma: float = 0.99, tau: float = 1e-3, batch_size: int = 64,
                 replay_capacity: int = 100_000, state_dim: int = ACTOR_INPUT_DIM):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        self.action_table = np.asarray(action_table, dtype=np.float64)
        action_dim = self.action_table.shape[1]
        self.state_dim = state_dim
        self.actor = Mlp((state_dim, *hidden, N_ACTIONS), rng)
        self.critic = Mlp((state_dim + action_dim, *hidden, 1), rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor.n_params, actor_lr)
        self.critic_opt = Adam(self.critic.n_params, critic_lr)
        self.buffer = ReplayBuffer(replay_capacity, state_dim)
        self.gamma = gamma
        self.tau = tau
        self.batch_size = batch_size

    def snapshot(self) -> tuple[np.ndarray, np.ndarray]:
        """Copies of the online (actor, critic) parameter vectors."""
        return self.actor.params.copy(), self.critic.params.copy()

    def load_params(self, actor: np.ndarray, critic: np.ndarray, reset_targets: bool = True) -> None:
        self.actor.set_params(actor)
        self.critic.set_params(critic)
        if reset_targets:
            self.target_actor.set_params(actor)
            self.target_critic.set_params(critic)

    def critic_features(self, states: np.ndarray, action_embeddings: np.ndarray) -> np.ndarray:
        return np.concatenate([states, action_embeddings], axis=-1)


def select_action(brain: AgentBrain, x: np.ndarray, eps: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy over the actor's logits; argmax ties go to the lowest index."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if rng.random() < eps:
        return Action(int(rng.integers(N_ACTIONS)))
    return Action(int(np.argmax(brain.actor(x))))


def epsilon_at(step: int, total_steps: int, start: float = 0.9, end: float = 0.05,
               anneal_fraction: float = 0.5) -> float:
    """Linear anneal from ``start`` to ``end`` over the first part of training."""
    horizon = max(1.0, anneal_fraction * total_steps)
    frac = min(1.0, step / horizon)
    return start + (end - start) * frac


def extrinsic_reward(world: GridWorld, agent: int, params: RewardParams,
                     ms: MentalState | None = None) -> float:
    """1 - shortest-path distance to the goal / delta_max.

    Distances come from the ground-truth map; when ``ms`` is given they are
    measured on the agent's own map instead (Unknown cells count as free).
    """
    pos = world.agent_positions[agent]
    goal = world.agent_goals[agent]
    if ms is None:
        delta = int(world.distance_field(goal)[pos.y, pos.x])
    else:
        passable = ms.mask != MaskLabel.OBSTACLE
        passable[pos.y, pos.x] = True
        passable[goal.y, goal.x] = True
        delta = int(bfs_distances(passable, goal)[pos.y, pos.x])
    if delta < 0:
        delta = params.delta_max
    return 1.0 - delta / params.delta_max


def combined_move_reward(r_ext: float, novelty: MentalState | float | None, alpha: float,
                         mode: str = "time") -> float:
    """(1 - alpha) * r_ext + alpha * mean novelty, clamped to [-1, 1]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if novelty is None:
        mean_nov = 0.0
    elif isinstance(novelty, MentalState):
        mean_nov = novelty.mean_novelty(mode)
    else:
        mean_nov = float(novelty)
    r = (1.0 - alpha) * r_ext + alpha * mean_nov
    return min(1.0, max(-1.0, r))


def step_reward(outcome: MoveKind, at_goal: bool, r_agg: float, lambda_stay: float) -> float:
    if at_goal:
        return 1.0
    if outcome is MoveKind.STAY:
        return -lambda_stay
    if outcome is MoveKind.MOVED:
        return r_agg
    return -1.0


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def td_targets(brain: AgentBrain, rewards: np.ndarray, next_states: np.ndarray,
               dones: np.ndarray) -> np.ndarray:
    next_actions = np.argmax(brain.target_actor(next_states), axis=1)
    q_next = brain.target_critic(brain.critic_features(next_states, brain.action_table[next_actions]))[:, 0]
    return rewards + brain.gamma * (1.0 - dones) * q_next


def critic_loss_and_grad(brain: AgentBrain, states, actions, targets) -> tuple[float, np.ndarray]:
    """Mean squared TD error and its gradient w.r.t. the critic parameters."""
    q, cache = brain.critic.forward(brain.critic_features(states, brain.action_table[actions]))
    diff = q[:, 0] - targets
    loss = float(np.mean(diff * diff))
    grad, _ = brain.critic.backward(cache, (2.0 / len(diff)) * diff[:, None], input_grad=False)
    return loss, grad


def actor_loss_and_grad(brain: AgentBrain, states: np.ndarray) -> tuple[float, np.ndarray]:
    """-mean Q(s, softmax(logits) @ action_table) and its actor-parameter gradient."""
    logits, acache = brain.actor.forward(states)
    probs = _softmax(logits)
    q, ccache = brain.critic.forward(brain.critic_features(states, probs @ brain.action_table))
    n = len(states)
    _, g_in = brain.critic.backward(ccache, np.full((n, 1), -1.0 / n), param_grad=False)
    g_probs = g_in[:, brain.state_dim:] @ brain.action_table.T
    g_logits = probs * (g_probs - np.sum(probs * g_probs, axis=1, keepdims=True))
    grad, _ = brain.actor.backward(acache, g_logits, input_grad=False)
    return float(-q.mean()), grad


def update(brain: AgentBrain, rng: np.random.Generator) -> UpdateStats | None:
    """One critic step, one actor step and both soft target updates; None if the buffer is short."""
    if not brain.buffer.ready(brain.batch_size):
        return None
    states, actions, rewards, next_states, dones = brain.buffer.sample(brain.batch_size, rng)
    targets = td_targets(brain, rewards, next_states, dones)
    c_loss, c_grad = critic_loss_and_grad(brain, states, actions, targets)
    brain.critic_opt.step(brain.critic.params, c_grad)
    a_loss, a_grad = actor_loss_and_grad(brain, states)
    brain.actor_opt.step(brain.actor.params, a_grad)
    soft_update(brain.target_critic, brain.critic, brain.tau)
    soft_update(brain.target_actor, brain.actor, brain.tau)
    return UpdateStats(c_loss, a_loss)

