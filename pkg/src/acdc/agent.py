"""Goal-conditioned DDPG actor-critic over the in-repo dense toolkit.

The actor maps [state ; goal] through two tanh hidden layers to a tanh output
scaled by the action bound; the critic maps [state ; goal ; action] through
two relu hidden layers to a scalar. Critic targets are clipped to the
attainable return range [-1/(1-gamma), 0] implied by the sparse {-1, 0}
reward.
"""

from __future__ import annotations

import numpy as np

from .nn import Adam, Mlp
from .replay import TransitionBatch

Array = np.ndarray


class DdpgAgent:
    def __init__(self, rng: np.random.Generator, state_dim: int, goal_dim: int,
                 action_dim: int, action_bound: float,
                 gamma: float = 0.98, tau_polyak: float = 0.05,
                 noise_sigma: float = 0.2, hidden: int = 64,
                 actor_lr: float = 1e-3, critic_lr: float = 1e-3,
                 goal_slice: tuple[int, int] | None = None,
                 agent_slice: tuple[int, int] | None = None):
        if not 0.0 <= gamma < 1.0:
            raise ValueError("gamma must be in [0, 1)")
        if not 0.0 < tau_polyak <= 1.0:
            raise ValueError("tau_polyak must be in (0, 1]")
        self.state_dim = state_dim
        self.goal_dim = goal_dim
        self.action_dim = action_dim
        self.action_bound = action_bound
        self.gamma = gamma
        self.tau_polyak = tau_polyak
        self.noise_sigma = noise_sigma
        # With goal_slice set, the networks also see the goal offset
        # g - phi(s); with agent_slice too, the achieved-goal offset
        # phi(s) - agent position. Small nets learn far faster from explicit
        # offsets than from raw (s, g) alone.
        self.goal_slice = goal_slice
        self.agent_slice = agent_slice

        obs = state_dim + goal_dim
        if goal_slice is not None:
            obs += goal_dim
            if agent_slice is not None:
                obs += goal_dim
        self.actor = Mlp(rng, [obs, hidden, hidden, action_dim], "tanh", "tanh")
        self.critic = Mlp(rng, [obs + action_dim, hidden, hidden, 1], "relu", "identity")
        self.target_actor = Mlp(rng, [obs, hidden, hidden, action_dim], "tanh", "tanh")
        self.target_critic = Mlp(rng, [obs + action_dim, hidden, hidden, 1], "relu", "identity")
        self._copy_into(self.actor, self.target_actor)
        self._copy_into(self.critic, self.target_critic)
        self.actor_opt = Adam(self.actor.params(), lr=actor_lr)
        self.critic_opt = Adam(self.critic.params(), lr=critic_lr)

    @staticmethod
    def _copy_into(src: Mlp, dst: Mlp) -> None:
        dst.set_params({k: v.copy() for k, v in src.params().items()})

    def observation(self, states: Array, goals: Array) -> Array:
        """Network input for a batch of (state, goal) pairs."""
        parts = [states, goals]
        if self.goal_slice is not None:
            lo, hi = self.goal_slice
            parts.append(goals - states[:, lo:hi])
            if self.agent_slice is not None:
                alo, ahi = self.agent_slice
                parts.append(states[:, lo:hi] - states[:, alo:ahi])
        return np.concatenate(parts, axis=1)

    def act(self, state: Array, goal: Array, explore: bool,
            rng: np.random.Generator | None = None) -> Array:
        """Deterministic actor output, plus clipped Gaussian noise when exploring."""
        obs = self.observation(state[None, :], goal[None, :])
        action, _ = self.actor.forward(obs)
        action = action[0] * self.action_bound
        if explore:
            if rng is None:
                raise ValueError("exploration requires an rng")
            action = action + rng.normal(0.0, self.noise_sigma, size=self.action_dim)
        return np.clip(action, -self.action_bound, self.action_bound)

    def act_batch(self, states: Array, goals: Array) -> Array:
        actions, _ = self.actor.forward(self.observation(states, goals))
        return actions * self.action_bound

    def compute_targets(self, batch: TransitionBatch) -> Array:
        """Clipped TD targets r + gamma*(1-done)*Q'(s', pi'(s', g), g), in [-1/(1-gamma), 0]."""
        next_obs = self.observation(batch.next_states, batch.goals)
        next_actions, _ = self.target_actor.forward(next_obs)
        next_actions = next_actions * self.action_bound
        q_next, _ = self.target_critic.forward(np.concatenate([next_obs, next_actions], axis=1))
        targets = batch.rewards[:, None] + self.gamma * (1.0 - batch.dones[:, None]) * q_next
        return np.clip(targets, -1.0 / (1.0 - self.gamma), 0.0)

    def update(self, batch: TransitionBatch) -> tuple[float, float]:
        """One critic and one actor Adam step; returns (critic_loss, actor_loss)."""
        obs = self.observation(batch.states, batch.goals)
        n = len(batch)
        targets = self.compute_targets(batch)

        q, critic_cache = self.critic.forward(np.concatenate([obs, batch.actions], axis=1))
        td = q - targets
        critic_loss = float(np.mean(td * td))
        if not np.isfinite(critic_loss):
            raise FloatingPointError("critic loss became non-finite")
        _, critic_grads = self.critic.backward(critic_cache, 2.0 * td / n)
        self.critic_opt.step(self.critic.params(), critic_grads)

        pi, actor_cache = self.actor.forward(obs)
        pi_scaled = pi * self.action_bound
        q_pi, pi_critic_cache = self.critic.forward(np.concatenate([obs, pi_scaled], axis=1))
        actor_loss = float(-np.mean(q_pi))
        if not np.isfinite(actor_loss):
            raise FloatingPointError("actor loss became non-finite")
        d_critic_in, _ = self.critic.backward(pi_critic_cache, np.full_like(q_pi, -1.0 / n))
        d_actions = d_critic_in[:, obs.shape[1]:] * self.action_bound
        _, actor_grads = self.actor.backward(actor_cache, d_actions)
        self.actor_opt.step(self.actor.params(), actor_grads)

        return critic_loss, actor_loss

    def soft_update(self) -> None:
        """target <- tau*online + (1-tau)*target, per parameter block."""
        for online, target in ((self.actor, self.target_actor),
                               (self.critic, self.target_critic)):
            src = online.params()
            dst = target.params()
            for name in dst:
                dst[name] *= 1.0 - self.tau_polyak
                dst[name] += self.tau_polyak * src[name]

    def params(self) -> dict[str, Array]:
        out = {}
        for prefix, net in (("actor", self.actor), ("critic", self.critic),
                            ("target_actor", self.target_actor),
                            ("target_critic", self.target_critic)):
            for name, p in net.params().items():
                out[f"{prefix}/{name}"] = p
        return out

    def set_params(self, blocks: dict[str, Array]) -> None:
        for prefix, net in (("actor", self.actor), ("critic", self.critic),
                            ("target_actor", self.target_actor),
                            ("target_critic", self.target_critic)):
            net.set_params({k.split("/", 1)[1]: v for k, v in blocks.items()
                            if k.startswith(prefix + "/")})
