"""Trajectory-granular replay with future-strategy hindsight relabeling.

The buffer stores whole episodes and evicts oldest-first. Batch sampling picks
a trajectory from a caller-supplied probability vector, a uniform step inside
it, and then swaps the desired goal for a future achieved goal with
probability k/(k+1); every reward in a batch is recomputed from the sparse
reward rule rather than trusted from the rollout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envs import sparse_reward

Array = np.ndarray


@dataclass
class Trajectory:
    """One finished episode: T+1 states/achieved goals, T actions, one desired goal."""

    states: Array          # [T+1, state_dim]
    actions: Array         # [T, action_dim]
    achieved_goals: Array  # [T+1, goal_dim]
    desired_goal: Array    # [goal_dim]
    episode_id: int
    success: bool

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        self.actions = np.asarray(self.actions, dtype=np.float64)
        self.achieved_goals = np.asarray(self.achieved_goals, dtype=np.float64)
        self.desired_goal = np.asarray(self.desired_goal, dtype=np.float64)
        if self.states.ndim != 2 or self.actions.ndim != 2 or self.achieved_goals.ndim != 2:
            raise ValueError("states, actions and achieved_goals must be 2-D arrays")
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("need exactly one more state than actions")
        if len(self.achieved_goals) != len(self.states):
            raise ValueError("need one achieved goal per state")
        if self.desired_goal.shape != (self.achieved_goals.shape[1],):
            raise ValueError("desired goal dimension mismatch")

    @property
    def horizon(self) -> int:
        return len(self.actions)


@dataclass
class RelabeledTransition:
    state: Array
    action: Array
    next_state: Array
    reward: float
    goal: Array


@dataclass
class TransitionBatch:
    """Flat arrays for agent updates, plus provenance fields for diagnostics."""

    states: Array
    actions: Array
    next_states: Array
    rewards: Array
    goals: Array
    dones: Array
    episode_ids: Array
    step_indices: Array
    relabeled: Array

    def __len__(self) -> int:
        return len(self.rewards)


def her_relabel(trajectory: Trajectory, t: int, k: int, rng: np.random.Generator,
                epsilon: float) -> list[RelabeledTransition]:
    """Draw k hindsight transitions at step t, goals uniform over future achieved goals."""
    T = trajectory.horizon
    if not 0 <= t < T:
        raise ValueError(f"step index {t} outside [0, {T})")
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = []
    for _ in range(k):
        j = int(rng.integers(t + 1, T + 1))
        goal = trajectory.achieved_goals[j].copy()
        reward = sparse_reward(trajectory.achieved_goals[t + 1], goal, epsilon)
        out.append(RelabeledTransition(
            state=trajectory.states[t].copy(),
            action=trajectory.actions[t].copy(),
            next_state=trajectory.states[t + 1].copy(),
            reward=reward,
            goal=goal,
        ))
    return out


class ReplayBuffer:
    """Bounded FIFO of trajectories with vectorized prioritized batch sampling."""

    def __init__(self, capacity: int, epsilon: float):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.epsilon = epsilon
        self.total_stored = 0
        self._trajectories: list[Trajectory] = []
        self._by_id: dict[int, Trajectory] = {}
        # Contiguous copies of the episode arrays for fast gathers.
        self._states = None
        self._actions = None
        self._agoals = None
        self._dgoals = None

    def __len__(self) -> int:
        return len(self._trajectories)

    @property
    def trajectories(self) -> list[Trajectory]:
        """Buffered trajectories, oldest first."""
        return list(self._trajectories)

    def get(self, episode_id: int) -> Trajectory:
        return self._by_id[episode_id]

    def _ensure_storage(self, traj: Trajectory) -> None:
        if self._states is None:
            T = traj.horizon
            self._states = np.zeros((self.capacity, T + 1, traj.states.shape[1]))
            self._actions = np.zeros((self.capacity, T, traj.actions.shape[1]))
            self._agoals = np.zeros((self.capacity, T + 1, traj.achieved_goals.shape[1]))
            self._dgoals = np.zeros((self.capacity, traj.desired_goal.shape[0]))

    def store(self, trajectory: Trajectory) -> None:
        self._ensure_storage(trajectory)
        if trajectory.states.shape != self._states.shape[1:]:
            raise ValueError("trajectory shape differs from buffer contents")
        if len(self._trajectories) == self.capacity:
            evicted = self._trajectories.pop(0)
            del self._by_id[evicted.episode_id]
        self._trajectories.append(trajectory)
        self._by_id[trajectory.episode_id] = trajectory
        slot = self.total_stored % self.capacity
        self._states[slot] = trajectory.states
        self._actions[slot] = trajectory.actions
        self._agoals[slot] = trajectory.achieved_goals
        self._dgoals[slot] = trajectory.desired_goal
        self.total_stored += 1

    def _physical(self, logical: Array) -> Array:
        if self.total_stored <= self.capacity:
            return logical
        head = self.total_stored % self.capacity
        return (head + logical) % self.capacity

    def sample_batch(self, trajectory_probs: Array, batch_size: int, k: int,
                     rng: np.random.Generator) -> TransitionBatch:
        n = len(self._trajectories)
        if n == 0:
            raise ValueError("cannot sample from an empty buffer")
        probs = np.asarray(trajectory_probs, dtype=np.float64)
        if probs.shape != (n,):
            raise ValueError(f"expected {n} trajectory probabilities, got shape {probs.shape}")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError("trajectory probabilities must sum to 1")

        T = self._actions.shape[1]
        logical = rng.choice(n, size=batch_size, p=probs / probs.sum())
        phys = self._physical(logical)
        t_idx = rng.integers(0, T, size=batch_size)
        relabel = rng.random(batch_size) < (k / (k + 1.0) if k > 0 else 0.0)
        future = rng.integers(t_idx + 1, T + 1)

        goals = self._dgoals[phys].copy()
        goals[relabel] = self._agoals[phys[relabel], future[relabel]]
        ag_next = self._agoals[phys, t_idx + 1]
        dist = np.linalg.norm(ag_next - goals, axis=1)
        rewards = np.where(dist <= self.epsilon, 0.0, -1.0)
        dones = (t_idx + 1 == T).astype(np.float64)
        episode_ids = np.array([self._trajectories[i].episode_id for i in logical])

        return TransitionBatch(
            states=self._states[phys, t_idx],
            actions=self._actions[phys, t_idx],
            next_states=self._states[phys, t_idx + 1],
            rewards=rewards,
            goals=goals,
            dones=dones,
            episode_ids=episode_ids,
            step_indices=t_idx.copy(),
            relabeled=relabel.copy(),
        )
