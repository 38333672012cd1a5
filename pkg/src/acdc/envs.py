"""Self-contained goal-conditioned 2-D tasks with sparse binary rewards.

Both tasks are deterministic: all randomness lives in the seeded reset (start
configuration and desired goal) and in the caller's exploration noise, so an
action log replays bit-exactly. The goal projection ``phi`` is a fixed slice
of the state vector, and the reward is 0 when the achieved goal lies within
``epsilon`` of the desired goal (L2) and -1 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

Array = np.ndarray

_MASK64 = (1 << 64) - 1


def rng_from_seed(rng_seed: int) -> np.random.Generator:
    """Generator from any 64-bit integer seed (negative values wrap)."""
    return np.random.default_rng(int(rng_seed) & _MASK64)


@dataclass(frozen=True)
class GoalSpaceSpec:
    state_dim: int
    action_dim: int
    goal_dim: int
    epsilon: float
    horizon: int
    action_bound: float

    def __post_init__(self):
        if self.goal_dim > self.state_dim:
            raise ValueError("goal_dim must not exceed state_dim")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.horizon < 2:
            raise ValueError("horizon must be at least 2")
        if self.action_bound <= 0.0:
            raise ValueError("action_bound must be positive")


@dataclass(frozen=True)
class EnvState:
    state: Array
    achieved_goal: Array
    desired_goal: Array
    step_index: int
    action_was_clipped: bool = field(default=False, compare=False)


def sparse_reward(achieved: Array, desired: Array, epsilon: float) -> float:
    """0 if ||achieved - desired|| <= epsilon, else -1."""
    achieved = np.asarray(achieved, dtype=np.float64)
    desired = np.asarray(desired, dtype=np.float64)
    if achieved.shape != desired.shape:
        raise ValueError(f"goal shape mismatch: {achieved.shape} vs {desired.shape}")
    dist = float(np.linalg.norm(achieved - desired))
    return 0.0 if dist <= epsilon else -1.0


class GoalEnv:
    """Base: pure transition functions over EnvState; one exclusive owner per instance."""

    spec: GoalSpaceSpec
    goal_slice: tuple[int, int]       # phi is this slice of the state vector
    agent_slice: tuple[int, int] | None = None  # slice holding the controlled point, if distinct

    def phi(self, state: Array) -> Array:
        """Project a state vector onto the goal space."""
        lo, hi = self.goal_slice
        return np.asarray(state, dtype=np.float64)[lo:hi]

    def reset(self, rng_seed: int) -> EnvState:
        raise NotImplementedError

    def step(self, env_state: EnvState, action: Array) -> tuple[EnvState, float, bool]:
        raise NotImplementedError

    def _prepare_action(self, action: Array) -> tuple[Array, bool]:
        action = np.asarray(action, dtype=np.float64)
        if action.shape != (self.spec.action_dim,):
            raise ValueError(f"expected action shape ({self.spec.action_dim},), got {action.shape}")
        bound = self.spec.action_bound
        clipped = bool(np.any(np.abs(action) > bound))
        return np.clip(action, -bound, bound), clipped

    def _check_not_done(self, env_state: EnvState) -> None:
        if env_state.step_index >= self.spec.horizon:
            raise RuntimeError("cannot step a finished episode")


class PointPushEnv(GoalEnv):
    """Agent disc pushes a point object toward a goal on the unit square.

    State is [agent_xy, object_xy, object_velocity]; the achieved goal is the
    object position. Contact is sticky: while the agent is within
    ``contact_radius`` of the object the object is carried along with the
    agent's displacement, then pushed out radially so it never sits inside the
    contact circle (a magnetic-pusher abstraction of table-top pushing).
    """

    MOVE_SCALE = 0.10
    CONTACT_RADIUS = 0.12
    goal_slice = (2, 4)
    agent_slice = (0, 2)

    def __init__(self, epsilon: float = 0.05, horizon: int = 50):
        self.spec = GoalSpaceSpec(state_dim=6, action_dim=2, goal_dim=2,
                                  epsilon=epsilon, horizon=horizon, action_bound=1.0)

    def reset(self, rng_seed: int) -> EnvState:
        # Layout mirrors table-top push benchmarks where the pusher is servoed
        # to the block before the episode: the agent starts in contact at a
        # random bearing and separation, and the goal is sampled in a local
        # box around the object. The transport and parking skills still have
        # to be discovered under the sparse reward.
        rng = rng_from_seed(rng_seed)
        obj = rng.uniform(0.25, 0.75, size=2)
        angle = rng.uniform(-np.pi, np.pi)
        separation = self.CONTACT_RADIUS * rng.uniform(0.4, 0.95)
        offset = separation * np.array([np.cos(angle), np.sin(angle)])
        agent = np.clip(obj - offset, 0.0, 1.0)
        while True:
            goal = np.clip(obj + rng.uniform(-0.3, 0.3, size=2), 0.2, 0.8)
            if np.linalg.norm(goal - obj) > 3.0 * self.spec.epsilon:
                break
        state = np.concatenate([agent, obj, np.zeros(2)])
        return EnvState(state=state, achieved_goal=self.phi(state),
                        desired_goal=goal, step_index=0)

    def step(self, env_state: EnvState, action: Array) -> tuple[EnvState, float, bool]:
        self._check_not_done(env_state)
        action, clipped = self._prepare_action(action)
        agent = env_state.state[0:2]
        obj = env_state.state[2:4]

        delta = self.MOVE_SCALE * action
        agent_new = np.clip(agent + delta, 0.0, 1.0)
        if float(np.linalg.norm(obj - agent)) <= self.CONTACT_RADIUS + 1e-9:
            # Carried: the object keeps its exact offset from the agent, so a
            # zero action leaves the state bit-identical.
            obj_new = obj + (agent_new - agent)
        else:
            obj_new = obj.copy()
            gap = obj_new - agent_new
            dist = float(np.linalg.norm(gap))
            if dist < self.CONTACT_RADIUS:
                # Fresh contact from outside: park the object on the circle.
                direction = gap / dist if dist > 1e-12 else np.array([1.0, 0.0])
                obj_new = agent_new + self.CONTACT_RADIUS * direction
        obj_new = np.clip(obj_new, 0.0, 1.0)
        velocity = obj_new - obj

        state = np.concatenate([agent_new, obj_new, velocity])
        achieved = self.phi(state)
        reward = sparse_reward(achieved, env_state.desired_goal, self.spec.epsilon)
        step_index = env_state.step_index + 1
        done = step_index == self.spec.horizon
        new_state = EnvState(state=state, achieved_goal=achieved,
                             desired_goal=env_state.desired_goal.copy(),
                             step_index=step_index, action_was_clipped=clipped)
        return new_state, reward, done


class Reacher2Env(GoalEnv):
    """Kinematic 2-link planar arm; the achieved goal is the end-effector xy.

    State is [cos t1, sin t1, cos t2, sin t2, ee_x, ee_y] and actions are
    joint velocity commands integrated at a fixed rate.
    """

    LINK_1 = 0.5
    LINK_2 = 0.5
    JOINT_RATE = 0.15
    goal_slice = (4, 6)

    def __init__(self, epsilon: float = 0.02, horizon: int = 50):
        self.spec = GoalSpaceSpec(state_dim=6, action_dim=2, goal_dim=2,
                                  epsilon=epsilon, horizon=horizon, action_bound=1.0)

    def _state_from_angles(self, t1: float, t2: float) -> Array:
        ee = np.array([
            self.LINK_1 * np.cos(t1) + self.LINK_2 * np.cos(t1 + t2),
            self.LINK_1 * np.sin(t1) + self.LINK_2 * np.sin(t1 + t2),
        ])
        return np.array([np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2), ee[0], ee[1]])

    def reset(self, rng_seed: int) -> EnvState:
        rng = rng_from_seed(rng_seed)
        t1 = rng.uniform(-np.pi, np.pi)
        t2 = rng.uniform(-np.pi, np.pi)
        radius = rng.uniform(0.25, 0.95)
        angle = rng.uniform(-np.pi, np.pi)
        goal = radius * np.array([np.cos(angle), np.sin(angle)])
        state = self._state_from_angles(t1, t2)
        return EnvState(state=state, achieved_goal=self.phi(state),
                        desired_goal=goal, step_index=0)

    def step(self, env_state: EnvState, action: Array) -> tuple[EnvState, float, bool]:
        self._check_not_done(env_state)
        action, clipped = self._prepare_action(action)
        s = env_state.state
        t1 = float(np.arctan2(s[1], s[0])) + self.JOINT_RATE * action[0]
        t2 = float(np.arctan2(s[3], s[2])) + self.JOINT_RATE * action[1]
        state = self._state_from_angles(t1, t2)
        achieved = self.phi(state)
        reward = sparse_reward(achieved, env_state.desired_goal, self.spec.epsilon)
        step_index = env_state.step_index + 1
        done = step_index == self.spec.horizon
        new_state = EnvState(state=state, achieved_goal=achieved,
                             desired_goal=env_state.desired_goal.copy(),
                             step_index=step_index, action_was_clipped=clipped)
        return new_state, reward, done


ENV_NAMES = ("point_push", "reacher2")


def make_env(name: str, epsilon: float | None = None, horizon: int | None = None) -> GoalEnv:
    if name == "point_push":
        return PointPushEnv(epsilon=0.05 if epsilon is None else epsilon,
                            horizon=50 if horizon is None else horizon)
    if name == "reacher2":
        return Reacher2Env(epsilon=0.02 if epsilon is None else epsilon,
                           horizon=50 if horizon is None else horizon)
    raise ValueError(f"unknown environment {name!r}; choose from {ENV_NAMES}")


def point_push_oracle(env: PointPushEnv, env_state: EnvState) -> Array:
    """Scripted controller: touch the object, then carry it onto the goal.

    While carried the object keeps its exact offset from the agent, so walking
    to ``goal - offset`` drops the object on the goal. Used as a known-good
    policy for evaluation sanity checks.
    """
    agent = env_state.state[0:2]
    obj = env_state.state[2:4]
    goal = env_state.desired_goal
    move = env.MOVE_SCALE

    if float(np.linalg.norm(goal - obj)) <= 0.5 * env.spec.epsilon:
        return np.zeros(2)

    rel = obj - agent
    if float(np.linalg.norm(rel)) <= env.CONTACT_RADIUS + 1e-9:
        target = goal - rel  # carried: place the object exactly on the goal
    else:
        target = obj  # first touch: walk straight at the object

    delta = (target - agent) / move
    scale = float(np.max(np.abs(delta)))
    if scale > 1.0:
        delta = delta / scale
    return delta
