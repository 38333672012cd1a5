import numpy as np
import pytest

from acdc.replay import Trajectory


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_trajectory(rng, horizon=10, state_dim=6, action_dim=2, goal_dim=2,
                    episode_id=0, desired_goal=None, achieved_goals=None):
    """Random but internally consistent trajectory for buffer/scoring tests."""
    states = rng.normal(size=(horizon + 1, state_dim))
    if achieved_goals is None:
        achieved_goals = rng.normal(size=(horizon + 1, goal_dim))
    else:
        achieved_goals = np.asarray(achieved_goals, dtype=np.float64)
    states[:, 2:2 + goal_dim] = achieved_goals
    actions = rng.uniform(-1.0, 1.0, size=(horizon, action_dim))
    if desired_goal is None:
        desired_goal = rng.normal(size=goal_dim)
    return Trajectory(states=states, actions=actions, achieved_goals=achieved_goals,
                      desired_goal=desired_goal, episode_id=episode_id, success=False)


@pytest.fixture
def trajectory_factory(rng):
    counter = {"next": 0}

    def factory(**kwargs):
        if "episode_id" not in kwargs:
            kwargs["episode_id"] = counter["next"]
            counter["next"] += 1
        return make_trajectory(rng, **kwargs)

    return factory
