"""Adaptive curriculum scoring of replayed trajectories.

Each trajectory gets a diversity score (sum of 2x2 Gram determinants over
consecutive normalized achieved goals), a quality score (Gaussian similarity
between its final achieved goal and the desired goal), and a combined score

    F = d_norm + lambda * q

where the weight lambda = lambda0 * (1 + eta)^t grows with the scoring step t
at a rate eta gated by the current success rate (slow while struggling,
standard while learning, doubled once past the mastery threshold) and smoothed
with an EMA to avoid oscillation at the phase boundaries.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

Array = np.ndarray

log = logging.getLogger(__name__)

GROWTH_MULT_STRUGGLING = 0.5
GROWTH_MULT_LEARNING = 1.0
GROWTH_MULT_MASTERY = 2.0


@dataclass
class CurriculumState:
    """Evolving weighting state; one instance per training run."""

    lambda0: float = 0.1
    eta_base: float = 0.01
    theta_low: float = 0.3
    theta_high: float = 0.65
    alpha_ema: float = 0.7
    eta_previous: float = field(default=None)  # defaults to eta_base
    t: int = 0
    s_r: float = 0.0
    cap_events: int = 0

    def __post_init__(self):
        if not self.theta_low < self.theta_high:
            raise ValueError("theta_low must be below theta_high")
        if not 0.0 < self.alpha_ema <= 1.0:
            raise ValueError("alpha_ema must be in (0, 1]")
        if self.eta_previous is None:
            self.eta_previous = self.eta_base


@dataclass(frozen=True)
class TrajectoryScore:
    episode_id: int
    d_raw: float
    d_norm: float
    q: float
    F: float
    lambda_used: float


def partial_diversity(g_a: Array, g_b: Array) -> float:
    """Gram determinant of the two unit-normalized goals: 1 - cos^2 of their angle.

    A zero-length goal normalizes to the zero vector and contributes 0.
    """
    g_a = np.asarray(g_a, dtype=np.float64)
    g_b = np.asarray(g_b, dtype=np.float64)
    if g_a.shape != g_b.shape:
        raise ValueError(f"goal shape mismatch: {g_a.shape} vs {g_b.shape}")
    na = float(np.linalg.norm(g_a))
    nb = float(np.linalg.norm(g_b))
    ua = g_a / na if na > 0.0 else np.zeros_like(g_a)
    ub = g_b / nb if nb > 0.0 else np.zeros_like(g_b)
    # det([[ua.ua, ua.ub], [ub.ua, ub.ub]]) written out; identical inputs give exactly 0.
    aa = float((ua * ua).sum())
    bb = float((ub * ub).sum())
    ab = float((ua * ub).sum())
    return max(0.0, aa * bb - ab * ab)


def sequence_diversity(goals: Array) -> float:
    """Sum of partial diversities over a sliding window of 2 consecutive goals."""
    goals = np.asarray(goals, dtype=np.float64)
    if goals.ndim != 2:
        raise ValueError("expected [n, goal_dim] array")
    n = len(goals)
    if n < 2:
        return 0.0
    norms = np.linalg.norm(goals, axis=1, keepdims=True)
    units = np.where(norms > 0.0, goals / np.where(norms > 0.0, norms, 1.0), 0.0)
    sq = (units * units).sum(axis=1)
    dots = (units[:-1] * units[1:]).sum(axis=1)
    dets = np.maximum(0.0, sq[:-1] * sq[1:] - dots * dots)
    return float(dets.sum())


def trajectory_diversity(trajectory) -> float:
    """Diversity over achieved goals 1..T (the initial achieved goal is excluded)."""
    return sequence_diversity(trajectory.achieved_goals[1:])


def normalize_diversity(raw_scores: Array) -> Array:
    """Min-max scale against the current buffer; a flat buffer maps to all 0.5."""
    raw = np.asarray(raw_scores, dtype=np.float64)
    if raw.size == 0:
        raise ValueError("need at least one diversity score")
    lo = float(raw.min())
    hi = float(raw.max())
    if hi == lo:
        return np.full_like(raw, 0.5)
    return (raw - lo) / (hi - lo)


def quality_score(final_achieved: Array, desired: Array, sigma: float = 0.2) -> float:
    """exp(-||final - desired||^2 / (2 sigma^2)), in (0, 1]."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    final_achieved = np.asarray(final_achieved, dtype=np.float64)
    desired = np.asarray(desired, dtype=np.float64)
    if final_achieved.shape != desired.shape:
        raise ValueError(f"goal shape mismatch: {final_achieved.shape} vs {desired.shape}")
    sq_dist = float(((final_achieved - desired) ** 2).sum())
    return float(np.exp(-sq_dist / (2.0 * sigma * sigma)))


def adaptive_growth_rate(s_r: float, eta_base: float = 0.01,
                         theta_low: float = 0.3, theta_high: float = 0.65) -> float:
    """Three-tier growth rate: 0.5x below theta_low, 1x between, 2x above theta_high."""
    if s_r < theta_low:
        return eta_base * GROWTH_MULT_STRUGGLING
    if s_r <= theta_high:
        return eta_base * GROWTH_MULT_LEARNING
    return eta_base * GROWTH_MULT_MASTERY


def ema_update(state: CurriculumState) -> CurriculumState:
    """Blend the phase-gated target rate into eta: alpha*target + (1-alpha)*previous."""
    target = adaptive_growth_rate(state.s_r, state.eta_base, state.theta_low, state.theta_high)
    state.eta_previous = state.alpha_ema * target + (1.0 - state.alpha_ema) * state.eta_previous
    return state


def adaptive_weight(state: CurriculumState, lambda_cap: float = 10.0) -> float:
    """lambda0 * (1 + eta)^t, capped to keep long runs finite."""
    lam = state.lambda0 * (1.0 + state.eta_previous) ** state.t
    if lam > lambda_cap:
        state.cap_events += 1
        # first event at WARNING, the rest at DEBUG to keep long runs readable
        level = logging.WARNING if state.cap_events == 1 else logging.DEBUG
        log.log(level, "adaptive weight %.4g capped at %.4g (t=%d, event %d)",
                lam, lambda_cap, state.t, state.cap_events)
        return lambda_cap
    return lam


def score_buffer(buffer, state: CurriculumState, sigma: float = 0.2,
                 lambda_cap: float = 10.0,
                 cache: dict[int, tuple[float, float]] | None = None) -> list[TrajectoryScore]:
    """Score every buffered trajectory under one shared lambda.

    Performs exactly one EMA update and one weight evaluation, then advances
    the scoring step t. ``cache`` maps episode_id -> (d_raw, q) so unchanged
    trajectories are not re-scored across calls.
    """
    trajectories = buffer.trajectories
    if not trajectories:
        raise ValueError("cannot score an empty buffer")

    ema_update(state)
    lam = adaptive_weight(state, lambda_cap)
    state.t += 1

    if cache is None:
        cache = {}
    d_raw = np.empty(len(trajectories))
    q = np.empty(len(trajectories))
    for i, traj in enumerate(trajectories):
        hit = cache.get(traj.episode_id)
        if hit is None:
            hit = (trajectory_diversity(traj),
                   quality_score(traj.achieved_goals[-1], traj.desired_goal, sigma))
            cache[traj.episode_id] = hit
        d_raw[i], q[i] = hit
    live = {traj.episode_id for traj in trajectories}
    if len(cache) > 2 * len(live) + 64:
        for stale in [eid for eid in cache if eid not in live]:
            del cache[stale]

    d_norm = normalize_diversity(d_raw)
    return [
        TrajectoryScore(episode_id=traj.episode_id, d_raw=float(d_raw[i]),
                        d_norm=float(d_norm[i]), q=float(q[i]),
                        F=float(d_norm[i] + lam * q[i]), lambda_used=lam)
        for i, traj in enumerate(trajectories)
    ]
