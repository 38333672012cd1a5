"""Epoch/cycle/episode training loop wiring all the pieces together.

Per cycle: collect episodes (optionally on worker threads, committed in
episode order so worker count never changes results), store them, score the
buffer, and turn scores into trajectory-selection probabilities. In ``acdc``
and ``fixed_lambda`` modes the score ranking trains the contrastive encoder
first and selection probabilities come from encoding norms; the ``ac_*``
ablations use the scores directly; ``her_uniform`` skips all of it. Agent
updates then draw prioritized, hindsight-relabeled batches.

Per epoch: a seeded deterministic evaluation pass, one metrics row, one
checkpoint. Identical config + seed reproduces metrics.csv byte-for-byte.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .agent import DdpgAgent
from .config import RunConfig, config_to_dict, mode_string
from .contrastive import EncoderNet, extract_key_frames, select_pairs, \
    sampling_probabilities, train_encoder
from .curriculum import CurriculumState, score_buffer
from .envs import GoalEnv, make_env
from .nn import Adam, load_params, save_params
from .replay import ReplayBuffer, Trajectory

Array = np.ndarray

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "epoch", "episodes_seen", "success_rate", "train_success_rate", "lambda",
    "eta", "mean_F", "mu_pos_norm", "mu_neg_norm", "actor_loss", "critic_loss",
    "encoder_loss",
)

_MASK64 = (1 << 64) - 1

# rng stream domains hung off the run seed
_DOM_RESET, _DOM_NOISE, _DOM_EVAL, _DOM_SAMPLER, _DOM_AGENT, _DOM_ENCODER, _DOM_PAIRS = range(7)


def derive_seed(seed: int, *key: int) -> int:
    ss = np.random.SeedSequence(entropy=seed & _MASK64, spawn_key=tuple(k & _MASK64 for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class RunMetrics:
    rows: list[dict]
    cumulative_regret: float
    ttt: dict[float, int | None]


def cumulative_regret(success_rates) -> float:
    """Sum of (1 - success_rate) over epochs."""
    rates = list(success_rates)
    if not rates:
        raise ValueError("need at least one success rate")
    return float(sum(1.0 - s for s in rates))


def time_to_threshold(success_rates, theta: float) -> int | None:
    """1-based index of the first epoch reaching theta, or None if never."""
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must be in (0, 1]")
    for i, s in enumerate(success_rates, start=1):
        if s >= theta:
            return i
    return None


def rollout_episode(env: GoalEnv, agent: DdpgAgent, reset_seed: int, noise_seed: int,
                    episode_id: int, explore: bool, random_eps: float = 0.0) -> Trajectory:
    """Play one episode; pure given (agent params, seeds), so safe on worker threads."""
    rng = np.random.default_rng(noise_seed & _MASK64)
    st = env.reset(reset_seed)
    states = [st.state]
    achieved = [st.achieved_goal]
    actions = []
    reward = -1.0
    done = False
    while not done:
        take_random = explore and rng.random() < random_eps
        if take_random:
            action = rng.uniform(-env.spec.action_bound, env.spec.action_bound,
                                 size=env.spec.action_dim)
        else:
            action = agent.act(st.state, st.desired_goal, explore=explore, rng=rng)
        st, reward, done = env.step(st, action)
        actions.append(action)
        states.append(st.state)
        achieved.append(st.achieved_goal)
    return Trajectory(states=np.stack(states), actions=np.stack(actions),
                      achieved_goals=np.stack(achieved), desired_goal=st.desired_goal,
                      episode_id=episode_id, success=reward == 0.0)


def evaluate(agent: DdpgAgent, env: GoalEnv, n_episodes: int, seed: int) -> float:
    """Deterministic-policy success rate over seeded evaluation goals."""
    if n_episodes < 1:
        raise ValueError("need at least one evaluation episode")
    wins = 0
    for i in range(n_episodes):
        st = env.reset(derive_seed(seed, i))
        done = False
        reward = -1.0
        while not done:
            st, reward, done = env.step(st, agent.act(st.state, st.desired_goal, explore=False))
        wins += reward == 0.0
    return wins / n_episodes


def _format_cell(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def metrics_csv_text(rows: list[dict]) -> str:
    lines = [",".join(METRICS_HEADER)]
    for row in rows:
        lines.append(",".join(_format_cell(row[k]) for k in METRICS_HEADER))
    return "\n".join(lines) + "\n"


def _uniform(n: int) -> Array:
    return np.full(n, 1.0 / n)


def _weights_to_probs(weights: Array) -> Array:
    total = float(weights.sum())
    if total <= 0.0:
        return _uniform(len(weights))
    return weights / total


class _Coordinator:
    """Owns buffer, curriculum, encoder and agent for one training run."""

    def __init__(self, cfg: RunConfig):
        cfg.validate()
        self.cfg = cfg
        self.env = make_env(cfg.env_name, cfg.env_epsilon, cfg.env_horizon)
        spec = self.env.spec
        self.agent = DdpgAgent(
            np.random.default_rng(derive_seed(cfg.seed, _DOM_AGENT)),
            state_dim=spec.state_dim, goal_dim=spec.goal_dim,
            action_dim=spec.action_dim, action_bound=spec.action_bound,
            gamma=cfg.agent_gamma, tau_polyak=cfg.agent_tau,
            noise_sigma=cfg.agent_noise_sigma, hidden=cfg.agent_hidden,
            actor_lr=cfg.agent_actor_lr, critic_lr=cfg.agent_critic_lr,
            goal_slice=self.env.goal_slice,
            agent_slice=self.env.agent_slice)
        self.buffer = ReplayBuffer(cfg.replay_capacity, spec.epsilon)
        self.sampler_rng = np.random.default_rng(derive_seed(cfg.seed, _DOM_SAMPLER))

        self.uses_scoring = cfg.mode in ("acdc", "fixed_lambda", "ac_only",
                                         "ac_d_only", "ac_q_only")
        self.uses_encoder = cfg.mode in ("acdc", "fixed_lambda")
        self.curriculum = None
        self.encoder = None
        self.encoder_opt = None
        self.encoder_rng = None
        if self.uses_scoring:
            lambda0 = cfg.ac_lambda0
            eta_base = cfg.ac_eta_base
            if cfg.mode == "fixed_lambda":
                lambda0 = cfg.fixed_lambda_value
                eta_base = 0.0
            self.curriculum = CurriculumState(
                lambda0=lambda0, eta_base=eta_base, theta_low=cfg.ac_theta_low,
                theta_high=cfg.ac_theta_high, alpha_ema=cfg.ac_alpha_ema)
        if self.uses_encoder:
            self.encoder = EncoderNet(
                np.random.default_rng(derive_seed(cfg.seed, _DOM_ENCODER)),
                goal_dim=spec.goal_dim, lstm_hidden=cfg.dc_lstm_hidden,
                embed_dim=cfg.dc_embed_dim, z_dim=cfg.dc_z_dim,
                alpha_temp=cfg.dc_alpha_temp, beta_norm=cfg.dc_beta_norm,
                margin=cfg.dc_margin, key_frames=cfg.dc_key_frames,
                lambda_raw=cfg.dc_lambda_raw)
            self.encoder_opt = Adam(self.encoder.params(), lr=cfg.dc_lr)
            self.encoder_rng = np.random.default_rng(derive_seed(cfg.seed, _DOM_PAIRS))

        self.score_cache: dict[int, tuple[float, float]] = {}
        self.success_window: list[bool] = []
        self.episodes_seen = 0
        # rolling per-epoch diagnostics
        self.last_lambda = float("nan")
        self.last_eta = float("nan")
        self.last_mean_f = float("nan")
        self.last_mu_pos = float("nan")
        self.last_mu_neg = float("nan")

    # -- rollout collection ------------------------------------------------

    def collect_cycle(self) -> None:
        cfg = self.cfg
        first = self.episodes_seen
        indices = range(first, first + cfg.episodes_per_cycle)

        def job(episode_index: int) -> Trajectory:
            return rollout_episode(
                self.env, self.agent,
                reset_seed=derive_seed(cfg.seed, _DOM_RESET, episode_index),
                noise_seed=derive_seed(cfg.seed, _DOM_NOISE, episode_index),
                episode_id=episode_index, explore=True,
                random_eps=cfg.agent_random_eps)

        if cfg.rollout_workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.rollout_workers) as pool:
                trajectories = list(pool.map(job, indices))
        else:
            trajectories = [job(i) for i in indices]
        # commit strictly in episode order, whatever the completion order
        for traj in sorted(trajectories, key=lambda tr: tr.episode_id):
            self.buffer.store(traj)
            self.success_window.append(traj.success)
        del self.success_window[:-cfg.ac_success_window]
        self.episodes_seen += cfg.episodes_per_cycle

    def training_success_rate(self) -> float:
        if not self.success_window:
            return 0.0
        return sum(self.success_window) / len(self.success_window)

    # -- per-cycle selection probabilities ----------------------------------

    def cycle_probabilities(self) -> tuple[Array, list[float]]:
        """Returns (trajectory probabilities, encoder loss trace for this cycle)."""
        cfg = self.cfg
        n = len(self.buffer)
        if cfg.mode == "her_uniform":
            return _uniform(n), []

        self.curriculum.s_r = self.training_success_rate()
        scores = score_buffer(self.buffer, self.curriculum, sigma=cfg.ac_sigma,
                              lambda_cap=cfg.ac_lambda_cap, cache=self.score_cache)
        self.last_lambda = scores[0].lambda_used
        self.last_eta = self.curriculum.eta_previous
        self.last_mean_f = float(np.mean([s.F for s in scores]))

        if cfg.mode == "ac_d_only":
            return _weights_to_probs(np.array([s.d_norm for s in scores])), []
        if cfg.mode == "ac_q_only":
            return _weights_to_probs(np.array([s.q for s in scores])), []
        if cfg.mode == "ac_only":
            return _weights_to_probs(np.array([s.F for s in scores])), []

        # acdc / fixed_lambda: encoder-guided selection
        if n < 2:
            return _uniform(n), []
        lam = scores[0].lambda_used
        pairs = select_pairs(scores, cfg.dc_tau_p, cfg.dc_tau_n)
        steps = max(1, cfg.updates_per_cycle // cfg.dc_update_every)
        trace = train_encoder(self.encoder, self.buffer, pairs, lam, steps,
                              adam=self.encoder_opt, rng=self.encoder_rng,
                              pair_batch=cfg.dc_pair_batch)
        self._record_pair_norms(pairs, lam)
        return sampling_probabilities(self.encoder, self.buffer, lam), trace

    def _record_pair_norms(self, pairs, lam: float) -> None:
        pos = np.stack([extract_key_frames(self.buffer.get(e), self.encoder.key_frames)
                        for e in pairs.positives])
        neg = np.stack([extract_key_frames(self.buffer.get(e), self.encoder.key_frames)
                        for e in pairs.negatives])
        z_pos, _ = self.encoder.encode_batch(pos, lam)
        z_neg, _ = self.encoder.encode_batch(neg, lam)
        self.last_mu_pos = float(np.linalg.norm(z_pos, axis=1).mean())
        self.last_mu_neg = float(np.linalg.norm(z_neg, axis=1).mean())

    # -- checkpoints --------------------------------------------------------

    def save_checkpoint(self, directory: str) -> None:
        os.makedirs(directory, exist_ok=True)
        save_params(os.path.join(directory, "agent.json"), self.agent.params())
        if self.encoder is not None:
            save_params(os.path.join(directory, "encoder.json"), self.encoder.params())
        meta = {
            "version": __version__,
            "env": {"name": self.cfg.env_name, "epsilon": self.env.spec.epsilon,
                    "horizon": self.env.spec.horizon},
            "agent": {"hidden": self.cfg.agent_hidden, "gamma": self.cfg.agent_gamma,
                      "tau": self.cfg.agent_tau, "noise_sigma": self.cfg.agent_noise_sigma},
        }
        with open(os.path.join(directory, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)


def run_training(cfg: RunConfig, out_dir: str | None = None) -> RunMetrics:
    """Train per the config; write metrics.csv, manifest.json and checkpoints."""
    coord = _Coordinator(cfg)
    started = time.time()
    started_iso = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(started))
    rows: list[dict] = []

    for epoch in range(1, cfg.epochs + 1):
        actor_losses: list[float] = []
        critic_losses: list[float] = []
        encoder_losses: list[float] = []
        for cycle in range(1, cfg.cycles_per_epoch + 1):
            try:
                coord.collect_cycle()
                probs, trace = coord.cycle_probabilities()
                encoder_losses.extend(trace)
                for _ in range(cfg.updates_per_cycle):
                    batch = coord.buffer.sample_batch(probs, cfg.batch_size,
                                                      cfg.her_k, coord.sampler_rng)
                    critic_loss, actor_loss = coord.agent.update(batch)
                    coord.agent.soft_update()
                    critic_losses.append(critic_loss)
                    actor_losses.append(actor_loss)
            except Exception as err:
                raise RuntimeError(f"epoch {epoch} cycle {cycle}: {err}") from err

        success = evaluate(coord.agent, coord.env, cfg.eval_episodes,
                           derive_seed(cfg.seed, _DOM_EVAL, epoch))
        rows.append({
            "epoch": epoch,
            "episodes_seen": coord.episodes_seen,
            "success_rate": success,
            "train_success_rate": coord.training_success_rate(),
            "lambda": coord.last_lambda,
            "eta": coord.last_eta,
            "mean_F": coord.last_mean_f,
            "mu_pos_norm": coord.last_mu_pos,
            "mu_neg_norm": coord.last_mu_neg,
            "actor_loss": float(np.mean(actor_losses)) if actor_losses else float("nan"),
            "critic_loss": float(np.mean(critic_losses)) if critic_losses else float("nan"),
            "encoder_loss": float(np.mean(encoder_losses)) if encoder_losses else float("nan"),
        })
        log.info("epoch %d/%d: eval success %.3f train %.3f lambda %.4g",
                 epoch, cfg.epochs, success, rows[-1]["train_success_rate"],
                 rows[-1]["lambda"])
        if out_dir is not None:
            coord.save_checkpoint(os.path.join(out_dir, "checkpoints", f"epoch_{epoch}"))

    curve = [row["success_rate"] for row in rows]
    metrics = RunMetrics(
        rows=rows,
        cumulative_regret=cumulative_regret(curve),
        ttt={theta: time_to_threshold(curve, theta) for theta in cfg.metrics_thresholds},
    )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.csv"), "w") as fh:
            fh.write(metrics_csv_text(rows))
        finished = time.time()
        manifest = {
            "config": config_to_dict(cfg),
            "seed": cfg.seed,
            "mode": mode_string(cfg),
            "code_version": __version__,
            "config_hash": _config_hash(cfg),
            "started_at": started_iso,
            "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(finished)),
            "run_seconds": finished - started,
            "episodes_total": coord.episodes_seen,
            "derived": {
                "cumulative_regret": metrics.cumulative_regret,
                "ttt": {repr(float(theta)): metrics.ttt[theta] for theta in metrics.ttt},
            },
        }
        with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    return metrics


def _config_hash(cfg: RunConfig) -> str:
    import hashlib
    blob = json.dumps({"config": config_to_dict(cfg), "seed": cfg.seed,
                       "version": __version__}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def load_checkpoint_agent(checkpoint_dir: str) -> tuple[DdpgAgent, GoalEnv]:
    """Rebuild an agent and its environment from a checkpoint directory."""
    with open(os.path.join(checkpoint_dir, "meta.json")) as fh:
        meta = json.load(fh)
    env = make_env(meta["env"]["name"], meta["env"]["epsilon"], meta["env"]["horizon"])
    spec = env.spec
    agent = DdpgAgent(np.random.default_rng(0), state_dim=spec.state_dim,
                      goal_dim=spec.goal_dim, action_dim=spec.action_dim,
                      action_bound=spec.action_bound, gamma=meta["agent"]["gamma"],
                      tau_polyak=meta["agent"]["tau"],
                      noise_sigma=meta["agent"]["noise_sigma"],
                      hidden=meta["agent"]["hidden"], goal_slice=env.goal_slice,
                      agent_slice=env.agent_slice)
    agent.set_params(load_params(os.path.join(checkpoint_dir, "agent.json")))
    return agent, env
