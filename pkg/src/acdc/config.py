"""Flat key/value run configuration.

Config files are plain text, one ``key = value`` per line, ``#`` comments.
Every key is validated against the registry below; unknown keys are rejected
so typos fail loudly. The same keys can be overridden from the CLI.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields

MODES = ("acdc", "her_uniform", "ac_only", "ac_d_only", "ac_q_only", "fixed_lambda")

_FIXED_LAMBDA_RE = re.compile(r"^fixed_lambda\(([^)]+)\)$")


@dataclass
class RunConfig:
    # environment
    env_name: str = "point_push"
    env_epsilon: float | None = None
    env_horizon: int | None = None
    # experiment loop (desk-scale defaults)
    seed: int = 0
    epochs: int = 50
    cycles_per_epoch: int = 10
    episodes_per_cycle: int = 10
    updates_per_cycle: int = 10
    eval_episodes: int = 20
    mode: str = "acdc"
    fixed_lambda_value: float | None = None
    rollout_workers: int = 1
    batch_size: int = 128
    metrics_thresholds: tuple[float, ...] = (0.5, 0.9)
    # replay
    replay_capacity: int = 10_000
    her_k: int = 4
    # adaptive curriculum
    ac_lambda0: float = 0.1
    ac_eta_base: float = 0.01
    ac_theta_low: float = 0.3
    ac_theta_high: float = 0.65
    ac_alpha_ema: float = 0.7
    ac_sigma: float = 0.2
    ac_lambda_cap: float = 10.0
    ac_window: int = 2
    ac_success_window: int = 100
    # contrastive control
    dc_tau_p: float = 0.3
    dc_tau_n: float = 0.3
    dc_alpha_temp: float = 0.1
    dc_beta_norm: float = 1.0
    dc_margin: float = 0.5
    dc_z_dim: int = 32
    dc_lstm_hidden: int = 64
    dc_embed_dim: int = 8
    dc_update_every: int = 5
    dc_key_frames: int = 5
    dc_lambda_raw: bool = False
    dc_lr: float = 1e-3
    dc_pair_batch: int = 256
    # agent
    agent_gamma: float = 0.98
    agent_tau: float = 0.001
    agent_noise_sigma: float = 0.2
    agent_random_eps: float = 0.2
    agent_hidden: int = 64
    agent_actor_lr: float = 1e-3
    agent_critic_lr: float = 1e-3

    def validate(self) -> "RunConfig":
        for name in ("epochs", "cycles_per_epoch", "episodes_per_cycle",
                     "updates_per_cycle", "eval_episodes", "batch_size",
                     "rollout_workers", "replay_capacity", "ac_success_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.her_k < 0:
            raise ValueError("her.k must be nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.mode == "fixed_lambda" and self.fixed_lambda_value is None:
            raise ValueError("fixed_lambda mode needs a value, e.g. fixed_lambda(0.5)")
        if self.ac_window != 2:
            raise ValueError("only the sliding window of size 2 is supported (ac.window = 2)")
        if not self.ac_theta_low < self.ac_theta_high:
            raise ValueError("ac.theta_low must be below ac.theta_high")
        if self.dc_tau_p <= 0 or self.dc_tau_n <= 0 or self.dc_tau_p + self.dc_tau_n > 1:
            raise ValueError("dc.tau_p and dc.tau_n must be positive and sum to at most 1")
        return self


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"cannot parse boolean from {text!r}")


def _parse_thresholds(text: str) -> tuple[float, ...]:
    vals = tuple(float(part) for part in text.split(",") if part.strip())
    if not vals:
        raise ValueError("metrics.thresholds needs at least one value")
    return vals


# config key -> (RunConfig field, parser)
KEY_REGISTRY: dict[str, tuple[str, object]] = {
    "env.name": ("env_name", str),
    "env.epsilon": ("env_epsilon", float),
    "env.horizon": ("env_horizon", int),
    "seed": ("seed", int),
    "epochs": ("epochs", int),
    "cycles_per_epoch": ("cycles_per_epoch", int),
    "episodes_per_cycle": ("episodes_per_cycle", int),
    "updates_per_cycle": ("updates_per_cycle", int),
    "eval_episodes": ("eval_episodes", int),
    "mode": ("mode", str),
    "rollout_workers": ("rollout_workers", int),
    "batch_size": ("batch_size", int),
    "metrics.thresholds": ("metrics_thresholds", _parse_thresholds),
    "replay.capacity": ("replay_capacity", int),
    "her.k": ("her_k", int),
    "ac.lambda0": ("ac_lambda0", float),
    "ac.eta_base": ("ac_eta_base", float),
    "ac.theta_low": ("ac_theta_low", float),
    "ac.theta_high": ("ac_theta_high", float),
    "ac.alpha_ema": ("ac_alpha_ema", float),
    "ac.sigma": ("ac_sigma", float),
    "ac.lambda_cap": ("ac_lambda_cap", float),
    "ac.window": ("ac_window", int),
    "ac.success_window": ("ac_success_window", int),
    "dc.tau_p": ("dc_tau_p", float),
    "dc.tau_n": ("dc_tau_n", float),
    "dc.alpha_temp": ("dc_alpha_temp", float),
    "dc.beta_norm": ("dc_beta_norm", float),
    "dc.margin": ("dc_margin", float),
    "dc.z_dim": ("dc_z_dim", int),
    "dc.lstm_hidden": ("dc_lstm_hidden", int),
    "dc.embed_dim": ("dc_embed_dim", int),
    "dc.update_every": ("dc_update_every", int),
    "dc.key_frames": ("dc_key_frames", int),
    "dc.lambda_raw": ("dc_lambda_raw", _parse_bool),
    "dc.lr": ("dc_lr", float),
    "dc.pair_batch": ("dc_pair_batch", int),
    "agent.gamma": ("agent_gamma", float),
    "agent.tau": ("agent_tau", float),
    "agent.noise_sigma": ("agent_noise_sigma", float),
    "agent.random_eps": ("agent_random_eps", float),
    "agent.hidden": ("agent_hidden", int),
    "agent.actor_lr": ("agent_actor_lr", float),
    "agent.critic_lr": ("agent_critic_lr", float),
}

_FIELD_TO_KEY = {field_name: key for key, (field_name, _) in KEY_REGISTRY.items()}


def set_key(cfg: RunConfig, key: str, raw_value: str) -> None:
    """Assign one config key from text, rejecting anything not in the registry."""
    if key == "mode":
        match = _FIXED_LAMBDA_RE.match(raw_value.strip())
        if match:
            cfg.mode = "fixed_lambda"
            cfg.fixed_lambda_value = float(match.group(1))
        else:
            cfg.mode = raw_value.strip()
            cfg.fixed_lambda_value = None
        return
    if key not in KEY_REGISTRY:
        raise KeyError(f"unknown config key {key!r}")
    field_name, parser = KEY_REGISTRY[key]
    try:
        setattr(cfg, field_name, parser(raw_value.strip()))
    except (TypeError, ValueError) as err:
        raise ValueError(f"bad value for {key}: {raw_value!r} ({err})") from err


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = base if base is not None else RunConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        try:
            set_key(cfg, key.strip(), value)
        except (KeyError, ValueError) as err:
            raise type(err)(f"line {lineno}: {err}") from err
    return cfg


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), base=base)


def mode_string(cfg: RunConfig) -> str:
    if cfg.mode == "fixed_lambda":
        return f"fixed_lambda({cfg.fixed_lambda_value!r})"
    return cfg.mode


def config_to_dict(cfg: RunConfig) -> dict[str, object]:
    """Flat config echo keyed by the external key names, for manifests."""
    out: dict[str, object] = {}
    for f in fields(cfg):
        if f.name == "fixed_lambda_value":
            continue
        key = _FIELD_TO_KEY.get(f.name, f.name)
        value = getattr(cfg, f.name)
        if f.name == "mode":
            value = mode_string(cfg)
        if isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return dict(sorted(out.items()))
