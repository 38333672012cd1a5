"""Contrastive experience selection driven by curriculum scores.

Top-scoring trajectories become positives and bottom-scoring ones negatives.
An LSTM over five key-frame achieved goals, fused with an embedding of the
current curriculum weight, produces a joint encoding per trajectory. Training
minimizes a self-anchored InfoNCE term over L2-normalized encodings (each
positive anchors against the whole pair set, its own unit self-similarity in
the numerator) plus a hinge that keeps the mean positive norm above the mean
negative norm by a margin. Because the InfoNCE term is scale-invariant while
the hinge is not, encoding norms end up carrying trajectory importance, which
the sampler turns into selection probabilities proportional to the norm.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .nn import Adam, Dense, LstmCell

Array = np.ndarray

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContrastivePairSet:
    positives: list[int]   # episode ids, highest combined score first
    negatives: list[int]   # episode ids, lowest combined score first
    lambda_used: float


@dataclass(frozen=True)
class TrajectoryEncoding:
    z: Array
    norm: float
    lambda_used: float


def select_pairs(scores, tau_p: float, tau_n: float) -> ContrastivePairSet:
    """Split the buffer into top-ceil(tau_p*N) positives and bottom-ceil(tau_n*N) negatives.

    ``scores`` must be in buffer order (oldest first); ties in F are broken by
    recency, the newer trajectory ranking higher. Sets never overlap, so on
    tiny buffers the negative set may be truncated to what remains.
    """
    if tau_p <= 0.0 or tau_n <= 0.0:
        raise ValueError("tau_p and tau_n must be positive")
    if tau_p + tau_n > 1.0:
        raise ValueError("tau_p + tau_n must not exceed 1")
    n = len(scores)
    if n < 2:
        raise ValueError("need at least 2 scored trajectories to form pairs")
    order = sorted(range(n), key=lambda i: (scores[i].F, i), reverse=True)
    n_pos = math.ceil(tau_p * n)
    n_neg = min(math.ceil(tau_n * n), n - n_pos)
    positives = [scores[i].episode_id for i in order[:n_pos]]
    negatives = [scores[i].episode_id for i in order[::-1][:n_neg]]
    return ContrastivePairSet(positives=positives, negatives=negatives,
                              lambda_used=scores[0].lambda_used)


def key_frame_indices(horizon: int, count: int = 5) -> list[int]:
    """Evenly spaced frame indices floor(i*T/(count-1)); duplicates allowed for tiny T."""
    if count < 2:
        raise ValueError("need at least 2 key frames")
    return [(i * horizon) // (count - 1) for i in range(count)]


def extract_key_frames(trajectory, count: int = 5) -> Array:
    """Achieved goals at the start, quarter points, and end of the trajectory."""
    idx = key_frame_indices(trajectory.horizon, count)
    return trajectory.achieved_goals[idx].copy()


class EncoderNet:
    """LSTM-over-key-frames trajectory encoder fused with the curriculum weight.

    z = W_f [h_traj ; h_lambda] + b_f, where h_traj is the LSTM's final hidden
    state over the key-frame achieved goals and h_lambda is an affine embedding
    of the scalar weight (fed as log1p(lambda) unless ``lambda_raw``).
    """

    def __init__(self, rng: np.random.Generator, goal_dim: int,
                 lstm_hidden: int = 64, embed_dim: int = 8, z_dim: int = 32,
                 alpha_temp: float = 0.1, beta_norm: float = 1.0, margin: float = 0.5,
                 key_frames: int = 5, lambda_raw: bool = False):
        self.goal_dim = goal_dim
        self.z_dim = z_dim
        self.alpha_temp = alpha_temp
        self.beta_norm = beta_norm
        self.margin = margin
        self.key_frames = key_frames
        self.lambda_raw = lambda_raw
        self.lstm = LstmCell(rng, goal_dim, lstm_hidden)
        self.lambda_embed = Dense(rng, 1, embed_dim, "identity")
        self.fusion = Dense(rng, lstm_hidden + embed_dim, z_dim, "identity")

    def _lambda_input(self, lam: float) -> float:
        if not np.isfinite(lam):
            raise ValueError("lambda must be finite")
        return float(lam) if self.lambda_raw else float(np.log1p(lam))

    def encode_batch(self, frames: Array, lam: float) -> tuple[Array, tuple]:
        """Encode ``[n, key_frames, goal_dim]`` key-frame stacks under one lambda."""
        frames = np.asarray(frames, dtype=np.float64)
        h, lstm_cache = self.lstm.forward(frames)
        lam_col = np.full((len(frames), 1), self._lambda_input(lam))
        emb, emb_cache = self.lambda_embed.forward(lam_col)
        fused_in = np.concatenate([h, emb], axis=1)
        z, fusion_cache = self.fusion.forward(fused_in)
        return z, (lstm_cache, emb_cache, fusion_cache)

    def backward(self, cache: tuple, dz: Array) -> dict[str, Array]:
        lstm_cache, emb_cache, fusion_cache = cache
        d_fused, fusion_grads = self.fusion.backward(fusion_cache, dz)
        hidden = self.lstm.hidden_dim
        dh = d_fused[:, :hidden]
        demb = d_fused[:, hidden:]
        _, emb_grads = self.lambda_embed.backward(emb_cache, demb)
        _, lstm_grads = self.lstm.backward(lstm_cache, dh)
        grads = {f"lstm/{k}": v for k, v in lstm_grads.items()}
        grads.update({f"lambda_embed/{k}": v for k, v in emb_grads.items()})
        grads.update({f"fusion/{k}": v for k, v in fusion_grads.items()})
        return grads

    def params(self) -> dict[str, Array]:
        out = {f"lstm/{k}": v for k, v in self.lstm.params().items()}
        out.update({f"lambda_embed/{k}": v for k, v in self.lambda_embed.params().items()})
        out.update({f"fusion/{k}": v for k, v in self.fusion.params().items()})
        return out

    def set_params(self, blocks: dict[str, Array]) -> None:
        self.lstm.set_params({k.split("/", 1)[1]: v for k, v in blocks.items()
                              if k.startswith("lstm/")})
        self.lambda_embed.set_params({k.split("/", 1)[1]: v for k, v in blocks.items()
                                      if k.startswith("lambda_embed/")})
        self.fusion.set_params({k.split("/", 1)[1]: v for k, v in blocks.items()
                                if k.startswith("fusion/")})


def encode(net: EncoderNet, trajectory, lam: float) -> TrajectoryEncoding:
    frames = extract_key_frames(trajectory, net.key_frames)[None, :, :]
    z, _ = net.encode_batch(frames, lam)
    z = z[0]
    return TrajectoryEncoding(z=z, norm=float(np.linalg.norm(z)), lambda_used=float(lam))


def _normalize_rows(Z: Array) -> tuple[Array, Array]:
    norms = np.linalg.norm(Z, axis=1)
    if np.any(norms == 0.0):
        raise FloatingPointError("zero-norm encoding: encoder collapse")
    return Z / norms[:, None], norms


def contrastive_loss(pos_encodings: Array, neg_encodings: Array, alpha_temp: float) -> float:
    """Self-anchored InfoNCE over L2-normalized encodings.

    Each positive contributes -log(e^{1/a} / sum_j e^{(zi.zj)/a}) with j
    running over the union of positives and negatives (anchor included); the
    numerator is constant because normalized self-similarity is 1.
    """
    if alpha_temp <= 0.0:
        raise ValueError("alpha_temp must be positive")
    pos = np.atleast_2d(np.asarray(pos_encodings, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg_encodings, dtype=np.float64))
    if pos.size == 0:
        raise ValueError("need at least one positive encoding")
    Zbar, _ = _normalize_rows(np.concatenate([pos, neg], axis=0) if neg.size else pos)
    n_pos = len(pos)
    S = (Zbar[:n_pos] @ Zbar.T) / alpha_temp
    peak = S.max(axis=1, keepdims=True)
    lse = peak[:, 0] + np.log(np.exp(S - peak).sum(axis=1))
    return float(np.mean(lse - 1.0 / alpha_temp))


def norm_loss(pos_encodings: Array, neg_encodings: Array, margin: float) -> float:
    """Hinge on mean raw norms: max(0, mu_neg - mu_pos + margin)."""
    if margin < 0.0:
        raise ValueError("margin must be nonnegative")
    pos = np.atleast_2d(np.asarray(pos_encodings, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg_encodings, dtype=np.float64))
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("both encoding sets must be nonempty")
    mu_p = float(np.linalg.norm(pos, axis=1).mean())
    mu_n = float(np.linalg.norm(neg, axis=1).mean())
    return max(0.0, mu_n - mu_p + margin)


def total_loss(pos_encodings: Array, neg_encodings: Array, alpha_temp: float,
               beta_norm: float, margin: float) -> float:
    return (contrastive_loss(pos_encodings, neg_encodings, alpha_temp)
            + beta_norm * norm_loss(pos_encodings, neg_encodings, margin))


def _loss_and_encoding_grads(Z: Array, n_pos: int, alpha_temp: float,
                             beta_norm: float, margin: float):
    """Total loss plus its gradient w.r.t. the raw encodings.

    The InfoNCE part differentiates through the normalized directions (so it
    is blind to scale), the hinge part through the raw norms; both meet in dZ.
    """
    Zbar, norms = _normalize_rows(Z)
    n_neg = len(Z) - n_pos
    S = (Zbar[:n_pos] @ Zbar.T) / alpha_temp
    peak = S.max(axis=1, keepdims=True)
    expS = np.exp(S - peak)
    lse = peak[:, 0] + np.log(expS.sum(axis=1))
    l_con = float(np.mean(lse - 1.0 / alpha_temp))
    soft = expS / expS.sum(axis=1, keepdims=True)
    coef = soft / (n_pos * alpha_temp)
    dZbar = coef.T @ Zbar[:n_pos]
    dZbar[:n_pos] += coef @ Zbar
    radial = (Zbar * dZbar).sum(axis=1, keepdims=True)
    dZ = (dZbar - Zbar * radial) / norms[:, None]

    mu_p = float(norms[:n_pos].mean())
    mu_n = float(norms[n_pos:].mean())
    hinge = mu_n - mu_p + margin
    l_norm = max(0.0, hinge)
    if hinge > 0.0:
        dnorm = np.concatenate([np.full(n_pos, -beta_norm / n_pos),
                                np.full(n_neg, beta_norm / n_neg)])
        dZ += dnorm[:, None] * Zbar

    return l_con + beta_norm * l_norm, l_con, l_norm, dZ


def encoder_loss_and_grads(net: EncoderNet, pos_frames: Array, neg_frames: Array,
                           lam: float):
    """Forward + backward over a pair set; returns (total, l_con, l_norm, grads)."""
    frames = np.concatenate([pos_frames, neg_frames], axis=0)
    Z, cache = net.encode_batch(frames, lam)
    total, l_con, l_norm, dZ = _loss_and_encoding_grads(
        Z, len(pos_frames), net.alpha_temp, net.beta_norm, net.margin)
    grads = net.backward(cache, dZ)
    return total, l_con, l_norm, grads


def train_encoder(net: EncoderNet, buffer, pair_set: ContrastivePairSet, lam: float,
                  steps: int, adam: Adam | None = None,
                  rng: np.random.Generator | None = None,
                  pair_batch: int = 0) -> list[float]:
    """Run Adam steps of the combined loss over the pair set; returns the loss trace.

    ``pair_batch`` > 0 subsamples that many trajectories per step (half
    positives, half negatives) so big buffers stay affordable; 0 uses the full
    pair set every step.
    """
    if steps == 0:
        return []
    pos_frames = np.stack([extract_key_frames(buffer.get(eid), net.key_frames)
                           for eid in pair_set.positives])
    neg_frames = np.stack([extract_key_frames(buffer.get(eid), net.key_frames)
                           for eid in pair_set.negatives])
    params = net.params()
    if adam is None:
        adam = Adam(params, lr=1e-3)
    trace = []
    for _ in range(steps):
        p_frames, n_frames = pos_frames, neg_frames
        if pair_batch > 0 and len(pos_frames) + len(neg_frames) > pair_batch:
            if rng is None:
                raise ValueError("pair_batch subsampling requires an rng")
            half = max(1, pair_batch // 2)
            p_pick = rng.choice(len(pos_frames), size=min(half, len(pos_frames)), replace=False)
            n_pick = rng.choice(len(neg_frames), size=min(half, len(neg_frames)), replace=False)
            p_frames = pos_frames[p_pick]
            n_frames = neg_frames[n_pick]
        total, _, _, grads = encoder_loss_and_grads(net, p_frames, n_frames, lam)
        if not np.isfinite(total):
            raise FloatingPointError(f"encoder loss became non-finite ({total})")
        adam.step(params, grads)
        trace.append(float(total))
    return trace


def sampling_probabilities(net: EncoderNet, buffer, lam: float) -> Array:
    """Selection probability per buffered trajectory, proportional to encoding norm."""
    trajectories = buffer.trajectories
    if not trajectories:
        raise ValueError("cannot compute probabilities for an empty buffer")
    frames = np.stack([extract_key_frames(t, net.key_frames) for t in trajectories])
    Z, _ = net.encode_batch(frames, lam)
    norms = np.linalg.norm(Z, axis=1)
    total = float(norms.sum())
    if total <= 0.0:
        log.warning("all encoding norms are zero; falling back to uniform sampling")
        return np.full(len(trajectories), 1.0 / len(trajectories))
    return norms / total
