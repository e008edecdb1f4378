"""PPO objective, returns/advantages and the torch forward pass.

The torch network reads the same flat parameter vector as the numpy one
(layout in :mod:`pommer.rl.network`), so a learner holds a single flat
``torch.nn.Parameter`` and checkpoints are a plain dump of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from pommer.errors import NumericError, UsageError
from pommer.rl.network import NetSpec

MASKED_LOGIT = -1e9


@dataclass(frozen=True)
class PPOConfig:
    clip: float = 0.2
    value_coef: float = 0.5
    gamma: float = 0.99
    gae_lambda: float | None = None  # None: A = R - v_old
    normalize_advantages: bool = True
    epochs: int = 4
    minibatch: int = 256
    lr: float = 2.5e-4
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    entropy_coef: float = 0.0
    objective: str = "clip"  # "clip": -clip(ratio) A, as written; "pessimistic": -min(ratio A, clip(ratio) A)
    games: int = 120
    workers: int = 12
    promotion_threshold: float = 0.6
    promotion_window: int = 5

    def __post_init__(self):
        if not 0 < self.clip < 1:
            raise UsageError("clip must be in (0, 1)")
        if not 0 < self.gamma <= 1:
            raise UsageError("gamma must be in (0, 1]")
        if self.objective not in ("clip", "pessimistic"):
            raise UsageError(f"unknown objective {self.objective!r}")
        if self.gae_lambda is not None and not 0 <= self.gae_lambda <= 1:
            raise UsageError("gae_lambda must be in [0, 1]")


def torch_forward(spec: NetSpec, flat: torch.Tensor, x: torch.Tensor, aux: torch.Tensor | None = None):
    """Logits ``(N, 6)`` and values ``(N,)``; same maths as the numpy forward."""
    p = {}
    k = 0
    for name, shape in spec.shapes():
        n = int(np.prod(shape))
        p[name] = flat[k:k + n].view(shape)
        k += n
    if k != flat.numel():
        raise UsageError(f"expected {k} parameters, got {flat.numel()}")
    h = x
    for i in range(spec.layers):
        h = F.relu(F.conv2d(h, p[f"conv{i}.weight"], p[f"conv{i}.bias"], padding=1))
    outs = []
    for head in ("policy", "value"):
        z = F.relu(F.conv2d(h, p[f"{head}_conv.weight"], p[f"{head}_conv.bias"])).flatten(1)
        if spec.aux_dim:
            z = torch.cat([z, aux], dim=1)
        outs.append(F.linear(z, p[f"{head}_fc.weight"], p[f"{head}_fc.bias"]))
    return outs[0], outs[1][:, 0]


def discounted_returns(rewards, dones, gamma: float) -> np.ndarray:
    """``R_t = sum_k gamma^k r_{t+k}`` within each episode (``dones`` closes one)."""
    out = np.zeros(len(rewards), dtype=np.float64)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        if dones[t]:
            running = 0.0
        running = rewards[t] + gamma * running
        out[t] = running
    return out


def gae_advantages(rewards, values, dones, gamma: float, lam: float) -> np.ndarray:
    out = np.zeros(len(rewards), dtype=np.float64)
    running = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        nxt = 0.0 if dones[t] else values[t + 1]
        if dones[t]:
            running = 0.0
        delta = rewards[t] + gamma * nxt - values[t]
        running = delta + gamma * lam * running
        out[t] = running
    return out


def compute_returns_advantages(batch, cfg: PPOConfig):
    """Fill ``batch.returns`` and ``batch.advantages`` in place and return the batch."""
    if len(batch) == 0:
        raise UsageError("empty batch")
    if not batch.dones[-1]:
        raise UsageError("last episode of the batch is incomplete")
    rewards, values, dones = batch.rewards, batch.v_old, batch.dones
    if cfg.gae_lambda is None:
        returns = discounted_returns(rewards, dones, cfg.gamma)
        adv = returns - values
    else:
        adv = gae_advantages(rewards, values, dones, cfg.gamma, cfg.gae_lambda)
        returns = adv + values
    if cfg.normalize_advantages and len(adv) > 1:
        std = adv.std()
        adv = (adv - adv.mean()) / (std if std > 1e-8 else 1.0)
    batch.returns = returns
    batch.advantages = adv
    return batch


def masked_log_probs(logits: torch.Tensor, masks: torch.Tensor | None) -> torch.Tensor:
    if masks is not None:
        logits = logits.masked_fill(~masks, MASKED_LOGIT)
    return F.log_softmax(logits, dim=1)


def ppo_loss(spec: NetSpec, flat: torch.Tensor, features, actions, logp_old, v_old, returns,
             advantages, cfg: PPOConfig, masks=None, aux=None, parts: bool = False):
    """Mean over the batch of

        -clip(r, 1-eps, 1+eps) A + (alpha/2) max[(v-R)^2, (v_old + clip(v-v_old, -eps, eps) - R)^2]

    with ``r = pi(a|s) / pi_old(a|s)`` (both renormalised over the filter mask
    when ``masks`` is given). ``cfg.objective == "pessimistic"`` swaps the
    policy term for ``-min(r A, clip(r) A)``. With ``parts`` also returns the
    individual terms.
    """
    logits, v = torch_forward(spec, flat, features, aux)
    logp_all = masked_log_probs(logits, masks)
    logp = logp_all.gather(1, actions.view(-1, 1))[:, 0]
    ratio = torch.exp(logp - logp_old)
    eps = cfg.clip
    clipped = torch.clamp(ratio, 1 - eps, 1 + eps)
    if cfg.objective == "clip":
        policy = -clipped * advantages
    else:
        policy = -torch.minimum(ratio * advantages, clipped * advantages)
    v_clip = v_old + torch.clamp(v - v_old, -eps, eps)
    value = 0.5 * cfg.value_coef * torch.maximum((v - returns) ** 2, (v_clip - returns) ** 2)
    loss = (policy + value).mean()
    entropy = None
    if cfg.entropy_coef:
        probs = logp_all.exp()
        entropy = -(probs * logp_all).sum(dim=1).mean()
        loss = loss - cfg.entropy_coef * entropy
    if not torch.isfinite(loss):
        raise NumericError("non-finite PPO loss")
    if parts:
        return loss, {"policy": policy.mean(), "value": value.mean(), "ratio": ratio, "entropy": entropy}
    return loss


def batch_tensors(batch, idx=None, dtype=torch.float32) -> dict:
    if idx is None:
        idx = np.arange(len(batch))
    return {
        "features": torch.from_numpy(batch.features[idx]).to(dtype),
        "actions": torch.from_numpy(batch.actions[idx]),
        "logp_old": torch.from_numpy(batch.logp_old[idx]).to(dtype),
        "v_old": torch.from_numpy(batch.v_old[idx]).to(dtype),
        "returns": torch.from_numpy(batch.returns[idx]).to(dtype),
        "advantages": torch.from_numpy(batch.advantages[idx]).to(dtype),
        "masks": torch.from_numpy(batch.masks[idx]),
    }
