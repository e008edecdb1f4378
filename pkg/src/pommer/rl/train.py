"""PPO training against a staged curriculum of opponent teams.

Outputs under ``out``:

* ``curve.csv`` with header ``iteration,games,wins,losses,draws,mean_shaped_reward,stage``
* ``checkpoints/iter_NNNN.ckpt`` (network format) plus ``.json`` sidecar
  metadata (iteration, stage, config hash); ``latest.ckpt`` mirrors the newest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import shutil
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import torch

from pommer.engine.types import GameConfig
from pommer.errors import NumericError, UsageError
from pommer.harness.parallel import resolve_workers
from pommer.rl.network import NetSpec, init_params, load_checkpoint, save_checkpoint
from pommer.rl.ppo import PPOConfig, batch_tensors, compute_returns_advantages, ppo_loss
from pommer.rl.rollout import collect_rollouts
from pommer.rl.shaping import ShapingConfig

log = logging.getLogger(__name__)

CURVE_HEADER = ["iteration", "games", "wins", "losses", "draws", "mean_shaped_reward", "stage"]


@dataclass(frozen=True)
class TrainConfig:
    game: GameConfig = field(default_factory=GameConfig)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    shaping: ShapingConfig = field(default_factory=ShapingConfig)
    channels: int = 64
    layers: int = 4
    aux_dim: int = 0
    iterations: int = 1000
    stages: tuple = ("static", "smart_random_nobomb")
    seed: int = 0
    checkpoint_every: int = 1
    keep_checkpoints: bool = True
    torch_threads: int = 1
    init_checkpoint: str | None = None

    def net_spec(self) -> NetSpec:
        return NetSpec(board_size=self.game.board_size, channels=self.channels,
                       layers=self.layers, aux_dim=self.aux_dim)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stages"] = list(self.stages)
        d["ppo"]["adam_betas"] = list(self.ppo.adam_betas)
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        kw = {}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise UsageError(f"unknown training config keys: {sorted(unknown)}")
        for key, value in d.items():
            if key == "game":
                kw[key] = GameConfig.from_dict(value)
            elif key == "ppo":
                kw[key] = _sub(PPOConfig, value)
            elif key == "shaping":
                kw[key] = _sub(ShapingConfig, value)
            elif key == "stages":
                kw[key] = tuple(value)
            else:
                kw[key] = value
        return cls(**kw)


def _sub(cls, d):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise UsageError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    return cls(**d)


def apply_overrides(cfg: TrainConfig, overrides) -> TrainConfig:
    """``["ppo.lr=1e-3", "iterations=5"]`` style dotted overrides (JSON values)."""
    d = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        parts = key.split(".")
        for p in parts[:-1]:
            if p not in node or not isinstance(node[p], dict):
                raise UsageError(f"unknown config section {p!r}")
            node = node[p]
        if parts[-1] not in node:
            raise UsageError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return TrainConfig.from_dict(d)


class Curriculum:
    def __init__(self, stages, threshold: float, window: int):
        if not stages:
            raise UsageError("curriculum needs at least one stage")
        self.stages = list(stages)
        self.threshold = threshold
        self.window = window
        self.index = 0
        self.history = []  # (wins, games) over the current stage

    @property
    def stage(self) -> str:
        return self.stages[self.index]

    def record(self, wins: int, games: int) -> bool:
        """Log one iteration; returns True when this promotes to the next stage."""
        self.history.append((wins, games))
        if self.index + 1 >= len(self.stages) or len(self.history) < self.window:
            return False
        recent = self.history[-self.window:]
        rate = sum(w for w, _ in recent) / max(1, sum(g for _, g in recent))
        if rate >= self.threshold:
            self.index += 1
            self.history = []
            return True
        return False


def ppo_update(spec: NetSpec, flat: torch.nn.Parameter, opt, batch, cfg: PPOConfig,
               rng: np.random.Generator) -> dict:
    n = len(batch)
    losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.minibatch):
            idx = order[lo:lo + cfg.minibatch]
            t = batch_tensors(batch, idx)
            loss = ppo_loss(spec, flat, t["features"], t["actions"], t["logp_old"], t["v_old"],
                            t["returns"], t["advantages"], cfg, masks=t["masks"])
            opt.zero_grad()
            loss.backward()
            if not torch.isfinite(flat.grad).all():
                raise NumericError("non-finite gradient")
            opt.step()
            losses.append(loss.item())
    if not torch.isfinite(flat.detach()).all():
        raise NumericError("non-finite parameters after update")
    return {"loss": float(np.mean(losses)) if losses else 0.0}


def _write_checkpoint(out, spec, params, iteration, stage, cfg: TrainConfig):
    ckdir = os.path.join(out, "checkpoints")
    os.makedirs(ckdir, exist_ok=True)
    meta = {"iteration": iteration, "stage": stage, "config_hash": cfg.config_hash()}
    latest = os.path.join(out, "latest.ckpt")
    save_checkpoint(latest, spec, params, iteration, meta)
    with open(latest + ".json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")
    if cfg.keep_checkpoints and iteration % cfg.checkpoint_every == 0:
        path = os.path.join(ckdir, f"iter_{iteration:04d}.ckpt")
        shutil.copyfile(latest, path)
        shutil.copyfile(latest + ".json", path + ".json")
    return latest


def train(cfg: TrainConfig, out: str, workers: int | None = None, on_iteration=None) -> dict:
    """Run the training loop; returns a summary. Raises NumericError on divergence,
    after the last good parameters have been written to ``latest.ckpt``."""
    os.makedirs(out, exist_ok=True)
    torch.set_num_threads(cfg.torch_threads)
    torch.manual_seed(cfg.seed)
    spec = cfg.net_spec()
    if cfg.init_checkpoint:
        ck_spec, params, _ = load_checkpoint(cfg.init_checkpoint)
        if ck_spec != spec:
            raise UsageError(f"checkpoint architecture {ck_spec} does not match {spec}")
    else:
        params = init_params(spec, seed=cfg.seed)
    flat = torch.nn.Parameter(torch.from_numpy(params.astype(np.float32).copy()))
    p = cfg.ppo
    opt = torch.optim.Adam([flat], lr=p.lr, betas=tuple(p.adam_betas), eps=p.adam_eps)
    curriculum = Curriculum(cfg.stages, p.promotion_threshold, p.promotion_window)
    workers = resolve_workers(p.workers if workers is None else workers)
    with open(os.path.join(out, "config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
    curve_path = os.path.join(out, "curve.csv")
    with open(curve_path, "w", newline="") as fh:
        csv.writer(fh).writerow(CURVE_HEADER)

    rows = []
    for it in range(1, cfg.iterations + 1):
        stage = curriculum.stage
        snapshot = flat.detach().numpy().copy()
        base_seed = cfg.seed * 1_000_000 + (it - 1) * p.games
        batch = collect_rollouts(spec, snapshot, stage, p.games, base_seed, cfg.game, workers,
                                 cfg.shaping)
        compute_returns_advantages(batch, p)
        rng = np.random.default_rng([cfg.seed, it])
        try:
            stats = ppo_update(spec, flat, opt, batch, p, rng)
        except NumericError:
            _write_checkpoint(out, spec, snapshot, it - 1, stage, cfg)
            log.error("diverged at iteration %d; kept parameters of iteration %d", it, it - 1)
            raise
        wins = sum(g["win"] for g in batch.games)
        losses = sum(g["loss"] for g in batch.games)
        draws = sum(g["draw"] for g in batch.games)
        shaped = [s for g in batch.games for s in g["shaped"]]
        row = [it, len(batch.games), wins, losses, draws, round(float(np.mean(shaped)), 6), stage]
        rows.append(row)
        with open(curve_path, "a", newline="") as fh:
            csv.writer(fh).writerow(row)
        _write_checkpoint(out, spec, flat.detach().numpy(), it, stage, cfg)
        promoted = curriculum.record(wins, len(batch.games))
        log.info("iter %d stage %s win %d/%d loss %.4f%s", it, stage, wins, len(batch.games),
                 stats["loss"], " -> promoted" if promoted else "")
        if on_iteration:
            on_iteration(row, stats)
    return {"iterations": cfg.iterations, "curve": curve_path, "rows": rows,
            "final_stage": curriculum.stage, "checkpoint": os.path.join(out, "latest.ckpt")}


def desk_config(**overrides) -> TrainConfig:
    """Small-board, small-net settings that train on one CPU in minutes.

    With only 1,800 games the literal clipped objective drifts and collapses;
    the min form plus GAE(0.95) is what learns at this scale.
    """
    game = GameConfig(board_size=8, rigid_count=12, wood_count=12, max_steps=200)
    cfg = TrainConfig(
        game=game,
        ppo=PPOConfig(games=30, workers=1, lr=1e-3, gae_lambda=0.95, objective="pessimistic"),
        channels=16,
        iterations=60,
        stages=("static",),
    )
    return replace(cfg, **overrides) if overrides else cfg
