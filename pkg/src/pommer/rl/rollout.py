"""Rollout collection: two network-driven learners against an opponent team.

This module stays free of torch so worker processes start fast; games are
played with the numpy forward pass. Every game is a pure function of its
arguments, and batches are merged by game index, so the worker count never
changes the result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pommer.agents import NeuralAgent, agent_seed, make_agent
from pommer.engine.board import generate_board
from pommer.engine.core import is_terminal, observe, step
from pommer.engine.types import GameConfig, Outcome
from pommer.errors import UsageError
from pommer.harness.parallel import map_ordered
from pommer.rl.network import NetSpec
from pommer.rl.shaping import ShapingConfig, ShapingState, shaped_reward, terminal_reward


@dataclass
class RolloutBatch:
    """Transitions of all learner episodes, ordered by (game, agent id, time).

    ``returns`` and ``advantages`` stay None until
    :func:`pommer.rl.ppo.compute_returns_advantages` fills them in.
    """

    features: np.ndarray      # (N, 14, B, B) float32
    actions: np.ndarray       # (N,) int64
    logp_old: np.ndarray      # (N,) float64, log-probability under the masked old policy
    v_old: np.ndarray         # (N,) float64
    rewards: np.ndarray       # (N,) float64, shaped
    dones: np.ndarray         # (N,) bool, last transition of an episode
    masks: np.ndarray         # (N, 6) bool, filter-allowed actions
    episode: np.ndarray       # (N,) int64, episode index
    games: list = field(default_factory=list)  # per-game summary dicts
    returns: np.ndarray | None = None
    advantages: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.actions)

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for name in ("features", "actions", "logp_old", "v_old", "rewards", "dones", "masks", "episode"):
            h.update(np.ascontiguousarray(getattr(self, name)).tobytes())
        h.update(repr(self.games).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class GameJob:
    spec: NetSpec
    params: np.ndarray
    opponent: str
    config: GameConfig
    seed: int
    index: int
    shaping: ShapingConfig = ShapingConfig()
    learner_team: int | None = None  # None: alternate by game index
    use_filter: bool = True


def play_learning_game(job: GameJob) -> dict:
    """One game; returns per-learner transition arrays and a summary."""
    team = job.index % 2 if job.learner_team is None else job.learner_team
    learners = (team, team + 2)
    agents = []
    for i in range(4):
        if i in learners:
            a = NeuralAgent(job.spec, job.params, mode="sample", use_filter=job.use_filter)
        else:
            a = make_agent(job.opponent)
        a.reset(agent_seed(job.seed, i))
        agents.append(a)
    state = generate_board(job.config.replace(rng_seed=job.seed))
    shaping = {i: ShapingState(job.shaping, state.agents[i].position) for i in learners}
    traj = {i: [] for i in learners}
    outcome = Outcome.ONGOING
    while outcome == Outcome.ONGOING:
        actions = []
        for i, ag in enumerate(agents):
            if state.agents[i].alive:
                actions.append(ag.act(observe(state, i)))
            else:
                actions.append(0)
        acted = [i for i in learners if state.agents[i].alive]
        state, events = step(state, actions)
        outcome = is_terminal(state)
        for i in acted:
            feats, a, logp, value, mask = agents[i].last
            final = outcome if outcome != Outcome.ONGOING else None
            r = shaped_reward(events[i], shaping[i], final)
            traj[i].append((feats, a, logp, value, r, mask))
    # learners that died before the final step still receive the game result
    for i in learners:
        if traj[i] and i not in acted:
            f, a, logp, value, r, mask = traj[i][-1]
            bonus = terminal_reward(i, False, outcome, job.shaping)
            traj[i][-1] = (f, a, logp, value, r + bonus, mask)
            shaping[i].total += bonus
    won = (outcome == Outcome.TEAM0_WINS and team == 0) or (outcome == Outcome.TEAM1_WINS and team == 1)
    lost = outcome in (Outcome.TEAM0_WINS, Outcome.TEAM1_WINS) and not won
    summary = {
        "index": job.index,
        "seed": job.seed,
        "learner_team": team,
        "outcome": outcome.name,
        "win": won,
        "loss": lost,
        "draw": outcome == Outcome.DRAW,
        "steps": state.step,
        "shaped": [round(shaping[i].total, 12) for i in learners],
    }
    return {"learners": [traj[i] for i in learners], "summary": summary}


def _merge(results) -> RolloutBatch:
    feats, acts, logps, vals, rews, dones, masks, eps = [], [], [], [], [], [], [], []
    games = []
    ep = 0
    for res in results:
        games.append(res["summary"])
        for traj in res["learners"]:
            if not traj:
                continue
            for k, (f, a, lp, v, r, m) in enumerate(traj):
                feats.append(f)
                acts.append(a)
                logps.append(lp)
                vals.append(v)
                rews.append(r)
                dones.append(k == len(traj) - 1)
                masks.append(m)
                eps.append(ep)
            ep += 1
    if not acts:
        raise UsageError("rollout produced no learner transitions")
    return RolloutBatch(
        features=np.stack(feats).astype(np.float32),
        actions=np.asarray(acts, dtype=np.int64),
        logp_old=np.asarray(logps, dtype=np.float64),
        v_old=np.asarray(vals, dtype=np.float64),
        rewards=np.asarray(rews, dtype=np.float64),
        dones=np.asarray(dones, dtype=bool),
        masks=np.stack(masks).astype(bool),
        episode=np.asarray(eps, dtype=np.int64),
        games=games,
    )


def game_seeds(base_seed: int, games: int) -> list[int]:
    return [base_seed + g for g in range(games)]


def collect_rollouts(spec: NetSpec, params, opponent: str, games: int, base_seed: int = 0,
                     config: GameConfig | None = None, workers: int = 1,
                     shaping: ShapingConfig | None = None, learner_team=None,
                     use_filter: bool = True) -> RolloutBatch:
    """Play ``games`` games with seeds ``base_seed + g`` and merge them in game order."""
    if games < 1:
        raise UsageError("games must be >= 1")
    config = config or GameConfig(board_size=spec.board_size)
    if config.board_size != spec.board_size:
        raise UsageError(f"network is for {spec.board_size}x{spec.board_size}, config is {config.board_size}")
    make_agent(opponent)  # fail fast on a bad roster string
    params = np.asarray(params, dtype=np.float32)
    jobs = [
        GameJob(spec, params, opponent, config, seed, g, shaping or ShapingConfig(), learner_team, use_filter)
        for g, seed in enumerate(game_seeds(base_seed, games))
    ]
    return _merge(map_ordered(play_learning_game, jobs, workers))
