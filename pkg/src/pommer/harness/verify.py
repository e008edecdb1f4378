"""Filter-versus-oracle verification.

Two modes:

* ``exhaustive``: every position of a finite family (terrain templates x agent
  cells x bomb and flame placements near the agent) with one live agent and full
  visibility. Each action the filter allows is replayed through the brute-force
  engine oracle; a fatal allowed action, or a fallback while some action is
  survivable, is a soundness violation.
* ``sampled``: observations drawn from real games on the default board; checks
  that the allowed set is never empty.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from functools import partial

from pommer.engine.board import generate_board
from pommer.engine.core import is_terminal, observe, step
from pommer.engine.serialize import dump_grid, state_to_dict
from pommer.engine.types import (
    Action,
    AgentState,
    Bomb,
    GameConfig,
    GameState,
    Outcome,
    Tile,
)
from pommer.errors import GenerationError, UsageError
from pommer.filter.oracle import EscapeOracle, state_from_observation
from pommer.filter.rules import ACTION_ORDER, FilterResult, Reason, filter_actions
from pommer.harness.parallel import map_ordered

TEMPLATES = ("open", "pillars", "comb", "wood", "generated")


@dataclass(frozen=True)
class VerifyScope:
    """The finite position family behind ``exhaustive`` mode."""

    sizes: tuple = (4, 5, 6)
    templates: tuple = TEMPLATES
    max_bombs: int = 2
    bomb_radius: int = 2  # bombs sit within this Manhattan distance of the agent
    lives: tuple = (1, 2, 3, 4, 6, 9)
    pair_lives: tuple = (1, 3, 6, 9)
    strengths: tuple = (2, 3)
    pair_strengths: tuple = (2, 3)
    flame_lives: tuple = (1, 2)
    agent_blast: int = 2
    strict: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyScope":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown scope keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class VerifySummary:
    mode: str
    positions: int = 0
    checked_actions: int = 0
    soundness_violations: int = 0
    empty_allowed: int = 0
    fallbacks: int = 0
    over_rejections: dict = field(default_factory=dict)  # reason -> count (rejected yet survivable)
    crude_bomb_unsound: int = 0  # bombs the non-strict rules allow that the oracle finds fatal
    oracle_steps: int = 0

    @property
    def ok(self) -> bool:
        return self.soundness_violations == 0 and self.empty_allowed == 0

    def merge(self, other: "VerifySummary") -> None:
        for k in ("positions", "checked_actions", "soundness_violations", "empty_allowed",
                  "fallbacks", "crude_bomb_unsound", "oracle_steps"):
            setattr(self, k, getattr(self, k) + getattr(other, k))
        c = Counter(self.over_rejections)
        c.update(other.over_rejections)
        self.over_rejections = dict(sorted(c.items()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def terrain_template(name: str, size: int, seed: int = 0):
    n = size
    t = [int(Tile.PASSAGE)] * (n * n)
    if name == "open":
        pass
    elif name == "pillars":
        for r in range(1, n, 2):
            for c in range(1, n, 2):
                t[r * n + c] = int(Tile.RIGID)
    elif name == "comb":
        # dead-end corridors hanging off the top row, one plugged by wood
        for c in range(1, n, 2):
            for r in range(1, n):
                t[r * n + c] = int(Tile.RIGID)
        t[(n - 1) * n] = int(Tile.WOOD)
    elif name == "wood":
        for r in range(1, n, 2):
            for c in range(1, n, 2):
                t[r * n + c] = int(Tile.RIGID)
        for r in range(n):
            for c in range(n):
                if t[r * n + c] == Tile.PASSAGE and (r + 2 * c) % 4 == 1:
                    t[r * n + c] = int(Tile.WOOD)
    elif name == "generated":
        free = n * n - 12
        rigid = 2 * (free // 6)
        wood = 2 * (free // 6)
        cfg = GameConfig(board_size=n, rigid_count=rigid, wood_count=wood, rng_seed=seed)
        t = list(generate_board(cfg).terrain)
    else:
        raise UsageError(f"unknown terrain template {name!r}")
    return tuple(t)


def verify_config(size: int) -> GameConfig:
    return GameConfig(board_size=size, wood_count=0, rigid_count=0, view_radius=size,
                      max_steps=10**9)


def _single_agent_state(cfg, terrain, cell, bombs, flames, blast) -> GameState:
    on_bomb = any(b.position == cell for b in bombs)
    agents = [AgentState(0, cell, True, 0 if on_bomb else 1, 1, blast, False)]
    agents += [AgentState(i, None, False, 0, 1, 2, False) for i in (1, 2, 3)]
    return GameState(
        config=cfg, step=0, terrain=terrain,
        bombs=tuple(sorted(bombs, key=lambda b: b.position)),
        flames=dict(flames), powerups={}, hidden_powerups={}, agents=tuple(agents),
    )


def _positions_for_cell(scope: VerifyScope, cfg, terrain, cell):
    size = cfg.board_size
    r0, c0 = cell
    near = [
        (r, c)
        for r in range(size)
        for c in range(size)
        if abs(r - r0) + abs(c - c0) <= scope.bomb_radius and terrain[r * size + c] == Tile.PASSAGE
    ]
    adjacent = [p for p in near if abs(p[0] - r0) + abs(p[1] - c0) <= 1]
    blast = scope.agent_blast
    yield _single_agent_state(cfg, terrain, cell, [], {}, blast)
    if scope.max_bombs >= 1:
        for p, life, s in itertools.product(near, scope.lives, scope.strengths):
            yield _single_agent_state(cfg, terrain, cell, [Bomb(p, 1, s, life)], {}, blast)
    if scope.max_bombs >= 2:
        for p, q in itertools.combinations(near, 2):
            for l1, l2, s1, s2 in itertools.product(scope.pair_lives, scope.pair_lives,
                                                     scope.pair_strengths, scope.pair_strengths):
                bombs = [Bomb(p, 1, s1, l1), Bomb(q, 1, s2, l2)]
                yield _single_agent_state(cfg, terrain, cell, bombs, {}, blast)
    # flames next to (or under) the agent, alone and with one bomb
    for f, fl in itertools.product(adjacent, scope.flame_lives):
        yield _single_agent_state(cfg, terrain, cell, [], {f: fl}, blast)
        if scope.max_bombs >= 1:
            for p, life in itertools.product(near, scope.pair_lives):
                if p != f:
                    yield _single_agent_state(cfg, terrain, cell, [Bomb(p, 1, 2, life)], {f: fl}, blast)


def exhaustive_jobs(scope: VerifyScope) -> list:
    """One job per (size, template, agent cell); run in any order, merged in this one."""
    jobs = []
    for size in scope.sizes:
        for name in scope.templates:
            try:
                terrain = terrain_template(name, size)
            except GenerationError:
                continue
            for idx, t in enumerate(terrain):
                if t == Tile.PASSAGE:
                    jobs.append((scope, size, terrain, divmod(idx, size)))
    return jobs


def check_position(state: GameState, filter_fn=None, strict: bool = True,
                   exactness: bool = False, obs=None) -> tuple[VerifySummary, list]:
    """Compare the filter with the oracle on one position.

    The filter sees ``obs`` (default: agent 0's view of ``state``) and the oracle
    searches ``state`` for the observing agent.
    """
    if filter_fn is None:
        filter_fn = partial(filter_actions, strict=strict)
    summary = VerifySummary("position", positions=1)
    records = []
    if obs is None:
        obs = observe(state, 0)
    res: FilterResult = filter_fn(obs)
    cfg = state.config
    oracle = EscapeOracle(obs.agent_id, cfg.bomb_timer + cfg.flame_life)
    verdict = {}

    def survivable(a):
        if a not in verdict:
            verdict[a] = oracle.action_survivable(state, a)
            summary.checked_actions += 1
        return verdict[a]

    if not res.allowed:
        summary.empty_allowed += 1
        records.append(_record("empty_allowed", state, res, None))
    if res.fallback:
        summary.fallbacks += 1
        alive = [a for a in ACTION_ORDER if survivable(a)]
        if alive:
            summary.soundness_violations += 1
            records.append(_record("rejected_all_survivable", state, res, alive[0]))
    else:
        for a in sorted(res.allowed):
            if not survivable(a):
                summary.soundness_violations += 1
                records.append(_record("allowed_fatal", state, res, a))
    crude_bomb_ok = (
        res.rejected.get(Action.BOMB) == Reason.DOOMED_TARGET
        and strict
        and Action.BOMB in filter_actions(obs, strict=False).allowed
    )
    if crude_bomb_ok and not survivable(Action.BOMB):
        summary.crude_bomb_unsound += 1
    if exactness:
        over = Counter()
        for a, reason in res.rejected.items():
            if reason != Reason.ILLEGAL and survivable(a):
                over[reason.value] += 1
        summary.over_rejections = dict(over)
    summary.oracle_steps = oracle.steps
    return summary, records


def _record(kind, state, res, action):
    return {
        "kind": kind,
        "action": None if action is None else Action(action).name,
        "allowed": sorted(Action(a).name for a in res.allowed),
        "rejected": {Action(a).name: r.value for a, r in sorted(res.rejected.items())},
        "fallback": res.fallback,
        "grid": dump_grid(state),
        "state": state_to_dict(state),
    }


def _run_job(job, filter_fn=None, exactness=False):
    scope, size, terrain, cell = job
    cfg = verify_config(size)
    total = VerifySummary("exhaustive")
    records = []
    for state in _positions_for_cell(scope, cfg, terrain, cell):
        s, recs = check_position(state, filter_fn, scope.strict, exactness)
        total.merge(s)
        records.extend(recs)
    return total, records


def run_exhaustive(scope: VerifyScope | None = None, filter_fn=None, workers: int = 1,
                   exactness: bool = False) -> tuple[VerifySummary, list]:
    """Check every position of ``scope``. ``filter_fn`` must be picklable when
    ``workers > 1``."""
    scope = scope or VerifyScope()
    fn = partial(_run_job, filter_fn=filter_fn, exactness=exactness)
    summary = VerifySummary("exhaustive")
    records = []
    for s, recs in map_ordered(fn, exhaustive_jobs(scope), workers):
        summary.merge(s)
        records.extend(recs)
    return summary, records


def sample_observations(count: int, seed: int = 0, config: GameConfig | None = None):
    """Observations of live agents from games where every agent picks uniformly
    among the filter-allowed actions (bombs included), one game seed after another."""
    config = config or GameConfig()
    rng = random.Random(seed)
    produced = 0
    game = 0
    while produced < count:
        state = generate_board(config.replace(rng_seed=seed * 100003 + game))
        game += 1
        while is_terminal(state) == Outcome.ONGOING and produced < count:
            actions = []
            for ag in state.agents:
                if not ag.alive:
                    actions.append(Action.STOP)
                    continue
                obs = observe(state, ag.id)
                produced += 1
                yield obs
                if produced == count:
                    return
                # mostly filtered play, sometimes raw random, to reach rough states
                if rng.random() < 0.2:
                    actions.append(Action(rng.randrange(6)))
                else:
                    res = filter_actions(obs)
                    actions.append(rng.choice(sorted(res.allowed)))
            state, _ = step(state, actions)


def _run_sampled_chunk(args, filter_fn=None, strict=False):
    count, seed = args
    if filter_fn is None:
        filter_fn = partial(filter_actions, strict=strict)
    summary = VerifySummary("sampled")
    records = []
    for obs in sample_observations(count, seed):
        # the oracle gets what the observation shows: unknown cells solid,
        # others frozen, bombs static
        state = state_from_observation(obs)
        s, recs = check_position(state, filter_fn, strict, obs=obs)
        summary.merge(s)
        records.extend(recs)
    return summary, records


def run_sampled(count: int = 100_000, seed: int = 0, filter_fn=None, workers: int = 1,
                chunk: int = 10_000, strict: bool = False) -> tuple[VerifySummary, list]:
    """Filter vs oracle on observations from live 11x11 games, judged against the
    state each observation implies."""
    chunks = []
    left = count
    k = 0
    while left > 0:
        n = min(chunk, left)
        chunks.append((n, seed * 1000 + k))
        left -= n
        k += 1
    summary = VerifySummary("sampled")
    records = []
    for s, recs in map_ordered(partial(_run_sampled_chunk, filter_fn=filter_fn, strict=strict), chunks, workers):
        summary.merge(s)
        records.extend(recs)
    return summary, records


def write_corpus(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
