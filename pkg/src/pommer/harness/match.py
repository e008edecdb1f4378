"""Single matches: roster strings in, outcome (and optionally a replay) out."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from pommer.agents import agent_seed, make_agent, parse_roster
from pommer.engine.board import generate_board
from pommer.engine.core import is_terminal, observe, step
from pommer.engine.replay import ReplayWriter
from pommer.engine.serialize import state_hash
from pommer.engine.types import Action, GameConfig, Outcome
from pommer.errors import UsageError


@dataclass(frozen=True)
class MatchSpec:
    """Positions 0 and 2 form team 0, positions 1 and 3 team 1."""

    roster: tuple
    config: GameConfig = field(default_factory=GameConfig)
    seed: int = 0
    record_path: str | None = None
    record: bool = False  # keep the replay text in the result even without a file

    def __post_init__(self):
        if len(self.roster) != 4:
            raise UsageError(f"a match needs exactly 4 agents, got {len(self.roster)}")


@dataclass
class MatchResult:
    outcome: Outcome
    steps: int
    final_hash: str
    deaths: list            # agent ids in order of death
    self_kills: list        # agent ids killed by a flame of their own bomb
    death_steps: dict       # agent id -> step of death
    bombs_placed: list      # per agent
    latency: dict           # agent id -> (total seconds, decisions)
    replay: str | None = None


class FlameOwners:
    """Which agents' bombs are behind each burning cell."""

    def __init__(self):
        self.cells = {}  # cell -> (owners, remaining life)

    def update(self, events, flame_life: int) -> None:
        nxt = {c: (o, life - 1) for c, (o, life) in self.cells.items() if life > 1}
        fresh = {}
        for owner, _, cells in events.blasts:
            for c in cells:
                fresh.setdefault(c, set()).add(owner)
        for c, owners in fresh.items():
            old = nxt.get(c, (frozenset(), 0))[0]
            nxt[c] = (frozenset(owners) | old, flame_life)
        self.cells = nxt

    def owners(self, cell) -> frozenset:
        return self.cells.get(cell, (frozenset(), 0))[0]


def run_match(spec: MatchSpec, agents=None, timed: bool = True) -> MatchResult:
    """Play one episode. ``agents`` (already built) overrides roster parsing."""
    if agents is None:
        agents = [make_agent(name) for name in spec.roster]
    for i, ag in enumerate(agents):
        ag.reset(agent_seed(spec.seed, i))
    config = spec.config.replace(rng_seed=spec.seed)
    state = generate_board(config)
    writer = None
    if spec.record or spec.record_path is not None:
        writer = ReplayWriter(spec.record_path, config, spec.roster)
    flames = FlameOwners()
    deaths, self_kills, death_steps = [], [], {}
    bombs = [0, 0, 0, 0]
    latency = {i: [0.0, 0] for i in range(4)}
    clock = time.perf_counter
    outcome = Outcome.ONGOING
    while outcome == Outcome.ONGOING:
        actions = []
        for i, ag in enumerate(agents):
            if not state.agents[i].alive:
                actions.append(Action.STOP)
                continue
            obs = observe(state, i)
            if timed:
                t0 = clock()
                a = ag.act(obs)
                latency[i][0] += clock() - t0
                latency[i][1] += 1
            else:
                a = ag.act(obs)
            actions.append(a)
        prev = state
        state, events = step(state, actions)
        if writer is not None:
            writer.record(prev.step, actions, events)
        flames.update(events, config.flame_life)
        for i, ev in enumerate(events.agents):
            if ev.placed_bomb:
                bombs[i] += 1
            if ev.died:
                cell = ev.entered_cell or prev.agents[i].position
                deaths.append(i)
                death_steps[i] = state.step
                if i in flames.owners(cell):
                    self_kills.append(i)
        outcome = is_terminal(state)
    text = writer.finish(state, outcome) if writer is not None else None
    return MatchResult(
        outcome=outcome,
        steps=state.step,
        final_hash=state_hash(state),
        deaths=deaths,
        self_kills=self_kills,
        death_steps=death_steps,
        bombs_placed=bombs,
        latency={i: tuple(v) for i, v in latency.items()},
        replay=text,
    )


def match_from_roster(roster, seed: int = 0, config: GameConfig | None = None,
                      record_path=None) -> MatchResult:
    return run_match(MatchSpec(tuple(parse_roster(roster)), config or GameConfig(), seed, record_path))
