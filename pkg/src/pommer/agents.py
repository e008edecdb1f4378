"""Agent zoo behind one interface: ``reset(seed)`` then ``act(obs) -> Action``.

Stochastic agents draw from a private ``random.Random`` seeded from
(match seed, agent id), so a match replays exactly from its seed.
"""

from __future__ import annotations

import random
from collections import deque

import numpy as np

from pommer.engine.board import blast_cells
from pommer.engine.types import Action, Observation, Tile
from pommer.errors import UsageError
from pommer.featurize import Featurizer, aux_features
from pommer.filter.model import EscapeModel
from pommer.filter.rules import (
    ACTION_ORDER,
    best_survival_action,
    escape_model,
    filter_actions,
    horizon,
    lookahead_bomb_check,
)

_STEPS = ((Action.UP, -1, 0), (Action.DOWN, 1, 0), (Action.LEFT, 0, -1), (Action.RIGHT, 0, 1))


def agent_seed(match_seed: int, agent_id: int) -> str:
    # str seeds go through sha512 in random.seed, stable across platforms
    return f"{match_seed}:{agent_id}"


class Agent:
    kind = "agent"

    def __init__(self):
        self.rng = random.Random(0)

    def reset(self, seed=None) -> None:
        """Start a new episode; ``seed`` fixes the private RNG stream."""
        self.rng = random.Random(seed)

    def act(self, obs: Observation) -> Action:
        raise NotImplementedError


class StaticAgent(Agent):
    kind = "static"

    def act(self, obs):
        return Action.STOP


class RandomAgent(Agent):
    """Uniform over all six actions, no filter."""

    kind = "random"

    def act(self, obs):
        return ACTION_ORDER[self.rng.randrange(6)]


class SmartRandomAgent(Agent):
    """Uniform over the filter-allowed actions."""

    def __init__(self, allow_bomb: bool = True, strict: bool = False):
        super().__init__()
        self.allow_bomb = allow_bomb
        self.strict = strict
        self.kind = "smart_random" if allow_bomb else "smart_random_nobomb"

    def act(self, obs):
        res = filter_actions(obs, strict=self.strict)
        allowed = sorted(res.allowed)
        if not self.allow_bomb:
            allowed = [a for a in allowed if a != Action.BOMB]
            if not allowed:
                return best_survival_action(obs, ACTION_ORDER[:5])
        if len(allowed) == 1:
            return allowed[0]
        return allowed[self.rng.randrange(len(allowed))]


def _bfs_first_steps(obs: Observation, goals, blocked):
    """Breadth-first search over visible passage cells from the agent.

    Returns ``(distance, first_move, goal)`` for the nearest goal cell, or
    None. Goal cells may be blocked (e.g. an enemy's cell); others may not.
    """
    size = obs.board_size
    start = obs.position
    if not goals:
        return None
    seen = {start}
    queue = deque([(start, 0, None)])
    while queue:
        cell, dist, first = queue.popleft()
        if cell in goals and cell != start:
            return dist, first, cell
        for a, dr, dc in _STEPS:
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt in seen or not (0 <= nxt[0] < size and 0 <= nxt[1] < size):
                continue
            seen.add(nxt)
            if nxt in goals:
                queue.append((nxt, dist + 1, first or a))
                continue
            if obs.terrain[nxt[0] * size + nxt[1]] != Tile.PASSAGE or nxt in blocked:
                continue
            queue.append((nxt, dist + 1, first or a))
    return None


def _escape_move(obs: Observation, model: EscapeModel, allowed) -> Action | None:
    """First move of the quickest path to a cell no predicted flame ever reaches."""
    size = obs.board_size
    last = model.last_event
    start = obs.position[0] * size + obs.position[1]
    # time-expanded search: frontier maps cell -> first action
    frontier = {start: None}
    for k in range(1, last + 1):
        nxt = {}
        fire = model.flames_at(k)
        passable = model.passable[k]
        for idx, first in frontier.items():
            r, c = divmod(idx, size)
            options = [(Action.STOP, idx)]
            for a, dr, dc in _STEPS:
                rr, cc = r + dr, c + dc
                if 0 <= rr < size and 0 <= cc < size and (passable >> (rr * size + cc)) & 1:
                    options.append((a, rr * size + cc))
            for a, j in options:
                if (fire >> j) & 1 or j in nxt:
                    continue
                f = a if first is None else first
                if first is None and f not in allowed:
                    continue
                nxt[j] = f
        frontier = nxt
        for idx, first in frontier.items():
            # safe from here on forever
            if not any((model.flames_at(t) >> idx) & 1 for t in range(k, last + 1)):
                return first
        if not frontier:
            break
    return None


class SimpleAgent(Agent):
    """Rule-based navigator: evade, collect, attack, approach, clear wood."""

    kind = "simple"

    def bomb_ok(self, obs: Observation, res) -> bool:
        return Action.BOMB in res.allowed and not res.fallback and lookahead_bomb_check(obs)

    def attack_ok(self, obs: Observation, res) -> bool:
        if not self.bomb_ok(obs, res):
            return False
        reach = blast_cells(obs.position, obs.blast_strength, obs.terrain, obs.board_size)
        return any(p in reach for p in obs.enemies().values())

    def wood_bomb_ok(self, obs: Observation, res) -> bool:
        return self.bomb_ok(obs, res)

    def act(self, obs):
        res = filter_actions(obs)
        allowed = res.allowed
        if res.fallback:
            return next(iter(allowed))
        size = obs.board_size
        bombs = {b.position for b in obs.bombs}
        blocked = bombs | set(obs.flames) | {p for i, p in obs.agents.items() if i != obs.agent_id}

        # 1. evade: standing here gets us burnt eventually
        if obs.bombs or obs.flames:
            model = escape_model(obs)
            idx = obs.position[0] * size + obs.position[1]
            if any((model.flames_at(k) >> idx) & 1 for k in range(1, model.last_event + 1)):
                move = _escape_move(obs, model, allowed)
                if move is not None:
                    return move
                return best_survival_action(obs, allowed)

        # 2. power-ups
        found = _bfs_first_steps(obs, set(obs.powerups), blocked)
        if found and found[1] in allowed:
            return found[1]

        # 3. attack
        if obs.ammo > 0 and self.attack_ok(obs, res):
            return Action.BOMB

        # 4. approach an enemy
        enemies = set(obs.enemies().values())
        found = _bfs_first_steps(obs, enemies, blocked - enemies)
        if found and found[0] > 1 and found[1] in allowed:
            return found[1]

        # 5. clear wood
        r, c = obs.position
        next_to_wood = any(
            0 <= r + dr < size and 0 <= c + dc < size and obs.terrain[(r + dr) * size + c + dc] == Tile.WOOD
            for _, dr, dc in _STEPS
        )
        if obs.ammo > 0:
            if next_to_wood and self.wood_bomb_ok(obs, res):
                return Action.BOMB
            if not next_to_wood:
                goals = set()
                for idx, t in enumerate(obs.terrain):
                    if t != Tile.PASSAGE:
                        continue
                    wr, wc = divmod(idx, size)
                    for _, dr, dc in _STEPS:
                        if 0 <= wr + dr < size and 0 <= wc + dc < size and \
                                obs.terrain[(wr + dr) * size + wc + dc] == Tile.WOOD:
                            goals.add((wr, wc))
                            break
                found = _bfs_first_steps(obs, goals - blocked, blocked)
                if found and found[1] in allowed:
                    return found[1]

        # 6. wait
        if Action.STOP in allowed:
            return Action.STOP
        return min(allowed)


def kill_proof(obs: Observation, enemy_pos) -> bool:
    """True iff a bomb dropped here now dooms the enemy at ``enemy_pos`` under the
    static escape model. Unknown cells count as passable and other agents do not
    block the enemy, both in the enemy's favour."""
    size = obs.board_size
    model = EscapeModel(
        size, obs.terrain,
        [(b.position, b.blast_strength, b.life) for b in obs.bombs]
        + [(obs.position, obs.blast_strength, obs.bomb_timer)],
        obs.flames, [], horizon(obs), obs.flame_life, unknown_passable=True,
    )
    return not model.survives(enemy_pos[0] * size + enemy_pos[1], 0)


class CautiousAgent(SimpleAgent):
    """SimpleAgent that only bombs when the bomb provably kills a visible enemy."""

    kind = "cautious"

    def attack_ok(self, obs, res):
        if not self.bomb_ok(obs, res):
            return False
        return any(kill_proof(obs, p) for p in obs.enemies().values())

    def wood_bomb_ok(self, obs, res):
        return self.attack_ok(obs, res)


class NeuralAgent(Agent):
    """Policy network with optional action-filter masking."""

    kind = "neural"

    def __init__(self, spec, params, mode: str = "sample", use_filter: bool = True,
                 strict: bool = False, source: str = ""):
        super().__init__()
        if mode not in ("sample", "argmax"):
            raise UsageError(f"mode must be 'sample' or 'argmax', not {mode!r}")
        from pommer.rl.network import unpack

        self.spec = spec
        self.params = np.asarray(params, dtype=np.float32)
        self.params.setflags(write=False)
        self.tensors = unpack(spec, self.params)  # also validates the parameter count
        self.mode = mode
        self.use_filter = use_filter
        self.strict = strict
        self.source = source
        self.featurizer = Featurizer()
        self.last = None  # (features, action, logprob, value, mask) of the latest decision

    def reset(self, seed=None):
        super().reset(seed)
        self.featurizer.reset()
        self.last = None

    def act(self, obs):
        from pommer.rl.network import forward

        if obs.board_size != self.spec.board_size:
            raise UsageError(f"network built for board {self.spec.board_size}, got {obs.board_size}")
        feats = self.featurizer(obs)
        aux = aux_features(obs) if self.spec.aux_dim else None
        probs, value = forward(self.spec, self.tensors, feats, aux)
        probs = probs.astype(np.float64)
        if self.use_filter:
            res = filter_actions(obs, strict=self.strict)
            mask = np.array(res.mask(), dtype=bool)
            masked = probs * mask
            total = masked.sum()
            if total <= 0:
                # every allowed action underflowed: take the first, as a certain choice
                a = int(min(res.allowed))
                mask = np.zeros(6, dtype=bool)
                mask[a] = True
                self.last = (feats, a, 0.0, value, mask)
                return ACTION_ORDER[a]
            dist = masked / total
        else:
            mask = np.ones(6, dtype=bool)
            dist = probs
        if self.mode == "argmax":
            a = int(np.argmax(dist))
        else:
            a = self.rng.choices(range(6), weights=dist.tolist())[0]
        self.last = (feats, a, float(np.log(dist[a])), value, mask)
        return ACTION_ORDER[a]


ROSTER_KINDS = ("static", "random", "smart_random", "smart_random_nobomb", "simple", "cautious",
                "neural:<checkpoint>")


def make_agent(name: str) -> Agent:
    """Build an agent from a roster string."""
    name = name.strip()
    if name == "static":
        return StaticAgent()
    if name == "random":
        return RandomAgent()
    if name == "smart_random":
        return SmartRandomAgent(True)
    if name == "smart_random_nobomb":
        return SmartRandomAgent(False)
    if name == "simple":
        return SimpleAgent()
    if name == "cautious":
        return CautiousAgent()
    if name.startswith("neural:"):
        from pommer.rl.network import load_checkpoint

        body = name[len("neural:"):]
        mode = "sample"
        if body.endswith("@argmax"):
            body, mode = body[:-len("@argmax")], "argmax"
        try:
            spec, params, _ = load_checkpoint(body)
        except OSError as exc:
            raise UsageError(f"cannot read checkpoint {body!r}: {exc}") from exc
        return NeuralAgent(spec, params, mode=mode, source=body)
    raise UsageError(f"unknown agent {name!r}; expected one of {', '.join(ROSTER_KINDS)}")


def parse_roster(text) -> list[str]:
    """Two names are team 0 vs team 1 (positions 0, 2 and 1, 3); four names are
    taken per position."""
    names = [s.strip() for s in text.split(",")] if isinstance(text, str) else list(text)
    if len(names) == 2:
        return [names[0], names[1], names[0], names[1]]
    if len(names) == 4:
        return names
    raise UsageError(f"roster needs 2 (team names) or 4 (per position) entries, got {len(names)}")
