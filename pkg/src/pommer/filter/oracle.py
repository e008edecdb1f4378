"""Brute-force escape oracle driven by the real engine.

Enumerates every move sequence (STOP/UP/DOWN/LEFT/RIGHT) of one searcher up to
the horizon while every other agent issues STOP, stepping the actual transition
function. Memoisation is keyed on the whole world state, so the search is exact
for whatever the engine does; it only relies on the model assumptions through
the positions it is given (no kicks, no moving bombs).
"""

from __future__ import annotations

from pommer.engine.core import simulate_step
from pommer.engine.types import Action, AgentState, Bomb, GameConfig, GameState, Observation, Tile

SEARCH_MOVES = (Action.STOP, Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)


def _key(state: GameState, agent: int):
    return (
        state.step,
        state.agents[agent].position,
        state.terrain,
        state.bombs,
        tuple(sorted(state.flames.items())),
    )


class EscapeOracle:
    def __init__(self, agent: int, horizon: int):
        self.agent = agent
        self.horizon = horizon
        self.memo = {}
        self.steps = 0

    def _advance(self, state, action):
        acts = [Action.STOP] * 4
        acts[self.agent] = action
        self.steps += 1
        return simulate_step(state, acts)[0]

    def can_survive(self, state: GameState, remaining: int) -> bool:
        """Whether some move sequence keeps the searcher alive ``remaining`` more steps."""
        if not state.agents[self.agent].alive:
            return False
        if remaining == 0 or not (state.bombs or state.flames):
            return True  # nothing left that can kill
        key = (_key(state, self.agent), remaining)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        result = False
        for a in SEARCH_MOVES:
            if self.can_survive(self._advance(state, a), remaining - 1):
                result = True
                break
        self.memo[key] = result
        return result

    def action_survivable(self, state: GameState, action: Action) -> bool:
        return self.can_survive(self._advance(state, action), self.horizon - 1)


def survivable_actions(state: GameState, agent: int, actions=None) -> dict:
    """Map each requested first action to whether the searcher can survive."""
    cfg = state.config
    oracle = EscapeOracle(agent, cfg.bomb_timer + cfg.flame_life)
    if actions is None:
        actions = list(SEARCH_MOVES) + [Action.BOMB]
    return {a: oracle.action_survivable(state, a) for a in actions}


def state_from_observation(obs: Observation, extra_bombs=(), searcher=None,
                           unknown_as=Tile.RIGID, drop_others: bool = False) -> GameState:
    """Ground-truth stand-in for what ``obs`` shows, for post-hoc oracle checks.

    Unknown cells become ``unknown_as``; power-ups are dropped (no kicks can be
    gained); the searcher (default: the observer) keeps its ammo and blast
    strength but cannot kick, and everyone else is a frozen agent (or absent with
    ``drop_others``). Extra bombs are ``(cell, strength, life)``.
    """
    if searcher is None:
        searcher = obs.agent_id
    size = obs.board_size
    terrain = tuple(int(unknown_as) if t == Tile.UNKNOWN else t for t in obs.terrain)
    cfg = GameConfig(
        board_size=size, wood_count=0, rigid_count=0, bomb_timer=obs.bomb_timer,
        flame_life=obs.flame_life, max_steps=10**9, view_radius=size,
    )
    bombs = [Bomb(b.position, 0, b.blast_strength, b.life) for b in obs.bombs]
    bombs += [Bomb(cell, 0, s, life) for cell, s, life in extra_bombs]
    agents = []
    for i in range(4):
        pos = obs.agents.get(i)
        if drop_others and i != searcher:
            pos = None
        if i == searcher:
            agents.append(AgentState(i, pos, pos is not None, obs.ammo, obs.ammo + len(bombs),
                                     obs.blast_strength, False))
        else:
            agents.append(AgentState(i, pos, pos is not None, 0, len(bombs), 2, False))
    return GameState(
        config=cfg,
        step=obs.step,
        terrain=terrain,
        bombs=tuple(sorted(bombs, key=lambda b: b.position)),
        flames=dict(obs.flames),
        powerups={},
        hidden_powerups={},
        agents=tuple(agents),
    )
