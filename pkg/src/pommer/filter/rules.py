"""The ActionFilter: remove moves into next-step flames or doomed cells and unsafe
bomb placements, using only what the agent can currently see."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from pommer.engine.types import Action, Observation, Tile
from pommer.filter.model import EscapeModel, blast_mask, mask_to_cells

ACTION_ORDER = (Action.STOP, Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT, Action.BOMB)
_MOVE_DELTA = {Action.UP: (-1, 0), Action.DOWN: (1, 0), Action.LEFT: (0, -1), Action.RIGHT: (0, 1)}
_PASSAGE = int(Tile.PASSAGE)


class Reason(str, Enum):
    FLAME_NEXT_STEP = "FlameNextStep"
    DOOMED_TARGET = "DoomedTarget"
    TEAMMATE_TOO_CLOSE = "TeammateTooClose"
    COVERED_BY_BLAST = "CoveredByBlast"
    ILLEGAL = "Illegal"


@dataclass
class FilterResult:
    allowed: frozenset
    rejected: dict = field(default_factory=dict)
    fallback: bool = False  # every action was rejected; ``allowed`` holds the best one

    def mask(self) -> list[bool]:
        return [a in self.allowed for a in ACTION_ORDER]


def horizon(obs: Observation) -> int:
    return obs.bomb_timer + obs.flame_life


def escape_model(obs: Observation, extra_bombs=(), searcher=None, unknown_passable=False) -> EscapeModel:
    """Timeline for ``searcher`` (default: the observer); every other visible agent
    is a frozen blocker."""
    if searcher is None:
        searcher = obs.agent_id
    bombs = [(b.position, b.blast_strength, b.life) for b in obs.bombs]
    bombs.extend(extra_bombs)
    blockers = [p for i, p in obs.agents.items() if i != searcher]
    return EscapeModel(
        obs.board_size, obs.terrain, bombs, obs.flames, blockers,
        horizon(obs), obs.flame_life, unknown_passable,
    )


def bomb_timeline(obs: Observation) -> list[set]:
    """Predicted flame cells for states ``t + 0 .. t + horizon``."""
    model = escape_model(obs)
    return [mask_to_cells(model.flames_at(k), obs.board_size) for k in range(horizon(obs) + 1)]


def next_step_flames(obs: Observation) -> set:
    return mask_to_cells(escape_model(obs).flames_at(1), obs.board_size)


def _move_targets(obs: Observation):
    """Map each move to the cell the agent would occupy next step, or None if blocked.

    A legal kick leaves the agent where it is, so it maps to the current cell.
    """
    size = obs.board_size
    r, c = obs.position
    terrain = obs.terrain
    bomb_cells = {b.position for b in obs.bombs}
    others = {p for i, p in obs.agents.items() if i != obs.agent_id}
    out = {}
    for a, (dr, dc) in _MOVE_DELTA.items():
        tr, tc = r + dr, c + dc
        if not (0 <= tr < size and 0 <= tc < size) or terrain[tr * size + tc] != _PASSAGE:
            out[a] = None
        elif (tr, tc) in bomb_cells:
            fr, fc = tr + dr, tc + dc
            kick_ok = (
                obs.can_kick
                and 0 <= fr < size
                and 0 <= fc < size
                and terrain[fr * size + fc] == _PASSAGE
                and (fr, fc) not in bomb_cells
                and (fr, fc) not in others
                and (obs.kick_through_powerups or (fr, fc) not in obs.powerups)
            )
            out[a] = (r, c) if kick_ok else None
        elif (tr, tc) in others:
            out[a] = None
        else:
            out[a] = (tr, tc)
    return out


def doomed_positions(obs: Observation) -> set:
    """Cells the agent can occupy next step from which no move sequence escapes."""
    model = escape_model(obs)
    size = obs.board_size
    cells = {obs.position} | {t for t in _move_targets(obs).values() if t is not None}
    return {c for c in cells if not model.survives(c[0] * size + c[1], 1)}


def lookahead_bomb_check(obs: Observation, model: EscapeModel | None = None) -> bool:
    """True iff, with a bomb dropped here now, the agent's cell is still escapable."""
    size = obs.board_size
    own = obs.position
    model = escape_model(obs, extra_bombs=[(own, obs.blast_strength, obs.bomb_timer)])
    return model.survives(own[0] * size + own[1], 1)


def covered_by_blast(obs: Observation) -> bool:
    size = obs.board_size
    r, c = obs.position
    bit = 1 << (r * size + c)
    for b in obs.bombs:
        if blast_mask(b.position[0] * size + b.position[1], b.blast_strength, obs.terrain, size) & bit:
            return True
    return False


def teammate_too_close(obs: Observation) -> bool:
    # teammate strength is unobservable: assume it equals ours
    mate = obs.teammate_position()
    if mate is None:
        return False
    dist = abs(mate[0] - obs.position[0]) + abs(mate[1] - obs.position[1])
    return dist < 2 * obs.blast_strength


def filter_actions(obs: Observation, strict: bool = False) -> FilterResult:
    """Prune the six actions for ``obs``.

    With ``strict`` a bomb is additionally only allowed if the agent can still
    escape its own blast (lookahead search).
    """
    size = obs.board_size
    own = obs.position
    targets = _move_targets(obs)
    rejected = {}

    quiet = not obs.bombs and not obs.flames
    model = None if quiet else escape_model(obs)
    fire1 = model.flames_at(1) if model else 0
    safe_cache = {}

    def cell_reason(cell):
        idx = cell[0] * size + cell[1]
        if idx in safe_cache:
            return safe_cache[idx]
        if model is None:
            reason = None
        elif (fire1 >> idx) & 1:
            reason = Reason.FLAME_NEXT_STEP
        elif not model.survives(idx, 1):
            reason = Reason.DOOMED_TARGET
        else:
            reason = None
        safe_cache[idx] = reason
        return reason

    stay_reason = cell_reason(own)
    if stay_reason:
        rejected[Action.STOP] = stay_reason
    for a, t in targets.items():
        if t is None:
            rejected[a] = Reason.ILLEGAL
        else:
            reason = cell_reason(t)
            if reason:
                rejected[a] = reason

    bomb_cells = {b.position for b in obs.bombs}
    if obs.ammo <= 0 or own in bomb_cells:
        rejected[Action.BOMB] = Reason.ILLEGAL
    elif stay_reason:
        rejected[Action.BOMB] = stay_reason
    elif obs.bombs and covered_by_blast(obs):
        rejected[Action.BOMB] = Reason.COVERED_BY_BLAST
    elif teammate_too_close(obs):
        rejected[Action.BOMB] = Reason.TEAMMATE_TOO_CLOSE
    elif strict and not lookahead_bomb_check(obs):
        rejected[Action.BOMB] = Reason.DOOMED_TARGET

    allowed = frozenset(a for a in ACTION_ORDER if a not in rejected)
    if allowed:
        return FilterResult(allowed, rejected)

    # nothing is safe: pick the action that postpones flame contact the longest
    candidates = [a for a in ACTION_ORDER if not (a == Action.BOMB and rejected[a] == Reason.ILLEGAL)]
    best = best_survival_action(obs, candidates, model, targets)
    del rejected[best]
    return FilterResult(frozenset([best]), rejected, fallback=True)


def best_survival_action(obs: Observation, actions, model: EscapeModel | None = None,
                         targets=None) -> Action:
    """The action among ``actions`` that postpones flame contact the longest;
    ties go to the earliest in ``ACTION_ORDER``. A blocked move counts as Stop."""
    size = obs.board_size
    own = obs.position
    own_idx = own[0] * size + own[1]
    if model is None:
        model = escape_model(obs)
    if targets is None:
        targets = _move_targets(obs)
    best, best_time = None, -1
    for a in ACTION_ORDER:
        if a not in actions:
            continue
        if a == Action.BOMB:
            m = escape_model(obs, extra_bombs=[(own, obs.blast_strength, obs.bomb_timer)])
            t = m.survival_time(own_idx, 1)
        else:
            cell = own if a == Action.STOP or targets[a] is None else targets[a]
            t = model.survival_time(cell[0] * size + cell[1], 1)
        if t > best_time:
            best, best_time = a, t
    return Action.STOP if best is None else best
