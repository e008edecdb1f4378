"""Dense reward shaping on top of the sparse +-1 game result."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from pommer.engine.types import AgentEvents, Outcome, Powerup


@dataclass(frozen=True)
class ShapingConfig:
    new_cell: float = 0.001
    pick_kick: float = 0.02
    pick_ammo: float = 0.01
    pick_blast: float = 0.01
    enemy_death: float = 0.5
    teammate_death: float = -0.5
    dead_winner: float = 0.5
    draw: float = 0.0
    win: float = 1.0
    loss: float = -1.0
    fifo_length: int = 121


class ShapingState:
    """Per-agent, per-episode memory: the FIFO of recently visited cells."""

    def __init__(self, cfg: ShapingConfig | None = None, start=None):
        self.cfg = cfg or ShapingConfig()
        self.visited = deque(maxlen=self.cfg.fifo_length)
        self.total = 0.0
        if start is not None:
            self.visited.append(tuple(start))

    def visit(self, cell) -> bool:
        """Enqueue ``cell``; True if it was not already in the queue."""
        cell = tuple(cell)
        if cell in self.visited:
            return False
        self.visited.append(cell)
        return True


def terminal_reward(agent_id: int, alive: bool, outcome: Outcome, cfg: ShapingConfig) -> float:
    if outcome == Outcome.DRAW:
        return cfg.draw
    if outcome == Outcome.ONGOING:
        return 0.0
    won = (outcome == Outcome.TEAM0_WINS) == (agent_id % 2 == 0)
    if won:
        return cfg.win if alive else cfg.dead_winner
    return cfg.loss


def shaped_reward(ev: AgentEvents, state: ShapingState, outcome: Outcome | None = None) -> float:
    """Reward for one step of one agent. ``outcome`` is passed on the final step
    of the game (also to agents that died earlier, see ``terminal_reward``)."""
    cfg = state.cfg
    r = 0.0
    if ev.entered_cell is not None and ev.alive and state.visit(ev.entered_cell):
        r += cfg.new_cell
    if ev.picked_powerup == Powerup.ENABLE_KICK:
        r += cfg.pick_kick
    elif ev.picked_powerup == Powerup.EXTRA_BOMB:
        r += cfg.pick_ammo
    elif ev.picked_powerup == Powerup.EXTRA_BLAST:
        r += cfg.pick_blast
    r += cfg.enemy_death * ev.killed_enemy_count
    if ev.teammate_died:
        r += cfg.teammate_death
    if outcome is not None and outcome != Outcome.ONGOING:
        r += terminal_reward(ev.agent_id, ev.alive, outcome, cfg)
    state.total += r
    return r
