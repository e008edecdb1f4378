"""Value types of the simulation: config, board items, agents, state, events, views.

Cells are ``(row, col)`` tuples with ``(0, 0)`` in the top-left corner. Terrain is
stored flat in row-major order, so cell ``(r, c)`` lives at index ``r * size + c``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Optional

from pommer.errors import UsageError

Cell = tuple[int, int]


class Action(IntEnum):
    STOP = 0
    UP = 1
    DOWN = 2
    LEFT = 3
    RIGHT = 4
    BOMB = 5


MOVES = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT)

# (drow, dcol) per action; STOP doubles as "no velocity" for bombs.
DELTAS = {
    Action.STOP: (0, 0),
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}


class Tile(IntEnum):
    PASSAGE = 0
    RIGID = 1
    WOOD = 2
    UNKNOWN = 3  # only ever appears in observations


class Powerup(IntEnum):
    EXTRA_BOMB = 1
    ENABLE_KICK = 2
    EXTRA_BLAST = 3


class Outcome(IntEnum):
    ONGOING = 0
    TEAM0_WINS = 1
    TEAM1_WINS = 2
    DRAW = 3


def team_of(agent_id: int) -> int:
    """Diagonal pairing: agents {0, 2} form team 0 and {1, 3} form team 1."""
    return agent_id % 2


def teammate_of(agent_id: int) -> int:
    return (agent_id + 2) % 4


@dataclass(frozen=True)
class GameConfig:
    board_size: int = 11
    wood_count: int = 36
    rigid_count: int = 36
    powerup_probability: float = 0.5
    bomb_timer: int = 10
    flame_life: int = 2
    initial_ammo: int = 1
    initial_blast: int = 2
    max_steps: int = 800
    view_radius: int = 4
    rng_seed: int = 0
    kick_through_powerups: bool = True
    flames_destroy_powerups: bool = True

    def __post_init__(self):
        if self.board_size < 3:
            raise UsageError(f"board_size must be >= 3, got {self.board_size}")
        if self.bomb_timer < 1 or self.flame_life < 1:
            raise UsageError("bomb_timer and flame_life must be >= 1")
        if self.initial_blast < 2:
            raise UsageError("initial_blast must be >= 2")
        if self.view_radius < 1:
            raise UsageError("view_radius must be >= 1")
        if not 0.0 <= self.powerup_probability <= 1.0:
            raise UsageError("powerup_probability must lie in [0, 1]")
        if self.wood_count < 0 or self.rigid_count < 0 or self.max_steps < 1:
            raise UsageError("counts must be non-negative and max_steps positive")

    def replace(self, **changes) -> "GameConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GameConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise UsageError(f"unknown GameConfig fields: {sorted(unknown)}")
        return cls(**d)


class Bomb(NamedTuple):
    position: Cell
    owner: int
    blast_strength: int
    life: int
    velocity: Action = Action.STOP


class AgentState(NamedTuple):
    id: int
    position: Optional[Cell]
    alive: bool = True
    ammo: int = 1
    max_ammo: int = 1
    blast_strength: int = 2
    can_kick: bool = False

    @property
    def team(self) -> int:
        return self.id % 2


@dataclass(frozen=True, eq=True)
class GameState:
    """Full ground truth. Treated as immutable: ``step`` always builds a new one.

    ``flames`` maps cell -> remaining life, ``powerups`` holds exposed power-ups and
    ``hidden_powerups`` those still buried under wood. Transitions consume no
    randomness, so the generator seed is the whole ``rng_state``.
    """

    config: GameConfig
    step: int
    terrain: tuple[int, ...]
    bombs: tuple[Bomb, ...]
    flames: dict
    powerups: dict
    hidden_powerups: dict
    agents: tuple[AgentState, ...]
    rng_state: int = 0

    def tile(self, cell: Cell) -> int:
        return self.terrain[cell[0] * self.config.board_size + cell[1]]

    def bomb_at(self, cell: Cell) -> Optional[Bomb]:
        for b in self.bombs:
            if b.position == cell:
                return b
        return None

    def replace(self, **changes) -> "GameState":
        return dataclasses.replace(self, **changes)

    __hash__ = None  # dict fields; use serialize.state_hash


class AgentEvents(NamedTuple):
    """What happened to one agent during one step, from that agent's perspective."""

    agent_id: int
    alive: bool
    died: bool = False
    killed_enemy_count: int = 0  # enemies who died this step, whoever caused it
    teammate_died: bool = False
    picked_powerup: Optional[Powerup] = None
    entered_cell: Optional[Cell] = None
    placed_bomb: bool = False
    woods_destroyed: int = 0  # wood cells covered by blasts of this agent's bombs

    @property
    def team(self) -> int:
        return self.agent_id % 2

    def to_dict(self) -> dict:
        d = {"alive": self.alive}
        if self.died:
            d["died"] = True
        if self.killed_enemy_count:
            d["enemies_died"] = self.killed_enemy_count
        if self.teammate_died:
            d["teammate_died"] = True
        if self.picked_powerup is not None:
            d["powerup"] = int(self.picked_powerup)
        if self.entered_cell is not None:
            d["entered"] = list(self.entered_cell)
        if self.placed_bomb:
            d["bomb"] = True
        if self.woods_destroyed:
            d["woods"] = self.woods_destroyed
        return d


@dataclass(frozen=True)
class StepEvents:
    agents: tuple[AgentEvents, ...]
    actions: tuple[Action, ...]  # after illegal-action substitution
    exploded: int = 0
    # (owner, bomb cell, covered cells) per exploding bomb; not part of replays
    blasts: tuple = ()

    def __getitem__(self, agent_id: int) -> AgentEvents:
        return self.agents[agent_id]

    def to_dict(self) -> dict:
        return {
            "actions": [int(a) for a in self.actions],
            "exploded": self.exploded,
            "agents": [e.to_dict() for e in self.agents],
        }


class BombView(NamedTuple):
    """A bomb as seen by an agent; owners are not observable."""

    position: Cell
    blast_strength: int
    life: int
    velocity: Action = Action.STOP


@dataclass(frozen=True)
class Observation:
    """One agent's partial view of the board.

    ``terrain`` is flat row-major with ``Tile.UNKNOWN`` outside the view window.
    ``agents`` maps id -> position for living agents inside the window (self
    included). ``visible`` is the window as a bitmask over flat cell indices.
    """

    agent_id: int
    step: int
    board_size: int
    view_radius: int
    bomb_timer: int
    flame_life: int
    position: Cell
    ammo: int
    blast_strength: int
    can_kick: bool
    teammate_alive: bool
    terrain: tuple[int, ...]
    bombs: tuple[BombView, ...]
    flames: dict
    powerups: dict
    agents: dict
    visible: int = field(repr=False, default=0)
    kick_through_powerups: bool = True

    @property
    def team(self) -> int:
        return self.agent_id % 2

    @property
    def teammate(self) -> int:
        return (self.agent_id + 2) % 4

    def is_visible(self, cell: Cell) -> bool:
        return bool(self.visible >> (cell[0] * self.board_size + cell[1]) & 1)

    def tile(self, cell: Cell) -> int:
        return self.terrain[cell[0] * self.board_size + cell[1]]

    def enemies(self) -> dict:
        return {i: p for i, p in self.agents.items() if i % 2 != self.agent_id % 2}

    def teammate_position(self) -> Optional[Cell]:
        return self.agents.get(self.teammate)

    __hash__ = None
