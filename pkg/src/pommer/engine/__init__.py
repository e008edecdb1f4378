from pommer.engine.board import blast_cells, corner_cells, empty_state, generate_board
from pommer.engine.core import is_terminal, observe, simulate_step, step
from pommer.engine.serialize import (
    dump_grid,
    parse_grid,
    state_from_dict,
    state_hash,
    state_to_dict,
)
from pommer.engine.types import (
    MOVES,
    Action,
    AgentEvents,
    AgentState,
    Bomb,
    BombView,
    Cell,
    GameConfig,
    GameState,
    Observation,
    Outcome,
    Powerup,
    StepEvents,
    Tile,
    team_of,
    teammate_of,
)

__all__ = [
    "MOVES", "Action", "AgentEvents", "AgentState", "Bomb", "BombView", "Cell",
    "GameConfig", "GameState", "Observation", "Outcome", "Powerup", "StepEvents",
    "Tile", "blast_cells", "corner_cells", "dump_grid", "empty_state",
    "generate_board", "is_terminal", "observe", "parse_grid", "simulate_step",
    "state_from_dict", "state_hash", "state_to_dict", "step", "team_of",
    "teammate_of",
]
