from pommer.filter.model import EscapeModel, cells_to_mask, mask_to_cells
from pommer.filter.oracle import EscapeOracle, state_from_observation, survivable_actions
from pommer.filter.rules import (
    ACTION_ORDER,
    FilterResult,
    Reason,
    bomb_timeline,
    doomed_positions,
    escape_model,
    filter_actions,
    lookahead_bomb_check,
    next_step_flames,
)

__all__ = [
    "ACTION_ORDER", "EscapeModel", "EscapeOracle", "FilterResult", "Reason",
    "bomb_timeline", "cells_to_mask", "doomed_positions", "escape_model",
    "filter_actions", "lookahead_bomb_check", "mask_to_cells", "next_step_flames",
    "state_from_observation", "survivable_actions",
]
