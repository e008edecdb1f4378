"""Retrospective board memory and the 14-plane feature stack.

Plane layout (each ``board_size x board_size``, values in [0, 1]):

====  ==========================================================
 0    own position
 1    teammate position (when visible)
 2    enemy positions (visible, union)
 3    passage (visible)
 4    rigid wall (visible)
 5    wood (visible)
 6    flames (visible)
 7    bomb life / bomb_timer
 8    bomb blast strength / board_size
 9    power-ups (visible, union of kinds)
10    remembered passage       (cells out of view only)
11    remembered wood          (cells out of view only)
12    remembered power-ups     (cells out of view only)
13    enemies where last seen  (cells out of view only)
====  ==========================================================

Never-seen cells are zero on every plane. The flat form of a stack is its
row-major (plane, row, column) order, ``stack.reshape(-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pommer.engine.types import Observation, Tile
from pommer.errors import UsageError

N_PLANES = 14
_UNKNOWN = int(Tile.UNKNOWN)


@dataclass(frozen=True)
class RetrospectiveBoard:
    """Last observed value of every cell for one agent.

    ``terrain`` holds ``Tile.UNKNOWN`` for never-seen cells, ``powerups`` the
    last seen kind (0 = none), ``enemies`` whether an enemy stood there when the
    cell was last seen and ``age`` steps since it was last seen (-1 = never).
    Arrays are flat row-major and treated as read-only.
    """

    agent_id: int
    board_size: int
    step: int
    terrain: np.ndarray
    powerups: np.ndarray
    enemies: np.ndarray
    age: np.ndarray

    @classmethod
    def empty(cls, agent_id: int, board_size: int) -> "RetrospectiveBoard":
        n = board_size * board_size
        return cls(
            agent_id, board_size, -1,
            np.full(n, _UNKNOWN, dtype=np.int8),
            np.zeros(n, dtype=np.int8),
            np.zeros(n, dtype=bool),
            np.full(n, -1, dtype=np.int32),
        )

    def seen(self) -> np.ndarray:
        return self.age >= 0


def _obs_arrays(obs: Observation):
    size = obs.board_size
    terrain = np.asarray(obs.terrain, dtype=np.int8)
    powerups = np.zeros(size * size, dtype=np.int8)
    for (r, c), kind in obs.powerups.items():
        powerups[r * size + c] = kind
    enemies = np.zeros(size * size, dtype=bool)
    for (r, c) in obs.enemies().values():
        enemies[r * size + c] = True
    return terrain, powerups, enemies


def update_retrospective(prev: RetrospectiveBoard | None, obs: Observation) -> RetrospectiveBoard:
    """Overwrite the visible window with current values; age everything else."""
    if prev is None:
        prev = RetrospectiveBoard.empty(obs.agent_id, obs.board_size)
    if prev.board_size != obs.board_size:
        raise UsageError(f"retrospective board is {prev.board_size}x{prev.board_size}, "
                         f"observation is {obs.board_size}x{obs.board_size}")
    if prev.agent_id != obs.agent_id:
        raise UsageError(f"retrospective board belongs to agent {prev.agent_id}, not {obs.agent_id}")
    terrain, powerups, enemies = _obs_arrays(obs)
    vis = terrain != _UNKNOWN
    age = np.where(prev.age >= 0, prev.age + 1, -1).astype(np.int32)
    age[vis] = 0
    return RetrospectiveBoard(
        prev.agent_id,
        prev.board_size,
        obs.step,
        np.where(vis, terrain, prev.terrain),
        np.where(vis, powerups, prev.powerups),
        np.where(vis, enemies, prev.enemies),
        age,
    )


def encode(obs: Observation, retro: RetrospectiveBoard) -> np.ndarray:
    """Feature stack of shape ``(14, board_size, board_size)``, float32."""
    size = obs.board_size
    n = size * size
    out = np.zeros((N_PLANES, n), dtype=np.float32)
    terrain, powerups, enemies = _obs_arrays(obs)
    vis = terrain != _UNKNOWN

    r, c = obs.position
    out[0, r * size + c] = 1.0
    mate = obs.teammate_position()
    if mate is not None:
        out[1, mate[0] * size + mate[1]] = 1.0
    out[2] = enemies
    out[3] = terrain == Tile.PASSAGE
    out[4] = terrain == Tile.RIGID
    out[5] = terrain == Tile.WOOD
    for (fr, fc) in obs.flames:
        out[6, fr * size + fc] = 1.0
    for b in obs.bombs:
        idx = b.position[0] * size + b.position[1]
        out[7, idx] = b.life / obs.bomb_timer
        out[8, idx] = min(1.0, b.blast_strength / size)
    out[9] = powerups > 0

    hidden = ~vis
    out[10] = hidden & (retro.terrain == Tile.PASSAGE)
    out[11] = hidden & (retro.terrain == Tile.WOOD)
    out[12] = hidden & (retro.powerups > 0)
    out[13] = hidden & retro.enemies
    return out.reshape(N_PLANES, size, size)


def aux_features(obs: Observation) -> np.ndarray:
    """Own scalars (ammo, blast strength, can_kick), for the optional auxiliary input."""
    return np.array(
        [min(1.0, obs.ammo / 10.0), min(1.0, obs.blast_strength / obs.board_size), float(obs.can_kick)],
        dtype=np.float32,
    )


def flatten(stack: np.ndarray) -> list:
    return stack.reshape(-1).tolist()


def unflatten(values, board_size: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float32)
    if arr.size != N_PLANES * board_size * board_size:
        raise UsageError(f"expected {N_PLANES * board_size * board_size} values, got {arr.size}")
    return arr.reshape(N_PLANES, board_size, board_size)


class Featurizer:
    """Per-agent, per-episode wrapper: keeps the retrospective board across steps."""

    def __init__(self):
        self.retro = None

    def reset(self) -> None:
        self.retro = None

    def __call__(self, obs: Observation) -> np.ndarray:
        self.retro = update_retrospective(self.retro, obs)
        return encode(obs, self.retro)
