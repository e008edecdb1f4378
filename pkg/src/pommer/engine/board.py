"""Procedural board generation and blast geometry."""

from __future__ import annotations

import random
from collections import deque

from pommer.engine.types import (
    AgentState,
    Cell,
    GameConfig,
    GameState,
    Powerup,
    Tile,
)
from pommer.errors import GenerationError

MAX_GENERATION_ATTEMPTS = 1000


def corner_cells(size: int) -> tuple[Cell, Cell, Cell, Cell]:
    """Spawn corners for agents 0..3, arranged so diagonal agents share a team."""
    n = size - 1
    return ((0, 0), (0, n), (n, n), (n, 0))


def spawn_pockets(size: int) -> set[Cell]:
    n = size - 1
    pockets = set()
    for r, c in corner_cells(size):
        pockets.add((r, c))
        pockets.add((r, 1 if c == 0 else n - 1))
        pockets.add((1 if r == 0 else n - 1, c))
    return pockets


def blast_cells(origin: Cell, strength: int, terrain, size: int) -> set[Cell]:
    """Cells covered by a bomb of ``strength`` exploding at ``origin``.

    Each cardinal ray reaches up to ``strength - 1`` cells, stops before rigid
    walls and includes (then stops at) the first wood cell it meets.
    """
    r0, c0 = origin
    cells = {origin}
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        r, c = r0, c0
        for _ in range(strength - 1):
            r += dr
            c += dc
            if not (0 <= r < size and 0 <= c < size):
                break
            t = terrain[r * size + c]
            if t == Tile.RIGID:
                break
            cells.add((r, c))
            if t == Tile.WOOD:
                break
    return cells


def _connected(terrain: list[int], size: int, corners) -> bool:
    start = corners[0]
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= nr < size and 0 <= nc < size and (nr, nc) not in seen:
                if terrain[nr * size + nc] != Tile.RIGID:
                    seen.add((nr, nc))
                    queue.append((nr, nc))
    return all(c in seen for c in corners)


def _symmetric_groups(size: int) -> tuple[list[tuple[Cell, Cell]], Cell | None]:
    """Cell pairs related by 180 degree rotation, excluding spawn pockets."""
    pockets = spawn_pockets(size)
    n = size - 1
    pairs = []
    center = None
    for r in range(size):
        for c in range(size):
            if (r, c) in pockets:
                continue
            mirror = (n - r, n - c)
            if mirror == (r, c):
                center = (r, c)
            elif (r, c) < mirror:
                pairs.append(((r, c), mirror))
    return pairs, center


def generate_board(config: GameConfig) -> GameState:
    """Random 180-degree symmetric board with the agents in the four corners.

    Uses Python's Mersenne Twister (``random.Random``) seeded with
    ``config.rng_seed``; only ``shuffle`` and ``random`` are called, both of which
    are stable across platforms and interpreter versions.
    """
    size = config.board_size
    pairs, center = _symmetric_groups(size)
    available = 2 * len(pairs) + (center is not None)
    rigid, wood = config.rigid_count, config.wood_count
    if rigid + wood > available:
        raise GenerationError(
            f"{rigid} rigid + {wood} wood exceed {available} free cells on a {size}x{size} board"
        )
    odd = (rigid % 2) + (wood % 2)
    if odd > (1 if center is not None else 0):
        raise GenerationError("odd rigid/wood counts need the single center cell of an odd board")
    if (rigid // 2) + (wood // 2) > len(pairs):
        raise GenerationError("not enough symmetric cell pairs")

    rng = random.Random(config.rng_seed)
    corners = corner_cells(size)
    for _ in range(MAX_GENERATION_ATTEMPTS):
        order = list(pairs)
        rng.shuffle(order)
        terrain = [Tile.PASSAGE] * (size * size)
        k = 0
        for kind, count in ((Tile.RIGID, rigid), (Tile.WOOD, wood)):
            if count % 2:
                terrain[center[0] * size + center[1]] = kind
            for a, b in order[k:k + count // 2]:
                terrain[a[0] * size + a[1]] = kind
                terrain[b[0] * size + b[1]] = kind
            k += count // 2
        if _connected(terrain, size, corners):
            break
    else:
        raise GenerationError(f"no connected board after {MAX_GENERATION_ATTEMPTS} attempts")

    hidden = {}
    kinds = (Powerup.EXTRA_BOMB, Powerup.ENABLE_KICK, Powerup.EXTRA_BLAST)
    for idx, t in enumerate(terrain):
        if t == Tile.WOOD and rng.random() < config.powerup_probability:
            hidden[(idx // size, idx % size)] = kinds[int(rng.random() * 3)]

    agents = tuple(
        AgentState(
            id=i,
            position=corners[i],
            ammo=config.initial_ammo,
            max_ammo=config.initial_ammo,
            blast_strength=config.initial_blast,
        )
        for i in range(4)
    )
    return GameState(
        config=config,
        step=0,
        terrain=tuple(int(t) for t in terrain),
        bombs=(),
        flames={},
        powerups={},
        hidden_powerups=hidden,
        agents=agents,
        rng_state=config.rng_seed,
    )


def empty_state(config: GameConfig, positions=None, terrain=None) -> GameState:
    """Hand-built state for tests and tooling: no wood, no rigid unless given."""
    size = config.board_size
    if positions is None:
        positions = corner_cells(size)
    agents = []
    for i, pos in enumerate(positions):
        agents.append(
            AgentState(
                id=i,
                position=pos,
                alive=pos is not None,
                ammo=config.initial_ammo,
                max_ammo=config.initial_ammo,
                blast_strength=config.initial_blast,
            )
        )
    return GameState(
        config=config,
        step=0,
        terrain=tuple(terrain) if terrain is not None else (0,) * (size * size),
        bombs=(),
        flames={},
        powerups={},
        hidden_powerups={},
        agents=tuple(agents),
        rng_state=config.rng_seed,
    )
