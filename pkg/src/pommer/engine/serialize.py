"""Canonical JSON form of a state, its hash, and a one-char-per-cell grid dump.

Grid legend::

    .  passage          #  rigid wall        +  wood
    *  flame            b  bomb              0-3  agent id
    e  ExtraBomb        k  EnableKick        s  ExtraBlast (strength)
    ?  unknown (observations only)

Agents are drawn over bombs, bombs over flames, flames over power-ups.
"""

from __future__ import annotations

import hashlib
import json

from pommer.engine.types import (
    Action,
    AgentState,
    Bomb,
    GameConfig,
    GameState,
    Observation,
    Powerup,
    Tile,
)

_TILE_CHARS = {Tile.PASSAGE: ".", Tile.RIGID: "#", Tile.WOOD: "+", Tile.UNKNOWN: "?"}
_POWERUP_CHARS = {Powerup.EXTRA_BOMB: "e", Powerup.ENABLE_KICK: "k", Powerup.EXTRA_BLAST: "s"}


def _cells(mapping) -> list:
    return [[r, c, int(v)] for (r, c), v in sorted(mapping.items())]


def state_to_dict(state: GameState) -> dict:
    return {
        "config": state.config.to_dict(),
        "step": state.step,
        "terrain": list(state.terrain),
        "bombs": [
            [b.position[0], b.position[1], b.owner, b.blast_strength, b.life, int(b.velocity)]
            for b in state.bombs
        ],
        "flames": _cells(state.flames),
        "powerups": _cells(state.powerups),
        "hidden_powerups": _cells(state.hidden_powerups),
        "agents": [
            {
                "id": a.id,
                "position": list(a.position) if a.position is not None else None,
                "alive": a.alive,
                "ammo": a.ammo,
                "max_ammo": a.max_ammo,
                "blast_strength": a.blast_strength,
                "can_kick": a.can_kick,
            }
            for a in state.agents
        ],
        "rng_state": state.rng_state,
    }


def state_from_dict(d: dict) -> GameState:
    return GameState(
        config=GameConfig.from_dict(d["config"]),
        step=d["step"],
        terrain=tuple(d["terrain"]),
        bombs=tuple(
            Bomb((r, c), owner, strength, life, Action(v))
            for r, c, owner, strength, life, v in d["bombs"]
        ),
        flames={(r, c): v for r, c, v in d["flames"]},
        powerups={(r, c): Powerup(v) for r, c, v in d["powerups"]},
        hidden_powerups={(r, c): Powerup(v) for r, c, v in d["hidden_powerups"]},
        agents=tuple(
            AgentState(
                id=a["id"],
                position=tuple(a["position"]) if a["position"] is not None else None,
                alive=a["alive"],
                ammo=a["ammo"],
                max_ammo=a["max_ammo"],
                blast_strength=a["blast_strength"],
                can_kick=a["can_kick"],
            )
            for a in d["agents"]
        ),
        rng_state=d["rng_state"],
    )


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def state_hash(state: GameState) -> str:
    """SHA-256 over the canonical JSON form."""
    return hashlib.sha256(canonical_json(state_to_dict(state)).encode()).hexdigest()


def states_equal(a: GameState, b: GameState) -> bool:
    return state_to_dict(a) == state_to_dict(b)


def dump_grid(state) -> str:
    """Render a GameState or an Observation, one character per cell."""
    size = state.board_size if isinstance(state, Observation) else state.config.board_size
    rows = [[_TILE_CHARS[Tile(t)] for t in state.terrain[r * size:(r + 1) * size]] for r in range(size)]
    for (r, c), kind in state.powerups.items():
        rows[r][c] = _POWERUP_CHARS[Powerup(kind)]
    for r, c in state.flames:
        rows[r][c] = "*"
    for b in state.bombs:
        rows[b.position[0]][b.position[1]] = "b"
    if isinstance(state, Observation):
        for aid, (r, c) in state.agents.items():
            rows[r][c] = str(aid)
    else:
        for a in state.agents:
            if a.alive:
                rows[a.position[0]][a.position[1]] = str(a.id)
    return "\n".join("".join(row) for row in rows)


def parse_grid(text: str, config: GameConfig | None = None, **agent_kw) -> GameState:
    """Inverse of :func:`dump_grid` for hand-written test positions.

    Bombs get ``life = bomb_timer``, owner 0 and the default blast strength, and
    flames get ``life = flame_life``; callers adjust them with ``replace``.
    Agents missing from the grid are dead. ``agent_kw`` sets attributes on every
    live agent (e.g. ``can_kick=True``).
    """
    lines = [ln.strip() for ln in text.strip().splitlines()]
    size = len(lines)
    if config is None:
        config = GameConfig(board_size=size, wood_count=0, rigid_count=0)
    elif config.board_size != size:
        config = config.replace(board_size=size)
    chars = {v: k for k, v in _TILE_CHARS.items()}
    kinds = {v: k for k, v in _POWERUP_CHARS.items()}
    terrain, bombs, flames, powerups = [], [], {}, {}
    positions = [None, None, None, None]
    for r, line in enumerate(lines):
        if len(line) != size:
            raise ValueError(f"row {r} has {len(line)} cells, expected {size}")
        for c, ch in enumerate(line):
            if ch in chars:
                terrain.append(int(chars[ch]))
                continue
            terrain.append(int(Tile.PASSAGE))
            if ch in "0123":
                positions[int(ch)] = (r, c)
            elif ch == "b":
                bombs.append(Bomb((r, c), 0, config.initial_blast, config.bomb_timer))
            elif ch == "*":
                flames[(r, c)] = config.flame_life
            elif ch in kinds:
                powerups[(r, c)] = kinds[ch]
            else:
                raise ValueError(f"unknown grid char {ch!r}")
    agents = []
    for i, p in enumerate(positions):
        fields = dict(
            id=i,
            position=p,
            alive=p is not None,
            ammo=config.initial_ammo,
            max_ammo=config.initial_ammo,
            blast_strength=config.initial_blast,
        )
        if p is not None:
            fields.update(agent_kw)
        agents.append(AgentState(**fields))
    agents = tuple(agents)
    return GameState(
        config=config,
        step=0,
        terrain=tuple(terrain),
        bombs=tuple(bombs),
        flames=flames,
        powerups=powerups,
        hidden_powerups={},
        agents=agents,
        rng_state=config.rng_seed,
    )
