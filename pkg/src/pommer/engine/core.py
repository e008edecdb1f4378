"""State transition, termination and partial observation.

One call to :func:`step` resolves, in this order:

 1. illegal actions become STOP (BOMB needs ammo and a bomb-free cell);
 2. bomb placement: ammo - 1, new bomb with ``life = bomb_timer``;
 3. movement: a target must be on the board, passage (power-ups are fine) and
    bomb-free. A kicking agent that walks into a bomb whose far side is free stays
    put and gives the bomb a velocity. Conflicts are resolved in rounds until
    nothing changes: every agent whose target is claimed by more than one agent
    (an agent standing still claims its own cell) and every pair trying to swap
    cells goes back to its origin;
 4. moving bombs advance one cell or stop (velocity cleared) in front of walls,
    wood, agents or other bombs, with the same round-based conflict rule;
 5. bomb lives drop by one; a bomb at life 0 or sitting in a flame explodes, and
    explosions chain to a fixpoint;
 6-7. old flames lose one life (dying at 0); blast cells get fresh flames with
    ``life = flame_life``;
 8. agents on flame cells die;
 9. wood in a blast becomes passage and reveals its hidden power-up; exposed
    power-ups under a blast burn when ``flames_destroy_powerups``;
 10. survivors pick up power-ups on their cell;
 11. the step counter advances.
"""

from __future__ import annotations

from functools import lru_cache

from pommer.engine.board import blast_cells
from pommer.engine.types import (
    Action,
    AgentEvents,
    AgentState,
    Bomb,
    BombView,
    DELTAS,
    GameState,
    Observation,
    Outcome,
    Powerup,
    StepEvents,
    Tile,
)
from pommer.errors import UsageError

_DELTA = [DELTAS[Action(a)] for a in range(5)]
_ACTIONS = tuple(Action)
PASSAGE = int(Tile.PASSAGE)
WOOD = int(Tile.WOOD)


def is_terminal(state: GameState) -> Outcome:
    alive = [False, False]
    for ag in state.agents:
        if ag.alive:
            alive[ag.id % 2] = True
    if alive[0] and alive[1]:
        return Outcome.DRAW if state.step >= state.config.max_steps else Outcome.ONGOING
    if alive[0]:
        return Outcome.TEAM0_WINS
    if alive[1]:
        return Outcome.TEAM1_WINS
    return Outcome.DRAW


def step(state: GameState, actions) -> tuple[GameState, StepEvents]:
    """Advance one simultaneous-move step. The input state is never modified."""
    if len(actions) != 4:
        raise UsageError(f"expected 4 actions, got {len(actions)}")
    if is_terminal(state) != Outcome.ONGOING:
        raise UsageError("cannot step a terminal state")
    return simulate_step(state, actions)


def _resolve_moves(origins, desired, movable):
    """Round-based bounce resolution shared by agents and bombs (in place)."""
    while True:
        claims = {}
        for i, d in enumerate(desired):
            if d is not None:
                claims[d] = claims.get(d, 0) + 1
        bounce = []
        for i in movable:
            d = desired[i]
            if d == origins[i]:
                continue
            if claims[d] > 1:
                bounce.append(i)
                continue
            for j in movable:
                if j != i and origins[j] == d and desired[j] == origins[i]:
                    bounce.append(i)
                    break
        if not bounce:
            return
        for i in bounce:
            desired[i] = origins[i]


def simulate_step(state: GameState, actions) -> tuple[GameState, StepEvents]:
    """The transition of :func:`step` without the terminal-state guard.

    Tooling that studies positions with fewer than four live agents (escape
    oracles, exhaustive rule checks) calls this directly.
    """
    cfg = state.config
    size = cfg.board_size
    terrain = state.terrain
    old = state.agents
    powerups_prev = state.powerups

    bombs = {b.position: b for b in state.bombs}
    acts = [0, 0, 0, 0]
    for i in range(4):
        a = int(actions[i])
        if not 0 <= a <= 5:
            raise UsageError(f"invalid action {actions[i]!r}")
        ag = old[i]
        if not ag.alive:
            a = 0
        elif a == 5 and (ag.ammo <= 0 or ag.position in bombs):
            a = 0
        acts[i] = a

    # 2. bomb placement
    ammo = [ag.ammo for ag in old]
    for i in range(4):
        if acts[i] == 5:
            ag = old[i]
            bombs[ag.position] = Bomb(ag.position, i, ag.blast_strength, cfg.bomb_timer)
            ammo[i] -= 1

    # 3. movement and kick initiation
    origins = [ag.position for ag in old]
    desired = list(origins)
    occupied = {p for p in origins if p is not None}
    living = [i for i in range(4) if old[i].alive]
    kicks = {}
    for i in living:
        a = acts[i]
        if not 1 <= a <= 4:
            continue
        dr, dc = _DELTA[a]
        r, c = origins[i]
        tr, tc = r + dr, c + dc
        if not (0 <= tr < size and 0 <= tc < size) or terrain[tr * size + tc] != PASSAGE:
            continue
        target = (tr, tc)
        if target in bombs:
            if old[i].can_kick:
                fr, fc = tr + dr, tc + dc
                far = (fr, fc)
                if (
                    0 <= fr < size
                    and 0 <= fc < size
                    and terrain[fr * size + fc] == PASSAGE
                    and far not in bombs
                    and far not in occupied
                    and (cfg.kick_through_powerups or far not in powerups_prev)
                ):
                    kicks.setdefault(target, []).append(a)
            continue
        desired[i] = target
    _resolve_moves(origins, desired, living)
    positions = desired
    agent_cells = {p for p in positions if p is not None}
    entered = [positions[i] if positions[i] != origins[i] else None for i in range(4)]

    # 4. bomb motion
    for cell, dirs in kicks.items():
        if len(dirs) == 1:
            b = bombs[cell]
            bombs[cell] = Bomb(b.position, b.owner, b.blast_strength, b.life, _ACTIONS[dirs[0]])
    blist = list(bombs.values())
    moving_idx = []
    b_origins = [b.position for b in blist]
    b_desired = list(b_origins)
    for k, b in enumerate(blist):
        if b.velocity == 0:
            continue
        dr, dc = _DELTA[b.velocity]
        tr, tc = b.position[0] + dr, b.position[1] + dc
        t = (tr, tc)
        if (
            0 <= tr < size
            and 0 <= tc < size
            and terrain[tr * size + tc] == PASSAGE
            and t not in agent_cells
            and (cfg.kick_through_powerups or t not in powerups_prev)
        ):
            b_desired[k] = t
            moving_idx.append(k)
        else:
            blist[k] = Bomb(b.position, b.owner, b.blast_strength, b.life)
    if moving_idx:
        _resolve_moves(b_origins, b_desired, moving_idx)
        for k in moving_idx:
            b = blist[k]
            if b_desired[k] == b.position:
                blist[k] = Bomb(b.position, b.owner, b.blast_strength, b.life)
            else:
                blist[k] = Bomb(b_desired[k], b.owner, b.blast_strength, b.life, b.velocity)

    # 5. timers and chained explosions
    flames_prev = state.flames
    live = {}
    pending = []
    for b in blist:
        nb = Bomb(b.position, b.owner, b.blast_strength, b.life - 1, b.velocity)
        live[nb.position] = nb
        if nb.life <= 0 or nb.position in flames_prev:
            pending.append(nb.position)
    blast = set()
    woods_by_owner = [0, 0, 0, 0]
    exploded = 0
    blasts = ()
    if pending:
        by_bomb = []
        done = set(pending)
        while pending:
            pos = pending.pop()
            b = live[pos]
            cells = blast_cells(pos, b.blast_strength, terrain, size)
            for cell in cells:
                if terrain[cell[0] * size + cell[1]] == WOOD:
                    woods_by_owner[b.owner] += 1
                if cell in live and cell not in done:
                    done.add(cell)
                    pending.append(cell)
            blast |= cells
            by_bomb.append((b.owner, pos, tuple(sorted(cells))))
        blasts = tuple(sorted(by_bomb, key=lambda x: x[1]))
        for pos in done:
            ammo[live.pop(pos).owner] += 1
        exploded = len(done)

    # 6-7. flames
    flames = {c: l - 1 for c, l in flames_prev.items() if l > 1}
    for cell in blast:
        flames[cell] = cfg.flame_life

    # 8. deaths
    died = [False, False, False, False]
    for i in living:
        if positions[i] in flames:
            died[i] = True

    # 9. wood destruction, power-up reveal and burn
    powerups = powerups_prev
    hidden = state.hidden_powerups
    new_terrain = terrain
    if blast:
        t_list = None
        powerups = dict(powerups_prev)
        if cfg.flames_destroy_powerups:
            for cell in blast:
                powerups.pop(cell, None)
        for cell in blast:
            idx = cell[0] * size + cell[1]
            if terrain[idx] == WOOD:
                if t_list is None:
                    t_list = list(terrain)
                t_list[idx] = PASSAGE
                if cell in hidden:
                    if hidden is state.hidden_powerups:
                        hidden = dict(hidden)
                    powerups[cell] = hidden.pop(cell)
        if t_list is not None:
            new_terrain = tuple(t_list)

    # 10. pickups
    picked = [None, None, None, None]
    agents = []
    for i in range(4):
        ag = old[i]
        if not ag.alive:
            if ammo[i] != ag.ammo:
                ag = AgentState(i, None, False, ammo[i], ag.max_ammo, ag.blast_strength, ag.can_kick)
            agents.append(ag)
            continue
        if died[i]:
            agents.append(AgentState(i, None, False, ammo[i], ag.max_ammo, ag.blast_strength, ag.can_kick))
            continue
        pos = positions[i]
        max_ammo, blast_s, kick = ag.max_ammo, ag.blast_strength, ag.can_kick
        if pos in powerups:
            if powerups is powerups_prev:
                powerups = dict(powerups_prev)
            kind = powerups.pop(pos)
            picked[i] = kind
            if kind == Powerup.EXTRA_BOMB:
                ammo[i] += 1
                max_ammo += 1
            elif kind == Powerup.EXTRA_BLAST:
                blast_s += 1
            else:
                kick = True
        agents.append(AgentState(i, pos, True, ammo[i], max_ammo, blast_s, kick))

    new_state = GameState(
        config=cfg,
        step=state.step + 1,
        terrain=new_terrain,
        bombs=tuple(sorted(live.values(), key=lambda b: b.position)),
        flames=flames,
        powerups=powerups,
        hidden_powerups=hidden,
        agents=tuple(agents),
        rng_state=state.rng_state,
    )

    deaths_by_team = (died[0] + died[2], died[1] + died[3])
    events = []
    for i in range(4):
        events.append(
            AgentEvents(
                agent_id=i,
                alive=agents[i].alive,
                died=died[i],
                killed_enemy_count=deaths_by_team[1 - i % 2],
                teammate_died=died[(i + 2) % 4],
                picked_powerup=picked[i],
                entered_cell=entered[i],
                placed_bomb=acts[i] == 5,
                woods_destroyed=woods_by_owner[i],
            )
        )
    return new_state, StepEvents(tuple(events), tuple(_ACTIONS[a] for a in acts), exploded, blasts)


@lru_cache(maxsize=None)
def _window(size: int, radius: int, r: int, c: int) -> tuple[int, int, int, int, int]:
    r0, r1 = max(0, r - radius), min(size - 1, r + radius)
    c0, c1 = max(0, c - radius), min(size - 1, c + radius)
    mask = 0
    row_bits = ((1 << (c1 - c0 + 1)) - 1) << c0
    for rr in range(r0, r1 + 1):
        mask |= row_bits << (rr * size)
    return r0, r1, c0, c1, mask


def observe(state: GameState, agent_id: int) -> Observation:
    """Partial view: every layer restricted to a Chebyshev window around the agent."""
    ag = state.agents[agent_id]
    if not ag.alive:
        raise UsageError(f"agent {agent_id} is dead")
    cfg = state.config
    size = cfg.board_size
    r, c = ag.position
    r0, r1, c0, c1, mask = _window(size, cfg.view_radius, r, c)
    unknown = int(Tile.UNKNOWN)
    src = state.terrain
    terrain = [unknown] * (size * size)
    for rr in range(r0, r1 + 1):
        lo = rr * size
        terrain[lo + c0:lo + c1 + 1] = src[lo + c0:lo + c1 + 1]

    def seen(p):
        return r0 <= p[0] <= r1 and c0 <= p[1] <= c1

    return Observation(
        agent_id=agent_id,
        step=state.step,
        board_size=size,
        view_radius=cfg.view_radius,
        bomb_timer=cfg.bomb_timer,
        flame_life=cfg.flame_life,
        position=ag.position,
        ammo=ag.ammo,
        blast_strength=ag.blast_strength,
        can_kick=ag.can_kick,
        teammate_alive=state.agents[(agent_id + 2) % 4].alive,
        terrain=tuple(terrain),
        bombs=tuple(
            BombView(b.position, b.blast_strength, b.life, b.velocity)
            for b in state.bombs
            if seen(b.position)
        ),
        flames={p: l for p, l in state.flames.items() if seen(p)},
        powerups={p: k for p, k in state.powerups.items() if seen(p)},
        agents={a.id: a.position for a in state.agents if a.alive and seen(a.position)},
        visible=mask,
        kick_through_powerups=cfg.kick_through_powerups,
    )
