"""Static-bomb escape model over bitsets.

Cell sets are Python ints with bit ``r * size + c`` set for cell ``(r, c)``. For an
observation at step ``t``, entry ``k`` of the timeline describes state ``t + k``:

* ``flames[k]``   cells on fire in state ``t + k`` (``flames[0]`` is now);
* ``passable[k]`` cells an agent may step into during the transition that
  produces state ``t + k`` (``passable[0]`` is unused).

Bombs never move, other agents never move (but stop blocking once a flame hits
them), wood disappears the step it burns, and explosions chain exactly as in the
engine. Unknown cells block movement by default and never stop a blast ray.
"""

from __future__ import annotations

from functools import lru_cache

from pommer.engine.types import Tile

_PASSAGE, _RIGID, _WOOD, _UNKNOWN = (int(t) for t in Tile)


@lru_cache(maxsize=None)
def geometry(size: int):
    """Masks and ray tables for a board size."""
    n = size * size
    full = (1 << n) - 1
    col_first = 0
    col_last = 0
    for r in range(size):
        col_first |= 1 << (r * size)
        col_last |= 1 << (r * size + size - 1)
    rays = []
    for idx in range(n):
        r, c = divmod(idx, size)
        per_dir = []
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ray = []
            rr, cc = r + dr, c + dc
            while 0 <= rr < size and 0 <= cc < size:
                ray.append(rr * size + cc)
                rr += dr
                cc += dc
            per_dir.append(tuple(ray))
        rays.append(tuple(per_dir))
    return full, full & ~col_first, full & ~col_last, tuple(rays)


def neighbours(mask: int, size: int) -> int:
    """Cells orthogonally adjacent to any cell of ``mask`` (excluding the mask)."""
    full, not_first, not_last, _ = geometry(size)
    return (
        (mask >> size)
        | ((mask << size) & full)
        | ((mask >> 1) & not_last)
        | ((mask << 1) & not_first)
    )


def mask_to_cells(mask: int, size: int) -> set:
    cells = set()
    while mask:
        low = mask & -mask
        idx = low.bit_length() - 1
        cells.add(divmod(idx, size))
        mask ^= low
    return cells


def cells_to_mask(cells, size: int) -> int:
    m = 0
    for r, c in cells:
        m |= 1 << (r * size + c)
    return m


def blast_mask(idx: int, strength: int, terrain, size: int) -> int:
    rays = geometry(size)[3][idx]
    m = 1 << idx
    reach = strength - 1
    for ray in rays:
        for j in ray[:reach]:
            t = terrain[j]
            if t == _RIGID:
                break
            m |= 1 << j
            if t == _WOOD:
                break
    return m


class EscapeModel:
    """Flame and passability timeline for one observation.

    ``bombs`` are ``(cell, strength, life)`` triples, ``flames`` maps cell -> life
    and ``blockers`` lists cells of agents that never move.
    """

    __slots__ = ("size", "horizon", "flames", "passable", "last_event")

    def __init__(self, size, terrain, bombs, flames, blockers, horizon, flame_life,
                 unknown_passable=False):
        self.size = size
        self.horizon = horizon
        terrain = list(terrain)
        full = geometry(size)[0]
        rigid = wood = unknown = 0
        for idx, t in enumerate(terrain):
            if t == _PASSAGE:
                continue
            if t == _RIGID:
                rigid |= 1 << idx
            elif t == _WOOD:
                wood |= 1 << idx
            else:
                unknown |= 1 << idx
                terrain[idx] = _PASSAGE  # blast rays run through unknown cells
        static_block = rigid | (0 if unknown_passable else unknown)

        live = [[r * size + c, s, l] for (r, c), s, l in bombs]
        fire = {r * size + c: l for (r, c), l in flames.items()}
        block_cells = {r * size + c for r, c in blockers}

        fmask = 0
        for idx in fire:
            fmask |= 1 << idx
        flames_t = [fmask]
        passable_t = [0]
        last_event = max(fire.values(), default=1) - 1
        if live:
            last_event = max(last_event, max(l for _, _, l in live) + flame_life - 1)
        last_event = min(last_event, horizon)

        for k in range(1, last_event + 1):
            bmask = 0
            for b in live:
                bmask |= 1 << b[0]
            agents_mask = 0
            for idx in block_cells:
                agents_mask |= 1 << idx
            passable_t.append(full & ~(static_block | wood | bmask | agents_mask))

            prev_fire = flames_t[-1]
            blast = 0
            if live:
                pending = [b for b in live if b[2] - k <= 0 or (prev_fire >> b[0]) & 1]
                if pending:
                    done = {b[0] for b in pending}
                    while pending:
                        b = pending.pop()
                        bm = blast_mask(b[0], b[1], terrain, size)
                        blast |= bm
                        for other in live:
                            if other[0] not in done and (bm >> other[0]) & 1:
                                done.add(other[0])
                                pending.append(other)
                    live = [b for b in live if b[0] not in done]
            nfire = {}
            for idx, l in fire.items():
                if l > 1:
                    nfire[idx] = l - 1
            if blast:
                m = blast
                while m:
                    low = m & -m
                    nfire[low.bit_length() - 1] = flame_life
                    m ^= low
            fire = nfire
            fmask = blast
            for idx in fire:
                fmask |= 1 << idx
            flames_t.append(fmask)
            if blast:
                burnt = wood & blast
                if burnt:
                    wood &= ~burnt
                    m = burnt
                    while m:
                        low = m & -m
                        terrain[low.bit_length() - 1] = _PASSAGE
                        m ^= low
            if block_cells:
                block_cells = {idx for idx in block_cells if not (fmask >> idx) & 1}

        self.flames = flames_t
        self.passable = passable_t
        self.last_event = last_event

    def flames_at(self, k: int) -> int:
        return self.flames[k] if k < len(self.flames) else 0

    def survival_time(self, start: int, k0: int) -> int:
        """Latest step the searcher can still be alive at, starting on flat cell
        ``start`` in state ``t + k0``; ``horizon + 1`` means it escapes."""
        size = self.size
        full, not_first, not_last, _ = geometry(size)
        reach = 1 << start
        if k0 and reach & self.flames_at(k0):
            return k0 - 1
        flames, passable, last = self.flames, self.passable, self.last_event
        for k in range(k0 + 1, last + 1):
            moves = (
                (reach >> size)
                | ((reach << size) & full)
                | ((reach >> 1) & not_last)
                | ((reach << 1) & not_first)
            )
            reach = (reach | (moves & passable[k])) & ~flames[k]
            if not reach:
                return k - 1
        return self.horizon + 1

    def survives(self, start: int, k0: int) -> bool:
        return self.survival_time(start, k0) > self.horizon
