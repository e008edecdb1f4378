"""Line-delimited replay files.

Layout (one JSON object per line, keys sorted, no whitespace)::

    {"type":"header","format":"pommer-replay","version":1,"config":{...},"seed":S,"roster":[...]}
    {"type":"step","t":0,"actions":[a0,a1,a2,a3],"events":{...}}      # one per step
    {"type":"trailer","outcome":"TEAM0_WINS","steps":N,"final_hash":"<sha256>"}

``actions`` are the actions as issued (before illegal-action substitution); the
board is regenerated from ``config`` with ``rng_seed = seed``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from pommer.engine.board import generate_board
from pommer.engine.core import is_terminal, step
from pommer.engine.serialize import canonical_json, state_hash
from pommer.engine.types import GameConfig, GameState, Outcome

FORMAT = "pommer-replay"
VERSION = 1


class ReplayError(ValueError):
    pass


class ReplayWriter:
    def __init__(self, path, config: GameConfig, roster):
        self.path = path
        self.lines = [
            canonical_json({
                "type": "header",
                "format": FORMAT,
                "version": VERSION,
                "config": config.to_dict(),
                "seed": config.rng_seed,
                "roster": list(roster),
            })
        ]

    def record(self, t: int, actions, events) -> None:
        self.lines.append(canonical_json({
            "type": "step",
            "t": t,
            "actions": [int(a) for a in actions],
            "events": events.to_dict(),
        }))

    def finish(self, state: GameState, outcome: Outcome) -> str:
        self.lines.append(canonical_json({
            "type": "trailer",
            "outcome": outcome.name,
            "steps": state.step,
            "final_hash": state_hash(state),
        }))
        text = "\n".join(self.lines) + "\n"
        if self.path is not None:
            with open(self.path, "w") as fh:
                fh.write(text)
        return text


@dataclass
class Replay:
    header: dict
    steps: list
    trailer: dict

    @property
    def config(self) -> GameConfig:
        return GameConfig.from_dict(self.header["config"]).replace(rng_seed=self.header["seed"])


def parse_replay(text: str) -> Replay:
    records = [json.loads(line) for line in text.splitlines() if line.strip()]
    if not records or records[0].get("type") != "header":
        raise ReplayError("missing header")
    header = records[0]
    if header.get("format") != FORMAT or header.get("version") != VERSION:
        raise ReplayError(f"unsupported replay format {header.get('format')} v{header.get('version')}")
    if records[-1].get("type") != "trailer":
        raise ReplayError("missing trailer (truncated replay?)")
    steps = records[1:-1]
    for k, rec in enumerate(steps):
        if rec.get("type") != "step" or rec.get("t") != k:
            raise ReplayError(f"bad step record at line {k + 2}")
    return Replay(header, steps, records[-1])


def read_replay(path) -> Replay:
    with open(path) as fh:
        return parse_replay(fh.read())


@dataclass
class ReplayCheck:
    final_state: GameState
    outcome: Outcome
    final_hash: str
    hash_matches: bool
    events_match: bool
    rerecorded: str

    @property
    def ok(self) -> bool:
        return self.hash_matches and self.events_match


def resimulate(replay: Replay) -> ReplayCheck:
    """Re-run the recorded actions and compare against the recorded results."""
    config = replay.config
    state = generate_board(config)
    writer = ReplayWriter(None, config, replay.header["roster"])
    events_match = True
    for rec in replay.steps:
        actions = rec["actions"]
        state, events = step(state, actions)
        writer.record(rec["t"], actions, events)
        if events.to_dict() != rec["events"]:
            events_match = False
    outcome = is_terminal(state)
    if outcome == Outcome.ONGOING:
        events_match = False
    text = writer.finish(state, outcome)
    h = state_hash(state)
    return ReplayCheck(
        final_state=state,
        outcome=outcome,
        final_hash=h,
        hash_matches=h == replay.trailer["final_hash"] and outcome.name == replay.trailer["outcome"],
        events_match=events_match,
        rerecorded=text,
    )
