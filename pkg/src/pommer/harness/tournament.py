"""Team-vs-team tournaments with Wilson score intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

from pommer.engine.types import GameConfig, Outcome
from pommer.errors import UsageError
from pommer.harness.match import MatchSpec, run_match
from pommer.harness.parallel import map_ordered

Z95 = 1.959963984540054


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class TournamentReport:
    team_a: str
    team_b: str
    games: int
    base_seed: int
    wins: int = 0      # for team_a
    losses: int = 0
    draws: int = 0
    mean_steps: float = 0.0
    deaths_a: int = 0
    deaths_b: int = 0
    self_kills_a: int = 0
    self_kills_b: int = 0
    bombs_a: int = 0
    bombs_b: int = 0
    outcomes: list = field(default_factory=list)  # per game: "W", "L" or "D" from team_a's side
    # wall-clock numbers are not part of the deterministic result
    latency_ms: dict = field(default_factory=dict, compare=False)

    @property
    def win_rate(self) -> float:
        return self.wins / self.games if self.games else 0.0

    def interval(self, kind: str = "win") -> tuple[float, float]:
        k = {"win": self.wins, "loss": self.losses, "draw": self.draws}[kind]
        return wilson_interval(k, self.games)

    def to_dict(self, latency: bool = True) -> dict:
        d = {
            "team_a": self.team_a, "team_b": self.team_b, "games": self.games,
            "base_seed": self.base_seed, "wins": self.wins, "losses": self.losses,
            "draws": self.draws, "win_rate": round(self.win_rate, 6),
            "win_ci95": [round(x, 6) for x in self.interval("win")],
            "loss_ci95": [round(x, 6) for x in self.interval("loss")],
            "draw_ci95": [round(x, 6) for x in self.interval("draw")],
            "mean_steps": round(self.mean_steps, 3),
            "deaths_a": self.deaths_a, "deaths_b": self.deaths_b,
            "self_kills_a": self.self_kills_a, "self_kills_b": self.self_kills_b,
            "bombs_a": self.bombs_a, "bombs_b": self.bombs_b,
        }
        if latency:
            d["latency_ms"] = self.latency_ms
        return d


def _play(args, config):
    index, seed, team_a, team_b = args
    a_side = index % 2  # alternate which corners team_a gets
    roster = [None] * 4
    for pos in range(4):
        roster[pos] = team_a if pos % 2 == a_side else team_b
    res = run_match(MatchSpec(tuple(roster), config, seed))
    return a_side, roster, res


def run_tournament(team_a: str, team_b: str, games: int, base_seed: int = 0,
                   config: GameConfig | None = None, workers: int = 1) -> TournamentReport:
    """Play seeds ``base_seed .. base_seed + games - 1``; team_a takes team 0 on even games."""
    if games < 1:
        raise UsageError("games must be >= 1")
    config = config or GameConfig()
    jobs = [(g, base_seed + g, team_a, team_b) for g in range(games)]
    report = TournamentReport(team_a, team_b, games, base_seed)
    lat = {}
    total_steps = 0
    for a_side, roster, res in map_ordered(partial(_play, config=config), jobs, workers):
        total_steps += res.steps
        if res.outcome == Outcome.DRAW:
            report.draws += 1
            report.outcomes.append("D")
        elif (res.outcome == Outcome.TEAM0_WINS) == (a_side == 0):
            report.wins += 1
            report.outcomes.append("W")
        else:
            report.losses += 1
            report.outcomes.append("L")
        for pos in range(4):
            mine = pos % 2 == a_side
            if pos in res.deaths:
                if mine:
                    report.deaths_a += 1
                else:
                    report.deaths_b += 1
            if pos in res.self_kills:
                if mine:
                    report.self_kills_a += 1
                else:
                    report.self_kills_b += 1
            if mine:
                report.bombs_a += res.bombs_placed[pos]
            else:
                report.bombs_b += res.bombs_placed[pos]
            secs, n = res.latency[pos]
            acc = lat.setdefault(roster[pos], [0.0, 0])
            acc[0] += secs
            acc[1] += n
    report.mean_steps = total_steps / games
    report.latency_ms = {k: round(1e3 * s / n, 4) if n else 0.0 for k, (s, n) in sorted(lat.items())}
    return report
