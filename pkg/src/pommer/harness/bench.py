"""Throughput and latency benchmarks."""

from __future__ import annotations

import random
import time

import numpy as np

from pommer.agents import NeuralAgent, agent_seed, make_agent
from pommer.engine.board import generate_board
from pommer.engine.core import is_terminal, observe, step
from pommer.engine.types import Action, GameConfig, Outcome
from pommer.errors import UsageError
from pommer.filter.rules import filter_actions
from pommer.harness.verify import sample_observations

KINDS = ("engine_steps", "filter_latency", "agent_latency")


def _percentiles(samples) -> dict:
    a = np.asarray(samples) * 1e3
    return {
        "n": int(a.size),
        "mean_ms": round(float(a.mean()), 5),
        "p50_ms": round(float(np.percentile(a, 50)), 5),
        "p99_ms": round(float(np.percentile(a, 99)), 5),
        "max_ms": round(float(a.max()), 5),
    }


def bench_engine(duration: float = 2.0, seed: int = 0, config: GameConfig | None = None) -> dict:
    """Full 4-agent steps per second with uniformly random actions."""
    config = config or GameConfig()
    rng = random.Random(seed)
    steps = 0
    game = 0
    elapsed = 0.0
    actions = list(Action)
    while elapsed < duration:
        state = generate_board(config.replace(rng_seed=seed + game))
        game += 1
        plan = [[rng.choice(actions) for _ in range(4)] for _ in range(config.max_steps)]
        t0 = time.perf_counter()
        k = 0
        while is_terminal(state) == Outcome.ONGOING:
            state, _ = step(state, plan[k])
            k += 1
        elapsed += time.perf_counter() - t0
        steps += k
    return {"kind": "engine_steps", "steps": steps, "games": game, "seconds": round(elapsed, 4),
            "steps_per_sec": round(steps / elapsed, 1)}


def bench_filter(duration: float = 2.0, seed: int = 0, samples: int = 5000) -> dict:
    obs = list(sample_observations(samples, seed))
    times = []
    start = time.perf_counter()
    clock = time.perf_counter
    while True:
        for o in obs:
            t0 = clock()
            filter_actions(o)
            times.append(clock() - t0)
        if clock() - start >= duration:
            break
    return {"kind": "filter_latency", **_percentiles(times)}


def _bench_agent_instance(name: str):
    if name == "neural":
        from pommer.rl.network import NetSpec, init_params

        spec = NetSpec()
        return NeuralAgent(spec, init_params(spec, seed=0))
    return make_agent(name)


def bench_agent(agent: str = "neural", duration: float = 2.0, seed: int = 0,
                config: GameConfig | None = None, opponent: str = "smart_random") -> dict:
    """Per-decision latency of ``agent`` (``neural`` alone = freshly initialised
    default-size network) in live games against ``opponent``."""
    config = config or GameConfig()
    times = []
    clock = time.perf_counter
    start = clock()
    game = 0
    while clock() - start < duration:
        agents = [_bench_agent_instance(agent) if i % 2 == 0 else make_agent(opponent) for i in range(4)]
        for i, a in enumerate(agents):
            a.reset(agent_seed(seed + game, i))
        state = generate_board(config.replace(rng_seed=seed + game))
        game += 1
        while is_terminal(state) == Outcome.ONGOING and clock() - start < duration:
            acts = []
            for i, a in enumerate(agents):
                if not state.agents[i].alive:
                    acts.append(Action.STOP)
                    continue
                o = observe(state, i)
                if i % 2 == 0:
                    t0 = clock()
                    acts.append(a.act(o))
                    times.append(clock() - t0)
                else:
                    acts.append(a.act(o))
            state, _ = step(state, acts)
    if not times:
        raise UsageError("benchmark produced no decisions; increase the duration")
    return {"kind": "agent_latency", "agent": agent, "games": game, **_percentiles(times)}


def run_bench(kind: str, duration: float = 2.0, seed: int = 0, agent: str = "neural") -> dict:
    if kind == "engine_steps":
        return bench_engine(duration, seed)
    if kind == "filter_latency":
        return bench_filter(duration, seed)
    if kind == "agent_latency":
        return bench_agent(agent, duration, seed)
    raise UsageError(f"unknown bench kind {kind!r}; expected one of {', '.join(KINDS)}")
