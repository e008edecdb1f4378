"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 numeric divergence.
Machine-readable output is one JSON record per line with ``format``/``version`` keys.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from pommer.engine.types import GameConfig
from pommer.errors import NumericError, PommerError, UsageError

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3
RECORD_VERSION = 1

log = logging.getLogger("pommer")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(kind: str, payload: dict, out=None) -> None:
    rec = {"format": f"pommer-{kind}", "version": RECORD_VERSION, **payload}
    line = json.dumps(rec, sort_keys=True)
    print(line)
    if out:
        with open(out, "w") as fh:
            fh.write(line + "\n")


def _load_config_file(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc


def _game_config(args) -> GameConfig:
    raw = _load_config_file(args.config)
    section = raw.get("game", raw if set(raw) <= set(GameConfig.__dataclass_fields__) else {})
    cfg = GameConfig.from_dict(section) if section else GameConfig()
    if getattr(args, "board_size", None):
        cfg = cfg.replace(board_size=args.board_size)
    if getattr(args, "max_steps", None):
        cfg = cfg.replace(max_steps=args.max_steps)
    return cfg


def cmd_play(args) -> int:
    from pommer.agents import parse_roster
    from pommer.harness.match import MatchSpec, run_match

    roster = tuple(parse_roster(args.roster))
    spec = MatchSpec(roster, _game_config(args), args.seed, args.record or args.out)
    res = run_match(spec)
    _emit("match", {
        "roster": list(roster), "seed": args.seed, "outcome": res.outcome.name, "steps": res.steps,
        "final_hash": res.final_hash, "deaths": res.deaths, "self_kills": res.self_kills,
        "replay": spec.record_path,
    })
    return EXIT_OK


def cmd_tournament(args) -> int:
    from pommer.harness.parallel import resolve_workers
    from pommer.harness.tournament import run_tournament

    rep = run_tournament(args.team_a, args.team_b, args.games, args.seed, _game_config(args),
                         resolve_workers(args.workers))
    _emit("tournament", rep.to_dict(), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    from pommer.rl.train import TrainConfig, apply_overrides, desk_config, train

    raw = _load_config_file(args.config)
    base = desk_config() if args.desk else TrainConfig()
    if raw:
        merged = base.to_dict()
        for k, v in raw.items():
            if isinstance(v, dict) and isinstance(merged.get(k), dict):
                merged[k].update(v)
            else:
                merged[k] = v
        base = TrainConfig.from_dict(merged)
    overrides = list(args.set or [])
    overrides.append(f"seed={args.seed}")
    if args.iterations is not None:
        overrides.append(f"iterations={args.iterations}")
    cfg = apply_overrides(base, overrides)
    out = args.out or os.path.join("runs", "train")

    def progress(row, stats):
        _emit("train-iteration", {"iteration": row[0], "games": row[1], "wins": row[2], "losses": row[3],
                                  "draws": row[4], "mean_shaped_reward": row[5], "stage": row[6],
                                  "loss": round(stats["loss"], 6)})

    try:
        summary = train(cfg, out, workers=args.workers, on_iteration=progress)
    except NumericError as exc:
        _emit("train-aborted", {"error": str(exc), "checkpoint": os.path.join(out, "latest.ckpt")})
        return EXIT_NUMERIC
    _emit("train", {"iterations": summary["iterations"], "curve": summary["curve"],
                    "checkpoint": summary["checkpoint"], "final_stage": summary["final_stage"]})
    return EXIT_OK


def cmd_bench(args) -> int:
    from pommer.harness.bench import run_bench

    kinds = [args.kind] if args.kind != "all" else ["engine_steps", "filter_latency", "agent_latency"]
    lines = []
    for kind in kinds:
        res = run_bench(kind, args.duration, args.seed, args.agent)
        rec = {"format": "pommer-bench", "version": RECORD_VERSION, **res}
        lines.append(json.dumps(rec, sort_keys=True))
        print(lines[-1])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify_filter(args) -> int:
    from pommer.harness.parallel import resolve_workers
    from pommer.harness.verify import VerifyScope, run_exhaustive, run_sampled, write_corpus

    workers = resolve_workers(args.workers)
    if args.mode == "exhaustive":
        raw = _load_config_file(args.scope)
        scope = VerifyScope.from_dict(raw) if raw else VerifyScope()
        if args.sizes:
            scope = VerifyScope.from_dict({**scope.__dict__, "sizes": [int(s) for s in args.sizes.split(",")]})
        if args.max_bombs is not None:
            scope = VerifyScope.from_dict({**scope.__dict__, "max_bombs": args.max_bombs})
        if args.crude:
            scope = VerifyScope.from_dict({**scope.__dict__, "strict": False})
        summary, records = run_exhaustive(scope, workers=workers, exactness=args.exactness)
    else:
        summary, records = run_sampled(args.count, args.seed, workers=workers, strict=args.strict)
    corpus = args.corpus or args.out
    if corpus:
        write_corpus(corpus, records)
    _emit("verify-filter", {**summary.to_dict(), "corpus": corpus, "records": len(records)})
    return EXIT_OK if summary.ok else EXIT_VERIFY


def cmd_replay(args) -> int:
    from pommer.engine.replay import ReplayError, read_replay, resimulate

    try:
        rep = read_replay(args.path)
    except OSError as exc:
        raise UsageError(f"cannot read replay {args.path}: {exc}") from exc
    except (ReplayError, json.JSONDecodeError) as exc:
        raise UsageError(f"{args.path}: {exc}") from exc
    check = resimulate(rep)
    with open(args.path) as fh:
        identical = fh.read() == check.rerecorded
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(check.rerecorded)
    _emit("replay", {"path": args.path, "outcome": check.outcome.name, "final_hash": check.final_hash,
                     "hash_matches": check.hash_matches, "events_match": check.events_match,
                     "rerecord_identical": identical})
    return EXIT_OK if check.ok and identical else EXIT_VERIFY


def _add_globals(p, default) -> None:
    p.add_argument("--config", default=default,
                   help="JSON config file (GameConfig under \"game\", training keys at top level)")
    p.add_argument("--seed", type=int, default=0 if default is None else default, help="base seed (default 0)")
    p.add_argument("--out", default=default, help="output path (file or directory, per command)")
    p.add_argument("-v", "--verbose", action="store_true", default=False if default is None else default)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pommer", description="2v2 bomb-laying grid game: agents, filter, training.")
    _add_globals(p, None)
    # the same flags after the subcommand; SUPPRESS keeps the top-level value when absent
    common = _Parser(add_help=False)
    _add_globals(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("play", parents=[common], help="play one match")
    sp.add_argument("roster", help="2 team names or 4 position names, comma separated")
    sp.add_argument("--record", help="write the replay here (default: --out)")
    sp.add_argument("--board-size", type=int)
    sp.add_argument("--max-steps", type=int)
    sp.set_defaults(fn=cmd_play)

    sp = sub.add_parser("tournament", parents=[common], help="team A vs team B over many seeds")
    sp.add_argument("team_a")
    sp.add_argument("team_b")
    sp.add_argument("--games", type=int, default=100)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--board-size", type=int)
    sp.add_argument("--max-steps", type=int)
    sp.set_defaults(fn=cmd_tournament)

    sp = sub.add_parser("train", parents=[common], help="PPO curriculum training")
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--workers", type=int, help="rollout workers (default: ppo.workers)")
    sp.add_argument("--desk", action="store_true", help="start from the small desk-scale settings")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                    help="override a config field, e.g. ppo.lr=1e-3 (repeatable)")
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("bench", parents=[common], help="throughput / latency benchmarks")
    sp.add_argument("kind", choices=["engine_steps", "filter_latency", "agent_latency", "all"])
    sp.add_argument("--duration", type=float, default=2.0, help="seconds per benchmark")
    sp.add_argument("--agent", default="neural", help="agent for agent_latency (neural = fresh default net)")
    sp.set_defaults(fn=cmd_bench)

    sp = sub.add_parser("verify-filter", parents=[common], help="check the action filter against the escape oracle")
    sp.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    sp.add_argument("--scope", help="JSON file with exhaustive scope fields")
    sp.add_argument("--sizes", help="comma-separated board sizes for exhaustive mode")
    sp.add_argument("--max-bombs", type=int)
    sp.add_argument("--crude", action="store_true", help="verify the non-strict bomb rules")
    sp.add_argument("--strict", action="store_true", help="sampled mode: use the lookahead bomb rule")
    sp.add_argument("--exactness", action="store_true", help="also count over-rejections")
    sp.add_argument("--count", type=int, default=100_000, help="sampled mode: observations")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--corpus", help="counterexample JSONL (default: --out)")
    sp.set_defaults(fn=cmd_verify_filter)

    sp = sub.add_parser("replay", parents=[common], help="re-simulate a replay file and check it")
    sp.add_argument("path")
    sp.set_defaults(fn=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"pommer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"pommer: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PommerError as exc:
        print(f"pommer: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
