import json

import pytest

from pommer.engine import GameConfig, Outcome
from pommer.engine.replay import parse_replay, resimulate
from pommer.harness.bench import run_bench
from pommer.harness.cli import main
from pommer.harness.match import MatchSpec, run_match
from pommer.harness.tournament import run_tournament, wilson_interval

SMALL = GameConfig(board_size=8, rigid_count=12, wood_count=12, max_steps=120)


def test_wilson_interval():
    lo, hi = wilson_interval(57, 300)
    assert lo < 57 / 300 < hi
    assert (round(lo, 3), round(hi, 3)) == (0.150, 0.238)
    assert wilson_interval(0, 10)[0] == 0.0 and wilson_interval(10, 10)[1] == pytest.approx(1.0)
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_tournament_sums_and_determinism():
    a = run_tournament("smart_random", "static", 8, base_seed=3, config=SMALL)
    b = run_tournament("smart_random", "static", 8, base_seed=3, config=SMALL)
    assert a.wins + a.losses + a.draws == 8 == len(a.outcomes)
    assert a == b and a.to_dict(latency=False) == b.to_dict(latency=False)
    lo, hi = a.interval()
    assert lo <= a.win_rate <= hi
    assert a.bombs_b == 0 and a.self_kills_b == 0  # static players never bomb


def test_tournament_worker_invariance():
    a = run_tournament("simple", "random", 4, base_seed=1, config=SMALL, workers=1)
    b = run_tournament("simple", "random", 4, base_seed=1, config=SMALL, workers=2)
    assert a == b


def test_static_match_draws_at_limit():
    res = run_match(MatchSpec(("static",) * 4, GameConfig(), seed=5))
    assert res.outcome == Outcome.DRAW and res.steps == 800 and res.deaths == []


def test_nobomb_match_has_no_deaths():
    res = run_match(MatchSpec(("smart_random_nobomb",) * 4, GameConfig(), seed=6))
    assert res.outcome == Outcome.DRAW and res.deaths == [] and sum(res.bombs_placed) == 0


def test_replay_roundtrip(tmp_path):
    path = tmp_path / "g.jsonl"
    res = run_match(MatchSpec(("simple", "smart_random", "random", "cautious"), SMALL, 11, str(path)))
    text = path.read_text()
    check = resimulate(parse_replay(text))
    assert check.ok and check.rerecorded == text and check.final_hash == res.final_hash


def test_bench_records():
    eng = run_bench("engine_steps", 0.2)
    assert eng["steps"] > 0 and eng["steps_per_sec"] > 0
    flt = run_bench("filter_latency", 0.1)
    assert flt["p50_ms"] <= flt["p99_ms"] <= flt["max_ms"]


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, [json.loads(line) for line in out if line.startswith("{")]


def test_cli_play_and_replay(tmp_path, capsys):
    path = str(tmp_path / "m.jsonl")
    code, rec = run_cli(capsys, "play", "simple,static", "--seed", "4", "--out", path, "--max-steps", "100")
    assert code == 0 and rec[0]["format"] == "pommer-match" and rec[0]["version"] == 1
    code, rec = run_cli(capsys, "--seed", "4", "replay", path)
    assert code == 0 and rec[0]["rerecord_identical"]
    # tamper with the trailer hash
    lines = open(path).read().splitlines()
    trailer = json.loads(lines[-1])
    trailer["final_hash"] = "0" * len(trailer["final_hash"])
    lines[-1] = json.dumps(trailer)
    open(path, "w").write("\n".join(lines) + "\n")
    code, _ = run_cli(capsys, "replay", path)
    assert code == 2


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["play", "skynet,static"]) == 1
    assert main(["replay", str(tmp_path / "missing.jsonl")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["tournament", "simple"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert main(["--config", str(bad), "play", "simple,static"]) == 1


def test_cli_tournament_and_config(tmp_path, capsys):
    cfg = tmp_path / "game.json"
    cfg.write_text(json.dumps({"game": {"board_size": 8, "rigid_count": 12, "wood_count": 12, "max_steps": 60}}))
    out = tmp_path / "t.json"
    code, rec = run_cli(capsys, "tournament", "smart_random", "static", "--games", "3",
                        "--config", str(cfg), "--out", str(out))
    assert code == 0 and rec[0]["games"] == 3
    assert json.loads(out.read_text())["wins"] == rec[0]["wins"]


def test_cli_verify_filter_small(capsys):
    code, rec = run_cli(capsys, "verify-filter", "--sizes", "4", "--max-bombs", "0")
    assert code == 0 and rec[0]["ok"] and rec[0]["soundness_violations"] == 0


def test_cli_train_numeric_divergence(tmp_path, capsys, monkeypatch):
    import pommer.rl.train as tr
    from pommer.errors import NumericError

    def boom(*a, **k):
        raise NumericError("non-finite loss")

    monkeypatch.setattr(tr, "ppo_update", boom)
    code, rec = run_cli(capsys, "train", "--desk", "--iterations", "1", "--set", "ppo.games=1",
                        "--set", "game.max_steps=20", "--out", str(tmp_path))
    assert code == 3 and rec[-1]["format"] == "pommer-train-aborted"


def test_cli_verify_sampled(capsys):
    code, rec = run_cli(capsys, "verify-filter", "--mode", "sampled", "--count", "400", "--strict")
    assert code == 0 and rec[0]["checked_actions"] >= 400 and rec[0]["soundness_violations"] == 0
