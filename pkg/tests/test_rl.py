import csv
import itertools

import numpy as np
import pytest
import torch

from pommer.engine import AgentEvents, GameConfig, Outcome, Powerup
from pommer.errors import NumericError, UsageError
from pommer.rl.network import NetSpec, forward, init_params, load_checkpoint, save_checkpoint, unpack
from pommer.rl.ppo import (
    PPOConfig,
    compute_returns_advantages,
    discounted_returns,
    gae_advantages,
    masked_log_probs,
    ppo_loss,
    torch_forward,
)
from pommer.rl.rollout import RolloutBatch, collect_rollouts
from pommer.rl.shaping import ShapingConfig, ShapingState, shaped_reward, terminal_reward
from pommer.rl.train import CURVE_HEADER, Curriculum, TrainConfig, apply_overrides, desk_config, train

torch.set_default_dtype(torch.float64)


def ev(agent=0, **kw):
    kw.setdefault("alive", True)
    return AgentEvents(agent, **kw)


# --- shaping -------------------------------------------------------------------------

def test_shaping_pickups():
    st_ = ShapingState(start=(0, 0))
    assert shaped_reward(ev(picked_powerup=Powerup.ENABLE_KICK), st_) == 0.02
    assert shaped_reward(ev(picked_powerup=Powerup.EXTRA_BOMB), st_) == 0.01
    assert shaped_reward(ev(picked_powerup=Powerup.EXTRA_BLAST), st_) == 0.01


def test_shaping_new_cells_fifo():
    st_ = ShapingState(start=(0, 0))
    assert shaped_reward(ev(entered_cell=(0, 1)), st_) == 0.001
    assert shaped_reward(ev(entered_cell=(0, 0)), st_) == 0.0  # start cell is in the queue
    assert shaped_reward(ev(entered_cell=(0, 1)), st_) == 0.0
    assert shaped_reward(ev(), st_) == 0.0  # no move, nothing


def test_shaping_fifo_capacity_and_eviction():
    st_ = ShapingState()
    cells = [(r, c) for r in range(12) for c in range(12)][:122]
    for cell in cells:
        assert st_.visit(cell)
    assert len(st_.visited) == 121
    assert cells[0] not in st_.visited  # oldest evicted
    assert shaped_reward(ev(entered_cell=cells[0]), st_) == 0.001
    assert shaped_reward(ev(entered_cell=cells[-1]), st_) == 0.0


def test_shaping_deaths():
    cfg = ShapingConfig()
    assert shaped_reward(ev(killed_enemy_count=1), ShapingState(cfg)) == 0.5
    assert shaped_reward(ev(killed_enemy_count=2), ShapingState(cfg)) == 1.0
    assert shaped_reward(ev(teammate_died=True), ShapingState(cfg)) == -0.5
    assert shaped_reward(ev(killed_enemy_count=1, teammate_died=True), ShapingState(cfg)) == 0.0


def test_shaping_terminal():
    cfg = ShapingConfig()
    assert terminal_reward(0, False, Outcome.TEAM0_WINS, cfg) == 0.5   # dead member of the winners
    assert terminal_reward(0, True, Outcome.TEAM0_WINS, cfg) == 1.0
    assert terminal_reward(2, True, Outcome.DRAW, cfg) == 0.0
    assert terminal_reward(2, False, Outcome.DRAW, cfg) == 0.0
    assert terminal_reward(1, True, Outcome.TEAM0_WINS, cfg) == -1.0
    assert terminal_reward(3, False, Outcome.TEAM0_WINS, cfg) == -1.0
    assert shaped_reward(ev(1, alive=True), ShapingState(cfg), Outcome.TEAM1_WINS) == 1.0
    assert shaped_reward(ev(1, alive=True, killed_enemy_count=1), ShapingState(cfg), Outcome.DRAW) == 0.5


def test_shaping_all_draw_is_zero():
    st_ = ShapingState()
    assert shaped_reward(ev(), st_, Outcome.DRAW) == 0.0 and st_.total == 0.0


# --- returns / advantages ------------------------------------------------------------------

def naive_returns(rewards, dones, gamma):
    out = []
    for t in range(len(rewards)):
        total, k = 0.0, t
        while k < len(rewards):
            total += gamma ** (k - t) * rewards[k]
            if dones[k]:
                break
            k += 1
        out.append(total)
    return np.array(out)


def batch_of(rewards, dones, values):
    n = len(rewards)
    return RolloutBatch(
        features=np.zeros((n, 14, 2, 2), np.float32), actions=np.zeros(n, np.int64),
        logp_old=np.zeros(n), v_old=np.asarray(values, float), rewards=np.asarray(rewards, float),
        dones=np.asarray(dones, bool), masks=np.ones((n, 6), bool), episode=np.zeros(n, np.int64),
        games=[],
    )


def test_returns_single_transition():
    b = compute_returns_advantages(batch_of([1.0], [True], [0.3]), PPOConfig(normalize_advantages=False))
    assert b.returns[0] == 1.0 and b.advantages[0] == pytest.approx(0.7)


def test_returns_two_steps():
    r = discounted_returns([0.0, 1.0], [False, True], 0.5)
    assert r.tolist() == [0.5, 1.0]


def test_returns_match_naive_sum():
    rng = np.random.default_rng(0)
    rewards = rng.normal(size=150)
    dones = np.zeros(150, bool)
    dones[[49, 99, 149]] = True  # three 50-step episodes
    fast = discounted_returns(rewards, dones, 0.99)
    assert np.max(np.abs(fast - naive_returns(rewards, dones, 0.99))) <= 1e-10


def test_gae_lambda_one_equals_mc_advantage():
    rng = np.random.default_rng(1)
    rewards, values = rng.normal(size=40), rng.normal(size=40)
    dones = np.zeros(40, bool)
    dones[[19, 39]] = True
    adv = gae_advantages(rewards, values, dones, 0.97, 1.0)
    assert np.allclose(adv, discounted_returns(rewards, dones, 0.97) - values, atol=1e-12)


def test_advantage_normalisation_and_errors():
    rng = np.random.default_rng(2)
    n = 30
    dones = np.zeros(n, bool)
    dones[-1] = True
    b = compute_returns_advantages(batch_of(rng.normal(size=n), dones, rng.normal(size=n)), PPOConfig())
    assert abs(b.advantages.mean()) < 1e-12 and b.advantages.std() == pytest.approx(1.0)
    with pytest.raises(UsageError):
        compute_returns_advantages(batch_of([], [], []), PPOConfig())
    with pytest.raises(UsageError):
        compute_returns_advantages(batch_of([1.0, 1.0], [True, False], [0, 0]), PPOConfig())


def test_ppo_config_validation():
    for bad in ({"clip": 0.0}, {"clip": 1.0}, {"gamma": 0.0}, {"gamma": 1.5}, {"objective": "x"}):
        with pytest.raises(UsageError):
            PPOConfig(**bad)


# --- network -----------------------------------------------------------------------------------

def test_param_count_is_function_of_shape():
    a, b = NetSpec(board_size=11, channels=64), NetSpec(board_size=11, channels=64)
    assert a.param_count() == b.param_count() == init_params(a).size
    c = 64
    expected = (14 * 9 * c + c) + 3 * (c * 9 * c + c) + 2 * (2 * c + 2) + (6 * 242 + 6) + (242 + 1)
    assert a.param_count() == expected
    assert NetSpec(board_size=8, channels=64).param_count() != expected


def test_zero_weights_uniform():
    spec = NetSpec(board_size=5, channels=2)
    probs, value = forward(spec, np.zeros(spec.param_count()), np.random.default_rng(0).random((14, 5, 5)))
    assert np.allclose(probs, 1 / 6) and value == 0.0


def test_probabilities_normalised():
    spec = NetSpec(board_size=5, channels=3)
    rng = np.random.default_rng(3)
    for k in range(10):
        params = rng.normal(0, 0.5, spec.param_count())
        probs, _ = forward(spec, params, rng.random((100, 14, 5, 5)))
        assert (probs >= 0).all() and np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_batch_permutation_invariance():
    spec = NetSpec(board_size=6, channels=4)
    rng = np.random.default_rng(4)
    params = init_params(spec, 1, np.float64) + rng.normal(0, 0.05, spec.param_count())
    x = rng.random((12, 14, 6, 6))
    perm = rng.permutation(12)
    p1, v1 = forward(spec, params, x)
    p2, v2 = forward(spec, params, x[perm])
    assert np.allclose(p1[perm], p2, atol=1e-12) and np.allclose(v1[perm], v2, atol=1e-12)


def test_numpy_and_torch_agree():
    spec = NetSpec(board_size=7, channels=5, aux_dim=3)
    rng = np.random.default_rng(5)
    params = rng.normal(0, 0.1, spec.param_count())
    x, aux = rng.random((9, 14, 7, 7)), rng.random((9, 3))
    probs, value = forward(spec, params, x, aux)
    logits, v = torch_forward(spec, torch.tensor(params), torch.tensor(x), torch.tensor(aux))
    assert np.allclose(torch.softmax(logits, 1).numpy(), probs, atol=1e-12)
    assert np.allclose(v.detach().numpy(), value, atol=1e-12)


def test_forward_non_finite_raises():
    spec = NetSpec(board_size=5, channels=2)
    params = np.zeros(spec.param_count())
    params[-1] = np.inf
    with pytest.raises(NumericError):
        forward(spec, params, np.zeros((14, 5, 5)))
    with pytest.raises(UsageError):
        forward(spec, params[:-1], np.zeros((14, 5, 5)))


def test_checkpoint_roundtrip(tmp_path):
    spec = NetSpec(board_size=6, channels=3)
    params = init_params(spec, 2)
    path = tmp_path / "a.ckpt"
    save_checkpoint(path, spec, params, iteration=955, meta={"stage": "static"})
    spec2, params2, header = load_checkpoint(path)
    assert spec2 == spec and header["iteration"] == 955 and header["arch_hash"] == spec.arch_hash()
    assert np.array_equal(params2, params.astype(np.float32))
    raw = path.read_bytes()
    (tmp_path / "b.ckpt").write_bytes(raw[:-4])
    with pytest.raises(UsageError):
        load_checkpoint(tmp_path / "b.ckpt")
    (tmp_path / "c.ckpt").write_bytes(b"garbage\n" + raw)
    with pytest.raises(UsageError):
        load_checkpoint(tmp_path / "c.ckpt")


# --- PPO loss ------------------------------------------------------------------------------------

def loss_problem(seed=0, n=8):
    spec = NetSpec(board_size=5, channels=2)
    rng = np.random.default_rng(seed)
    params = rng.normal(0, 0.3, spec.param_count())
    x = torch.tensor(rng.random((n, 14, 5, 5)))
    actions = torch.tensor(rng.integers(0, 6, n))
    masks = torch.ones((n, 6), dtype=torch.bool)
    return spec, params, x, actions, masks, rng


def test_loss_at_old_params():
    spec, params, x, actions, masks, rng = loss_problem()
    flat = torch.tensor(params)
    with torch.no_grad():
        logits, v = torch_forward(spec, flat, x)
        logp = masked_log_probs(logits, masks).gather(1, actions.view(-1, 1))[:, 0]
    adv = torch.tensor(rng.normal(size=8))
    ret = torch.tensor(rng.normal(size=8))
    cfg = PPOConfig()
    loss = ppo_loss(spec, flat, x, actions, logp, v, ret, adv, cfg, masks)
    assert loss.item() == pytest.approx((-adv + 0.25 * (v - ret) ** 2).mean().item(), abs=1e-12)


def test_finite_difference_gradient():
    spec, params, x, actions, masks, rng = loss_problem(1)
    # old policy/value somewhere near, so ratios and value deltas stay inside the clip
    with torch.no_grad():
        logits, v = torch_forward(spec, torch.tensor(params), x)
        logp_old = masked_log_probs(logits, masks).gather(1, actions.view(-1, 1))[:, 0] + 0.05
        v_old = v + 0.05
    adv = torch.tensor(rng.normal(size=8))
    ret = torch.tensor(rng.normal(size=8))
    cfg = PPOConfig(clip=0.2)

    def f(p):
        return ppo_loss(spec, p, x, actions, logp_old, v_old, ret, adv, cfg, masks)

    flat = torch.tensor(params, requires_grad=True)
    f(flat).backward()
    grad = flat.grad.numpy()
    h = 1e-6
    idx = rng.choice(len(params), 200, replace=False)
    num = []
    for i in idx:
        e = np.zeros_like(params)
        e[i] = h
        num.append((f(torch.tensor(params + e)).item() - f(torch.tensor(params - e)).item()) / (2 * h))
    num = np.array(num)
    rel = np.abs(num - grad[idx]) / np.maximum(1e-8, np.abs(num) + np.abs(grad[idx]))
    assert rel.max() <= 1e-4


def _single(spec, params, ratio, adv_sign, value_offset=0.0):
    """One-sample problem with a chosen ratio and v - v_old offset."""
    rng = np.random.default_rng(7)
    x = torch.tensor(rng.random((1, 14, 5, 5)))
    a = torch.tensor([2])
    masks = torch.ones((1, 6), dtype=torch.bool)
    with torch.no_grad():
        logits, v = torch_forward(spec, torch.tensor(params), x)
        logp = masked_log_probs(logits, masks)[0, 2]
    logp_old = (logp - np.log(ratio)).view(1)
    v_old = (v - value_offset).detach()
    return x, a, masks, logp_old, v_old


@pytest.mark.parametrize("ratio,sign,zero", [
    (1.5, 1.0, True), (0.5, -1.0, True),      # outside the clip: no gradient through the ratio
    (1.1, 1.0, False), (0.9, -1.0, False),    # inside: gradient flows
    (0.5, 1.0, True), (1.5, -1.0, True),      # the clipped term also pins these
])
def test_policy_clip_region(ratio, sign, zero):
    spec, params, *_ = loss_problem(2)
    x, a, masks, logp_old, v_old = _single(spec, params, ratio, sign)
    cfg = PPOConfig(clip=0.2, value_coef=0.0)
    flat = torch.tensor(params, requires_grad=True)
    loss, parts = ppo_loss(spec, flat, x, a, logp_old, v_old, v_old.clone(), torch.tensor([sign]), cfg,
                           masks, parts=True)
    parts["policy"].backward()
    gnorm = flat.grad.abs().max().item()
    assert (gnorm == 0.0) == zero
    assert parts["ratio"].item() == pytest.approx(ratio)


def test_pessimistic_objective_keeps_gradient_when_it_hurts():
    spec, params, *_ = loss_problem(2)
    x, a, masks, logp_old, v_old = _single(spec, params, 1.5, -1.0)
    cfg = PPOConfig(clip=0.2, value_coef=0.0, objective="pessimistic")
    flat = torch.tensor(params, requires_grad=True)
    ppo_loss(spec, flat, x, a, logp_old, v_old, v_old.clone(), torch.tensor([-1.0]), cfg, masks).backward()
    assert flat.grad.abs().max().item() > 0


def test_value_clip_branch():
    spec, params, *_ = loss_problem(3)
    # v - v_old = 0.5 > eps; the return lies on the far side so the clipped branch is the max
    x, a, masks, logp_old, v_old = _single(spec, params, 1.0, 1.0, value_offset=0.5)
    with torch.no_grad():
        _, v = torch_forward(spec, torch.tensor(params), x)
    ret = v + 1.0
    cfg = PPOConfig(clip=0.2, value_coef=1.0)
    flat = torch.tensor(params, requires_grad=True)
    _, parts = ppo_loss(spec, flat, x, a, logp_old, v_old, ret, torch.tensor([0.0]), cfg, masks, parts=True)
    parts["value"].backward()
    assert flat.grad.abs().max().item() == 0.0
    # returns below v: the unclipped branch dominates and the gradient flows
    flat = torch.tensor(params, requires_grad=True)
    _, parts = ppo_loss(spec, flat, x, a, logp_old, v_old, v - 1.0, torch.tensor([0.0]), cfg, masks, parts=True)
    parts["value"].backward()
    assert flat.grad.abs().max().item() > 0.0


def test_value_branch_order_irrelevant():
    rng = np.random.default_rng(9)
    v, v_old, ret = (torch.tensor(rng.normal(size=50)) for _ in range(3))
    eps = 0.2
    v_clip = v_old + torch.clamp(v - v_old, -eps, eps)
    assert torch.equal(torch.maximum((v - ret) ** 2, (v_clip - ret) ** 2),
                       torch.maximum((v_clip - ret) ** 2, (v - ret) ** 2))


def test_masked_logits_get_no_probability():
    logits = torch.zeros((1, 6))
    mask = torch.tensor([[True, False, True, False, True, True]])
    probs = masked_log_probs(logits, mask).exp()
    assert probs[0, 1].item() == 0.0 and probs[0, 0].item() == pytest.approx(0.25)


# --- rollouts / training ---------------------------------------------------------------------------------

SMALL = GameConfig(board_size=6, rigid_count=4, wood_count=6, max_steps=40)


def test_rollout_outcome_partition_and_seeds():
    spec = NetSpec(board_size=6, channels=2)
    b = collect_rollouts(spec, init_params(spec, 0), "static", 6, base_seed=100, config=SMALL)
    assert [g["seed"] for g in b.games] == list(range(100, 106))
    assert [g["learner_team"] for g in b.games] == [0, 1, 0, 1, 0, 1]
    assert sum(g["win"] + g["loss"] + g["draw"] for g in b.games) == 6
    assert (b.logp_old <= 0).all()
    assert b.dones.sum() == len(set(b.episode.tolist()))
    assert b.masks[np.arange(len(b)), b.actions].all()  # sampled actions were allowed


def test_rollout_worker_count_invariance():
    spec = NetSpec(board_size=6, channels=2)
    params = init_params(spec, 0)
    a = collect_rollouts(spec, params, "smart_random", 4, base_seed=7, config=SMALL, workers=1)
    b = collect_rollouts(spec, params, "smart_random", 4, base_seed=7, config=SMALL, workers=2)
    assert a.fingerprint() == b.fingerprint()


def test_rollout_board_mismatch():
    spec = NetSpec(board_size=7, channels=2)
    with pytest.raises(UsageError):
        collect_rollouts(spec, init_params(spec), "static", 1, config=SMALL)
    with pytest.raises(UsageError):
        collect_rollouts(NetSpec(board_size=6, channels=2), init_params(NetSpec(board_size=6, channels=2)),
                         "nobody", 1, config=SMALL)


def tiny_train_config(**kw):
    cfg = desk_config()
    cfg = apply_overrides(cfg, ["iterations=2", "ppo.games=2", "ppo.minibatch=32", "ppo.epochs=1",
                                "channels=2", "game.board_size=6", "game.rigid_count=4",
                                "game.wood_count=6", "game.max_steps=30"])
    return cfg


def test_train_reproducible(tmp_path):
    cfg = tiny_train_config()
    train(cfg, str(tmp_path / "a"))
    train(cfg, str(tmp_path / "b"))
    ca = (tmp_path / "a" / "curve.csv").read_text()
    assert ca == (tmp_path / "b" / "curve.csv").read_text()
    rows = list(csv.reader(ca.splitlines()))
    assert rows[0] == CURVE_HEADER and [r[0] for r in rows[1:]] == ["1", "2"]
    for name in ("latest.ckpt", "checkpoints/iter_0001.ckpt", "checkpoints/iter_0002.ckpt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    _, _, header = load_checkpoint(tmp_path / "a" / "latest.ckpt")
    assert header["iteration"] == 2 and header["meta"]["config_hash"] == cfg.config_hash()


def test_train_divergence_keeps_last_good(tmp_path, monkeypatch):
    import pommer.rl.train as tr

    real = tr.ppo_update
    calls = []

    def flaky(*args, **kw):
        calls.append(1)
        if len(calls) == 2:
            raise NumericError("boom")
        return real(*args, **kw)

    monkeypatch.setattr(tr, "ppo_update", flaky)
    with pytest.raises(NumericError):
        train(tiny_train_config(), str(tmp_path))
    _, _, header = load_checkpoint(tmp_path / "latest.ckpt")
    assert header["iteration"] == 1


def test_curriculum_promotion():
    c = Curriculum(["static", "smart_random_nobomb"], 0.6, 5)
    assert [c.record(w, 10) for w in (9, 9, 9, 9)] == [False] * 4
    assert c.record(6, 10) and c.stage == "smart_random_nobomb"
    assert not any(c.record(10, 10) for _ in range(10))  # last stage stays


def test_config_overrides_and_roundtrip():
    cfg = apply_overrides(TrainConfig(), ["ppo.lr=0.001", "iterations=955", "stages=[\"static\"]"])
    assert cfg.ppo.lr == 1e-3 and cfg.iterations == 955 and cfg.stages == ("static",)
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    for bad in (["ppo.nope=1"], ["nope.lr=1"], ["lr"]):
        with pytest.raises(UsageError):
            apply_overrides(cfg, bad)


def test_defaults_match_documented_values():
    p = PPOConfig()
    assert (p.clip, p.value_coef, p.gamma, p.games, p.workers) == (0.2, 0.5, 0.99, 120, 12)
    assert (p.lr, p.epochs, p.minibatch, p.entropy_coef, p.gae_lambda) == (2.5e-4, 4, 256, 0.0, None)
    assert TrainConfig().stages == ("static", "smart_random_nobomb")
    assert NetSpec().channels == 64 and NetSpec().layers == 4
