"""End-to-end acceptance suite.

Twelve numbered checks covering exact move machinery, reward logic, gradient
accuracy, trained-agent win rates on fixed seeds, and bitwise reproducibility.
Each test registers a pass/fail line that the terminal summary prints after
the run.  Training checks use pinned seeds and budgets; thresholds are the
binding bars, the recorded details show the measured values.
"""
import itertools
import json
import time

import numpy as np
import pytest

from conftest import record_criterion
from graphblotto import cli
from graphblotto.actions import (
    action_matrix,
    apply_action,
    enumerate_valid_actions,
)
from graphblotto.dqn import DQNConfig, greedy_iteration, self_play_train, train_dqn
from graphblotto.env import game_from_parts, reward
from graphblotto.errors import BlottoError
from graphblotto.graphs import Graph, named_graph
from graphblotto.nn import backward, forward_cached, init_mlp, save_checkpoint
from graphblotto.oracle import (
    brute_force_transition,
    brute_force_valid_actions,
    evaluate_matchup,
)
from graphblotto.policies import GreedyQPolicy, MirroredPolicy, RandomPolicy, SoftmaxPolicy
from graphblotto.ppo import PPOConfig, train_ppo
from graphblotto.seeding import derive_rng


# ---------------------------------------------------------------------------
# shared exact-check suite: reference boards plus random digraphs

def _random_digraph(n: int, rng: np.random.Generator) -> Graph:
    adj = (rng.random((n, n)) < 0.5).astype(np.int8)
    for i in range(n):
        if adj[i].sum() == 0:
            adj[i, int(rng.integers(n))] = 1
    return Graph(name=f"rand{n}", adjacency=adj)


def _suite_graphs() -> list[Graph]:
    graphs = [named_graph("demo4"), named_graph("ring3"), named_graph("ring4"),
              named_graph("ring5")]
    rng = derive_rng(2024, 0)
    for i in range(50):
        graphs.append(_random_digraph(int(rng.integers(3, 6)), rng))
    return graphs


def _random_counts(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    return np.bincount(rng.integers(0, n, size=m), minlength=n)


def test_criterion_01_valid_action_equivalence():
    t0 = time.perf_counter()
    rng = derive_rng(2024, 1)
    checked = 0
    ok = True
    for graph in _suite_graphs():
        for _ in range(100):
            m = int(rng.integers(1, 5))
            counts = _random_counts(graph.n, m, rng)
            fast = {tuple(a.tolist()) for a in
                    enumerate_valid_actions(action_matrix(graph, counts))}
            slow = brute_force_valid_actions(graph, counts)
            checked += 1
            if fast != slow:
                ok = False
                break
        if not ok:
            break
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 120.0
    record_criterion(1, "valid-action enumeration equals brute force", ok,
                     f"{checked} distributions in {elapsed:.1f}s")
    assert ok


def test_criterion_02_transition_equivalence():
    rng = derive_rng(2024, 2)
    graphs = _suite_graphs()
    mismatches = 0
    total = 10_000
    for _ in range(total):
        graph = graphs[int(rng.integers(len(graphs)))]
        m = int(rng.integers(1, 5))
        counts = _random_counts(graph.n, m, rng)
        jm = action_matrix(graph, counts)
        acts = enumerate_valid_actions(jm)
        a = acts[int(rng.integers(len(acts)))]
        if not np.array_equal(apply_action(counts, a, graph),
                              brute_force_transition(counts, a, graph)):
            mismatches += 1
    record_criterion(2, "transition application equals brute force",
                     mismatches == 0, f"{total} pairs, {mismatches} mismatches")
    assert mismatches == 0


def test_criterion_03_reward_exhaustion():
    bad = 0
    for s in itertools.product(range(-2, 3), repeat=4):
        arr = np.array(s)
        direct = int(np.sign(int((arr > 0).sum()) - int((arr < 0).sum())))
        if reward(arr) != direct:
            bad += 1
    record_criterion(3, "reward matches node-majority count on all 625 states",
                     bad == 0, f"{bad} mismatches")
    assert bad == 0


def test_criterion_04_gradient_check():
    rng = derive_rng(2024, 4)
    h = 1e-5
    worst = 0.0
    for trial in range(100):
        depth = int(rng.integers(1, 3))
        sizes = [int(rng.integers(2, 6))] + \
                [int(rng.integers(3, 8)) for _ in range(depth)] + \
                [int(rng.integers(2, 6))]
        net = init_mlp(sizes, rng)
        x = rng.normal(size=(int(rng.integers(1, 4)), sizes[0]))
        proj = rng.normal(size=(x.shape[0], sizes[-1]))

        def loss(n):
            out, _ = forward_cached(n, x)
            return float((out * proj).sum())

        out, cache = forward_cached(net, x)
        grads = backward(net, cache, proj.copy())
        for gw, w in zip(grads.weights, net.weights):
            it = np.nditer(w, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = w[idx]
                w[idx] = orig + h
                up = loss(net)
                w[idx] = orig - h
                dn = loss(net)
                w[idx] = orig
                fd = (up - dn) / (2 * h)
                denom = max(abs(fd), abs(gw[idx]), 1e-8)
                worst = max(worst, abs(fd - gw[idx]) / denom)
    ok = worst < 1e-4
    record_criterion(4, "analytic gradients match central differences", ok,
                     f"max relative error {worst:.2e}")
    assert ok


# ---------------------------------------------------------------------------
# trained-agent checks, pinned seeds and budgets

def test_criterion_05_dqn_beats_random():
    game = game_from_parts("ring4", 4, 4, "C1")
    net, _ = train_dqn(game, DQNConfig(total_steps=20_000), RandomPolicy(), seed=0)
    stats = evaluate_matchup(GreedyQPolicy(net), RandomPolicy(), game, 2000,
                             seed=10_000)
    ok = stats.win_rate_p1 >= 0.60
    record_criterion(5, "value learner beats random on the 4-ring", ok,
                     f"win rate {stats.win_rate_p1:.3f} >= 0.60")
    assert ok


def test_criterion_06_ppo_beats_random():
    game = game_from_parts("ring4", 4, 4, "C1")
    policy, _, _ = train_ppo(game, PPOConfig(total_steps=20_000), RandomPolicy(),
                             seed=0)
    stats = evaluate_matchup(SoftmaxPolicy(policy), RandomPolicy(), game, 2000,
                             seed=20_000)
    ok = stats.win_rate_p1 >= 0.55
    record_criterion(6, "policy-gradient learner beats random on the 4-ring", ok,
                     f"win rate {stats.win_rate_p1:.3f} >= 0.55")
    assert ok


def test_criterion_07_greedy_exploitation():
    game = game_from_parts("ring4", 4, 4, "C1")
    cfg = DQNConfig(total_steps=5_000, eval_every=500, eval_episodes=50,
                    keep_best=True)
    nets, _ = greedy_iteration(game, 2, cfg, seed=12)
    q1 = GreedyQPolicy(nets[1])
    pi0 = MirroredPolicy(GreedyQPolicy(nets[0]))  # frozen seat-2 opponent
    vs_pi0 = evaluate_matchup(q1, pi0, game, 200, seed=123)
    vs_rand = evaluate_matchup(q1, RandomPolicy(), game, 2000, seed=456)
    ok_exploit = vs_pi0.win_rate_p1 >= 0.95
    ok_band = 0.40 <= vs_rand.win_rate_p1 <= 0.60
    ok = ok_exploit and ok_band
    record_criterion(7, "second-round net exploits the frozen first-round net", ok,
                     f"vs frozen {vs_pi0.win_rate_p1:.3f} >= 0.95, "
                     f"vs random {vs_rand.win_rate_p1:.3f} in [0.40, 0.60]")
    assert ok_exploit
    assert ok_band


def test_criterion_08_selfplay_balance():
    game = game_from_parts("ring4", 4, 4, "C4")
    n1, n2, _ = self_play_train(game, DQNConfig(total_steps=20_000), seed=3)
    stats = evaluate_matchup(GreedyQPolicy(n1), GreedyQPolicy(n2), game, 2000,
                             seed=30_003)
    ok = 0.40 <= stats.win_rate_p1 <= 0.60
    record_criterion(8, "self-play seats end up near balance", ok,
                     f"head-to-head p1 {stats.win_rate_p1:.3f} in [0.40, 0.60]")
    assert ok


def test_criterion_09_asymmetric_advantage():
    game = game_from_parts("g2", 4, 4, "C2")
    base = evaluate_matchup(RandomPolicy(), RandomPolicy(), game, 2000, seed=77)
    ok_base = base.win_rate_p2 <= 0.35
    cfg = DQNConfig(total_steps=10_000, eval_every=1_000, eval_episodes=300,
                    keep_best=True)
    net, _ = train_dqn(game, cfg, RandomPolicy(), seed=0, role=1)
    stats = evaluate_matchup(GreedyQPolicy(net), RandomPolicy(), game, 2000,
                             seed=40_000)
    ok_train = stats.win_rate_p1 >= 0.90
    ok = ok_base and ok_train
    record_criterion(9, "advantaged seat dominates on the one-way board", ok,
                     f"baseline p2 {base.win_rate_p2:.3f} <= 0.35, "
                     f"trained p1 {stats.win_rate_p1:.3f} >= 0.90")
    assert ok_base
    assert ok_train


def test_criterion_10_disadvantaged_improvement():
    game = game_from_parts("g2", 4, 4, "C2")
    base = evaluate_matchup(RandomPolicy(), RandomPolicy(), game, 2000, seed=77)
    cfg = DQNConfig(total_steps=15_000, eval_every=1_000, eval_episodes=1_000,
                    keep_best=True)
    net, _ = train_dqn(game, cfg, RandomPolicy(), seed=0, role=2)
    stats = evaluate_matchup(RandomPolicy(), GreedyQPolicy(net), game, 2000,
                             seed=50_000)
    bar = base.win_rate_p2 + 0.05
    ok = stats.win_rate_p2 >= bar
    record_criterion(10, "trained disadvantaged seat beats its random baseline", ok,
                     f"trained p2 {stats.win_rate_p2:.3f} >= "
                     f"{base.win_rate_p2:.3f} + 0.05")
    assert ok


def test_criterion_11_unequal_resources():
    game = game_from_parts("ring4", 3, 4, "C1")
    base = evaluate_matchup(RandomPolicy(), RandomPolicy(), game, 2000, seed=78)
    cfg = DQNConfig(total_steps=15_000, eval_every=1_000, eval_episodes=1_000,
                    keep_best=True)
    net, _ = train_dqn(game, cfg, RandomPolicy(), seed=0, role=1)
    stats = evaluate_matchup(GreedyQPolicy(net), RandomPolicy(), game, 2000,
                             seed=60_000)
    bar = base.win_rate_p1 + 0.04
    ok = stats.win_rate_p1 >= bar
    record_criterion(11, "smaller pool improves on its random baseline", ok,
                     f"trained p1 {stats.win_rate_p1:.3f} >= "
                     f"{base.win_rate_p1:.3f} + 0.04")
    assert ok


def test_criterion_12_determinism(tmp_path):
    game = game_from_parts("ring4", 2, 2, "C1")
    cfg = DQNConfig(total_steps=2_000, min_buffer=64, batch_size=32, hidden=(16,),
                    eval_every=1_000, eval_episodes=20)
    blobs = []
    for run in ("a", "b"):
        net, _ = train_dqn(game, cfg, RandomPolicy(), seed=5)
        path = tmp_path / f"{run}.json"
        save_checkpoint(path, {"q": net}, {"algo": "dqn", "seed": 5})
        blobs.append(path.read_bytes())
    same_lib = blobs[0] == blobs[1]

    stats_a = evaluate_matchup(RandomPolicy(), RandomPolicy(), game, 500, seed=9)
    stats_b = evaluate_matchup(RandomPolicy(), RandomPolicy(), game, 500, seed=9)
    same_stats = stats_a == stats_b

    cli_blobs = []
    for run in ("c", "d"):
        out = tmp_path / run
        exp = tmp_path / f"{run}.json.cfg"
        exp.write_text(json.dumps({
            "graph": "ring4", "m1": 2, "m2": 2, "init": {"kind": "C1"},
            "out_dir": str(out),
            "trainer": {"total_steps": 300, "min_buffer": 32, "batch_size": 16,
                        "hidden": [8], "eval_every": 150, "eval_episodes": 10},
        }))
        rc = cli.main(["train", "--config", str(exp), "--seed", "6", "--no-figures"])
        assert rc == 0
        ckpt = next((out / "checkpoints").glob("train-*.json"))
        cli_blobs.append(ckpt.read_bytes())
    same_cli = cli_blobs[0] == cli_blobs[1]

    ok = same_lib and same_stats and same_cli
    record_criterion(12, "identical seeds reproduce checkpoints bit for bit", ok,
                     f"library {same_lib}, stats {same_stats}, runner {same_cli}")
    assert same_lib
    assert same_stats
    assert same_cli
