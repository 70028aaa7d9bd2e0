"""Action-selection policies and checkpoint-backed construction."""
import numpy as np
import pytest

from graphblotto.actions import action_index, enumerate_valid_actions, is_valid_action
from graphblotto.env import game_from_parts
from graphblotto.errors import CheckpointError, ConfigError
from graphblotto.nn import init_mlp, save_checkpoint
from graphblotto.policies import (
    GreedyQPolicy,
    MirroredPolicy,
    RandomPolicy,
    SoftmaxPolicy,
    masked_argmax,
    policy_from_spec,
    sample_valid_action,
)
from graphblotto.seeding import derive_rng


def _obs(game, seat=1, rng_seed=0):
    st = game.reset(derive_rng(rng_seed, 0))
    return st, game.observation(st, seat)


def test_sample_valid_action_always_valid():
    game = game_from_parts("demo4", 4, 4, "C4")
    rng = derive_rng(1, 0)
    for ep in range(30):
        st = game.reset(derive_rng(1, ep))
        if st.terminal:
            continue
        obs = game.observation(st, 1)
        for _ in range(10):
            a = sample_valid_action(obs.j_mat, rng)
            assert is_valid_action(obs.j_mat, a)


def test_sample_valid_action_is_product_uniform():
    # per-resource uniformity makes every joint valid action equally likely
    # when all resources share one node (identical row supports)
    game = game_from_parts("ring4", 2, 2, "C1")
    st, obs = _obs(game)
    rng = derive_rng(2, 0)
    counts = {}
    for _ in range(4000):
        a = tuple(sample_valid_action(obs.j_mat, rng).tolist())
        counts[a] = counts.get(a, 0) + 1
    freqs = np.array(list(counts.values())) / 4000
    assert len(counts) == 4  # two resources, two displacements each
    assert np.allclose(freqs, 0.25, atol=0.03)


def test_masked_argmax_prefers_lowest_index_on_ties():
    q = np.zeros(8)
    mask = np.zeros(8, dtype=bool)
    mask[3] = mask[5] = True
    assert masked_argmax(q, mask) == 3
    q[5] = 1.0
    assert masked_argmax(q, mask) == 5


def test_greedy_policy_constant_q_picks_first_valid():
    game = game_from_parts("ring4", 2, 2, "C1")
    st, obs = _obs(game)
    net = init_mlp([4, 8, game.n_actions], derive_rng(3, 0))
    for w in net.weights:
        w[:] = 0.0
    pol = GreedyQPolicy(net)
    a = pol.act(obs, derive_rng(3, 1))
    first = enumerate_valid_actions(obs.j_mat)[0]
    assert np.array_equal(a, first)
    assert action_index(a, 4) == int(np.flatnonzero(game.flat_mask_for(st.d1))[0])


def test_greedy_policy_is_deterministic():
    game = game_from_parts("ring4", 4, 4, "C1")
    st, obs = _obs(game)
    net = init_mlp([4, 16, game.n_actions], derive_rng(4, 0))
    pol = GreedyQPolicy(net)
    a = pol.act(obs, derive_rng(4, 1))
    b = pol.act(obs, derive_rng(99, 1))
    assert np.array_equal(a, b)


def test_mirrored_policy_negates_shared_state():
    game = game_from_parts("ring4", 4, 4, "C1")
    st = game.reset(derive_rng(5, 0))

    seen = {}

    class Probe:
        def act(self, obs, rng):
            seen["s"] = obs.s.copy()
            return sample_valid_action(obs.j_mat, rng)

    MirroredPolicy(Probe()).act(game.observation(st, 2), derive_rng(5, 1))
    assert np.array_equal(seen["s"], -(st.d1 - st.d2))


def test_softmax_policy_samples_only_valid():
    game = game_from_parts("demo4", 3, 3, "C4")
    net = init_mlp([4, 8, game.n_actions], derive_rng(6, 0))
    pol = SoftmaxPolicy(net)
    rng = derive_rng(6, 1)
    for ep in range(20):
        st = game.reset(derive_rng(6, 100 + ep))
        if st.terminal:
            continue
        obs = game.observation(st, 1)
        a = pol.act(obs, rng)
        assert is_valid_action(obs.j_mat, a)


def test_policy_from_spec_random():
    game = game_from_parts("ring4", 4, 4, "C1")
    pol = policy_from_spec("random", game, 1)
    assert isinstance(pol, RandomPolicy)


def _fake_checkpoint(tmp_path, game, role, algo="dqn", n_actions=None, m1=None, m2=None):
    n_actions = n_actions or game.n_actions
    net = init_mlp([game.graph.n, 8, n_actions], derive_rng(7, role))
    meta = {
        "algo": algo,
        "role": role,
        "graph_hash": game.graph.content_hash(),
        "n": game.graph.n,
        "m1": m1 if m1 is not None else game.cfg.m1,
        "m2": m2 if m2 is not None else game.cfg.m2,
    }
    path = tmp_path / f"{algo}-{role}.json"
    key = "policy" if algo == "ppo" else "q"
    nets = {key: net}
    if algo == "ppo":
        nets["value"] = init_mlp([game.graph.n, 8, 1], derive_rng(7, 10 + role))
    save_checkpoint(path, nets, meta)
    return path


def test_policy_from_spec_greedy_same_seat(tmp_path):
    game = game_from_parts("ring4", 4, 4, "C1")
    path = _fake_checkpoint(tmp_path, game, role=1)
    pol = policy_from_spec(f"greedy:{path}", game, 1)
    assert isinstance(pol, GreedyQPolicy)


def test_policy_from_spec_cross_seat_wraps_mirror(tmp_path):
    game = game_from_parts("ring4", 4, 4, "C1")
    path = _fake_checkpoint(tmp_path, game, role=1)
    pol = policy_from_spec(f"greedy:{path}", game, 2)
    assert isinstance(pol, MirroredPolicy)


def test_policy_from_spec_rl_ppo_softmax(tmp_path):
    game = game_from_parts("ring4", 4, 4, "C1")
    path = _fake_checkpoint(tmp_path, game, role=1, algo="ppo")
    pol = policy_from_spec(f"rl:{path}", game, 1)
    assert isinstance(pol, SoftmaxPolicy)


def test_policy_from_spec_rejects_wrong_graph(tmp_path):
    game = game_from_parts("ring4", 4, 4, "C1")
    other = game_from_parts("demo4", 4, 4, "C1")
    path = _fake_checkpoint(tmp_path, other, role=1)
    with pytest.raises(CheckpointError):
        policy_from_spec(f"greedy:{path}", game, 1)


def test_policy_from_spec_rejects_wrong_pools(tmp_path):
    game = game_from_parts("ring4", 4, 4, "C1")
    path = _fake_checkpoint(tmp_path, game, role=1, m1=3, m2=4)
    with pytest.raises(CheckpointError):
        policy_from_spec(f"greedy:{path}", game, 1)


def test_policy_from_spec_rejects_unknown_kind():
    game = game_from_parts("ring4", 4, 4, "C1")
    with pytest.raises(ConfigError):
        policy_from_spec("magic:nowhere", game, 1)


def test_cross_seat_unequal_pools_swap(tmp_path):
    # a net trained as the 3-pool first player fits the 3-pool second seat
    # of the swapped matchup and nothing else
    game34 = game_from_parts("ring4", 3, 4, "C1")
    path = _fake_checkpoint(tmp_path, game34, role=1)
    game43 = game_from_parts("ring4", 4, 3, "C1")
    pol = policy_from_spec(f"greedy:{path}", game43, 2)
    assert isinstance(pol, MirroredPolicy)
    with pytest.raises(CheckpointError):
        policy_from_spec(f"greedy:{path}", game43, 1)
