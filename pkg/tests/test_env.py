"""Game environment: rewards, resets, steps, schemes, mirroring."""
import numpy as np
import pytest

from graphblotto.env import (
    Game,
    GameConfig,
    InitScheme,
    Outcome,
    default_scheme,
    game_from_parts,
    mirror_config,
    play_episode,
    reward,
    sample_initialization,
)
from graphblotto.errors import ConfigError, EpisodeOverError, InvalidActionError
from graphblotto.graphs import named_graph
from graphblotto.policies import RandomPolicy
from graphblotto.seeding import derive_rng


def test_reward_sign_of_node_majority():
    assert reward(np.array([1, -1, 0, 1])) == 1
    assert reward(np.array([-2, 1, 0, 0])) == 0
    assert reward(np.array([0, 0, 0, 0])) == 0
    assert reward(np.array([-1, -3, 2, 0])) == -1
    assert reward(np.array([5, 0, 0, 0])) == 1


def test_reward_matches_direct_count_small_grid():
    # spot sample of the exhaustive grid; the acceptance suite runs all 625
    rng = derive_rng(9, 0)
    for _ in range(100):
        s = rng.integers(-2, 3, size=4)
        want = int(np.sign((s > 0).sum() - (s < 0).sum()))
        assert reward(s) == want


def _c1_game(graph="ring4", m1=4, m2=4, **kw):
    return game_from_parts(graph, m1, m2, "C1", **kw)


def test_reset_c1_fixed_pair():
    game = _c1_game()
    st = game.reset(derive_rng(0, 0))
    assert st.t == 0 and st.outcome is Outcome.ONGOING
    assert st.d1.tolist() == [4, 0, 0, 0]
    assert st.d2.tolist() == [0, 0, 4, 0]
    assert st.s.tolist() == [4, 0, -4, 0]


def test_all_stay_keeps_state_and_continues():
    game = _c1_game()
    st = game.reset(derive_rng(0, 0))
    stay = np.zeros(4, dtype=np.int64)
    nxt, rec = game.step(st, stay, stay)
    assert nxt.t == 1 and nxt.outcome is Outcome.ONGOING
    assert np.array_equal(nxt.d1, st.d1) and np.array_equal(nxt.d2, st.d2)
    assert rec.r1 == 0


def test_claiming_majority_wins_immediately():
    # 5-node board, one node controlled each: P1 peels a redundant unit off its
    # stack onto an empty node and claims a second node while P2 stays put
    game = game_from_parts("g0", 4, 4, "explicit",
                           d1=(3, 1, 0, 0, 0), d2=(1, 1, 2, 0, 0))
    st = game.reset(derive_rng(1, 0))
    assert st.outcome is Outcome.ONGOING
    a1 = np.array([0, 0, 4, 0])   # third node-0 resource wraps onto node 4
    a2 = np.zeros(4, dtype=np.int64)
    nxt, rec = game.step(st, a1, a2)
    assert nxt.d1.tolist() == [2, 1, 0, 0, 1]
    assert rec.r1 == 1
    assert nxt.outcome is Outcome.P1_WIN
    assert nxt.terminal


def test_draw_at_horizon():
    game = _c1_game(max_steps=3)
    st = game.reset(derive_rng(0, 0))
    stay = np.zeros(4, dtype=np.int64)
    for _ in range(3):
        st, rec = game.step(st, stay, stay)
    assert st.outcome is Outcome.DRAW
    assert st.terminal and st.t == 3


def test_step_after_terminal_raises():
    game = _c1_game(max_steps=1)
    st = game.reset(derive_rng(0, 0))
    stay = np.zeros(4, dtype=np.int64)
    st, _ = game.step(st, stay, stay)
    assert st.terminal
    with pytest.raises(EpisodeOverError):
        game.step(st, stay, stay)


def test_invalid_move_rejected():
    game = _c1_game(graph="demo4")
    st = game.reset(derive_rng(0, 0))
    # all of P1's resources sit on node 0 and H[0][1] == 0
    bad = np.array([1, 0, 0, 0])
    ok = np.zeros(4, dtype=np.int64)
    with pytest.raises(InvalidActionError):
        game.step(st, bad, ok)


def test_degenerate_non_tied_start_terminates_at_t0():
    game = game_from_parts("ring4", 4, 4, "explicit",
                           d1=(2, 2, 0, 0), d2=(0, 0, 4, 0))
    st = game.reset(derive_rng(0, 0))
    assert st.t == 0 and st.terminal
    assert st.outcome is Outcome.P1_WIN


def test_reset_outcome_always_matches_initial_reward():
    # disjoint-pair C3 deals both balanced starts and decided ones (a player
    # who stacks everything on one node is outnumbered before moving)
    game = game_from_parts("ring4", 4, 4, "C3",
                           p1_nodes=(0, 1), p2_nodes=(2, 3))
    rng = derive_rng(3, 0)
    seen_terminal = seen_ongoing = False
    for _ in range(80):
        st = game.reset(rng)
        r0 = reward(st.s)
        assert st.terminal == (r0 != 0)
        seen_terminal |= st.terminal
        seen_ongoing |= not st.terminal
    assert seen_terminal and seen_ongoing


def test_c3_compositions_cover_support():
    game = game_from_parts("ring4", 4, 4, "C3", p1_nodes=(1, 2), p2_nodes=(3, 0))
    rng = derive_rng(4, 0)
    seen = set()
    for _ in range(300):
        d1, d2 = sample_initialization(game.cfg, rng)
        assert d1.sum() == 4 and d2.sum() == 4
        assert d1[[0, 3]].sum() == 0 and d2[[1, 2]].sum() == 0
        seen.add((int(d1[1]), int(d1[2])))
    assert seen == {(0, 4), (1, 3), (2, 2), (3, 1), (4, 0)}


def test_c2_respects_bounds():
    game = game_from_parts("ring4", 4, 4, "C2", p1_nodes=(0, 1), p2_nodes=(2, 3))
    rng = derive_rng(5, 0)
    for _ in range(100):
        d1, d2 = sample_initialization(game.cfg, rng)
        assert 1 <= d1[0] <= 3 and 1 <= d2[2] <= 3


def test_c4_single_resource_one_hot():
    game = game_from_parts("ring4", 1, 1, "C4")
    rng = derive_rng(6, 0)
    hits = set()
    for _ in range(100):
        d1, _ = sample_initialization(game.cfg, rng)
        assert d1.sum() == 1
        hits.add(int(np.flatnonzero(d1)[0]))
    assert hits == {0, 1, 2, 3}


def test_c4_compositions_uniform_support():
    game = game_from_parts("ring4", 3, 3, "C4")
    rng = derive_rng(7, 0)
    seen = set()
    for _ in range(500):
        d1, _ = sample_initialization(game.cfg, rng)
        seen.add(tuple(int(v) for v in d1))
    # 20 weak compositions of 3 over 4 nodes
    assert len(seen) == 20


def test_tie_overlap_keeps_shared_node_tied():
    game = game_from_parts("ring4", 4, 4, "C3",
                           p1_nodes=(0, 1), p2_nodes=(1, 2), tie_overlap=True)
    rng = derive_rng(8, 0)
    for _ in range(100):
        d1, d2 = sample_initialization(game.cfg, rng)
        assert d1[1] == d2[1]
        assert 1 <= d1[1] <= 3
        assert d1[0] == 4 - d1[1] and d2[2] == 4 - d2[1]


def test_explicit_scheme_is_verbatim():
    game = game_from_parts("ring4", 3, 5, "explicit",
                           d1=(3, 0, 0, 0), d2=(0, 0, 5, 0))
    d1, d2 = sample_initialization(game.cfg, derive_rng(0, 0))
    assert d1.tolist() == [3, 0, 0, 0]
    assert d2.tolist() == [0, 0, 5, 0]


def test_explicit_scheme_validates_totals():
    with pytest.raises(ConfigError):
        game_from_parts("ring4", 3, 5, "explicit", d1=(2, 0, 0, 0), d2=(0, 0, 5, 0))


def test_scheme_nodes_must_be_on_board():
    with pytest.raises(ConfigError):
        game_from_parts("ring4", 4, 4, "C1", p1_nodes=(7,), p2_nodes=(2,))


def test_action_space_cap_enforced():
    with pytest.raises(ConfigError):
        game_from_parts("ring5", 10, 10, "C1", action_cap=10 ** 6)


def test_observation_is_shared_state_per_seat():
    game = _c1_game()
    st = game.reset(derive_rng(0, 0))
    o1 = game.observation(st, 1)
    o2 = game.observation(st, 2)
    assert np.array_equal(o1.s, o2.s)
    assert np.array_equal(o1.own, st.d1) and np.array_equal(o2.own, st.d2)
    assert o1.player == 1 and o2.player == 2


def test_unequal_pools_pad_heads_to_common_length():
    game = game_from_parts("ring4", 3, 4, "C1")
    st = game.reset(derive_rng(0, 0))
    o1 = game.observation(st, 1)
    assert o1.j_mat.m_total == 4 and o1.j_mat.n_virtual == 1
    assert game.n_actions == 4 ** 4
    # padded transition: virtual slot stays, three real resources move
    a1 = np.array([0, 0, 1, 1])
    a2 = np.zeros(4, dtype=np.int64)
    nxt, _ = game.step(st, a1, a2)
    assert nxt.d1.tolist() == [1, 2, 0, 0]
    assert nxt.d1.sum() == 3


def test_state_from_replays_any_position():
    game = _c1_game()
    st = game.state_from(np.array([1, 1, 1, 1]), np.array([0, 2, 2, 0]), t=7)
    assert st.t == 7 and st.s.tolist() == [1, -1, -1, 1]
    assert st.outcome is Outcome.ONGOING


def test_play_episode_records_full_history():
    game = _c1_game()
    res = play_episode(game, RandomPolicy(), RandomPolicy(),
                       derive_rng(2, 0), derive_rng(2, 1), derive_rng(2, 2),
                       record=True)
    assert res.outcome is not Outcome.ONGOING
    assert len(res.steps) == res.length
    for i, rec in enumerate(res.steps):
        assert rec.t == i
        assert rec.d1.sum() == 4 and rec.d2.sum() == 4


def test_mirror_config_swaps_roles():
    game = game_from_parts("ring4", 3, 5, "C1", p1_nodes=(1,), p2_nodes=(3,))
    mc = mirror_config(game.cfg)
    assert mc.m1 == 5 and mc.m2 == 3
    assert mc.scheme.p1_nodes == (3,) and mc.scheme.p2_nodes == (1,)


def test_default_scheme_presets_exist_for_experiment_boards():
    for name in ("g0", "g1", "g2", "g3", "g4"):
        g = named_graph(name)
        sch = default_scheme(g, "C1")
        assert sch.p1_nodes and sch.p2_nodes
    sch = default_scheme(named_graph("g2"), "C2")
    assert sch.p1_nodes == (0, 1) and sch.p2_nodes == (3, 4)


def test_same_seed_same_episode():
    game = _c1_game()
    kw = dict(record=True)
    a = play_episode(game, RandomPolicy(), RandomPolicy(),
                     derive_rng(5, 0), derive_rng(5, 1), derive_rng(5, 2), **kw)
    b = play_episode(game, RandomPolicy(), RandomPolicy(),
                     derive_rng(5, 0), derive_rng(5, 1), derive_rng(5, 2), **kw)
    assert a.outcome == b.outcome and a.length == b.length
    for ra, rb in zip(a.steps, b.steps):
        assert np.array_equal(ra.a1, rb.a1) and np.array_equal(ra.a2, rb.a2)
