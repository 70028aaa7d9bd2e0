"""Value-based training: replay memory, masked temporal-difference targets,
epsilon-greedy behavior, greedy-opponent iteration, and two-sided self-play.

The action-value net maps the normalized signed state to one output per flat
action index.  Invalid actions never appear in behavior or in bootstrap
targets; the validity mask rules them out on both sides.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .actions import action_from_index, action_index
from .env import Game
from .errors import ConfigError
from .nn import (
    AdamState,
    Mlp,
    adam_step,
    backward,
    forward,
    forward_cached,
    init_mlp,
    normalize_state,
    sgd_step,
)
from .oracle import evaluate_matchup
from .policies import GreedyQPolicy, MirroredPolicy, RandomPolicy, masked_argmax, sample_valid_action
from .reports import EvalPoint, TrainReport
from .seeding import derive_rng, derive_seed

LOSS_SAMPLE_EVERY = 100  # keep every k-th update loss in the report


@dataclass(frozen=True)
class DQNConfig:
    total_steps: int = 60_000
    gamma: float = 0.99
    lr: float = 1e-3
    batch_size: int = 64
    buffer_capacity: int = 100_000
    min_buffer: int = 1_000
    train_freq: int = 1              # environment steps between updates
    target_sync: int = 500           # updates between target refreshes
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_steps: int | None = None   # None: first half of total_steps
    hidden: tuple = (64, 64)
    optimizer: str = "adam"
    eval_every: int | None = None    # None: five evenly spaced checkpoints
    eval_episodes: int = 200
    keep_best: bool = False          # return the net from the best eval point

    def describe(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "total_steps", "gamma", "lr", "batch_size", "buffer_capacity", "min_buffer",
            "train_freq", "target_sync", "eps_start", "eps_end", "eps_decay_steps",
            "optimizer", "eval_every", "eval_episodes", "keep_best")}
        out["hidden"] = list(self.hidden)
        return out


def epsilon_at(step: int, cfg: DQNConfig) -> float:
    """Linear anneal from eps_start to eps_end over the decay horizon."""
    horizon = cfg.eps_decay_steps if cfg.eps_decay_steps is not None else max(cfg.total_steps // 2, 1)
    frac = min(max(step, 0) / max(horizon, 1), 1.0)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def epsilon_greedy_select(q_row: np.ndarray, j_mat, mask: np.ndarray, epsilon: float,
                          rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Explore with a product-uniform valid draw, otherwise exploit the masked argmax."""
    if rng.random() < epsilon:
        action = sample_valid_action(j_mat, rng)
        return action, action_index(action, j_mat.n)
    idx = masked_argmax(q_row, mask)
    return action_from_index(idx, j_mat.n, j_mat.m_total), idx


class ReplayBuffer:
    """Fixed-capacity FIFO ring over numpy storage."""

    def __init__(self, capacity: int, n: int):
        if capacity < 1:
            raise ConfigError("replay capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, n), dtype=np.int16)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity, dtype=np.float64)
        self.s_next = np.zeros((capacity, n), dtype=np.int16)
        self.own_next = np.zeros((capacity, n), dtype=np.int16)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.count = 0

    def __len__(self) -> int:
        return min(self.count, self.capacity)

    def push(self, s, a: int, r: float, s_next, own_next, terminal: bool) -> None:
        i = self.count % self.capacity
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s_next[i] = s_next
        self.own_next[i] = own_next
        self.terminal[i] = terminal
        self.count += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        size = len(self)
        if size < batch_size:
            raise ConfigError(f"buffer holds {size} transitions, need {batch_size}")
        idx = rng.integers(0, size, size=batch_size)
        return {
            "s": self.s[idx].astype(np.float64),
            "a": self.a[idx],
            "r": self.r[idx],
            "s_next": self.s_next[idx].astype(np.float64),
            "own_next": self.own_next[idx],
            "terminal": self.terminal[idx],
        }


def td_targets(r: np.ndarray, terminal: np.ndarray, q_next: np.ndarray,
               next_masks: np.ndarray, gamma: float) -> np.ndarray:
    """y = r for terminal rows, else r + gamma * max over valid next actions."""
    masked = np.where(next_masks, q_next, -np.inf)
    best = masked.max(axis=1)
    # terminal rows may carry empty masks; never touch their -inf
    return np.where(terminal, r, r + gamma * best)


def _optimizer_step(net: Mlp, grads, opt_state, cfg: DQNConfig) -> None:
    if cfg.optimizer == "adam":
        adam_step(net, grads, opt_state, cfg.lr)
    elif cfg.optimizer == "sgd":
        sgd_step(net, grads, cfg.lr)
    else:
        raise ConfigError(f"unknown optimizer {cfg.optimizer!r}")


def dqn_update(net: Mlp, target_net: Mlp, buffer: ReplayBuffer, cfg: DQNConfig,
               opt_state: AdamState, rng: np.random.Generator, mask_fn) -> float:
    """One minibatch gradient step on the squared TD error; returns the loss."""
    batch = buffer.sample(cfg.batch_size, rng)
    b = batch["a"].shape[0]
    masks = mask_fn(batch["own_next"], batch["terminal"])
    x = normalize_state(batch["s"], net.m_scale)
    x_next = normalize_state(batch["s_next"], net.m_scale)
    q_next = forward(target_net, x_next)
    y = td_targets(batch["r"], batch["terminal"], q_next, masks, cfg.gamma)
    out, cache = forward_cached(net, x)
    picked = out[np.arange(b), batch["a"]]
    diff = picked - y
    loss = float(np.mean(diff ** 2))
    dout = np.zeros_like(out)
    dout[np.arange(b), batch["a"]] = 2.0 * diff / b
    grads = backward(net, cache, dout)
    _optimizer_step(net, grads, opt_state, cfg)
    return loss


def _mask_batch_fn(game: Game):
    def fn(own_rows: np.ndarray, terminal: np.ndarray) -> np.ndarray:
        out = np.zeros((own_rows.shape[0], game.n_actions), dtype=bool)
        for i, row in enumerate(own_rows):
            if terminal[i]:
                continue  # never read; td_targets keeps the terminal branch
            out[i] = game.flat_mask_for(row.astype(np.int64))
        return out
    return fn


def _fresh_reset(game: Game, rng: np.random.Generator):
    """Reset until a live start; decided starts are counted, not played."""
    degenerate = 0
    state = game.reset(rng)
    while state.terminal:
        degenerate += 1
        if degenerate > 10_000:
            raise ConfigError("initialization scheme never produces a playable start")
        state = game.reset(rng)
    return state, degenerate


@dataclass
class _AgentSlot:
    """Everything one learning agent carries through a training loop."""

    role: int
    net: Mlp
    target: Mlp
    buffer: ReplayBuffer
    opt: AdamState
    rng_act: np.random.Generator
    updates: int = 0
    losses: list = field(default_factory=list)


def _make_slot(game: Game, cfg: DQNConfig, seed: int, role: int, stream: int) -> _AgentSlot:
    sizes = [game.graph.n, *cfg.hidden, game.n_actions]
    net = init_mlp(sizes, derive_rng(seed, stream, 0), m_scale=game.m_total)
    return _AgentSlot(
        role=role,
        net=net,
        target=net.copy(),
        buffer=ReplayBuffer(cfg.buffer_capacity, game.graph.n),
        opt=AdamState.for_net(net),
        rng_act=derive_rng(seed, stream, 1),
    )


def _slot_act(slot: _AgentSlot, game: Game, state, eps: float):
    own = state.d1 if slot.role == 1 else state.d2
    jm = game.j_mat_for(own)
    mask = game.flat_mask_for(own)
    q_row = forward(slot.net, normalize_state(state.s, slot.net.m_scale)[None, :])[0]
    return epsilon_greedy_select(q_row, jm, mask, eps, slot.rng_act)


def _slot_learn(slot: _AgentSlot, game: Game, cfg: DQNConfig, step: int,
                rng_batch: np.random.Generator, mask_fn) -> None:
    warmup = max(cfg.batch_size, cfg.min_buffer)
    if len(slot.buffer) < warmup or step % cfg.train_freq != 0:
        return
    loss = dqn_update(slot.net, slot.target, slot.buffer, cfg, slot.opt, rng_batch, mask_fn)
    slot.updates += 1
    if slot.updates % LOSS_SAMPLE_EVERY == 0 or slot.updates == 1:
        slot.losses.append((step, loss))
    if slot.updates % cfg.target_sync == 0:
        slot.target = slot.net.copy()


def _eval_agent(game: Game, net: Mlp, role: int, opponent, episodes: int, seed: int,
                step: int) -> EvalPoint:
    me = GreedyQPolicy(net.copy())
    if role == 1:
        stats = evaluate_matchup(me, opponent, game, episodes, seed)
        wins, losses = stats.wins_p1, stats.wins_p2
    else:
        stats = evaluate_matchup(opponent, me, game, episodes, seed)
        wins, losses = stats.wins_p2, stats.wins_p1
    return EvalPoint(step=step, episodes=episodes, wins=wins, losses=losses, draws=stats.draws)


def _eval_steps(cfg: DQNConfig) -> list[int]:
    if cfg.eval_every is not None:
        pts = list(range(cfg.eval_every, cfg.total_steps + 1, cfg.eval_every))
    else:
        k = max(cfg.total_steps // 5, 1)
        pts = list(range(k, cfg.total_steps + 1, k))
    if not pts or pts[-1] != cfg.total_steps:
        pts.append(cfg.total_steps)
    return pts


def train_dqn(game: Game, cfg: DQNConfig, opponent, seed: int, role: int = 1,
              run_hash: str = "") -> tuple[Mlp, TrainReport]:
    """Train one agent in the given seat against a frozen opponent policy."""
    if role not in (1, 2):
        raise ConfigError(f"role must be 1 or 2, got {role}")
    t0 = time.perf_counter()
    slot = _make_slot(game, cfg, seed, role, stream=0)
    rng_env = derive_rng(seed, 1)
    rng_opp = derive_rng(seed, 2)
    rng_batch = derive_rng(seed, 3)
    mask_fn = _mask_batch_fn(game)
    report = TrainReport(algo="dqn", seed=seed, config_hash=run_hash)
    eval_marks = set(_eval_steps(cfg))
    best_net, best_rate = None, -1.0

    state, degen = _fresh_reset(game, rng_env)
    report.episodes += degen
    if cfg.total_steps < 1:
        report.wall_clock_seconds = time.perf_counter() - t0
        return slot.net, report

    opp_role = 2 if role == 1 else 1
    for step in range(1, cfg.total_steps + 1):
        eps = epsilon_at(step, cfg)
        action, flat_idx = _slot_act(slot, game, state, eps)
        opp_action = opponent.act(game.observation(state, opp_role), rng_opp)
        a1, a2 = (action, opp_action) if role == 1 else (opp_action, action)
        nxt, rec = game.step(state, a1, a2)
        r_me = float(rec.r1 if role == 1 else -rec.r1)
        own_next = nxt.d1 if role == 1 else nxt.d2
        slot.buffer.push(state.s, flat_idx, r_me, nxt.s, own_next, nxt.terminal)
        _slot_learn(slot, game, cfg, step, rng_batch, mask_fn)
        if nxt.terminal:
            report.episodes += 1
            state, degen = _fresh_reset(game, rng_env)
            report.episodes += degen
        else:
            state = nxt
        if step in eval_marks:
            point = _eval_agent(game, slot.net, role, opponent, cfg.eval_episodes,
                                derive_seed(seed, 4, step), step)
            report.eval_points.append(point)
            if cfg.keep_best and point.win_rate >= best_rate:
                best_net, best_rate = slot.net.copy(), point.win_rate

    report.total_env_steps = cfg.total_steps
    report.updates = slot.updates
    report.loss_curve = slot.losses
    report.wall_clock_seconds = time.perf_counter() - t0
    if cfg.keep_best and best_net is not None:
        return best_net, report
    return slot.net, report


def greedy_iteration(game: Game, iterations: int, cfg: DQNConfig, seed: int,
                     run_hash: str = "") -> tuple[list[Mlp], list[TrainReport]]:
    """Chain of value nets: the first trains against the random baseline, each
    later one against the frozen greedy policy of its predecessor.

    iterations counts trainings, so iterations=1 is exactly train_dqn versus
    the random baseline.
    """
    if iterations < 1:
        raise ConfigError("need at least one iteration")
    nets: list[Mlp] = []
    reports: list[TrainReport] = []
    opponent = RandomPolicy()
    for i in range(iterations):
        net, rep = train_dqn(game, cfg, opponent, derive_seed(seed, 100, i),
                             role=1, run_hash=run_hash)
        rep.extra["iteration"] = i
        rep.extra["opponent"] = "random" if i == 0 else f"greedy(q{i - 1})"
        nets.append(net)
        reports.append(rep)
        # the frozen net learned seat 1; mirror its view to play seat 2
        opponent = MirroredPolicy(GreedyQPolicy(net.copy()))
    return nets, reports


def self_play_train(game: Game, cfg: DQNConfig, seed: int,
                    run_hash: str = "") -> tuple[Mlp, Mlp, TrainReport]:
    """Train both seats at once on shared episodes with opposite rewards."""
    if game.cfg.m1 != game.cfg.m2:
        raise ConfigError("self-play expects equal resource pools")
    t0 = time.perf_counter()
    s1 = _make_slot(game, cfg, seed, role=1, stream=0)
    s2 = _make_slot(game, cfg, seed, role=2, stream=5)
    rng_env = derive_rng(seed, 1)
    rng_b1 = derive_rng(seed, 3)
    rng_b2 = derive_rng(seed, 6)
    mask_fn = _mask_batch_fn(game)
    report = TrainReport(algo="dqn-selfplay", seed=seed, config_hash=run_hash)
    eval_marks = set(_eval_steps(cfg))

    state, degen = _fresh_reset(game, rng_env)
    report.episodes += degen
    for step in range(1, cfg.total_steps + 1):
        eps = epsilon_at(step, cfg)
        a1, i1 = _slot_act(s1, game, state, eps)
        a2, i2 = _slot_act(s2, game, state, eps)
        nxt, rec = game.step(state, a1, a2)
        s1.buffer.push(state.s, i1, float(rec.r1), nxt.s, nxt.d1, nxt.terminal)
        s2.buffer.push(state.s, i2, float(-rec.r1), nxt.s, nxt.d2, nxt.terminal)
        _slot_learn(s1, game, cfg, step, rng_b1, mask_fn)
        _slot_learn(s2, game, cfg, step, rng_b2, mask_fn)
        if nxt.terminal:
            report.episodes += 1
            state, degen = _fresh_reset(game, rng_env)
            report.episodes += degen
        else:
            state = nxt
        if step in eval_marks:
            stats = evaluate_matchup(GreedyQPolicy(s1.net.copy()), GreedyQPolicy(s2.net.copy()),
                                     game, cfg.eval_episodes, derive_seed(seed, 4, step))
            report.eval_points.append(EvalPoint(
                step=step, episodes=stats.episodes, wins=stats.wins_p1,
                losses=stats.wins_p2, draws=stats.draws))

    report.total_env_steps = cfg.total_steps
    report.updates = s1.updates + s2.updates
    report.loss_curve = s1.losses
    report.extra["loss_curve_p2"] = [[int(s), float(v)] for s, v in s2.losses]
    report.wall_clock_seconds = time.perf_counter() - t0
    return s1.net, s2.net, report
