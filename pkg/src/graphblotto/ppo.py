"""Policy-gradient training with a clipped surrogate objective.

Separate policy and value nets.  The policy head emits one logit per flat
action index and acting samples from the softmax restricted to valid actions,
so invalid moves carry exactly zero probability.  Rollouts are always fresh:
each batch is collected with the current parameters, used for a few epochs,
then discarded.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .actions import action_from_index
from .env import Game
from .errors import ConfigError, NumericalFaultError
from .nn import (
    AdamState,
    Mlp,
    adam_step,
    backward,
    forward,
    forward_cached,
    init_mlp,
    masked_entropy,
    masked_softmax,
    normalize_state,
    sgd_step,
)
from .oracle import evaluate_matchup
from .policies import SoftmaxPolicy
from .reports import EvalPoint, TrainReport
from .seeding import derive_rng, derive_seed


@dataclass(frozen=True)
class PPOConfig:
    total_steps: int = 100_000
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    rollout_steps: int = 2048        # minimum steps per batch; episodes finish
    minibatch_size: int = 64
    lr_policy: float = 1e-3
    lr_value: float = 1e-3
    entropy_coef: float = 0.01
    hidden: tuple = (64, 64)
    optimizer: str = "adam"
    normalize_advantages: bool = False
    eval_every: int | None = None    # None: five evenly spaced checkpoints
    eval_episodes: int = 200

    def describe(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "total_steps", "gamma", "gae_lambda", "clip", "epochs", "rollout_steps",
            "minibatch_size", "lr_policy", "lr_value", "entropy_coef", "optimizer",
            "normalize_advantages", "eval_every", "eval_episodes")}
        out["hidden"] = list(self.hidden)
        return out


def gae_advantages(rewards: np.ndarray, values: np.ndarray, terminals: np.ndarray,
                   gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets.

    values has one extra trailing entry: the bootstrap for the state after the
    last stored step (ignored when that step is terminal).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    terminals = np.asarray(terminals, dtype=bool)
    t_len = rewards.shape[0]
    if values.shape[0] != t_len + 1:
        raise ConfigError(f"need {t_len + 1} values for {t_len} rewards")
    if terminals.shape[0] != t_len:
        raise ConfigError("terminal flags must align with rewards")
    adv = np.zeros(t_len, dtype=np.float64)
    carry = 0.0
    for t in range(t_len - 1, -1, -1):
        live = 0.0 if terminals[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        carry = delta + gamma * lam * live * carry
        adv[t] = carry
    return adv, adv + values[:-1]


def ppo_update(policy: Mlp, value: Mlp, batch: dict, cfg: PPOConfig,
               opt_policy: AdamState, opt_value: AdamState) -> dict:
    """One minibatch step on the clipped surrogate plus entropy bonus, and a
    squared-error step on the value head.  Returns diagnostics."""
    x = batch["x"]
    acts = batch["a"]
    logp_old = batch["logp_old"]
    adv = batch["adv"]
    rets = batch["ret"]
    masks = batch["mask"]
    b = acts.shape[0]

    if cfg.normalize_advantages and b > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    logits, cache = forward_cached(policy, x)
    probs = masked_softmax(logits, masks)
    p_taken = probs[np.arange(b), acts]
    if (p_taken <= 0.0).any():
        raise NumericalFaultError("an executed action has zero probability under the new policy")
    logp = np.log(p_taken)
    ratio = np.exp(logp - logp_old)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv
    surrogate = float(np.minimum(unclipped, clipped).mean())
    entropy_rows = masked_entropy(probs)
    entropy = float(entropy_rows.mean())

    # gradient of -(surrogate + entropy_coef * entropy) w.r.t. logits
    use_unclipped = (unclipped <= clipped).astype(np.float64)
    coef = use_unclipped * ratio * adv  # per-sample weight on dlog pi(a)/dz
    onehot = np.zeros_like(probs)
    onehot[np.arange(b), acts] = 1.0
    d_surr = coef[:, None] * (onehot - probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp_mat = np.where(probs > 0.0, np.log(probs), 0.0)
    d_ent = -probs * (logp_mat + entropy_rows[:, None])
    dlogits = -(d_surr + cfg.entropy_coef * d_ent) / b
    grads = backward(policy, cache, dlogits)
    if cfg.optimizer == "adam":
        adam_step(policy, grads, opt_policy, cfg.lr_policy)
    else:
        sgd_step(policy, grads, cfg.lr_policy)

    v_out, v_cache = forward_cached(value, x)
    v = v_out[:, 0]
    v_diff = v - rets
    value_loss = float(np.mean(v_diff ** 2))
    dv = np.zeros_like(v_out)
    dv[:, 0] = 2.0 * v_diff / b
    v_grads = backward(value, v_cache, dv)
    if cfg.optimizer == "adam":
        adam_step(value, v_grads, opt_value, cfg.lr_value)
    else:
        sgd_step(value, v_grads, cfg.lr_value)

    return {
        "surrogate": surrogate,
        "entropy": entropy,
        "value_loss": value_loss,
        "clip_fraction": float((use_unclipped == 0.0).mean()),
        "approx_kl": float(np.mean(logp_old - logp)),
    }


class _Rollout:
    def __init__(self):
        self.s, self.a, self.logp, self.r, self.term, self.mask = [], [], [], [], [], []

    def push(self, s, a, logp, r, term, mask):
        self.s.append(np.asarray(s, dtype=np.float64))
        self.a.append(a)
        self.logp.append(logp)
        self.r.append(r)
        self.term.append(term)
        self.mask.append(mask)

    def __len__(self):
        return len(self.a)


def _collect_rollout(game: Game, policy: Mlp, opponent, role: int, cfg: PPOConfig,
                     state, rng_env, rng_act, rng_opp, report: TrainReport):
    """Gather at least rollout_steps transitions, always ending on an episode
    boundary so every stored trajectory is complete."""
    roll = _Rollout()
    opp_role = 2 if role == 1 else 1
    while len(roll) < cfg.rollout_steps or not (roll.term and roll.term[-1]):
        own = state.d1 if role == 1 else state.d2
        mask = game.flat_mask_for(own)
        x = normalize_state(state.s, policy.m_scale)[None, :]
        probs = masked_softmax(forward(policy, x), mask[None, :])[0]
        idx = int(rng_act.choice(probs.shape[0], p=probs))
        action = action_from_index(idx, game.graph.n, game.m_total)
        opp_action = opponent.act(game.observation(state, opp_role), rng_opp)
        a1, a2 = (action, opp_action) if role == 1 else (opp_action, action)
        nxt, rec = game.step(state, a1, a2)
        r_me = float(rec.r1 if role == 1 else -rec.r1)
        roll.push(state.s, idx, float(np.log(probs[idx])), r_me, nxt.terminal, mask)
        if nxt.terminal:
            report.episodes += 1
            state, degen = _ppo_fresh_reset(game, rng_env)
            report.episodes += degen
        else:
            state = nxt
    return roll, state


def _ppo_fresh_reset(game: Game, rng):
    degenerate = 0
    state = game.reset(rng)
    while state.terminal:
        degenerate += 1
        if degenerate > 10_000:
            raise ConfigError("initialization scheme never produces a playable start")
        state = game.reset(rng)
    return state, degenerate


def _eval_steps(total: int, every: int | None) -> list[int]:
    if every is not None:
        pts = list(range(every, total + 1, every))
    else:
        k = max(total // 5, 1)
        pts = list(range(k, total + 1, k))
    if not pts or pts[-1] != total:
        pts.append(total)
    return pts


def train_ppo(game: Game, cfg: PPOConfig, opponent, seed: int, role: int = 1,
              run_hash: str = "") -> tuple[Mlp, Mlp, TrainReport]:
    """Train one seat against a frozen opponent; returns (policy, value, report)."""
    if role not in (1, 2):
        raise ConfigError(f"role must be 1 or 2, got {role}")
    t0 = time.perf_counter()
    n = game.graph.n
    policy = init_mlp([n, *cfg.hidden, game.n_actions], derive_rng(seed, 0, 0),
                      m_scale=game.m_total)
    value = init_mlp([n, *cfg.hidden, 1], derive_rng(seed, 0, 1), m_scale=game.m_total)
    opt_p = AdamState.for_net(policy)
    opt_v = AdamState.for_net(value)
    rng_env = derive_rng(seed, 1)
    rng_act = derive_rng(seed, 2)
    rng_opp = derive_rng(seed, 3)
    rng_shuffle = derive_rng(seed, 4)
    report = TrainReport(algo="ppo", seed=seed, config_hash=run_hash)
    eval_marks = _eval_steps(cfg.total_steps, cfg.eval_every)
    next_mark = 0

    state, degen = _ppo_fresh_reset(game, rng_env)
    report.episodes += degen
    steps_done = 0
    while steps_done < cfg.total_steps:
        roll, state = _collect_rollout(game, policy, opponent, role, cfg, state,
                                       rng_env, rng_act, rng_opp, report)
        xs = normalize_state(np.stack(roll.s), policy.m_scale)
        values = forward(value, xs)[:, 0]
        values_ext = np.concatenate([values, [0.0]])  # rollout ends terminal
        adv, rets = gae_advantages(np.array(roll.r), values_ext,
                                   np.array(roll.term, dtype=bool),
                                   cfg.gamma, cfg.gae_lambda)
        batch = {
            "x": xs,
            "a": np.array(roll.a, dtype=np.int64),
            "logp_old": np.array(roll.logp),
            "adv": adv,
            "ret": rets,
            "mask": np.stack(roll.mask),
        }
        t_len = len(roll)
        last_diag = {}
        for _ in range(cfg.epochs):
            order = rng_shuffle.permutation(t_len)
            for lo in range(0, t_len, cfg.minibatch_size):
                sel = order[lo:lo + cfg.minibatch_size]
                mb = {k: v[sel] for k, v in batch.items()}
                last_diag = ppo_update(policy, value, mb, cfg, opt_p, opt_v)
        steps_done += t_len
        report.updates += cfg.epochs * ((t_len + cfg.minibatch_size - 1) // cfg.minibatch_size)
        report.loss_curve.append((steps_done, last_diag.get("value_loss", 0.0)))
        while next_mark < len(eval_marks) and steps_done >= eval_marks[next_mark]:
            mark = eval_marks[next_mark]
            me = SoftmaxPolicy(policy.copy())
            if role == 1:
                stats = evaluate_matchup(me, opponent, game, cfg.eval_episodes,
                                         derive_seed(seed, 5, mark))
                wins, losses = stats.wins_p1, stats.wins_p2
            else:
                stats = evaluate_matchup(opponent, me, game, cfg.eval_episodes,
                                         derive_seed(seed, 5, mark))
                wins, losses = stats.wins_p2, stats.wins_p1
            report.eval_points.append(EvalPoint(
                step=steps_done, episodes=stats.episodes, wins=wins,
                losses=losses, draws=stats.draws))
            next_mark += 1

    report.total_env_steps = steps_done
    report.wall_clock_seconds = time.perf_counter() - t0
    return policy, value, report


def self_play_train_ppo(game: Game, cfg: PPOConfig, seed: int,
                        run_hash: str = "") -> tuple[Mlp, Mlp, TrainReport]:
    """Both seats learn simultaneously on the same episodes, opposite rewards."""
    if game.cfg.m1 != game.cfg.m2:
        raise ConfigError("self-play expects equal resource pools")
    t0 = time.perf_counter()
    n = game.graph.n
    nets = []
    for stream in (0, 6):
        pol = init_mlp([n, *cfg.hidden, game.n_actions], derive_rng(seed, stream, 0),
                       m_scale=game.m_total)
        val = init_mlp([n, *cfg.hidden, 1], derive_rng(seed, stream, 1),
                       m_scale=game.m_total)
        nets.append((pol, val, AdamState.for_net(pol), AdamState.for_net(val)))
    rng_env = derive_rng(seed, 1)
    rng_a1 = derive_rng(seed, 2)
    rng_a2 = derive_rng(seed, 7)
    rng_shuffle = derive_rng(seed, 4)
    report = TrainReport(algo="ppo-selfplay", seed=seed, config_hash=run_hash)
    eval_marks = _eval_steps(cfg.total_steps, cfg.eval_every)
    next_mark = 0

    state, degen = _ppo_fresh_reset(game, rng_env)
    report.episodes += degen
    steps_done = 0
    while steps_done < cfg.total_steps:
        rolls = (_Rollout(), _Rollout())
        while len(rolls[0]) < cfg.rollout_steps or not (rolls[0].term and rolls[0].term[-1]):
            picks = []
            for (pol, _, _, _), rng_act, player in ((nets[0], rng_a1, 1), (nets[1], rng_a2, 2)):
                own = state.d1 if player == 1 else state.d2
                mask = game.flat_mask_for(own)
                x = normalize_state(state.s, pol.m_scale)[None, :]
                probs = masked_softmax(forward(pol, x), mask[None, :])[0]
                idx = int(rng_act.choice(probs.shape[0], p=probs))
                picks.append((idx, float(np.log(probs[idx])), mask))
            a1 = action_from_index(picks[0][0], n, game.m_total)
            a2 = action_from_index(picks[1][0], n, game.m_total)
            nxt, rec = game.step(state, a1, a2)
            for k, sign in ((0, 1.0), (1, -1.0)):
                rolls[k].push(state.s, picks[k][0], picks[k][1], sign * rec.r1,
                              nxt.terminal, picks[k][2])
            if nxt.terminal:
                report.episodes += 1
                state, degen = _ppo_fresh_reset(game, rng_env)
                report.episodes += degen
            else:
                state = nxt
        t_len = len(rolls[0])
        for k in (0, 1):
            pol, val, opt_p, opt_v = nets[k]
            roll = rolls[k]
            xs = normalize_state(np.stack(roll.s), pol.m_scale)
            values = forward(val, xs)[:, 0]
            adv, rets = gae_advantages(np.array(roll.r), np.concatenate([values, [0.0]]),
                                       np.array(roll.term, dtype=bool),
                                       cfg.gamma, cfg.gae_lambda)
            batch = {"x": xs, "a": np.array(roll.a, dtype=np.int64),
                     "logp_old": np.array(roll.logp), "adv": adv, "ret": rets,
                     "mask": np.stack(roll.mask)}
            for _ in range(cfg.epochs):
                order = rng_shuffle.permutation(t_len)
                for lo in range(0, t_len, cfg.minibatch_size):
                    sel = order[lo:lo + cfg.minibatch_size]
                    ppo_update(pol, val, {kk: vv[sel] for kk, vv in batch.items()},
                               cfg, opt_p, opt_v)
            report.updates += cfg.epochs * ((t_len + cfg.minibatch_size - 1) // cfg.minibatch_size)
        steps_done += t_len
        while next_mark < len(eval_marks) and steps_done >= eval_marks[next_mark]:
            mark = eval_marks[next_mark]
            stats = evaluate_matchup(SoftmaxPolicy(nets[0][0].copy()),
                                     SoftmaxPolicy(nets[1][0].copy()),
                                     game, cfg.eval_episodes, derive_seed(seed, 5, mark))
            report.eval_points.append(EvalPoint(
                step=steps_done, episodes=stats.episodes, wins=stats.wins_p1,
                losses=stats.wins_p2, draws=stats.draws))
            next_mark += 1

    report.total_env_steps = steps_done
    report.wall_clock_seconds = time.perf_counter() - t0
    return nets[0][0], nets[1][0], report
