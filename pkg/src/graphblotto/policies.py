"""Acting strategies: the random baseline, greedy value maximization, and
stochastic play from a trained distribution head."""
from __future__ import annotations

import numpy as np

from .actions import (
    ActionMatrix,
    action_from_index,
    flat_valid_mask,
    valid_displacements,
)
from .env import Observation
from .errors import InvalidActionError
from .nn import Mlp, forward, masked_softmax, normalize_state


def sample_valid_action(j_mat: ActionMatrix, rng: np.random.Generator) -> np.ndarray:
    """Uniform product draw: each resource picks uniformly among its own moves.

    Because validity factorizes per resource, this is exactly the uniform
    distribution over the full set of valid action vectors.
    """
    out = np.empty(j_mat.m_total, dtype=np.int64)
    for j in range(j_mat.m_total):
        opts = valid_displacements(j_mat, j)
        out[j] = opts[rng.integers(0, opts.shape[0])]
    return out


def masked_argmax(values: np.ndarray, mask: np.ndarray) -> int:
    """Index of the largest entry among mask==True; ties go to the lowest index."""
    if not mask.any():
        raise InvalidActionError("mask admits no action")
    idx = np.flatnonzero(mask)
    return int(idx[np.argmax(values[idx])])


class RandomPolicy:
    """Product-uniform over valid actions. Stateless."""

    kind = "random"

    def act(self, obs: Observation, rng: np.random.Generator) -> np.ndarray:
        return sample_valid_action(obs.j_mat, rng)


class GreedyQPolicy:
    """Deterministic argmax of a frozen action-value net over valid actions."""

    kind = "greedy"

    def __init__(self, net: Mlp, cap: int = 10 ** 6):
        self.net = net
        self.cap = cap

    def act(self, obs: Observation, rng: np.random.Generator | None = None) -> np.ndarray:
        x = normalize_state(obs.s, self.net.m_scale)[None, :]
        q = forward(self.net, x)[0]
        idx = masked_argmax(q, flat_valid_mask(obs.j_mat, self.cap))
        return action_from_index(idx, obs.j_mat.n, obs.j_mat.m_total)


class MirroredPolicy:
    """Lets a net trained in seat 1 play seat 2 (or vice versa).

    The wrapped policy reads s as "mine minus theirs"; from the other seat the
    shared s has the opposite sign, so it is negated before delegating.  The
    valid-move table in the observation already belongs to the caller's seat.
    """

    kind = "mirrored"

    def __init__(self, inner):
        self.inner = inner

    def act(self, obs: Observation, rng: np.random.Generator | None = None) -> np.ndarray:
        flipped = Observation(s=-obs.s, own=obs.own, j_mat=obs.j_mat, player=obs.player)
        return self.inner.act(flipped, rng)


class SoftmaxPolicy:
    """Samples from a masked softmax over a trained logit head."""

    kind = "softmax"

    def __init__(self, net: Mlp, cap: int = 10 ** 6):
        self.net = net
        self.cap = cap

    def act(self, obs: Observation, rng: np.random.Generator) -> np.ndarray:
        x = normalize_state(obs.s, self.net.m_scale)[None, :]
        logits = forward(self.net, x)
        mask = flat_valid_mask(obs.j_mat, self.cap)
        probs = masked_softmax(logits, mask[None, :])[0]
        idx = int(rng.choice(probs.shape[0], p=probs))
        return action_from_index(idx, obs.j_mat.n, obs.j_mat.m_total)


def _check_checkpoint_fits(meta: dict, game, seat: int) -> bool:
    """Validate a checkpoint against the game it is asked to play.

    Returns True when the net must be mirrored (trained in the other seat).
    Raises on any graph or pool mismatch.
    """
    from .errors import CheckpointError
    if meta.get("graph_hash") != game.graph.content_hash() or meta.get("n") != game.graph.n:
        raise CheckpointError(
            f"checkpoint was trained on graph {meta.get('graph_name') or meta.get('graph_hash')}, "
            f"not this game's graph")
    role = int(meta.get("role", 1))
    pools = (int(meta.get("m1", -1)), int(meta.get("m2", -1)))
    mine = (game.cfg.m1, game.cfg.m2)
    if seat == role:
        if pools != mine:
            raise CheckpointError(
                f"checkpoint pools m1={pools[0]}, m2={pools[1]} do not match game {mine}")
        return False
    if (pools[1], pools[0]) != mine:
        raise CheckpointError(
            f"checkpoint (trained seat {role}) cannot take seat {seat} of a game with pools {mine}")
    return True


def policy_from_spec(spec: str, game, seat: int):
    """Build a seat's policy from a CLI spec: random | greedy:<ckpt> | rl:<ckpt>."""
    from .errors import ConfigError
    from .nn import load_checkpoint
    if spec == "random":
        return RandomPolicy()
    if ":" not in spec:
        raise ConfigError(f"bad policy spec {spec!r}; use random, greedy:<file> or rl:<file>")
    kind, _, path = spec.partition(":")
    if kind not in ("greedy", "rl"):
        raise ConfigError(f"bad policy spec kind {kind!r}; use random, greedy or rl")
    nets, meta = load_checkpoint(path)
    mirrored = _check_checkpoint_fits(meta, game, seat)
    algo = meta.get("algo", "dqn")
    if kind == "greedy" or algo in ("dqn", "dqn-selfplay"):
        key = "q"
        base = GreedyQPolicy
    else:
        key = "policy"
        base = SoftmaxPolicy
    if key not in nets:
        raise ConfigError(f"checkpoint {path} has no {key!r} net for spec {spec!r}")
    net = nets[key]
    if net.sizes[-1] != game.n_actions:
        raise ConfigError(
            f"checkpoint head has {net.sizes[-1]} actions, game needs {game.n_actions}")
    policy = base(net)
    return MirroredPolicy(policy) if mirrored else policy
