"""Two-player simultaneous-move environment.

Both players command fixed resource pools on a shared directed graph.  Each
step both submit full action vectors at once, every resource moves, and the
node-control reward is evaluated on the signed difference s = d1 - d2.
Player 2's reward is the negation of player 1's.  An episode ends when the
reward is nonzero or a step cap is hit (draw).  A start position that is
already decided terminates immediately at t = 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .actions import (
    ActionMatrix,
    DEFAULT_ACTION_CAP,
    action_matrix,
    apply_action,
    apply_padded_action,
    flat_valid_mask,
    pad_virtual,
)
from .errors import CapExceededError, ConfigError, EpisodeOverError
from .graphs import Graph, named_graph


def reward(s: np.ndarray) -> int:
    """+1 if more nodes are held by player 1 than player 2, -1 if fewer, else 0.

    A node is held by the player with strictly more resources on it.
    """
    s = np.asarray(s)
    return int(np.sign(int((s > 0).sum()) - int((s < 0).sum())))


class Outcome(IntEnum):
    ONGOING = 0
    P1_WIN = 1
    P2_WIN = 2
    DRAW = 3


@dataclass(frozen=True)
class InitScheme:
    """Start-position sampler.

    kind C1: everything on one designated node per player (deterministic).
    kind C2: bounded random split (low..high on the first node, rest on the
             second) over each player's two nodes.
    kind C3: uniform random split over each player's two nodes.  With
             tie_overlap, one shared draw puts identical counts on the single
             node both players list, keeping the start tied; the remainder
             goes to each player's exclusive node.
    kind C4: uniform random composition over each player's full node list.
    kind explicit: fixed distributions given directly.
    """

    kind: str
    p1_nodes: tuple[int, ...] = ()
    p2_nodes: tuple[int, ...] = ()
    low: int = 1
    high: int = 3
    tie_overlap: bool = False
    d1: tuple[int, ...] = ()
    d2: tuple[int, ...] = ()

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "explicit":
            out["d1"] = list(self.d1)
            out["d2"] = list(self.d2)
            return out
        out["p1_nodes"] = list(self.p1_nodes)
        out["p2_nodes"] = list(self.p2_nodes)
        if self.kind == "C2":
            out["low"] = self.low
            out["high"] = self.high
        if self.kind == "C3" and self.tie_overlap:
            out["tie_overlap"] = True
        return out


SCHEME_KINDS = ("C1", "C2", "C3", "C4", "explicit")

# Preferred start nodes for the shipped boards, keyed by graph name then kind.
# Entries are (p1_nodes, p2_nodes[, extra kwargs]).
_PRESETS: dict[str, dict[str, tuple]] = {
    "g0": {"C1": ((0,), (2,)), "C2": ((0, 1), (2, 3)), "C3": ((0, 1), (2, 3))},
    "g1": {"C1": ((0,), (1,)), "C2": ((0, 1), (0, 1)), "C3": ((0, 1), (0, 1)),
           "C4": ((0, 1, 3, 4), (0, 1, 3, 4))},
    "g2": {"C1": ((0,), (3,)), "C2": ((0, 1), (3, 4)), "C3": ((0, 1), (3, 4))},
    "g3": {"C1": ((0,), (2,)), "C2": ((0, 1), (2, 3)), "C3": ((0, 1), (2, 3))},
    "g4": {"C1": ((0,), (2,)), "C2": ((0, 1), (2, 3)), "C3": ((0, 1), (2, 3))},
}


def default_scheme(graph: Graph, kind: str, **overrides) -> InitScheme:
    """Scheme with sensible node choices for the graph; overrides win."""
    if kind not in SCHEME_KINDS:
        raise ConfigError(f"unknown init kind {kind!r}; choose from {SCHEME_KINDS}")
    n = graph.n
    kwargs: dict = {}
    preset = _PRESETS.get(graph.name, {}).get(kind)
    if preset is not None:
        kwargs["p1_nodes"], kwargs["p2_nodes"] = preset[0], preset[1]
        if len(preset) > 2:
            kwargs.update(preset[2])
    elif kind == "C1":
        kwargs["p1_nodes"], kwargs["p2_nodes"] = (0,), (n // 2,)
    elif kind in ("C2", "C3"):
        kwargs["p1_nodes"] = (0, 1)
        kwargs["p2_nodes"] = (n // 2, (n // 2 + 1) % n)
    elif kind == "C4":
        kwargs["p1_nodes"] = kwargs["p2_nodes"] = tuple(range(n))
    kwargs.update(overrides)
    return InitScheme(kind=kind, **kwargs)


def _validate_nodes(nodes: tuple[int, ...], n: int, label: str, expect: int | None = None):
    if expect is not None and len(nodes) != expect:
        raise ConfigError(f"{label} needs exactly {expect} nodes, got {list(nodes)}")
    if len(nodes) == 0:
        raise ConfigError(f"{label} needs at least one node")
    if len(set(nodes)) != len(nodes):
        raise ConfigError(f"{label} has duplicate nodes: {list(nodes)}")
    for v in nodes:
        if not 0 <= v < n:
            raise ConfigError(f"{label} node {v} out of range for {n} nodes")


def _uniform_composition(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform over the C(m+k-1, k-1) ways of splitting m units into k ordered parts."""
    if k == 1:
        return np.array([m], dtype=np.int64)
    bars = np.sort(rng.choice(m + k - 1, size=k - 1, replace=False))
    edges = np.concatenate(([-1], bars, [m + k - 1]))
    return np.diff(edges) - 1


def sample_initialization(cfg: "GameConfig", rng: np.random.Generator,
                          mirrored: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Draw (d1, d2) under cfg.scheme.  Deterministic in rng state.

    Each player's independent randomness comes from its own child stream of
    rng; mirrored=True exchanges the two children.  Running a player-swapped
    config with mirrored=True therefore reproduces the swapped draw exactly,
    which relabeling checks rely on.
    """
    sch = cfg.scheme
    n = cfg.graph.n
    d1 = np.zeros(n, dtype=np.int64)
    d2 = np.zeros(n, dtype=np.int64)

    if sch.kind == "explicit":
        for label, src, m, out in (("d1", sch.d1, cfg.m1, d1), ("d2", sch.d2, cfg.m2, d2)):
            arr = np.asarray(src, dtype=np.int64)
            if arr.shape != (n,):
                raise ConfigError(f"explicit {label} must have {n} entries")
            if (arr < 0).any() or int(arr.sum()) != m:
                raise ConfigError(f"explicit {label} must be nonnegative and sum to {m}")
            out[:] = arr
        return d1, d2

    _validate_nodes(sch.p1_nodes, n, "p1_nodes",
                    expect={"C1": 1, "C2": 2, "C3": 2}.get(sch.kind))
    _validate_nodes(sch.p2_nodes, n, "p2_nodes",
                    expect={"C1": 1, "C2": 2, "C3": 2}.get(sch.kind))

    if sch.kind == "C1":
        d1[sch.p1_nodes[0]] = cfg.m1
        d2[sch.p2_nodes[0]] = cfg.m2
        return d1, d2

    if sch.kind == "C3" and sch.tie_overlap:
        shared = set(sch.p1_nodes) & set(sch.p2_nodes)
        if len(shared) != 1:
            raise ConfigError("tie_overlap needs exactly one shared node between the players")
        if cfg.m1 != cfg.m2:
            raise ConfigError("tie_overlap requires equal resource pools")
        node = shared.pop()
        if cfg.m1 < 2:
            raise ConfigError("tie_overlap needs at least two resources per player")
        # one shared draw keeps the start tied regardless of player labels;
        # both exclusive nodes stay occupied so the start is never degenerate
        w = int(rng.integers(1, cfg.m1))
        excl1 = [v for v in sch.p1_nodes if v != node][0]
        excl2 = [v for v in sch.p2_nodes if v != node][0]
        d1[node] = d2[node] = w
        d1[excl1] = cfg.m1 - w
        d2[excl2] = cfg.m2 - w
        return d1, d2

    c1, c2 = rng.spawn(2)
    if mirrored:
        c1, c2 = c2, c1

    if sch.kind == "C2":
        if not 0 <= sch.low <= sch.high:
            raise ConfigError(f"C2 bounds ({sch.low}, {sch.high}) must satisfy 0 <= low <= high")
        if sch.high > min(cfg.m1, cfg.m2):
            raise ConfigError(f"C2 upper bound {sch.high} exceeds a resource pool")
        u1 = int(c1.integers(sch.low, sch.high + 1))
        u2 = int(c2.integers(sch.low, sch.high + 1))
        d1[sch.p1_nodes[0]] = u1
        d1[sch.p1_nodes[1]] = cfg.m1 - u1
        d2[sch.p2_nodes[0]] = u2
        d2[sch.p2_nodes[1]] = cfg.m2 - u2
        return d1, d2

    if sch.kind == "C3":
        u1 = int(c1.integers(0, cfg.m1 + 1))
        u2 = int(c2.integers(0, cfg.m2 + 1))
        d1[sch.p1_nodes[0]] = u1
        d1[sch.p1_nodes[1]] = cfg.m1 - u1
        d2[sch.p2_nodes[0]] = u2
        d2[sch.p2_nodes[1]] = cfg.m2 - u2
        return d1, d2

    if sch.kind == "C4":
        d1[list(sch.p1_nodes)] = _uniform_composition(cfg.m1, len(sch.p1_nodes), c1)
        d2[list(sch.p2_nodes)] = _uniform_composition(cfg.m2, len(sch.p2_nodes), c2)
        return d1, d2

    raise ConfigError(f"unknown init kind {sch.kind!r}")


def mirror_config(cfg: "GameConfig") -> "GameConfig":
    """Swap the two players' roles in a config (graph unchanged)."""
    sch = cfg.scheme
    swapped = replace(sch, p1_nodes=sch.p2_nodes, p2_nodes=sch.p1_nodes,
                      d1=sch.d2, d2=sch.d1)
    return replace(cfg, m1=cfg.m2, m2=cfg.m1, scheme=swapped)


@dataclass(frozen=True)
class GameConfig:
    graph: Graph
    m1: int
    m2: int
    scheme: InitScheme
    max_steps: int = 50
    action_cap: int = DEFAULT_ACTION_CAP

    def describe(self) -> dict:
        """Stable dict for hashing and artifact headers."""
        return {
            "graph_name": self.graph.name,
            "graph_hash": self.graph.content_hash(),
            "n": self.graph.n,
            "adjacency": self.graph.adjacency.astype(int).tolist(),
            "m1": self.m1,
            "m2": self.m2,
            "scheme": self.scheme.describe(),
            "max_steps": self.max_steps,
        }


@dataclass(frozen=True)
class GameState:
    t: int
    d1: np.ndarray
    d2: np.ndarray
    outcome: Outcome

    @property
    def s(self) -> np.ndarray:
        return self.d1 - self.d2

    @property
    def terminal(self) -> bool:
        return self.outcome != Outcome.ONGOING


@dataclass(frozen=True)
class StepRecord:
    """One transition: the step counter before the move, post-move distributions,
    both action vectors, and player 1's reward."""

    t: int
    d1: np.ndarray
    d2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    r1: int


@dataclass(frozen=True)
class Observation:
    """What a policy sees: the shared signed state, its own distribution, and
    its valid-displacement table (padded when playing the smaller pool)."""

    s: np.ndarray
    own: np.ndarray
    j_mat: ActionMatrix
    player: int


class Game:
    """Rules object: validates a config once, then serves resets and steps."""

    def __init__(self, cfg: GameConfig):
        if cfg.m1 < 1 or cfg.m2 < 1:
            raise ConfigError("both players need at least one resource")
        if cfg.max_steps < 1:
            raise ConfigError("max_steps must be positive")
        if cfg.scheme.kind not in SCHEME_KINDS:
            raise ConfigError(f"unknown init kind {cfg.scheme.kind!r}")
        n = cfg.graph.n
        sch = cfg.scheme
        if sch.kind == "explicit":
            for label, dist, total in (("d1", sch.d1, cfg.m1), ("d2", sch.d2, cfg.m2)):
                if len(dist) != n:
                    raise ConfigError(f"explicit {label} needs {n} entries, got {len(dist)}")
                if any(v < 0 for v in dist):
                    raise ConfigError(f"explicit {label} has negative counts")
                if sum(dist) != total:
                    raise ConfigError(f"explicit {label} sums to {sum(dist)}, expected {total}")
        else:
            for label, nodes in (("p1", sch.p1_nodes), ("p2", sch.p2_nodes)):
                if not nodes:
                    raise ConfigError(f"init scheme lists no {label} nodes")
                if any(not 0 <= v < n for v in nodes):
                    raise ConfigError(f"{label} start nodes {nodes} fall outside 0..{n - 1}")
        self.cfg = cfg
        self.m_total = max(cfg.m1, cfg.m2)
        self.n_actions = cfg.graph.n ** self.m_total
        if self.n_actions > cfg.action_cap:
            raise ConfigError(
                f"action space {cfg.graph.n}**{self.m_total} exceeds cap {cfg.action_cap}")
        # distributions repeat heavily during play; memoize their J tables and masks
        self._jm_cache: dict[bytes, ActionMatrix] = {}
        self._mask_cache: dict[bytes, np.ndarray] = {}

    @property
    def graph(self) -> Graph:
        return self.cfg.graph

    def _outcome(self, r1: int, t: int) -> Outcome:
        if r1 > 0:
            return Outcome.P1_WIN
        if r1 < 0:
            return Outcome.P2_WIN
        if t >= self.cfg.max_steps:
            return Outcome.DRAW
        return Outcome.ONGOING

    def reset(self, rng: np.random.Generator, mirrored: bool = False) -> GameState:
        d1, d2 = sample_initialization(self.cfg, rng, mirrored=mirrored)
        r0 = reward(d1 - d2)
        # a decided start never reaches the draw cap, so pass t=0
        out = self._outcome(r0, 0)
        return GameState(t=0, d1=d1, d2=d2, outcome=out)

    def state_from(self, d1, d2, t: int = 0) -> GameState:
        """Rebuild a state from raw distributions (trace replay, probes)."""
        d1 = np.asarray(d1, dtype=np.int64)
        d2 = np.asarray(d2, dtype=np.int64)
        if d1.shape != (self.graph.n,) or d2.shape != (self.graph.n,):
            raise ConfigError("distribution length does not match the graph")
        if int(d1.sum()) != self.cfg.m1 or int(d2.sum()) != self.cfg.m2:
            raise ConfigError("distribution sums do not match the resource pools")
        return GameState(t=t, d1=d1, d2=d2, outcome=self._outcome(reward(d1 - d2), t))

    def j_mat_for(self, own: np.ndarray) -> ActionMatrix:
        """Padded valid-displacement table for a raw own-distribution vector."""
        key = np.asarray(own, dtype=np.int64).tobytes()
        jm = self._jm_cache.get(key)
        if jm is None:
            jm = action_matrix(self.graph, own)
            if jm.m_real < self.m_total:
                jm = pad_virtual(jm, self.m_total)
            self._jm_cache[key] = jm
        return jm

    def flat_mask_for(self, own: np.ndarray) -> np.ndarray:
        """Boolean validity mask over all flat action indices for a distribution."""
        key = np.asarray(own, dtype=np.int64).tobytes()
        mask = self._mask_cache.get(key)
        if mask is None:
            mask = flat_valid_mask(self.j_mat_for(own), self.cfg.action_cap)
            mask.setflags(write=False)
            self._mask_cache[key] = mask
        return mask

    def j_mat(self, state: GameState, player: int) -> ActionMatrix:
        return self.j_mat_for(state.d1 if player == 1 else state.d2)

    def observation(self, state: GameState, player: int) -> Observation:
        if player not in (1, 2):
            raise ConfigError(f"player must be 1 or 2, got {player}")
        own = state.d1 if player == 1 else state.d2
        # s is shared, not mirrored: both players see d1 - d2
        return Observation(s=state.s, own=own, j_mat=self.j_mat(state, player), player=player)

    def step(self, state: GameState, a1: np.ndarray, a2: np.ndarray) -> tuple[GameState, StepRecord]:
        if state.terminal:
            raise EpisodeOverError(f"episode already ended with {state.outcome.name}")
        new_d = []
        for player, (counts, act) in enumerate(((state.d1, a1), (state.d2, a2)), start=1):
            jm = self.j_mat(state, player)
            if jm.n_virtual > 0:
                new_d.append(apply_padded_action(counts, act, self.graph, jm))
            else:
                new_d.append(apply_action(counts, act, self.graph, jm))
        d1n, d2n = new_d
        r1 = reward(d1n - d2n)
        t1 = state.t + 1
        nxt = GameState(t=t1, d1=d1n, d2=d2n, outcome=self._outcome(r1, t1))
        rec = StepRecord(t=state.t, d1=d1n, d2=d2n,
                         a1=np.asarray(a1).copy(), a2=np.asarray(a2).copy(), r1=r1)
        return nxt, rec


@dataclass
class EpisodeResult:
    outcome: Outcome
    length: int
    init_d1: np.ndarray
    init_d2: np.ndarray
    steps: list = field(default_factory=list)


def play_episode(game: Game, p1, p2, rng_init: np.random.Generator,
                 rng_p1: np.random.Generator, rng_p2: np.random.Generator,
                 record: bool = False, mirrored: bool = False) -> EpisodeResult:
    """Roll one episode to termination with independent player rngs."""
    state = game.reset(rng_init, mirrored=mirrored)
    res = EpisodeResult(outcome=state.outcome, length=0,
                        init_d1=state.d1.copy(), init_d2=state.d2.copy())
    while not state.terminal:
        a1 = p1.act(game.observation(state, 1), rng_p1)
        a2 = p2.act(game.observation(state, 2), rng_p2)
        state, rec = game.step(state, a1, a2)
        res.length = state.t
        if record:
            res.steps.append(rec)
    res.outcome = state.outcome
    return res


def game_from_parts(graph: Graph | str, m1: int, m2: int, init: str | InitScheme = "C1",
                    max_steps: int = 50, action_cap: int | None = None,
                    **scheme_overrides) -> Game:
    """Convenience constructor taking a graph name and an init kind."""
    g = named_graph(graph) if isinstance(graph, str) else graph
    sch = init if isinstance(init, InitScheme) else default_scheme(g, init, **scheme_overrides)
    kw = {} if action_cap is None else {"action_cap": action_cap}
    return Game(GameConfig(graph=g, m1=m1, m2=m2, scheme=sch, max_steps=max_steps, **kw))
