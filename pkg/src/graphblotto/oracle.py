"""Independent cross-checks: exhaustive enumeration by direct adjacency lookup
and head-to-head evaluation with a fixed per-episode seed schedule.

The enumeration and transition routines here deliberately avoid the matrix
machinery in actions.py.  They spell out the rules with plain loops so the two
implementations can only agree by both being right.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .env import Game, Outcome, play_episode
from .errors import CapExceededError
from .graphs import Graph
from .seeding import derive_rng


def _origins(counts) -> list[int]:
    out = []
    for node, c in enumerate(counts):
        out.extend([node] * int(c))
    return out


def brute_force_valid_actions(graph: Graph, counts, cap: int = 10 ** 6) -> set[tuple[int, ...]]:
    """Try all n**m vectors; keep those where every resource follows an edge."""
    h = graph.adjacency
    n = graph.n
    origins = _origins(counts)
    m = len(origins)
    if n ** m > cap:
        raise CapExceededError(f"{n}**{m} candidate actions exceeds cap {cap}")
    keep = set()
    for cand in product(range(n), repeat=m):
        ok = True
        for j, a in enumerate(cand):
            if h[origins[j]][(origins[j] + a) % n] == 0:
                ok = False
                break
        if ok:
            keep.add(cand)
    return keep


def brute_force_transition(counts, action, graph: Graph) -> np.ndarray:
    """Move each resource one at a time and tally the landing nodes."""
    n = graph.n
    origins = _origins(counts)
    new = [0] * n
    for j, a in enumerate(action):
        new[(origins[j] + int(a)) % n] += 1
    return np.array(new, dtype=np.int64)


def brute_force_padded_transition(counts, action, m_total: int, graph: Graph) -> np.ndarray:
    """Same, ignoring the leading virtual coordinates (which must all be 0)."""
    origins = _origins(counts)
    n_virtual = m_total - len(origins)
    if any(int(a) != 0 for a in action[:n_virtual]):
        raise ValueError("virtual resources cannot move")
    return brute_force_transition(counts, action[n_virtual:], graph)


@dataclass
class MatchupStats:
    episodes: int
    wins_p1: int
    wins_p2: int
    draws: int
    mean_length: float
    seed: int

    @property
    def win_rate_p1(self) -> float:
        return self.wins_p1 / self.episodes

    @property
    def win_rate_p2(self) -> float:
        return self.wins_p2 / self.episodes

    @property
    def draw_rate(self) -> float:
        return self.draws / self.episodes

    def describe(self) -> dict:
        return {
            "episodes": self.episodes,
            "wins_p1": self.wins_p1,
            "wins_p2": self.wins_p2,
            "draws": self.draws,
            "win_rate_p1": self.win_rate_p1,
            "win_rate_p2": self.win_rate_p2,
            "draw_rate": self.draw_rate,
            "mean_length": self.mean_length,
            "seed": self.seed,
        }


# substream labels inside one evaluation episode
_INIT, _P1, _P2 = 0, 1, 2


def evaluate_matchup(p1, p2, game: Game, episodes: int, seed: int,
                     mirrored: bool = False) -> MatchupStats:
    """Play `episodes` games with a deterministic per-episode seed schedule.

    Each episode e draws its init and per-player randomness from substreams
    (seed, e, slot).  With mirrored=True the two slots swap their substreams,
    which together with a player-swapped config reproduces each episode with
    the labels exchanged; useful for relabeling checks.
    """
    if episodes < 1:
        raise ValueError("need at least one episode")
    wins1 = wins2 = draws = 0
    total_len = 0
    for ep in range(episodes):
        s_init, s_a, s_b = _INIT, _P1, _P2
        if mirrored:
            s_a, s_b = s_b, s_a
        res = play_episode(
            game, p1, p2,
            rng_init=derive_rng(seed, ep, s_init),
            rng_p1=derive_rng(seed, ep, s_a),
            rng_p2=derive_rng(seed, ep, s_b),
            mirrored=mirrored,
        )
        total_len += res.length
        if res.outcome == Outcome.P1_WIN:
            wins1 += 1
        elif res.outcome == Outcome.P2_WIN:
            wins2 += 1
        else:
            draws += 1
    return MatchupStats(episodes=episodes, wins_p1=wins1, wins_p2=wins2, draws=draws,
                        mean_length=total_len / episodes, seed=seed)
