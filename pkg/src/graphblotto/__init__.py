"""Multi-step Colonel Blotto on directed graphs.

Deterministic game engine with exact valid-action machinery, simultaneous-move
zero-sum environment, from-scratch DQN and PPO trainers, baseline opponents,
brute-force cross-checks and a CLI experiment runner.
"""

__version__ = "0.1.0"

from .actions import (
    ActionMatrix,
    action_from_index,
    action_index,
    action_matrix,
    apply_action,
    count_valid_actions,
    enumerate_valid_actions,
    is_valid_action,
    pad_virtual,
)
from .env import Game, GameConfig, GameState, InitScheme, Outcome, play_episode, reward
from .errors import (
    BlottoError,
    CapExceededError,
    CheckpointError,
    ConfigError,
    EpisodeOverError,
    GraphFormatError,
    InvalidActionError,
    NumericalFaultError,
)
from .graphs import BUILTIN_GRAPHS, Graph, load_graph, named_graph, resolve_graph, save_graph
from .oracle import MatchupStats, evaluate_matchup
from .policies import GreedyQPolicy, MirroredPolicy, RandomPolicy, SoftmaxPolicy

__all__ = [
    "__version__",
    "ActionMatrix", "action_from_index", "action_index", "action_matrix",
    "apply_action", "count_valid_actions", "enumerate_valid_actions",
    "is_valid_action", "pad_virtual",
    "Game", "GameConfig", "GameState", "InitScheme", "Outcome", "play_episode", "reward",
    "BlottoError", "CapExceededError", "CheckpointError", "ConfigError",
    "EpisodeOverError", "GraphFormatError", "InvalidActionError", "NumericalFaultError",
    "BUILTIN_GRAPHS", "Graph", "load_graph", "named_graph", "resolve_graph", "save_graph",
    "MatchupStats", "evaluate_matchup",
    "GreedyQPolicy", "MirroredPolicy", "RandomPolicy", "SoftmaxPolicy",
]
