"""Experiment configuration: one record drives every CLI command.

Values come from an optional JSON config file with these exact field names,
overridden by command-line flags.  The resolved form (graph adjacency
included) is hashed into artifact filenames.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .dqn import DQNConfig
from .env import Game, GameConfig, InitScheme, default_scheme
from .errors import ConfigError
from .graphs import Graph, resolve_graph
from .ppo import PPOConfig
from .reports import config_hash


@dataclass
class ExperimentConfig:
    graph: str = "ring4"
    m1: int = 4
    m2: int = 4
    init: dict = field(default_factory=lambda: {"kind": "C1"})
    max_steps: int = 50
    algo: str = "dqn"
    opponent: str = "random"
    role: int = 1
    seed: int = 0
    eval_episodes: int = 2000
    trace_episodes: int = 3
    iterations: int = 2
    trainer: dict = field(default_factory=dict)
    out_dir: str = "runs"
    p1: str = "random"   # eval/trace seat specs
    p2: str = "random"

    # ------------------------------------------------------------------
    def resolve_graph(self) -> Graph:
        return resolve_graph(self.graph)

    def scheme(self, graph: Graph) -> InitScheme:
        init = dict(self.init)
        kind = init.pop("kind", "C1")
        if kind == "explicit":
            try:
                return InitScheme(kind="explicit", d1=tuple(init["d1"]), d2=tuple(init["d2"]))
            except KeyError as missing:
                raise ConfigError(f"explicit init needs {missing.args[0]}") from None
        for key in ("p1_nodes", "p2_nodes"):
            if key in init:
                init[key] = tuple(init[key])
        return default_scheme(graph, kind, **init)

    def build_game(self) -> Game:
        graph = self.resolve_graph()
        return Game(GameConfig(graph=graph, m1=self.m1, m2=self.m2,
                               scheme=self.scheme(graph), max_steps=self.max_steps))

    def trainer_config(self):
        cls = {"dqn": DQNConfig, "ppo": PPOConfig}.get(self.algo)
        if cls is None:
            raise ConfigError(f"unknown algorithm {self.algo!r}; choose dqn or ppo")
        known = {f.name for f in fields(cls)}
        bad = set(self.trainer) - known
        if bad:
            raise ConfigError(f"unknown trainer settings for {self.algo}: {sorted(bad)}")
        kwargs = dict(self.trainer)
        if "hidden" in kwargs:
            kwargs["hidden"] = tuple(kwargs["hidden"])
        return cls(**kwargs)

    def run_payload(self, command: str) -> dict:
        """Everything that shapes a run's outputs, except the seed."""
        game = self.build_game()
        payload = {
            "command": command,
            "game": game.cfg.describe(),
            "algo": self.algo,
            "opponent": self.opponent,
            "role": self.role,
            "eval_episodes": self.eval_episodes,
            "trainer": self.trainer_config().describe() if command in
                       ("train", "selfplay", "greedy-iterate") else {},
        }
        if command == "greedy-iterate":
            payload["iterations"] = self.iterations
        if command in ("eval", "trace"):
            payload["p1"] = self.p1
            payload["p2"] = self.p2
        if command == "trace":
            payload["trace_episodes"] = self.trace_episodes
        return payload

    def run_hash(self, command: str) -> str:
        return config_hash(self.run_payload(command))


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def load_experiment(config_path: str | None, overrides: dict) -> ExperimentConfig:
    """File values first, then non-None overrides on top."""
    data: dict = {}
    if config_path:
        try:
            with open(config_path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(data) - set(_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    merged = dict(data)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config field {key!r}")
        merged[key] = value
    cfg = ExperimentConfig(**merged)
    if cfg.role not in (1, 2):
        raise ConfigError("role must be 1 or 2")
    if cfg.m1 < 1 or cfg.m2 < 1:
        raise ConfigError("resource pools must be positive")
    return cfg
