"""Run provenance: canonical config hashing and training report records."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(payload: dict) -> str:
    """Short stable digest of a resolved configuration."""
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()[:12]


@dataclass
class EvalPoint:
    """Win/loss/draw counts from the agent's side at one training checkpoint."""

    step: int
    episodes: int
    wins: int
    losses: int
    draws: int

    @property
    def win_rate(self) -> float:
        return self.wins / self.episodes

    def describe(self) -> dict:
        return {"step": self.step, "episodes": self.episodes, "wins": self.wins,
                "losses": self.losses, "draws": self.draws, "win_rate": self.win_rate}


@dataclass
class TrainReport:
    algo: str
    seed: int
    config_hash: str
    total_env_steps: int = 0
    episodes: int = 0
    updates: int = 0
    loss_curve: list = field(default_factory=list)   # (env_step, loss) samples
    eval_points: list = field(default_factory=list)  # EvalPoint
    wall_clock_seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def describe(self) -> dict:
        return {
            "algo": self.algo,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "total_env_steps": self.total_env_steps,
            "episodes": self.episodes,
            "updates": self.updates,
            "loss_curve": [[int(s), float(v)] for s, v in self.loss_curve],
            "eval_points": [p.describe() for p in self.eval_points],
            "wall_clock_seconds": self.wall_clock_seconds,
            "extra": self.extra,
        }


def save_report(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
