"""Gameplay traces: line-delimited JSON records that replay exactly.

Line 1 is a header with the config hash, seed, and resolved game description.
Every episode contributes a reset record and one step record per transition
with fields (t, d1, d2, a1, a2, r1): the step counter before the move, both
post-move distributions, both action vectors, and player 1's reward.
"""
from __future__ import annotations

import json

import numpy as np

from .env import EpisodeResult, Game
from .errors import ConfigError


def _il(arr) -> list[int]:
    return [int(v) for v in np.asarray(arr)]


def write_trace(path, game: Game, episodes: list[EpisodeResult], run_hash: str,
                seed: int, tool_version: str, extra: dict | None = None) -> None:
    header = {
        "kind": "header",
        "config_hash": run_hash,
        "seed": seed,
        "tool_version": tool_version,
        "game": game.cfg.describe(),
        "episodes": len(episodes),
    }
    if extra:
        header.update(extra)
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for e, ep in enumerate(episodes):
            fh.write(json.dumps({
                "kind": "reset", "episode": e,
                "d1": _il(ep.init_d1), "d2": _il(ep.init_d2),
                "outcome": ep.outcome.name,
            }, sort_keys=True) + "\n")
            for rec in ep.steps:
                fh.write(json.dumps({
                    "kind": "step", "episode": e, "t": rec.t,
                    "d1": _il(rec.d1), "d2": _il(rec.d2),
                    "a1": _il(rec.a1), "a2": _il(rec.a2),
                    "r1": int(rec.r1),
                }, sort_keys=True) + "\n")


def read_trace(path) -> tuple[dict, list[dict]]:
    """Returns (header, episodes); each episode dict has reset info and steps."""
    with open(path) as fh:
        lines = [json.loads(ln) for ln in fh if ln.strip()]
    if not lines or lines[0].get("kind") != "header":
        raise ConfigError(f"{path} does not start with a trace header")
    header = lines[0]
    episodes: list[dict] = []
    for rec in lines[1:]:
        if rec["kind"] == "reset":
            episodes.append({"episode": rec["episode"], "d1": rec["d1"], "d2": rec["d2"],
                             "outcome": rec.get("outcome"), "steps": []})
        elif rec["kind"] == "step":
            if not episodes or episodes[-1]["episode"] != rec["episode"]:
                raise ConfigError("step record without a matching reset")
            episodes[-1]["steps"].append(rec)
        else:
            raise ConfigError(f"unknown trace record kind {rec['kind']!r}")
    return header, episodes


def replay_trace(game: Game, episodes: list[dict]) -> None:
    """Feed recorded actions through the rules; raise if anything diverges."""
    for ep in episodes:
        state = game.state_from(ep["d1"], ep["d2"])
        for rec in ep["steps"]:
            if state.terminal:
                raise ConfigError(f"episode {ep['episode']} has steps past termination")
            state, out = game.step(state, np.array(rec["a1"]), np.array(rec["a2"]))
            if (_il(out.d1) != rec["d1"] or _il(out.d2) != rec["d2"]
                    or int(out.r1) != rec["r1"] or out.t != rec["t"]):
                raise ConfigError(
                    f"episode {ep['episode']} step {rec['t']} does not reproduce: "
                    f"got d1={_il(out.d1)} d2={_il(out.d2)} r1={out.r1}")
