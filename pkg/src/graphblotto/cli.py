"""Experiment runner.

Subcommands: validate | train | eval | greedy-iterate | selfplay | trace.
Every run is driven by an ExperimentConfig assembled from an optional JSON
config file plus flag overrides.  Artifacts land under the output directory in
checkpoints/, reports/ and traces/, named <command>-<confighash>-<seed>, and
report paths render companion PNG figures next to the structured files.

Exit codes: 0 success, 1 failed validation or internal error, 2 usage error,
3 configuration or checkpoint error, 4 numerical fault.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .actions import (
    action_from_index,
    action_index,
    action_matrix,
    apply_action,
    augment,
    enumerate_valid_actions,
    lift,
    pad_virtual,
)
from .config import ExperimentConfig, load_experiment
from .dqn import greedy_iteration, self_play_train, train_dqn
from .env import Game, play_episode, sample_initialization
from .errors import BlottoError, ConfigError, NumericalFaultError
from .graphs import resolve_graph
from .nn import save_checkpoint
from .oracle import (
    brute_force_transition,
    brute_force_valid_actions,
    evaluate_matchup,
)
from .plots import render_matchup, render_trace, render_train_report
from .policies import GreedyQPolicy, MirroredPolicy, RandomPolicy, policy_from_spec
from .ppo import self_play_train_ppo, train_ppo
from .reports import save_report
from .seeding import derive_rng, derive_seed
from .traces import read_trace, replay_trace, write_trace


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphblotto",
        description="Multi-step Colonel Blotto on directed graphs: play, train, evaluate.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, with_game=True):
        sp.add_argument("--config", help="JSON config file; flags override its values")
        sp.add_argument("--seed", type=int, help="master seed (default 0)")
        sp.add_argument("--out", dest="out_dir", help="output directory (default runs)")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        if with_game:
            sp.add_argument("--graph", help="built-in name or graph spec file")
            sp.add_argument("--m", type=int, help="resource pool for both players")
            sp.add_argument("--m1", type=int, help="player 1 pool (overrides --m)")
            sp.add_argument("--m2", type=int, help="player 2 pool (overrides --m)")
            sp.add_argument("--init", dest="init_kind",
                            choices=["C1", "C2", "C3", "C4", "explicit"],
                            help="initialization scheme kind")
            sp.add_argument("--p1-nodes", help="comma-separated node list for player 1")
            sp.add_argument("--p2-nodes", help="comma-separated node list for player 2")
            sp.add_argument("--tie-overlap", action=argparse.BooleanOptionalAction,
                            default=None, help="C3 only: tie the shared node's counts")
            sp.add_argument("--max-steps", type=int, help="draw horizon (default 50)")

    sp = sub.add_parser("validate", help="cross-check move machinery against brute force")
    add_common(sp)
    sp.add_argument("--samples", type=int, default=200,
                    help="random distributions to test (default 200)")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("train", help="train one agent against a frozen opponent")
    add_common(sp)
    sp.add_argument("--algo", choices=["dqn", "ppo"], help="learning algorithm")
    sp.add_argument("--opponent", help="random | greedy:<ckpt> | rl:<ckpt> | selfplay")
    sp.add_argument("--role", type=int, choices=[1, 2], help="seat the agent plays")
    sp.add_argument("--steps", type=int, help="environment step budget")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="pit two policies and report the outcome counts")
    add_common(sp)
    sp.add_argument("--p1", help="seat 1 policy: random | greedy:<ckpt> | rl:<ckpt>")
    sp.add_argument("--p2", help="seat 2 policy")
    sp.add_argument("--episodes", dest="eval_episodes", type=int, help="episode count")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("greedy-iterate", help="alternate training against frozen greedy policies")
    add_common(sp)
    sp.add_argument("--iters", dest="iterations", type=int,
                    help="number of trainings (1 = just the vs-random net)")
    sp.add_argument("--steps", type=int, help="environment step budget per iteration")
    sp.set_defaults(func=cmd_greedy_iterate)

    sp = sub.add_parser("selfplay", help="train both seats against each other")
    add_common(sp)
    sp.add_argument("--algo", choices=["dqn", "ppo"], help="learning algorithm")
    sp.add_argument("--steps", type=int, help="environment step budget")
    sp.set_defaults(func=cmd_selfplay)

    sp = sub.add_parser("trace", help="record playable episodes to a trace file")
    add_common(sp)
    sp.add_argument("--p1", help="seat 1 policy spec")
    sp.add_argument("--p2", help="seat 2 policy spec")
    sp.add_argument("--episodes", dest="trace_episodes", type=int, help="episodes to record")
    sp.set_defaults(func=cmd_trace)

    return parser


def _parse_nodes(text: str | None):
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError(f"bad node list {text!r}; expected comma-separated integers") from None


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    for key in ("graph", "m1", "m2", "max_steps", "algo", "opponent", "role", "seed",
                "eval_episodes", "trace_episodes", "iterations", "out_dir", "p1", "p2"):
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    m = getattr(args, "m", None)
    if m is not None:
        overrides.setdefault("m1", m)
        overrides.setdefault("m2", m)
    init_updates = {}
    if getattr(args, "init_kind", None) is not None:
        init_updates["kind"] = args.init_kind
    p1n = _parse_nodes(getattr(args, "p1_nodes", None))
    p2n = _parse_nodes(getattr(args, "p2_nodes", None))
    if p1n is not None:
        init_updates["p1_nodes"] = p1n
    if p2n is not None:
        init_updates["p2_nodes"] = p2n
    if getattr(args, "tie_overlap", None) is not None:
        init_updates["tie_overlap"] = args.tie_overlap
    steps = getattr(args, "steps", None)
    cfg = load_experiment(getattr(args, "config", None), overrides)
    if init_updates:
        merged = dict(cfg.init)
        merged.update(init_updates)
        cfg.init = merged
    if steps is not None:
        cfg.trainer = dict(cfg.trainer, total_steps=steps)
    return cfg


def _outdirs(cfg: ExperimentConfig) -> dict[str, Path]:
    base = Path(cfg.out_dir)
    dirs = {name: base / name for name in ("checkpoints", "reports", "traces")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs


def _stem(command: str, cfg: ExperimentConfig) -> str:
    return f"{command}-{cfg.run_hash(command)}-{cfg.seed}"


def _checkpoint_meta(cfg: ExperimentConfig, game: Game, run_hash: str, algo: str,
                     role: int, trained_steps: int) -> dict:
    return {
        "algo": algo,
        "role": role,
        "graph_name": game.graph.name,
        "graph_hash": game.graph.content_hash(),
        "n": game.graph.n,
        "m1": game.cfg.m1,
        "m2": game.cfg.m2,
        "n_actions": game.n_actions,
        "config_hash": run_hash,
        "seed": cfg.seed,
        "trained_steps": trained_steps,
        "tool_version": __version__,
    }


def _provenance(cfg: ExperimentConfig, command: str) -> dict:
    return {
        "command": command,
        "config_hash": cfg.run_hash(command),
        "seed": cfg.seed,
        "tool_version": __version__,
    }


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def cmd_validate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    graph = resolve_graph(cfg.graph)
    m = cfg.m1
    if graph.n ** m > 2 ** 21:
        raise ConfigError(f"validate needs n**m manageable; {graph.n}**{m} is too large")
    rng = derive_rng(cfg.seed, 0)
    samples = args.samples
    failures: list[str] = []
    categories = {name: 0 for name in (
        "table_entries", "set_equality", "count_product", "transitions",
        "index_round_trip", "padding")}

    h = graph.adjacency
    for case in range(samples):
        counts = np.zeros(graph.n, dtype=np.int64)
        for _ in range(m):
            counts[rng.integers(0, graph.n)] += 1
        jm = action_matrix(graph, counts)

        ok = True
        for j, origin in enumerate(jm.origins):
            for k in range(graph.n):
                if jm.rows[j, k] != h[origin, (origin + k) % graph.n]:
                    ok = False
        if not (lift(counts, graph.n) @ augment(graph) == jm.rows).all():
            ok = False
        categories["table_entries"] += ok
        if not ok:
            failures.append(f"case {case}: table entries disagree for {counts.tolist()}")

        enum = enumerate_valid_actions(jm)
        got = {tuple(int(v) for v in row) for row in enum}
        want = brute_force_valid_actions(graph, counts)
        categories["set_equality"] += got == want
        if got != want:
            failures.append(f"case {case}: valid sets differ for {counts.tolist()}")

        product = int(np.prod([int(r.sum()) for r in jm.rows], dtype=object))
        categories["count_product"] += product == len(want)
        if product != len(want):
            failures.append(f"case {case}: count {product} != brute {len(want)}")

        ok = True
        for _ in range(5):
            a = enum[rng.integers(0, enum.shape[0])]
            if not np.array_equal(apply_action(counts, a, graph), brute_force_transition(counts, a, graph)):
                ok = False
            idx = action_index(a, graph.n)
            if not np.array_equal(action_from_index(idx, graph.n, m), a):
                ok = False
        categories["transitions"] += ok
        categories["index_round_trip"] += ok
        if not ok:
            failures.append(f"case {case}: transition or index mismatch for {counts.tolist()}")

        padded = pad_virtual(jm, m + 1)
        pe = enumerate_valid_actions(padded)
        ok = (pe[:, 0] == 0).all() and {tuple(int(v) for v in r[1:]) for r in pe} == want
        categories["padding"] += ok
        if not ok:
            failures.append(f"case {case}: padded enumeration mismatch for {counts.tolist()}")

    print(f"validate: graph={graph.name or cfg.graph} n={graph.n} m={m} samples={samples}")
    for name, passed in categories.items():
        print(f"  {name}: {passed}/{samples} passed")
    if failures:
        for line in failures[:10]:
            print(f"  FAIL {line}", file=sys.stderr)
        print(f"validate: FAILED ({len(failures)} mismatches)", file=sys.stderr)
        return 1
    print("validate: OK")
    return 0


# ---------------------------------------------------------------------------
# train / selfplay
# ---------------------------------------------------------------------------

def _write_train_outputs(cfg: ExperimentConfig, args, command: str, game: Game,
                         report, checkpoints: dict[str, tuple[dict, dict]]) -> None:
    """checkpoints: filename stem suffix -> (nets, meta)."""
    dirs = _outdirs(cfg)
    stem = _stem(command, cfg)
    for suffix, (nets, meta) in checkpoints.items():
        save_checkpoint(dirs["checkpoints"] / f"{stem}{suffix}.json", nets, meta)
    payload = report.describe()
    payload.update(_provenance(cfg, command))
    payload["game"] = game.cfg.describe()
    save_report(dirs["reports"] / f"{stem}.json", payload)
    if not args.no_figures:
        render_train_report(payload, dirs["reports"] / f"{stem}.png")
    final = report.eval_points[-1] if report.eval_points else None
    rate = f" final_win_rate={final.win_rate:.3f}" if final else ""
    print(f"{command}: wrote {stem} ({report.total_env_steps} steps,"
          f" {report.episodes} episodes{rate})")


def cmd_train(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    if cfg.opponent == "selfplay":
        return _run_selfplay(cfg, args, command="train")
    game = cfg.build_game()
    run_hash = cfg.run_hash("train")
    opp_seat = 2 if cfg.role == 1 else 1
    opponent = policy_from_spec(cfg.opponent, game, opp_seat)
    tcfg = cfg.trainer_config()
    if cfg.algo == "dqn":
        net, report = train_dqn(game, tcfg, opponent, cfg.seed, role=cfg.role, run_hash=run_hash)
        nets = {"q": net}
    else:
        pol, val, report = train_ppo(game, tcfg, opponent, cfg.seed, role=cfg.role,
                                     run_hash=run_hash)
        nets = {"policy": pol, "value": val}
    meta = _checkpoint_meta(cfg, game, run_hash, report.algo, cfg.role, report.total_env_steps)
    _write_train_outputs(cfg, args, "train", game, report, {"": (nets, meta)})
    return 0


def _run_selfplay(cfg: ExperimentConfig, args: argparse.Namespace, command: str) -> int:
    game = cfg.build_game()
    run_hash = cfg.run_hash(command)
    tcfg = cfg.trainer_config()
    if cfg.algo == "dqn":
        n1, n2, report = self_play_train(game, tcfg, cfg.seed, run_hash=run_hash)
        net_key = "q"
    else:
        n1, n2, report = self_play_train_ppo(game, tcfg, cfg.seed, run_hash=run_hash)
        net_key = "policy"
    ckpts = {}
    for suffix, net, role in (("-p1", n1, 1), ("-p2", n2, 2)):
        meta = _checkpoint_meta(cfg, game, run_hash, report.algo, role, report.total_env_steps)
        ckpts[suffix] = ({net_key: net}, meta)
    _write_train_outputs(cfg, args, command, game, report, ckpts)
    return 0


def cmd_selfplay(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    return _run_selfplay(cfg, args, command="selfplay")


def cmd_greedy_iterate(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    if cfg.algo != "dqn":
        raise ConfigError("greedy-iterate trains value nets; set algo to dqn")
    game = cfg.build_game()
    run_hash = cfg.run_hash("greedy-iterate")
    tcfg = cfg.trainer_config()
    nets, reports = greedy_iteration(game, cfg.iterations, tcfg, cfg.seed, run_hash=run_hash)

    dirs = _outdirs(cfg)
    stem = _stem("greedy-iterate", cfg)
    iterations = []
    for i, (net, rep) in enumerate(zip(nets, reports)):
        meta = _checkpoint_meta(cfg, game, run_hash, "dqn", 1, rep.total_env_steps)
        meta["iteration"] = i
        save_checkpoint(dirs["checkpoints"] / f"{stem}-q{i}.json", {"q": net}, meta)
        entry = rep.describe()
        stats = evaluate_matchup(GreedyQPolicy(net), RandomPolicy(), game,
                                 cfg.eval_episodes, derive_seed(cfg.seed, 200, i))
        entry["final_vs_random"] = stats.describe()
        if i > 0:
            prev = MirroredPolicy(GreedyQPolicy(nets[i - 1]))
            stats_prev = evaluate_matchup(GreedyQPolicy(net), prev, game,
                                          cfg.eval_episodes, derive_seed(cfg.seed, 201, i))
            entry["final_vs_prev_greedy"] = stats_prev.describe()
        iterations.append(entry)
        if not args.no_figures:
            fig_payload = dict(entry)
            fig_payload.setdefault("config_hash", run_hash)
            render_train_report(fig_payload, dirs["reports"] / f"{stem}-q{i}.png")

    payload = _provenance(cfg, "greedy-iterate")
    payload["game"] = game.cfg.describe()
    payload["iterations"] = iterations
    save_report(dirs["reports"] / f"{stem}.json", payload)
    last = iterations[-1]
    line = f"greedy-iterate: wrote {stem} ({cfg.iterations} iterations"
    if "final_vs_prev_greedy" in last:
        line += f", last vs prev greedy win_rate={last['final_vs_prev_greedy']['win_rate_p1']:.3f}"
    print(line + ")")
    return 0


# ---------------------------------------------------------------------------
# eval / trace
# ---------------------------------------------------------------------------

def cmd_eval(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    game = cfg.build_game()
    p1 = policy_from_spec(cfg.p1, game, 1)
    p2 = policy_from_spec(cfg.p2, game, 2)
    stats = evaluate_matchup(p1, p2, game, cfg.eval_episodes, cfg.seed)
    dirs = _outdirs(cfg)
    stem = _stem("eval", cfg)
    payload = stats.describe()
    payload.update(_provenance(cfg, "eval"))
    payload["game"] = game.cfg.describe()
    payload["p1"] = cfg.p1
    payload["p2"] = cfg.p2
    save_report(dirs["reports"] / f"{stem}.json", payload)
    if not args.no_figures:
        render_matchup(payload, dirs["reports"] / f"{stem}.png",
                       title=f"{cfg.p1} vs {cfg.p2}")
    print(f"eval: {cfg.p1} vs {cfg.p2}: p1 {stats.win_rate_p1:.3f}, "
          f"p2 {stats.win_rate_p2:.3f}, draws {stats.draw_rate:.3f} "
          f"({stats.episodes} episodes) -> {stem}")
    return 0


def cmd_trace(cfg: ExperimentConfig, args: argparse.Namespace) -> int:
    game = cfg.build_game()
    p1 = policy_from_spec(cfg.p1, game, 1)
    p2 = policy_from_spec(cfg.p2, game, 2)
    episodes = []
    for ep in range(cfg.trace_episodes):
        episodes.append(play_episode(
            game, p1, p2,
            rng_init=derive_rng(cfg.seed, ep, 0),
            rng_p1=derive_rng(cfg.seed, ep, 1),
            rng_p2=derive_rng(cfg.seed, ep, 2),
            record=True))
    dirs = _outdirs(cfg)
    stem = _stem("trace", cfg)
    path = dirs["traces"] / f"{stem}.jsonl"
    write_trace(path, game, episodes, cfg.run_hash("trace"), cfg.seed, __version__,
                extra={"p1": cfg.p1, "p2": cfg.p2})
    header, parsed = read_trace(path)
    replay_trace(game, parsed)  # written records must reproduce exactly
    if not args.no_figures:
        render_trace(parsed, game.graph.n, dirs["traces"] / f"{stem}.png")
    outcomes = [e.outcome.name for e in episodes]
    print(f"trace: wrote {stem} ({len(episodes)} episodes: {', '.join(outcomes)})")
    return 0


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = experiment_from_args(args)
        return args.func(cfg, args)
    except NumericalFaultError as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 4
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except BlottoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
