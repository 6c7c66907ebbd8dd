"""Command-line entry point driving every pipeline stage:

    build-data  label games with an oracle and write a dataset
    train       fit a diffusion policy or a baseline on a dataset
    eval        action accuracy (and optional future validity) on a test set
    puzzles     exact-solution puzzle accuracy from a lichess-style CSV
    tournament  round-robin games + maximum-likelihood Elo
    latency     ms/move across search depths and MCTS simulation counts
    play        agent-vs-agent games printed as PGN
    serve       the HTTP/JSON live play server
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import chessboard as chess
from . import codec, data, evaluation, pgn, training
from .agents import (
    Agent,
    DiffuSearchAgent,
    OracleAgent,
    PolicyAgent,
    RandomAgent,
    StateValueModel,
    load_agent,
)
from .codec import Vocabulary
from .diffusion import DiffusionSchedule
from .model import Denoiser, load_checkpoint
from .oracle import make_oracle
from .sampler import SampleConfig, Sampler

ENV_PREFIX = "DIFFUSEARCH_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def build_agent(spec: str, vocab: Vocabulary, steps: int | None = None, sims: int | None = None) -> Agent:
    """Agent specs: 'random', 'toy[:depth]', a checkpoint path (kind inferred),
    or 'mcts:<policy.ckpt>:<value.ckpt>[:sims]'."""
    if spec == "random":
        return RandomAgent()
    if spec == "toy" or spec.startswith("toy:"):
        return OracleAgent(make_oracle(spec))
    if spec.startswith("mcts:"):
        from .mcts import MCTSAgent, SearchConfig

        parts = spec.split(":")
        if len(parts) < 3:
            raise ValueError("mcts spec is mcts:<policy.ckpt>:<value.ckpt>[:sims]")
        policy_payload = load_checkpoint(parts[1], vocab.hash)
        value_payload = load_checkpoint(parts[2], vocab.hash)
        n_sims = int(parts[3]) if len(parts) > 3 else (sims or 100)
        return MCTSAgent(
            PolicyAgent(policy_payload["model"], vocab),
            StateValueModel(value_payload["model"], vocab),
            SearchConfig(simulations=n_sims),
        )
    payload = load_checkpoint(spec, vocab.hash)
    kind = payload["kind"]
    if kind == "diffusion":
        sampler = Sampler(
            payload["model"], payload["schedule"], vocab, payload["paradigm"], payload["h"]
        )
        return DiffuSearchAgent(sampler, SampleConfig(steps=steps))
    if payload["paradigm"] == "s-v":
        from .agents import SVAgent

        return SVAgent(payload["model"], vocab)
    if payload["paradigm"] == "sa-v":
        from .agents import SAVAgent

        return SAVAgent(payload["model"], vocab)
    return PolicyAgent(payload["model"], vocab)


def _load_games(args) -> list:
    if args.games_pgn:
        text = Path(args.games_pgn).read_text()
        games, skipped = pgn.parse_games_lenient(text)
        if skipped:
            print(f"skipped {skipped} malformed games", file=sys.stderr)
        return games
    rng = np.random.default_rng(args.seed)
    games = []
    for _ in range(args.random_games):
        moves = data.random_game(rng, max_plies=args.random_plies)
        games.append(pgn.Game(tags={}, moves=moves))
    return games


def cmd_build_data(args) -> int:
    vocab = Vocabulary.default()
    oracle = make_oracle(args.oracle, movetime=args.movetime)
    games = _load_games(args)
    summary = data.build_dataset(
        games,
        paradigm=args.paradigm,
        h=args.horizon,
        oracle=oracle,
        out_path=args.out,
        seed=args.seed,
        vocab=vocab,
        corruption=args.corruption,
        max_records=args.max_records,
    )
    summary_path = Path(args.out).with_suffix(".json")
    summary_path.write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary, indent=2))
    return 0


def cmd_train(args) -> int:
    vocab = Vocabulary.default()
    reader = data.DatasetReader(args.data)
    if reader.meta["vocab_hash"] != vocab.hash:
        print("dataset was built against a different vocabulary", file=sys.stderr)
        return 1
    tokens = reader.tokens_matrix()
    # A JSON config file mirrors TrainConfig; explicit flags override it.
    fields = {
        "kind": args.kind,
        "T": args.T,
        "noise_kind": args.noise_kind,
        "lambda_variant": args.lambda_variant,
        "lr": args.lr,
        "batch_size": args.batch_size,
        "max_epochs": args.epochs,
        "seed": args.seed,
        "layers": args.layers,
        "width": args.width,
        "heads": args.heads,
    }
    if args.config:
        file_config = json.loads(Path(args.config).read_text())
        unknown = set(file_config) - set(fields) - {"paradigm", "h", "patience", "val_fraction"}
        if unknown:
            print(f"unknown train config keys: {sorted(unknown)}", file=sys.stderr)
            return 1
        defaults = make_parser().parse_args(["train", "--data", "x", "--out", "y"])
        for key, value in file_config.items():
            flag_name = {"max_epochs": "epochs"}.get(key, key)
            if key in fields and getattr(args, flag_name, None) == getattr(defaults, flag_name, None):
                fields[key] = value
    config = training.TrainConfig(
        paradigm=reader.meta["paradigm"],
        h=reader.meta["h"],
        **fields,
    )
    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(tokens))
    n_val = int(len(tokens) * args.val_fraction)
    val = tokens[order[:n_val]] if n_val else None
    train_tokens = tokens[order[n_val:]]
    trainer = training.Trainer(config, vocab=vocab, out_dir=args.out)
    trainer.fit(train_tokens, val_tokens=val, max_steps=args.max_steps)
    trainer.save(Path(args.out) / "model.ckpt")
    trainer.close()
    print(json.dumps({"checkpoint": str(Path(args.out) / "model.ckpt"),
                      "epochs": len(trainer.history),
                      "final_loss": trainer.history[-1].loss if trainer.history else None}))
    return 0


def _test_cases(path: str, vocab: Vocabulary, limit: int | None) -> list:
    reader = data.DatasetReader(path)
    cases = []
    for i in range(len(reader)):
        tokens, _ = reader[i]
        decoded = codec.decode_sequence(
            tokens, reader.meta["paradigm"], reader.meta["h"], vocab
        )
        if decoded.s0 is not None and decoded.actions[0] is not None:
            cases.append((decoded.s0, decoded.actions[0]))
        if limit and len(cases) >= limit:
            break
    return cases


def cmd_eval(args) -> int:
    vocab = Vocabulary.default()
    agent = build_agent(args.ckpt or args.agent, vocab, steps=args.steps, sims=args.sims)
    cases = _test_cases(args.test, vocab, args.limit)
    report = {
        "agent": args.agent,
        "cases": len(cases),
        "action_accuracy": evaluation.action_accuracy(
            agent, cases, np.random.default_rng(args.seed)
        ),
    }
    if args.future_validity:
        if not isinstance(agent, DiffuSearchAgent):
            print("future validity needs a trajectory-emitting agent", file=sys.stderr)
            return 1
        oracle = make_oracle(args.oracle)
        fv = evaluation.future_validity(agent, [s for s, _ in cases], oracle)
        report["future_validity"] = fv.rows()
        report["guard_trips"] = agent.sampler.guard_trips
    print(json.dumps(report, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
    if args.csv and "future_validity" in report:
        evaluation.write_csv(args.csv, report["future_validity"])
    return 0


def cmd_puzzles(args) -> int:
    vocab = Vocabulary.default()
    agent = build_agent(args.ckpt or args.agent, vocab, steps=args.steps, sims=args.sims)
    puzzles = evaluation.load_puzzles(Path(args.csv).read_text())
    if args.limit:
        puzzles = puzzles[: args.limit]
    report = {
        "agent": args.agent,
        "puzzles": len(puzzles),
        "puzzle_accuracy": evaluation.puzzle_accuracy(agent, puzzles),
    }
    print(json.dumps(report, indent=2))
    return 0


def cmd_tournament(args) -> int:
    vocab = Vocabulary.default()
    agents: dict[str, Agent] = {}
    for spec in args.agents.split(","):
        if "=" in spec:
            name, ref = spec.split("=", 1)
        else:
            name, ref = Path(spec).stem if Path(spec).exists() else spec, spec
        agents[name] = build_agent(ref, vocab, sims=args.sims)
        agents[name].name = name
    anchor = None
    if args.anchor:
        anchor_name, anchor_value = args.anchor.split("=")
        anchor = (anchor_name, float(anchor_value))
    result = evaluation.run_tournament(
        agents, games_per_pair=args.games, seed=args.seed, anchor=anchor,
        max_plies=args.max_plies,
    )
    print(json.dumps(result.to_json(), indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(result.to_json(), indent=2))
    return 0


def cmd_latency(args) -> int:
    vocab = Vocabulary.default()
    states = data.sample_positions(args.positions, seed=args.seed)
    report: dict = {}

    if args.ckpt:
        payload = load_checkpoint(args.ckpt, vocab.hash)
        depths = [int(d) for d in args.depths.split(",")]

        def make_depth_agent(h: int) -> Agent:
            model_config = payload["model"].config
            if model_config.max_seq_len < codec.sequence_length("s-asa", h):
                raise SystemExit(f"checkpoint context too short for depth {h}")
            sampler = Sampler(payload["model"], payload["schedule"], vocab, "s-asa", h)
            return DiffuSearchAgent(sampler, SampleConfig(steps=args.steps))

        report["diffusion_ms_per_move"] = evaluation.latency_profile(
            make_depth_agent, depths, states
        )
    if args.mcts:
        policy_path, value_path = args.mcts.split(":")
        from .mcts import MCTSAgent, SearchConfig

        policy_payload = load_checkpoint(policy_path, vocab.hash)
        value_payload = load_checkpoint(value_path, vocab.hash)
        sims = [int(s) for s in args.sims_list.split(",")]

        def make_sims_agent(n: int) -> Agent:
            return MCTSAgent(
                PolicyAgent(policy_payload["model"], vocab),
                StateValueModel(value_payload["model"], vocab),
                SearchConfig(simulations=n),
            )

        # In-play measurement: the search tree is reused between moves.
        report["mcts_ms_per_move"] = evaluation.latency_in_play(
            make_sims_agent, sims, plies=max(4, args.positions)
        )
    print(json.dumps(report, indent=2))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
    if args.csv:
        rows = []
        for family, curve in report.items():
            rows += [{"family": family, "setting": k, "ms": v} for k, v in curve.items()]
        evaluation.write_csv(args.csv, rows)
    if args.plot:
        series = {
            family: (list(curve.keys()), list(curve.values()))
            for family, curve in report.items()
        }
        evaluation.plot_curves(args.plot, series, "depth / simulations", "ms per move",
                               "latency per move")
    return 0


def cmd_play(args) -> int:
    vocab = Vocabulary.default()
    white = build_agent(args.white, vocab, steps=args.steps, sims=args.sims)
    black = build_agent(args.black, vocab, steps=args.steps, sims=args.sims)
    results = []
    for g in range(args.games):
        record = evaluation.play_game(white, black, seed=args.seed + g, max_plies=args.max_plies)
        game = pgn.Game(
            tags={
                "White": args.white,
                "Black": args.black,
                "Result": {1.0: "1-0", 0.5: "1/2-1/2", 0.0: "0-1"}[record.result],
            },
            moves=record.moves,
            result={1.0: "1-0", 0.5: "1/2-1/2", 0.0: "0-1"}[record.result],
        )
        print(pgn.game_to_pgn(game))
        results.append(record.result)
    print(json.dumps({"white_score": sum(results), "games": len(results)}))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    vocab = Vocabulary.default()
    factories = {"random": lambda: RandomAgent()}
    ckpt_specs = list(args.ckpt or [])
    env_ckpt = _env("CKPT")
    if env_ckpt:
        ckpt_specs.extend(c for c in env_ckpt.split(",") if c)
    for spec in ckpt_specs:
        name, ref = spec.split("=", 1)
        factories[name] = (lambda r: (lambda: build_agent(r, vocab, steps=args.steps)))(ref)
    app = create_app(factories, seed=args.seed)
    port = int(args.port or _env("PORT", "8000"))
    log_level = (_env("LOG", "info") or "info").lower()
    uvicorn.run(app, host=args.host, port=port, log_level=log_level)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diffusearch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-data", help="label games and write a dataset")
    p.add_argument("--games", dest="games_pgn", help="PGN file of input games")
    p.add_argument("--random-games", type=int, default=0, help="generate N random games instead")
    p.add_argument("--random-plies", type=int, default=80)
    p.add_argument("--paradigm", default="s-asa", choices=codec.PARADIGMS)
    p.add_argument("--horizon", type=int, default=4)
    p.add_argument("--oracle", default="toy", help="toy | toy:<depth> | uci:<command>")
    p.add_argument("--movetime", type=float, default=0.05)
    p.add_argument("--corruption", choices=["random-policy", "random-world"])
    p.add_argument("--max-records", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_build_data)

    p = sub.add_parser("train", help="train a policy on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file mirroring TrainConfig; flags override")
    p.add_argument("--kind", default="diffusion", choices=["diffusion", "autoregressive", "direct"])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--T", type=int, default=20)
    p.add_argument("--noise-kind", default="absorbing", choices=["absorbing", "multinomial"])
    p.add_argument("--lambda-variant", default="linear", choices=["constant", "reciprocal", "linear"])
    p.add_argument("--layers", type=int, default=8)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--val-fraction", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="action accuracy on a test dataset")
    p.add_argument("--agent", default="diffusearch")
    p.add_argument("--ckpt", help="checkpoint path (kind inferred); or use --agent spec")
    p.add_argument("--test", required=True)
    p.add_argument("--limit", type=int)
    p.add_argument("--steps", type=int, help="reverse steps override")
    p.add_argument("--sims", type=int, help="MCTS simulations override")
    p.add_argument("--future-validity", action="store_true")
    p.add_argument("--oracle", default="toy")
    p.add_argument("--out")
    p.add_argument("--csv", help="write future-validity rows as CSV")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("puzzles", help="exact-solution puzzle accuracy")
    p.add_argument("--agent", default="diffusearch")
    p.add_argument("--ckpt")
    p.add_argument("--csv", required=True)
    p.add_argument("--limit", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--sims", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_puzzles)

    p = sub.add_parser("tournament", help="round-robin + Elo")
    p.add_argument("--agents", required=True, help="comma list: name=spec or spec")
    p.add_argument("--games", type=int, default=20, help="games per pair")
    p.add_argument("--anchor", help="name=rating (default: first agent at 1000)")
    p.add_argument("--max-plies", type=int, default=512)
    p.add_argument("--sims", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_tournament)

    p = sub.add_parser("latency", help="latency vs depth / simulations")
    p.add_argument("--ckpt", help="diffusion checkpoint for depth profiling")
    p.add_argument("--depths", default="1,4,7")
    p.add_argument("--steps", type=int)
    p.add_argument("--mcts", help="policy.ckpt:value.ckpt for simulation profiling")
    p.add_argument("--sims-list", default="5,100")
    p.add_argument("--positions", type=int, default=8)
    p.add_argument("--out")
    p.add_argument("--csv", help="write measurements as CSV")
    p.add_argument("--plot", help="write a latency curve PNG")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_latency)

    p = sub.add_parser("play", help="agent vs agent games")
    p.add_argument("--white", required=True)
    p.add_argument("--black", required=True)
    p.add_argument("--games", type=int, default=1)
    p.add_argument("--max-plies", type=int, default=512)
    p.add_argument("--steps", type=int)
    p.add_argument("--sims", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_play)

    p = sub.add_parser("serve", help="run the live play server")
    p.add_argument("--port", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ckpt", action="append", help="name=path (repeatable)")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # runtime failure -> exit 1 with diagnostic
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
