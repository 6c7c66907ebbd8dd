import json
from pathlib import Path

import numpy as np
import pytest

from diffusearch import cli, data
from diffusearch.codec import Vocabulary


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny end-to-end workspace: dataset + trained checkpoints."""
    root = tmp_path_factory.mktemp("cliws")
    assert (
        cli.main(
            [
                "build-data", "--random-games", "2", "--random-plies", "16",
                "--paradigm", "s-asa", "--horizon", "2", "--oracle", "toy",
                "--out", str(root / "train.bin"), "--seed", "3",
            ]
        )
        == 0
    )
    assert (
        cli.main(
            [
                "build-data", "--random-games", "1", "--random-plies", "12",
                "--paradigm", "s-asa", "--horizon", "2", "--oracle", "toy",
                "--out", str(root / "test.bin"), "--seed", "9",
            ]
        )
        == 0
    )
    assert (
        cli.main(
            [
                "train", "--data", str(root / "train.bin"), "--out", str(root / "run"),
                "--kind", "diffusion", "--epochs", "1", "--batch-size", "8",
                "--layers", "1", "--width", "32", "--heads", "2", "--T", "4", "--seed", "0",
            ]
        )
        == 0
    )
    assert (
        cli.main(
            [
                "train", "--data", str(root / "train.bin"), "--out", str(root / "sa"),
                "--kind", "autoregressive", "--epochs", "1", "--batch-size", "8",
                "--layers", "1", "--width", "32", "--heads", "2", "--seed", "0",
            ]
        )
        == 0
    )
    return root


class TestBuildData:
    def test_dataset_and_summary_written(self, workspace):
        assert (workspace / "train.bin").exists()
        summary = json.loads((workspace / "train.json").read_text())
        assert summary["paradigm"] == "s-asa"
        assert summary["records"] > 0

    def test_pgn_input(self, tmp_path):
        pgn_path = tmp_path / "games.pgn"
        pgn_path.write_text('[Event "x"]\n\n1. e4 e5 2. Nf3 Nc6 *\n')
        code = cli.main(
            [
                "build-data", "--games", str(pgn_path), "--paradigm", "s-aa",
                "--horizon", "2", "--oracle", "toy", "--out", str(tmp_path / "d.bin"),
            ]
        )
        assert code == 0
        summary = json.loads((tmp_path / "d.json").read_text())
        assert summary["records"] == 5  # 4 moves -> 5 positions, none terminal

    def test_corruption_flag(self, tmp_path):
        code = cli.main(
            [
                "build-data", "--random-games", "1", "--random-plies", "8",
                "--paradigm", "s-asa", "--horizon", "2", "--oracle", "toy",
                "--corruption", "random-policy", "--out", str(tmp_path / "c.bin"),
            ]
        )
        assert code == 0
        reader = data.DatasetReader(tmp_path / "c.bin")
        assert all(reader[i][1].provenance == "random-policy" for i in range(len(reader)))


class TestTrainEval:
    def test_checkpoint_written(self, workspace):
        assert (workspace / "run" / "model.ckpt").exists()
        assert (workspace / "run" / "metrics.jsonl").exists()

    def test_eval_reports_accuracy(self, workspace, capsys):
        code = cli.main(
            [
                "eval", "--agent", "diffusearch", "--ckpt", str(workspace / "run" / "model.ckpt"),
                "--test", str(workspace / "test.bin"), "--limit", "5", "--steps", "2",
            ]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["cases"] == 5
        assert 0.0 <= report["action_accuracy"] <= 100.0

    def test_eval_baseline_checkpoint(self, workspace, capsys):
        code = cli.main(
            [
                "eval", "--agent", "s-a", "--ckpt", str(workspace / "sa" / "model.ckpt"),
                "--test", str(workspace / "test.bin"), "--limit", "5",
            ]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["cases"] == 5

    def test_missing_dataset_is_runtime_error(self, workspace):
        code = cli.main(
            ["eval", "--ckpt", str(workspace / "run" / "model.ckpt"), "--test", "missing.bin"]
        )
        assert code == 1


class TestOtherCommands:
    def test_puzzles_command(self, tmp_path, capsys):
        csv_path = tmp_path / "p.csv"
        csv_path.write_text(
            "PuzzleId,FEN,Moves,Rating\n"
            'p1,"rnbqkbnr/pppp1ppp/8/4p3/8/5P2/PPPPP1PP/RNBQKBNR w KQkq - 0 2","g2g4 d8h4",600\n'
        )
        code = cli.main(["puzzles", "--agent", "toy", "--csv", str(csv_path)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["puzzle_accuracy"] == 100.0

    def test_tournament_command(self, capsys):
        code = cli.main(
            [
                "tournament", "--agents", "rnd=random,toy=toy", "--games", "2",
                "--max-plies", "60", "--seed", "1", "--anchor", "rnd=1000",
            ]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["elo"]["rnd"] == 1000.0
        assert set(report["elo"]) == {"rnd", "toy"}

    def test_play_command(self, capsys):
        code = cli.main(
            ["play", "--white", "toy", "--black", "random", "--games", "1", "--max-plies", "40"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "Result" in out

    def test_latency_command(self, workspace, capsys):
        code = cli.main(
            [
                "latency", "--ckpt", str(workspace / "run" / "model.ckpt"),
                "--depths", "1,2", "--steps", "2", "--positions", "2",
            ]
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert set(report["diffusion_ms_per_move"]) == {"1", "2"}

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["build-data"])  # missing required --out
        assert exc.value.code == 2

    def test_unknown_subcommand_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2


class TestAgentSpecs:
    def test_builtin_specs(self, vocab):
        from diffusearch.agents import OracleAgent, RandomAgent

        assert isinstance(cli.build_agent("random", vocab), RandomAgent)
        assert isinstance(cli.build_agent("toy:1", vocab), OracleAgent)

    def test_checkpoint_kind_inference(self, workspace, vocab):
        from diffusearch.agents import DiffuSearchAgent, PolicyAgent

        agent = cli.build_agent(str(workspace / "run" / "model.ckpt"), vocab)
        assert isinstance(agent, DiffuSearchAgent)
        baseline = cli.build_agent(str(workspace / "sa" / "model.ckpt"), vocab)
        assert isinstance(baseline, PolicyAgent)

    def test_mcts_spec_needs_two_checkpoints(self, vocab):
        with pytest.raises(ValueError):
            cli.build_agent("mcts:only-one", vocab)


class TestTrainConfigFile:
    def test_config_file_mirrors_train_config(self, tmp_path, workspace, capsys):
        config_path = tmp_path / "train.json"
        config_path.write_text(json.dumps({"kind": "direct", "width": 16, "max_epochs": 1,
                                           "batch_size": 8, "layers": 1, "heads": 2}))
        code = cli.main(
            [
                "train", "--data", str(workspace / "train.bin"),
                "--out", str(tmp_path / "run"), "--config", str(config_path),
            ]
        )
        assert code == 0
        from diffusearch.model import load_checkpoint

        payload = load_checkpoint(tmp_path / "run" / "model.ckpt", Vocabulary.default().hash)
        assert payload["kind"] == "direct"
        assert payload["model_config"]["width"] == 16

    def test_flags_override_config_file(self, tmp_path, workspace):
        config_path = tmp_path / "train.json"
        config_path.write_text(json.dumps({"kind": "direct", "width": 16, "max_epochs": 1,
                                           "batch_size": 8, "layers": 1, "heads": 2}))
        code = cli.main(
            [
                "train", "--data", str(workspace / "train.bin"),
                "--out", str(tmp_path / "run2"), "--config", str(config_path),
                "--kind", "autoregressive",
            ]
        )
        assert code == 0
        from diffusearch.model import load_checkpoint

        payload = load_checkpoint(tmp_path / "run2" / "model.ckpt", Vocabulary.default().hash)
        assert payload["kind"] == "autoregressive"

    def test_unknown_config_key_rejected(self, tmp_path, workspace):
        config_path = tmp_path / "bad.json"
        config_path.write_text(json.dumps({"learning_rate": 1.0}))
        code = cli.main(
            [
                "train", "--data", str(workspace / "train.bin"),
                "--out", str(tmp_path / "run3"), "--config", str(config_path),
            ]
        )
        assert code == 1
