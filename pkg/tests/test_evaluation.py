import numpy as np
import pytest

from diffusearch import chessboard as chess
from diffusearch import data, evaluation
from diffusearch.agents import Agent, DiffuSearchAgent, OracleAgent, RandomAgent
from diffusearch.chessboard import BoardState, Move
from diffusearch.evaluation import (
    PuzzleCase,
    action_accuracy,
    expected_scores,
    fit_elo,
    future_validity,
    latency_profile,
    load_puzzles,
    play_game,
    puzzle_accuracy,
    run_tournament,
    solve_puzzle,
)
from diffusearch.sampler import SampleConfig, Sampler


@pytest.fixture(scope="module")
def test_cases(toy_oracle):
    states = data.sample_positions(40, seed=77)
    return [(s, toy_oracle.best_move(s)) for s in states]


class ScriptedAgent(Agent):
    name = "scripted"

    def __init__(self, moves):
        self.moves = [Move.from_uci(m) for m in moves]
        self.i = 0

    def select_move(self, state, rng=None):
        move = self.moves[self.i % len(self.moves)]
        self.i += 1
        return move

    def reset(self):
        self.i = 0


class TestActionAccuracy:
    def test_oracle_agent_scores_100(self, toy_oracle, test_cases):
        assert action_accuracy(OracleAgent(toy_oracle), test_cases) == 100.0

    def test_random_agent_near_reciprocal_branching(self, test_cases):
        rng = np.random.default_rng(0)
        acc = action_accuracy(RandomAgent(), test_cases, rng)
        assert 0.0 <= acc <= 15.0  # ~1/31 with a wide CI at this sample size

    def test_empty_set(self, toy_oracle):
        assert action_accuracy(OracleAgent(toy_oracle), []) == 0.0


class TestPuzzles:
    CSV = (
        "PuzzleId,FEN,Moves,Rating,RatingDeviation,Popularity,NbPlays,Themes,GameUrl\n"
        # After the setup move g4 the solver mates with Qh4#.
        'p1,"rnbqkbnr/pppp1ppp/8/4p3/8/5P2/PPPPP1PP/RNBQKBNR w KQkq - 0 2","g2g4 d8h4",600,75,95,1000,mate,u\n'
    )

    def test_load_lichess_schema(self):
        puzzles = load_puzzles(self.CSV)
        assert len(puzzles) == 1
        puzzle = puzzles[0]
        assert puzzle.rating == 600
        assert puzzle.solution == (Move.from_uci("d8h4"),)

    def test_one_move_mate_solved_by_oracle(self, toy_oracle):
        puzzle = load_puzzles(self.CSV)[0]
        assert solve_puzzle(OracleAgent(toy_oracle), puzzle)
        assert puzzle_accuracy(OracleAgent(toy_oracle), [puzzle]) == 100.0

    def test_wrong_second_move_fails_whole_puzzle(self):
        # Scripted agent is right on move 1, wrong on move 2.
        start = BoardState.from_fen("k7/8/8/8/8/8/1R5P/K6R w - - 0 1")
        solution = ("h1g1", "a8a7", "g1g8")
        puzzle = PuzzleCase(start=start, solution=tuple(Move.from_uci(m) for m in solution))
        agent = ScriptedAgent(["h1g1", "b2b8"])
        assert not solve_puzzle(agent, puzzle)

    def test_illegal_agent_move_fails_not_raises(self):
        start = BoardState.from_fen("k7/8/8/8/8/8/1R5P/K6R w - - 0 1")
        puzzle = PuzzleCase(start=start, solution=(Move.from_uci("h1g1"),))
        # h1h8 is blocked by the pawn: an illegal move simply fails the puzzle.
        assert not solve_puzzle(ScriptedAgent(["h1h8"]), puzzle)

    def test_oracle_self_consistent_puzzle_set(self, toy_oracle):
        """Puzzles built from the oracle's own lines are solved 100%."""
        positions = data.sample_positions(10, seed=91)
        puzzles = []
        for state in positions:
            line = []
            current = state
            for _ in range(3):
                if chess.outcome(current) is not None:
                    break
                move = toy_oracle.best_move(current)
                line.append(move)
                current = chess.apply_legal(current, move)
            if line:
                puzzles.append(PuzzleCase(start=state, solution=tuple(line)))
        assert puzzle_accuracy(OracleAgent(toy_oracle), puzzles) == 100.0

    def test_invalid_solution_rejected(self):
        with pytest.raises(ValueError):
            PuzzleCase(start=BoardState.initial(), solution=(Move.from_uci("e2e5"),))


class TestFutureValidity:
    def test_memorized_model_is_perfect_on_its_record(
        self, memorized_trainer, single_record, vocab, toy_oracle
    ):
        record, _ = single_record
        sampler = Sampler(memorized_trainer.model, memorized_trainer.schedule, vocab, "s-asa", 4)
        agent = DiffuSearchAgent(sampler, SampleConfig(seed=0))
        report = future_validity(agent, [record.s0], toy_oracle)
        assert report.valid_action[0] == 100.0
        assert report.best_action[0] == 100.0
        for i in range(1, 4):
            assert report.valid_state[i] == 100.0
            assert report.match_prev[i] == 100.0

    def test_step0_match_reported_as_dash(
        self, memorized_trainer, single_record, vocab, toy_oracle
    ):
        record, _ = single_record
        sampler = Sampler(memorized_trainer.model, memorized_trainer.schedule, vocab, "s-asa", 4)
        agent = DiffuSearchAgent(sampler, SampleConfig(seed=0))
        report = future_validity(agent, [record.s0], toy_oracle)
        assert report.rows()[0]["match"] is None

    def test_step0_best_action_equals_action_accuracy(
        self, memorized_trainer, vocab, toy_oracle
    ):
        states = data.sample_positions(6, seed=13)
        sampler = Sampler(memorized_trainer.model, memorized_trainer.schedule, vocab, "s-asa", 4)
        agent = DiffuSearchAgent(sampler, SampleConfig(seed=0))
        report = future_validity(agent, states, toy_oracle)
        cases = [(s, toy_oracle.best_move(s)) for s in states]
        # future_validity scores the raw decoded action; to compare against the
        # guarded agent move we make the comparison on the same raw quantity.
        raw_hits = 0
        for state in states:
            result = agent.predict(state)
            if result.raw_action == toy_oracle.best_move(state).uci():
                raw_hits += 1
        assert report.best_action[0] == pytest.approx(100.0 * raw_hits / len(states))

    def test_random_token_agent_rarely_emits_valid_states(self, vocab, toy_oracle):
        import torch

        from diffusearch.codec import sequence_length
        from diffusearch.diffusion import DiffusionSchedule
        from diffusearch.model import Denoiser, ModelConfig

        torch.manual_seed(3)
        config = ModelConfig(
            vocab_size=vocab.size, max_seq_len=sequence_length("s-asa", 4),
            mask_id=vocab.mask_id, layers=1, width=32, heads=2, max_timesteps=20,
        )
        schedule = DiffusionSchedule.linear(T=20, num_categories=vocab.size, mask_id=vocab.mask_id)
        sampler = Sampler(Denoiser(config), schedule, vocab, "s-asa", 4)
        agent = DiffuSearchAgent(sampler, SampleConfig(seed=0))
        states = data.sample_positions(30, seed=17)
        report = future_validity(agent, states, toy_oracle)
        assert report.valid_state[1] < 1.0 + 1e-9  # < 1% of random spans decode


class TestEloFit:
    def test_recovers_closed_form_gap(self):
        elo = fit_elo(["a", "b"], {(0, 1): (256.0, 400)}, anchor=("b", 1000.0))
        assert elo["b"] == 1000.0
        assert elo["a"] - elo["b"] == pytest.approx(400 * np.log10(0.64 / 0.36), abs=0.01)

    def test_first_order_optimality(self):
        names = ["x", "y", "z"]
        scores = {(0, 1): (14.0, 20), (0, 2): (17.0, 20), (1, 2): (12.0, 20)}
        elo = fit_elo(names, scores, anchor=("x", 1500.0))
        expected = expected_scores(names, elo, scores)
        actual = {"x": 14.0 + 17.0, "y": 6.0 + 12.0, "z": 3.0 + 8.0}
        for name in names:
            assert expected[name] == pytest.approx(actual[name], abs=1e-6)

    def test_anchor_shift_invariance(self):
        scores = {(0, 1): (30.0, 40)}
        low = fit_elo(["a", "b"], scores, anchor=("a", 0.0))
        high = fit_elo(["a", "b"], scores, anchor=("a", 2000.0))
        assert low["a"] - low["b"] == pytest.approx(high["a"] - high["b"], abs=1e-9)

    def test_prior_draws_keep_sweeps_finite(self):
        elo = fit_elo(["a", "b"], {(0, 1): (20.0, 20)}, anchor=("b", 1000.0), prior_draws=1.0)
        assert np.isfinite(elo["a"])
        assert elo["a"] > elo["b"]


class TestGameRunner:
    def test_mirrored_deterministic_agents_draw_overall(self, toy_oracle):
        agents = {"a": OracleAgent(toy_oracle), "b": OracleAgent(toy_oracle)}
        agents["a"].name, agents["b"].name = "a", "b"
        result = run_tournament(agents, games_per_pair=4, seed=5, max_plies=120)
        assert abs(result.elo["a"] - result.elo["b"]) < 1e-6  # identical mirrored outcomes

    def test_forfeit_on_agent_exception(self, toy_oracle):
        class CrashingAgent(Agent):
            name = "crash"

            def select_move(self, state, rng=None):
                raise RuntimeError("boom")

        record = play_game(CrashingAgent(), OracleAgent(toy_oracle), seed=0)
        assert record.result == 0.0 and record.reason == "forfeit"

    def test_threefold_repetition_adjudicated(self):
        # Two knights shuffle forever: repetition fires well before the cap.
        record = play_game(
            ScriptedAgent(["g1f3", "f3g1"]), ScriptedAgent(["g8f6", "f6g8"]), seed=0
        )
        assert record.result == 0.5 and record.reason == "draw-rule"
        assert record.plies <= 12

    def test_ply_cap(self, toy_oracle):
        record = play_game(
            OracleAgent(toy_oracle), OracleAgent(toy_oracle), seed=1, max_plies=6
        )
        assert record.plies <= 6

    def test_tournament_counts_and_report(self, toy_oracle):
        agents = {"rnd": RandomAgent(), "toy": OracleAgent(toy_oracle)}
        agents["rnd"].name, agents["toy"].name = "rnd", "toy"
        result = run_tournament(
            agents, games_per_pair=4, seed=2, max_plies=100, anchor=("rnd", 1000.0)
        )
        pair = result.pairs[(0, 1)]
        assert pair.games == 4
        assert result.elo["rnd"] == 1000.0
        assert result.elo["toy"] > result.elo["rnd"]  # material search beats random
        payload = result.to_json()
        assert payload["anchor"]["agent"] == "rnd"
        assert len(payload["pairs"]) == 1


class TestLatency:
    def test_profile_shape_and_positivity(self, toy_oracle):
        states = data.sample_positions(3, seed=23)

        def make_agent(setting):
            return OracleAgent(toy_oracle)

        out = latency_profile(make_agent, [1, 2], states)
        assert set(out) == {1, 2}
        assert all(v > 0 for v in out.values())

    def test_in_play_latency_reuses_one_game(self, toy_oracle):
        calls = []

        class CountingAgent(Agent):
            name = "counting"

            def select_move(self, state, rng=None):
                calls.append(state.fullmove)
                return toy_oracle.best_move(state)

        def make_agent(setting):
            return CountingAgent()

        out = evaluation.latency_in_play(make_agent, [1], plies=4)
        assert set(out) == {1} and out[1] > 0
        assert len(calls) == 4  # consecutive plies of one game, no resets
