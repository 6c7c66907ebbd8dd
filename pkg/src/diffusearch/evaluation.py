"""Metrics and harnesses: action accuracy, puzzle accuracy, future-validity
analysis, round-robin tournaments with maximum-likelihood Elo, and latency
profiling.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import chessboard as chess
from .agents import Agent, DiffuSearchAgent
from .chessboard import BoardState, GameOutcome, Move


# --- action accuracy ---


def action_accuracy(
    agent: Agent,
    cases: Sequence[tuple[BoardState, Move]],
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Percentage of positions where the agent plays the reference move."""
    if not cases:
        return 0.0
    hits = 0
    for state, reference in cases:
        agent.reset()
        if agent.select_move(state, rng) == reference:
            hits += 1
    return 100.0 * hits / len(cases)


# --- puzzles ---


@dataclass(frozen=True)
class PuzzleCase:
    """A scripted tactic: the agent must reproduce the full solution line.

    `solution[0]` is the agent's first move; odd indices are the scripted
    opponent replies.
    """

    start: BoardState
    solution: tuple
    rating: int = 0
    puzzle_id: str = ""

    def __post_init__(self) -> None:
        state = self.start
        for move in self.solution:
            if move not in chess.legal_moves(state):
                raise ValueError(f"puzzle {self.puzzle_id}: solution move {move.uci()} illegal")
            state = chess.apply_legal(state, move)

    @classmethod
    def from_lichess_row(cls, row: dict) -> "PuzzleCase":
        """Standard lichess puzzle CSV: the FEN precedes a setup move, which is
        applied before the solver is on the move."""
        state = BoardState.from_fen(row["FEN"])
        moves = [Move.from_uci(u) for u in row["Moves"].split()]
        start = chess.apply(state, moves[0])
        return cls(
            start=start,
            solution=tuple(moves[1:]),
            rating=int(row.get("Rating", 0) or 0),
            puzzle_id=row.get("PuzzleId", ""),
        )


def load_puzzles(csv_text: str) -> list[PuzzleCase]:
    reader = csv.DictReader(io.StringIO(csv_text))
    return [PuzzleCase.from_lichess_row(row) for row in reader]


def solve_puzzle(agent: Agent, puzzle: PuzzleCase) -> bool:
    """Solved only if every agent move matches the solution exactly; opponent
    replies are played from the script. Illegal agent moves fail the puzzle."""
    agent.reset()
    state = puzzle.start
    for i, expected in enumerate(puzzle.solution):
        if i % 2 == 0:
            try:
                played = agent.select_move(state)
            except Exception:
                return False
            if played != expected:
                return False
        state = chess.apply_legal(state, expected)
    return True


def puzzle_accuracy(agent: Agent, puzzles: Sequence[PuzzleCase]) -> float:
    if not puzzles:
        return 0.0
    solved = sum(solve_puzzle(agent, p) for p in puzzles)
    return 100.0 * solved / len(puzzles)


# --- future validity ---


@dataclass
class FutureValidity:
    """Per-step percentages over a test set. `match` is undefined at step 0
    and reported as None (a dash)."""

    steps: int
    valid_action: list
    best_action: list
    valid_state: list
    match_prev: list
    count: int = 0

    def rows(self) -> list[dict]:
        out = []
        for i in range(self.steps):
            out.append(
                {
                    "step": i,
                    "valid_a": self.valid_action[i],
                    "best_a": self.best_action[i],
                    "valid_s": self.valid_state[i] if i > 0 else 100.0,
                    "match": self.match_prev[i] if i > 0 else None,
                }
            )
        return out


def future_validity(
    agent: DiffuSearchAgent,
    states: Sequence[BoardState],
    oracle,
) -> FutureValidity:
    """Per future step i: is the predicted a_i legal at its predicted context,
    does it match the oracle move, does s_i decode to a legal state, and does
    s_i equal apply(s_{i-1}, a_{i-1})?
    """
    h = agent.h
    valid_a = np.zeros(h)
    best_a = np.zeros(h)
    valid_s = np.zeros(h)
    match = np.zeros(h)
    count = 0
    for s0 in states:
        result = agent.predict(s0)
        decoded = result.decoded
        count += 1
        context: Optional[BoardState] = s0
        prev_context: Optional[BoardState] = None
        prev_action: Optional[Move] = None
        for i in range(h):
            action = decoded.actions[i]
            if i > 0:
                state_i = decoded.states[i - 1]
                if state_i is not None:
                    valid_s[i] += 1
                    if (
                        prev_context is not None
                        and prev_action is not None
                        and prev_action in chess.legal_moves(prev_context)
                        and chess.apply_legal(prev_context, prev_action) == state_i
                    ):
                        match[i] += 1
                context = state_i
            if context is not None and chess.outcome(context) is None and action is not None:
                legal = chess.legal_moves(context)
                if action in legal:
                    valid_a[i] += 1
                    if action == oracle.best_move(context):
                        best_a[i] += 1
            prev_context, prev_action = context, action
    scale = 100.0 / max(count, 1)
    return FutureValidity(
        steps=h,
        valid_action=list(valid_a * scale),
        best_action=list(best_a * scale),
        valid_state=list(valid_s * scale),
        match_prev=list(match * scale),
        count=count,
    )


# --- game runner & tournaments ---


@dataclass
class GameRecord:
    white: str
    black: str
    result: float  # 1 white win, 0.5 draw, 0 black win
    reason: str
    plies: int
    moves: list = field(default_factory=list)


def play_game(
    white: Agent,
    black: Agent,
    seed: int = 0,
    opening_moves: Optional[Sequence[Move]] = None,
    max_plies: int = 512,
) -> GameRecord:
    """One adjudicated game: 50-move/insufficient-material via the rules,
    threefold repetition via history, and a ply cap, all scored as draws.
    An agent exception forfeits the game."""
    rng = np.random.default_rng(seed)
    state = BoardState.initial()
    white.reset()
    black.reset()
    moves: list[Move] = []
    seen: dict = {}
    reason = "ply-cap"
    result: Optional[float] = None

    for move in opening_moves or []:
        state = chess.apply(state, move)
        moves.append(move)

    while len(moves) < max_plies:
        terminal = chess.outcome(state)
        if terminal is not None:
            result = (terminal.white_value + 1) / 2
            reason = terminal.reason
            break
        key = state.repetition_key()
        seen[key] = seen.get(key, 0) + 1
        if seen[key] >= 3:
            result, reason = 0.5, "draw-rule"
            break
        agent = white if state.turn == chess.WHITE else black
        try:
            move = agent.select_move(state, rng)
            state = chess.apply(state, move)
        except Exception:
            result = 0.0 if state.turn == chess.WHITE else 1.0
            reason = "forfeit"
            break
        moves.append(move)
    if result is None:
        result, reason = 0.5, "ply-cap"
    return GameRecord(
        white=white.name, black=black.name, result=result, reason=reason,
        plies=len(moves), moves=moves,
    )


@dataclass
class PairResult:
    wins: float = 0.0  # from the first agent's perspective
    draws: float = 0.0
    losses: float = 0.0

    @property
    def games(self) -> float:
        return self.wins + self.draws + self.losses

    @property
    def score(self) -> float:
        return self.wins + 0.5 * self.draws


@dataclass
class TournamentResult:
    agents: list
    pairs: dict  # (i, j) i<j -> PairResult for agent i
    elo: dict  # name -> rating
    anchor: tuple  # (name, rating)
    games: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "agents": self.agents,
            "anchor": {"agent": self.anchor[0], "rating": self.anchor[1]},
            "elo": self.elo,
            "pairs": [
                {
                    "white_pool": self.agents[i],
                    "opponent": self.agents[j],
                    "wins": pr.wins,
                    "draws": pr.draws,
                    "losses": pr.losses,
                }
                for (i, j), pr in self.pairs.items()
            ],
            "game_reasons": {
                reason: sum(1 for g in self.games if g.reason == reason)
                for reason in sorted({g.reason for g in self.games})
            },
        }


def fit_elo(
    names: Sequence[str],
    pair_scores: dict,
    anchor: tuple = None,
    prior_draws: float = 0.0,
    max_iter: int = 4000,
    tol: float = 1e-12,
) -> dict:
    """Maximum-likelihood Elo under P(i beats j) = 1/(1 + 10^((Rj-Ri)/400)),
    draws counted as half-wins. Minorization-maximization on the strength
    scale, then shifted so the anchor agent sits at its configured rating.

    pair_scores maps (i, j) with i < j to (score_of_i, games).
    """
    n = len(names)
    score = np.zeros(n)
    games = np.zeros((n, n))
    total_score = np.zeros(n)
    for (i, j), (s, g) in pair_scores.items():
        s = s + prior_draws / 2.0
        g = g + prior_draws
        games[i, j] += g
        games[j, i] += g
        total_score[i] += s
        total_score[j] += g - s
    strength = np.ones(n)
    for _ in range(max_iter):
        new = np.empty(n)
        for i in range(n):
            denom = 0.0
            for j in range(n):
                if games[i, j] > 0:
                    denom += games[i, j] / (strength[i] + strength[j])
            if denom <= 0 or total_score[i] <= 0:
                new[i] = 1e-9
            else:
                new[i] = total_score[i] / denom
        new /= np.exp(np.mean(np.log(np.maximum(new, 1e-12))))
        delta = np.abs(np.log(np.maximum(new, 1e-12)) - np.log(np.maximum(strength, 1e-12))).max()
        strength = new
        if delta < tol:
            break
    ratings = 400.0 * np.log10(np.maximum(strength, 1e-12))
    if anchor is not None:
        name, value = anchor
        ratings += value - ratings[list(names).index(name)]
    return {name: float(r) for name, r in zip(names, ratings)}


def expected_scores(names: Sequence[str], ratings: dict, pair_scores: dict) -> dict:
    """Per-agent expected total score under the fitted ratings (optimality check)."""
    expected = {name: 0.0 for name in names}
    for (i, j), (_, g) in pair_scores.items():
        ri, rj = ratings[names[i]], ratings[names[j]]
        p = 1.0 / (1.0 + 10 ** ((rj - ri) / 400.0))
        expected[names[i]] += g * p
        expected[names[j]] += g * (1 - p)
    return expected


def run_tournament(
    agents: dict,
    games_per_pair: int = 20,
    seed: int = 0,
    anchor: Optional[tuple] = None,
    opening_plies: int = 4,
    max_plies: int = 512,
    prior_draws: float = 1.0,
) -> TournamentResult:
    """Round robin with alternating colors and mirrored random openings.

    Each pair plays games_per_pair games; game 2k and 2k+1 share an opening
    with colors swapped. Elo is fit by logistic MLE with one virtual draw per
    pair for finiteness; the anchor agent's rating is fixed exactly.
    """
    names = list(agents.keys())
    if len(names) < 2:
        raise ValueError("a tournament needs at least two agents")
    if anchor is None:
        anchor = (names[0], 1000.0)
    rng = np.random.default_rng(seed)
    pairs: dict = {}
    games: list[GameRecord] = []

    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            record = PairResult()
            for g in range(games_per_pair):
                if g % 2 == 0:
                    opening = _random_opening(rng, opening_plies)
                swap = g % 2 == 1
                white_name, black_name = (names[j], names[i]) if swap else (names[i], names[j])
                game = play_game(
                    agents[white_name],
                    agents[black_name],
                    seed=int(rng.integers(2**31)),
                    opening_moves=opening,
                    max_plies=max_plies,
                )
                games.append(game)
                score_i = game.result if not swap else 1.0 - game.result
                if score_i == 1.0:
                    record.wins += 1
                elif score_i == 0.0:
                    record.losses += 1
                else:
                    record.draws += 1
            pairs[(i, j)] = record

    pair_scores = {key: (pr.score, pr.games) for key, pr in pairs.items()}
    elo = fit_elo(names, pair_scores, anchor=anchor, prior_draws=prior_draws)
    return TournamentResult(agents=names, pairs=pairs, elo=elo, anchor=anchor, games=games)


def _random_opening(rng: np.random.Generator, plies: int) -> list[Move]:
    state = BoardState.initial()
    moves = []
    for _ in range(plies):
        if chess.outcome(state) is not None:
            break
        legal = chess.legal_moves(state)
        move = legal[int(rng.integers(len(legal)))]
        moves.append(move)
        state = chess.apply_legal(state, move)
    return moves


# --- latency ---


def latency_profile(
    make_agent: Callable[[int], Agent],
    settings: Sequence[int],
    states: Sequence[BoardState],
    warmup: int = 2,
) -> dict:
    """Median wall-clock ms per move at each depth/simulation setting
    (batch size 1). `make_agent(setting)` builds the agent for one setting."""
    out = {}
    for setting in settings:
        agent = make_agent(setting)
        for state in states[:warmup]:
            agent.reset()
            agent.select_move(state)
        samples = []
        for state in states:
            agent.reset()
            start = time.perf_counter()
            agent.select_move(state)
            samples.append((time.perf_counter() - start) * 1000.0)
        out[setting] = float(np.median(samples))
    return out


def latency_in_play(
    make_agent: Callable[[int], Agent],
    settings: Sequence[int],
    plies: int = 8,
) -> dict:
    """Median ms per move over consecutive self-play moves, so stateful agents
    (MCTS with tree reuse) are measured under play conditions."""
    out = {}
    for setting in settings:
        agent = make_agent(setting)
        agent.reset()
        state = BoardState.initial()
        samples = []
        for _ in range(plies):
            start = time.perf_counter()
            move = agent.select_move(state)
            samples.append((time.perf_counter() - start) * 1000.0)
            state = chess.apply(state, move)
            if chess.outcome(state) is not None:
                break
        out[setting] = float(np.median(samples[1:] if len(samples) > 1 else samples))
    return out


def write_csv(path, rows: Sequence[dict]) -> None:
    """Plot-ready CSV: one row per measurement, headers from the first row."""
    if not rows:
        return
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def plot_curves(path, series: dict, xlabel: str, ylabel: str, title: str) -> None:
    """Fig-style curve plot; series maps a label to (xs, ys)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    for label, (xs, ys) in series.items():
        ax.plot(xs, ys, marker="o", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
