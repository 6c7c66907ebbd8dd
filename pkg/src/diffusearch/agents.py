"""The common agent interface (state -> move) shared by the sampler-backed
policy, the one-step and value baselines, MCTS and the utility agents. The
evaluation harness and the play server treat them all uniformly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import chessboard as chess
from . import codec
from .chessboard import BoardState, Move
from .codec import STATE_LEN, Vocabulary, bin_win_probability
from .model import ConfigError, Denoiser, load_checkpoint
from .sampler import SampleConfig, Sampler, SampleResult


class Agent:
    """Base interface: deterministic agents may ignore `rng`."""

    name = "agent"

    def select_move(self, state: BoardState, rng: Optional[np.random.Generator] = None) -> Move:
        raise NotImplementedError

    def reset(self) -> None:
        """Forget per-game state (tree reuse, counters)."""


class RandomAgent(Agent):
    name = "random"

    def select_move(self, state, rng=None):
        rng = rng or np.random.default_rng()
        legal = chess.legal_moves(state)
        return legal[int(rng.integers(len(legal)))]


class OracleAgent(Agent):
    """Plays the labeling oracle's move; useful as a reference opponent."""

    def __init__(self, oracle):
        self.oracle = oracle
        self.name = f"oracle[{oracle.identity()}]"

    def select_move(self, state, rng=None):
        return self.oracle.best_move(state)


class DiffuSearchAgent(Agent):
    """Implicit search: denoise the future, play the guarded first action."""

    name = "diffusearch"

    def __init__(self, sampler: Sampler, sample_config: Optional[SampleConfig] = None):
        self.sampler = sampler
        self.sample_config = sample_config or SampleConfig()
        self.last_result: Optional[SampleResult] = None

    @property
    def h(self) -> int:
        return self.sampler.h

    def predict(self, state: BoardState) -> SampleResult:
        self.last_result = self.sampler.sample(state, self.sample_config)
        return self.last_result

    def select_move(self, state, rng=None):
        return Move.from_uci(self.predict(state).action)


class PolicyAgent(Agent):
    """One-step baseline: argmax over legal actions of the causal model's
    next-token distribution after the state prefix."""

    name = "s-a"

    def __init__(self, model: Denoiser, vocab: Vocabulary):
        self.model = model
        self.vocab = vocab

    def action_log_probs(self, state: BoardState) -> np.ndarray:
        tokens = torch.from_numpy(self.vocab.encode_state(state)).long()
        logits = self.model.predict(tokens).logits[0, -1]
        return torch.log_softmax(logits, dim=-1).numpy()

    def select_move(self, state, rng=None):
        log_probs = self.action_log_probs(state)
        legal = chess.legal_moves(state)
        ids = [self.vocab.action_id(m.uci()) for m in legal]
        return legal[int(np.argmax(log_probs[ids]))]

    def legal_priors(self, state: BoardState) -> dict[Move, float]:
        """Prior distribution over legal moves (softmax renormalized)."""
        log_probs = self.action_log_probs(state)
        legal = chess.legal_moves(state)
        raw = np.exp([log_probs[self.vocab.action_id(m.uci())] for m in legal])
        total = raw.sum()
        if not np.isfinite(total) or total <= 0:
            raw = np.ones(len(legal))
            total = raw.sum()
        return {m: float(p / total) for m, p in zip(legal, raw / total * 1.0)}


class StateValueModel:
    """128-bin value head over a state encoding (side-to-move win probability)."""

    def __init__(self, model: Denoiser, vocab: Vocabulary):
        self.model = model
        self.vocab = vocab

    def win_probability(self, state: BoardState) -> float:
        tokens = torch.from_numpy(self.vocab.encode_state(state)).long()
        logits = self.model.predict(tokens).logits[0, -1]
        bins = logits[self.vocab.value_base : self.vocab.value_base + codec.VALUE_BIN_COUNT]
        probs = torch.softmax(bins, dim=-1).numpy()
        mids = np.array([bin_win_probability(b) for b in range(codec.VALUE_BIN_COUNT)])
        return float(probs @ mids)

    def value(self, state: BoardState) -> float:
        """Scalar in (-1, 1) for the side to move."""
        return 2.0 * self.win_probability(state) - 1.0


class SVAgent(Agent):
    """Depth-one search with the state-value model: pick the move whose
    successor is worst for the opponent."""

    name = "s-v"

    def __init__(self, model: Denoiser, vocab: Vocabulary):
        self.values = StateValueModel(model, vocab)

    def select_move(self, state, rng=None):
        legal = chess.legal_moves(state)
        scores = []
        for move in legal:
            child = chess.apply_legal(state, move)
            result = chess.outcome(child)
            if result is not None:
                mover_value = float(result.value_for(state.turn))
            else:
                mover_value = -self.values.value(child)
            scores.append(mover_value)
        return legal[int(np.argmax(scores))]


class SAVAgent(Agent):
    """Action-value baseline: score every legal (state, action) pair."""

    name = "sa-v"

    def __init__(self, model: Denoiser, vocab: Vocabulary):
        self.model = model
        self.vocab = vocab

    def q_value(self, state: BoardState, move: Move) -> float:
        state_tokens = self.vocab.encode_state(state)
        tokens = np.concatenate([state_tokens, [self.vocab.action_id(move.uci())]])
        logits = self.model.predict(torch.from_numpy(tokens).long()).logits[0, -1]
        bins = logits[self.vocab.value_base : self.vocab.value_base + codec.VALUE_BIN_COUNT]
        probs = torch.softmax(bins, dim=-1).numpy()
        mids = np.array([bin_win_probability(b) for b in range(codec.VALUE_BIN_COUNT)])
        return float(probs @ mids)

    def select_move(self, state, rng=None):
        legal = chess.legal_moves(state)
        scores = [self.q_value(state, m) for m in legal]
        return legal[int(np.argmax(scores))]


def load_agent(
    kind: str,
    checkpoint: str | Path,
    vocab: Optional[Vocabulary] = None,
    value_checkpoint: Optional[str | Path] = None,
    sample_config: Optional[SampleConfig] = None,
    search_config=None,
) -> Agent:
    """Construct an agent from checkpoints.

    kinds: diffusearch | s-a | s-v | sa-v | mcts (mcts also needs
    value_checkpoint holding an s-v model).
    """
    vocab = vocab or Vocabulary.default()
    payload = load_checkpoint(checkpoint, vocab.hash)
    model = payload["model"]

    if kind == "diffusearch":
        if payload["schedule"] is None:
            raise ConfigError("diffusearch agent needs a diffusion checkpoint")
        sampler = Sampler(model, payload["schedule"], vocab, payload["paradigm"], payload["h"])
        return DiffuSearchAgent(sampler, sample_config)
    if kind == "s-a":
        return PolicyAgent(model, vocab)
    if kind == "s-v":
        return SVAgent(model, vocab)
    if kind == "sa-v":
        return SAVAgent(model, vocab)
    if kind == "mcts":
        from .mcts import MCTSAgent, SearchConfig

        if value_checkpoint is None:
            raise ConfigError("mcts agent needs a policy and a value checkpoint")
        value_payload = load_checkpoint(value_checkpoint, vocab.hash)
        policy = PolicyAgent(model, vocab)
        values = StateValueModel(value_payload["model"], vocab)
        return MCTSAgent(policy, values, search_config or SearchConfig())
    raise ValueError(f"unknown agent kind {kind!r}")
