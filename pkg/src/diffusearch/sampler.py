"""Reverse diffusion conditioned on the board state: iterative parallel
decoding with an easy-first schedule, plus the legality guard that turns raw
action tokens into playable moves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch

from . import chessboard as chess
from . import codec
from .chessboard import BoardState, Move
from .codec import STATE_LEN, DecodedSequence, Vocabulary
from .diffusion import DiffusionSchedule, posterior_sample
from .model import Denoiser

DECODINGS = ("easy-first", "random-order", "per-token-posterior")
SELECTIONS = ("greedy", "sample")


@dataclass
class SampleConfig:
    steps: Optional[int] = None  # reverse steps; defaults to the training T
    decoding: str = "easy-first"
    selection: str = "greedy"
    seed: Optional[int] = None
    # Restrict each span's predictions to its token class (plus pad), so action
    # slots always decode to some move. Legality is still a separate question.
    constrain_layout: bool = True

    def __post_init__(self) -> None:
        if self.decoding not in DECODINGS:
            raise ValueError(f"unknown decoding {self.decoding!r}")
        if self.selection not in SELECTIONS:
            raise ValueError(f"unknown selection {self.selection!r}")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass
class SampleResult:
    action: str  # playable move (after the legality guard)
    raw_action: Optional[str]  # decoded a0 before the guard, None if undecodable
    guard_tripped: bool
    future: list[tuple[str, str]] = field(default_factory=list)  # (uci, fen) per step
    confidences: list[float] = field(default_factory=list)
    tokens: Optional[np.ndarray] = None
    decoded: Optional[DecodedSequence] = None

    def to_json(self) -> dict:
        return {
            "action": self.action,
            "raw_action": self.raw_action,
            "guard_tripped": self.guard_tripped,
            "future": [{"move": m, "fen": f} for m, f in self.future],
            "confidences": self.confidences,
        }


def easy_first_mask(logprobs: np.ndarray, t: int, T: int, future_len: int) -> np.ndarray:
    """Indices of the floor(future_len * (t-1) / T) least-confident positions.

    Ties break by position index ascending (stable sort on the log-likelihoods).
    """
    k = (future_len * (t - 1)) // T
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    order = np.argsort(logprobs, kind="stable")
    return order[:k]


def legality_guard(
    state: BoardState,
    action_log_probs: np.ndarray,
    vocab: Vocabulary,
    predicted: Optional[Move],
) -> tuple[Move, bool]:
    """Return the predicted move if legal, else the legal move with the highest
    model probability (probabilities renormalized over legal actions)."""
    legal = chess.legal_moves(state)
    if predicted is not None and predicted in legal:
        return predicted, False
    ids = [vocab.action_id(m.uci()) for m in legal]
    best = int(np.argmax(action_log_probs[ids]))
    return legal[best], True


class Sampler:
    """Samples (next action, future trajectory) for a board state."""

    def __init__(
        self,
        model: Denoiser,
        schedule: DiffusionSchedule,
        vocab: Vocabulary,
        paradigm: str,
        h: int,
    ):
        self.model = model
        self.schedule = schedule
        self.vocab = vocab
        self.paradigm = paradigm
        self.h = h
        self.seq_len = codec.sequence_length(paradigm, h)
        self.guard_trips = 0
        self._span_mask = self._build_span_mask()

    def _build_span_mask(self) -> np.ndarray:
        """(future_len, K) boolean: which token ids each future slot may take
        under layout-constrained decoding."""
        v = self.vocab
        future_len = self.seq_len - STATE_LEN
        mask = np.zeros((future_len, v.size), dtype=bool)
        state_ids = [v.token_to_id[c] for c in v.state_alphabet]
        pos = 0
        for kind, _ in codec.future_layout(self.paradigm, self.h):
            width = codec.span_length(kind)
            for _ in range(width):
                if kind == "state":
                    mask[pos, state_ids] = True
                elif kind == "action":
                    mask[pos, v.action_base : v.action_base + codec.ACTION_COUNT] = True
                else:
                    mask[pos, v.value_base : v.value_base + codec.VALUE_BIN_COUNT] = True
                mask[pos, v.pad_id] = True
                pos += 1
        return mask

    def _initial_noise(self, future_len: int, rng: np.random.Generator) -> np.ndarray:
        if self.schedule.noise_kind == "absorbing":
            return np.full(future_len, self.vocab.mask_id, dtype=np.int64)
        return rng.integers(0, self.vocab.size, size=future_len)

    def denoise_tokens(
        self, state: BoardState, cfg: Optional[SampleConfig] = None
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Run the reverse loop. Returns (tokens, confidences, final log-probs).

        State positions are frozen to the encoded input at every step; after
        the loop every future position holds a data token.
        """
        cfg = cfg or SampleConfig()
        rng = np.random.default_rng(cfg.seed)
        steps = cfg.steps or self.schedule.T
        future_len = self.seq_len - STATE_LEN

        state_tokens = self.vocab.encode_state(state)
        x = np.empty(self.seq_len, dtype=np.int64)
        x[:STATE_LEN] = state_tokens
        x[STATE_LEN:] = self._initial_noise(future_len, rng)
        # Committed positions carry their token over; training supervises only
        # corrupted positions, so re-reading the model there is meaningless.
        committed = np.zeros(future_len, dtype=bool)

        log_probs = None
        conf = np.zeros(future_len)
        for s in range(steps, 0, -1):
            # Map the inference step onto the trained timestep grid.
            t_model = max(1, math.ceil(s * self.schedule.T / steps))
            with torch.no_grad():
                logits = self.model.predict(torch.from_numpy(x).long(), t_model).logits[0]
            logits = logits.numpy()
            if cfg.constrain_layout:
                logits[STATE_LEN:][~self._span_mask] = -np.inf
            shifted = logits - logits.max(axis=-1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
            future_lp = log_probs[STATE_LEN:]

            if cfg.selection == "greedy":
                pred = future_lp.argmax(axis=-1)
            else:
                gumbel = -np.log(-np.log(rng.random(future_lp.shape)))
                x0_hat_all = future_lp + gumbel
                pred = x0_hat_all.argmax(axis=-1)
            x0_hat = np.where(committed, x[STATE_LEN:], pred)
            conf = np.take_along_axis(future_lp, x0_hat[:, None], axis=-1).squeeze(-1)

            if cfg.decoding == "per-token-posterior":
                if s > 1:
                    x[STATE_LEN:] = posterior_sample(
                        x[STATE_LEN:], x0_hat, self.schedule, t_model, rng
                    )
                else:
                    x[STATE_LEN:] = x0_hat
                if self.schedule.noise_kind == "absorbing":
                    committed = x[STATE_LEN:] != self.vocab.mask_id
                continue

            x[STATE_LEN:] = x0_hat
            if cfg.decoding == "easy-first":
                reset = easy_first_mask(conf, s, steps, future_len)
            else:
                k = (future_len * (s - 1)) // steps
                reset = rng.choice(future_len, size=k, replace=False)
            committed = np.ones(future_len, dtype=bool)
            if len(reset):
                committed[reset] = False
                if self.schedule.noise_kind == "absorbing":
                    x[STATE_LEN + reset] = self.vocab.mask_id
                else:
                    x[STATE_LEN + reset] = rng.integers(0, self.vocab.size, size=len(reset))

        assert (x[:STATE_LEN] == state_tokens).all()
        return x, conf, log_probs

    def sample(self, state: BoardState, cfg: Optional[SampleConfig] = None) -> SampleResult:
        """Full prediction: next action (guard-protected), future line, confidences."""
        tokens, conf, log_probs = self.denoise_tokens(state, cfg)
        decoded = codec.decode_sequence(tokens, self.paradigm, self.h, self.vocab)
        raw = decoded.actions[0]
        move, tripped = legality_guard(state, log_probs[STATE_LEN], self.vocab, raw)
        if tripped:
            self.guard_trips += 1

        future: list[tuple[str, str]] = []
        for j in range(1, self.h):
            action = decoded.actions[j]
            state_j = decoded.states[j - 1] if j - 1 < len(decoded.states) else None
            if action is None:
                break
            future.append((action.uci(), state_j.to_fen() if state_j else ""))
        return SampleResult(
            action=move.uci(),
            raw_action=raw.uci() if raw is not None else None,
            guard_tripped=tripped,
            future=future,
            confidences=[float(c) for c in conf],
            tokens=tokens,
            decoded=decoded,
        )
