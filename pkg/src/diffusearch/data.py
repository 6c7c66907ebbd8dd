"""Supervised dataset construction: oracle-labeled future rollouts per
position, ablation corruptions, and a length-prefixed binary record format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import chessboard as chess
from . import codec
from .chessboard import BoardState, Move
from .codec import TokenSequence, Vocabulary

PROVENANCES = ("oracle", "random-policy", "random-world", "human-game")
_PROVENANCE_CODE = {name: i for i, name in enumerate(PROVENANCES)}

MAGIC = b"DFDS"
FORMAT_VERSION = 1


class EmptyRecord(ValueError):
    """Rollout requested from a terminal position."""


class RecordSkipped(RuntimeError):
    """Oracle failed repeatedly; the position is dropped."""


@dataclass(frozen=True)
class FutureRecord:
    """One training pair: conditioning state plus an aligned future.

    actions[j] = a_j (length h), states[j] = s_{j+1} (length h-1),
    values[j] = value bin for a_j from the mover's perspective (length h).
    Components are None where the rollout hit a terminal state (padded in
    token space) or where the paradigm does not use them.
    """

    paradigm: str
    h: int
    s0: BoardState
    actions: tuple
    states: tuple
    values: tuple
    provenance: str = "oracle"

    def __post_init__(self) -> None:
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if len(self.actions) != self.h or len(self.values) != self.h:
            raise ValueError("actions/values must have length h")
        if len(self.states) != max(self.h - 1, 0):
            raise ValueError("states must have length h-1")

    def component(self, kind: str, step: int):
        if kind == "action":
            return self.actions[step]
        if kind == "state":
            return self.states[step - 1]
        return self.values[step]

    def dynamics_hold(self) -> bool:
        """Do recorded states follow from applying the recorded actions?"""
        current = self.s0
        for j in range(self.h - 1):
            action, nxt = self.actions[j], self.states[j]
            if action is None or nxt is None:
                return all(a is None for a in self.actions[j + 1 :]) or True
            try:
                expected = chess.apply(current, action)
            except chess.IllegalMoveError:
                return False
            if expected != nxt:
                return False
            current = nxt
        return True

    def validate(self) -> None:
        if self.provenance in ("oracle", "random-policy") and not self.dynamics_hold():
            raise ValueError("world-dynamics invariant violated")
        if self.actions[0] is not None and self.actions[0] not in chess.legal_moves(self.s0):
            raise ValueError("a0 is not legal at s0")


def _needs_values(paradigm: str) -> bool:
    return paradigm in ("s-v", "sa-v", "s-avav", "s-avsav")


def _project_to_layout(
    paradigm: str, h: int, actions: list, states: list, values: list
) -> tuple[tuple, tuple, tuple]:
    """Keep only the components the paradigm's layout actually encodes, so
    assemble/decode round-trips exactly."""
    layout = set(codec.future_layout(paradigm, h))
    return (
        tuple(actions[j] if ("action", j) in layout else None for j in range(h)),
        tuple(states[j - 1] if ("state", j) in layout else None for j in range(1, h)),
        tuple(values[j] if ("value", j) in layout else None for j in range(h)),
    )


def rollout_future(
    s0: BoardState,
    h: int,
    oracle,
    paradigm: str = "s-asa",
    with_values: Optional[bool] = None,
    retries: int = 2,
) -> FutureRecord:
    """Play h oracle moves from s0, recording intermediate states (and value
    bins when the paradigm needs them). Truncates at terminal states.
    """
    if h < 1:
        raise ValueError("horizon must be >= 1")
    if chess.outcome(s0) is not None:
        raise EmptyRecord("terminal position has no future")
    if with_values is None:
        with_values = _needs_values(paradigm)

    actions: list = [None] * h
    states: list = [None] * max(h - 1, 0)
    values: list = [None] * h
    current = s0
    for j in range(h):
        if chess.outcome(current) is not None:
            break
        move = score = None
        for attempt in range(retries + 1):
            try:
                move, score = oracle.best_move_and_eval(current)
                break
            except Exception:
                if attempt == retries:
                    raise RecordSkipped(f"oracle failed at step {j}")
        actions[j] = move
        if with_values:
            values[j] = codec.centipawn_to_bin(score)
        current = chess.apply_legal(current, move)
        if j + 1 < h:
            states[j] = current
    if paradigm == "s-v":
        # Value of the position itself rather than of an action.
        values = [codec.centipawn_to_bin(oracle.evaluate(s0))] + [None] * (h - 1)
    actions, states, values = _project_to_layout(paradigm, h, actions, states, values)
    return FutureRecord(
        paradigm=paradigm,
        h=h,
        s0=s0,
        actions=actions,
        states=states,
        values=values,
        provenance="oracle",
    )


def corrupt_record(
    record: FutureRecord,
    mode: str,
    rng: np.random.Generator,
    state_pool: Optional[list[BoardState]] = None,
    vocab: Optional[Vocabulary] = None,
) -> FutureRecord:
    """Degrade the future of an oracle record for the ablation study.

    'random-policy' keeps the world honest: actions j>=1 are uniform over the
    legal moves and states are re-derived by applying them. 'random-world'
    breaks dynamics: actions are uniform over the whole action table and
    states are drawn from `state_pool`. s0 and a0 are always preserved.
    """
    if record.provenance != "oracle":
        raise ValueError("only oracle records can be corrupted")
    if mode not in ("random-policy", "random-world"):
        raise ValueError(f"unknown corruption mode {mode!r}")
    if record.actions[0] is None:
        return replace(record, provenance=mode)

    h = record.h
    actions: list = [record.actions[0]] + [None] * (h - 1)
    states: list = [None] * max(h - 1, 0)

    if mode == "random-policy":
        current = chess.apply_legal(record.s0, record.actions[0])
        for j in range(1, h):
            if j - 1 < len(states):
                states[j - 1] = current
            if chess.outcome(current) is not None:
                break
            moves = chess.legal_moves(current)
            move = moves[int(rng.integers(len(moves)))]
            actions[j] = move
            current = chess.apply_legal(current, move)
        return FutureRecord(
            paradigm=record.paradigm,
            h=h,
            s0=record.s0,
            actions=tuple(actions),
            states=tuple(states),
            values=tuple([None] * h),
            provenance="random-policy",
        )

    if not state_pool:
        raise ValueError("random-world corruption needs a state pool")
    vocab = vocab or Vocabulary.default()
    for j in range(1, h):
        actions[j] = Move.from_uci(vocab.action_table[int(rng.integers(len(vocab.action_table)))])
    for j in range(len(states)):
        states[j] = state_pool[int(rng.integers(len(state_pool)))]
    return FutureRecord(
        paradigm=record.paradigm,
        h=h,
        s0=record.s0,
        actions=tuple(actions),
        states=tuple(states),
        values=tuple([None] * h),
        provenance="random-world",
    )


# --- random playouts (test data and desk-scale corpora) ---


def random_game(rng: np.random.Generator, max_plies: int = 120) -> list[Move]:
    """A uniformly random legal game, stopped at terminal or after max_plies."""
    state = BoardState.initial()
    moves = []
    for _ in range(max_plies):
        if chess.outcome(state) is not None:
            break
        legal = chess.legal_moves(state)
        move = legal[int(rng.integers(len(legal)))]
        moves.append(move)
        state = chess.apply_legal(state, move)
    return moves


def sample_positions(count: int, seed: int = 0, max_plies: int = 120) -> list[BoardState]:
    """Positions drawn from fresh random playouts (non-terminal only)."""
    rng = np.random.default_rng(seed)
    positions: list[BoardState] = []
    while len(positions) < count:
        state = BoardState.initial()
        for _ in range(max_plies):
            if len(positions) >= count:
                break
            if chess.outcome(state) is not None:
                break
            positions.append(state)
            legal = chess.legal_moves(state)
            state = chess.apply_legal(state, legal[int(rng.integers(len(legal)))])
    return positions


# --- binary dataset file ---


class DatasetWriter:
    """Append-only length-prefixed binary records behind a JSON header."""

    def __init__(self, path: str | Path, meta: dict):
        self.path = Path(path)
        self._fp = open(self.path, "wb")
        header = json.dumps(meta, sort_keys=True).encode()
        self._fp.write(MAGIC)
        self._fp.write(struct.pack("<BI", FORMAT_VERSION, len(header)))
        self._fp.write(header)
        self.count = 0

    def append(self, tokens: np.ndarray, game_idx: int, ply: int, provenance: str) -> None:
        body = struct.pack("<IHBB", game_idx, ply, _PROVENANCE_CODE[provenance], 0)
        body += np.asarray(tokens, dtype=np.uint16).tobytes()
        self._fp.write(struct.pack("<I", len(body)))
        self._fp.write(body)
        self.count += 1

    def close(self) -> None:
        self._fp.close()

    def __enter__(self) -> "DatasetWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


@dataclass(frozen=True)
class RecordInfo:
    game_idx: int
    ply: int
    provenance: str


class DatasetReader:
    """Random-access reader over a dataset file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        raw = self.path.read_bytes()
        if raw[:4] != MAGIC:
            raise ValueError(f"{path} is not a dataset file")
        version, header_len = struct.unpack_from("<BI", raw, 4)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported dataset version {version}")
        offset = 9
        self.meta = json.loads(raw[offset : offset + header_len])
        offset += header_len
        self._raw = raw
        self._offsets: list[tuple[int, int]] = []
        while offset < len(raw):
            (length,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            self._offsets.append((offset, length))
            offset += length

    def __len__(self) -> int:
        return len(self._offsets)

    def __getitem__(self, idx: int) -> tuple[np.ndarray, RecordInfo]:
        offset, length = self._offsets[idx]
        game_idx, ply, prov, _ = struct.unpack_from("<IHBB", self._raw, offset)
        tokens = np.frombuffer(
            self._raw, dtype="<u2", count=(length - 8) // 2, offset=offset + 8
        ).astype(np.int64)
        return tokens, RecordInfo(game_idx, ply, PROVENANCES[prov])

    def tokens_matrix(self) -> np.ndarray:
        """All records as one (num_records, N) matrix (fixed-layout files)."""
        return np.stack([self[i][0] for i in range(len(self))])

    def sequences(self) -> Iterable[TokenSequence]:
        for i in range(len(self)):
            tokens, _ = self[i]
            yield TokenSequence(tokens=tokens, paradigm=self.meta["paradigm"], h=self.meta["h"])


def build_dataset(
    games: Iterable,
    paradigm: str,
    h: int,
    oracle,
    out_path: str | Path,
    seed: int = 0,
    vocab: Optional[Vocabulary] = None,
    corruption: Optional[str] = None,
    max_records: Optional[int] = None,
) -> dict:
    """Label every position of every game and persist one record per position
    (one per legal move for sa-v). Deterministic for a fixed seed and oracle.
    """
    vocab = vocab or Vocabulary.default()
    rng = np.random.default_rng(seed)
    meta = {
        "paradigm": paradigm,
        "h": h,
        "vocab_hash": vocab.hash,
        "oracle": oracle.identity(),
        "seed": seed,
        "corruption": corruption,
        "format": "diffusearch-dataset",
    }
    skipped = 0
    state_pool: list[BoardState] = []
    games = list(games)
    if corruption == "random-world":
        pool_rng = np.random.default_rng(seed + 1)
        state_pool = sample_positions(256, seed=int(pool_rng.integers(2**31)))

    with DatasetWriter(out_path, meta) as writer:
        for game_idx, game in enumerate(games):
            positions = game.positions() if hasattr(game, "positions") else list(game)
            for ply, state in enumerate(positions):
                if max_records is not None and writer.count >= max_records:
                    break
                if chess.outcome(state) is not None:
                    continue
                try:
                    if paradigm == "sa-v":
                        for move in chess.legal_moves(state):
                            value = codec.centipawn_to_bin(oracle.evaluate_move(state, move))
                            record = FutureRecord(
                                paradigm="sa-v",
                                h=1,
                                s0=state,
                                actions=(move,),
                                states=(),
                                values=(value,),
                            )
                            seq = codec.assemble_sequence(record, vocab)
                            writer.append(seq.tokens, game_idx, ply, "oracle")
                        continue
                    record = rollout_future(state, h, oracle, paradigm=paradigm)
                    if corruption:
                        record = corrupt_record(
                            record, corruption, rng, state_pool=state_pool, vocab=vocab
                        )
                    record.validate()
                    seq = codec.assemble_sequence(record, vocab)
                    writer.append(seq.tokens, game_idx, ply, record.provenance)
                except (RecordSkipped, EmptyRecord):
                    skipped += 1
        count = writer.count
    return {
        "path": str(out_path),
        "records": count,
        "games": len(games),
        "skipped": skipped,
        **meta,
    }


def decode_record(
    tokens: np.ndarray, paradigm: str, h: int, vocab: Optional[Vocabulary] = None
) -> FutureRecord:
    """Strict inverse of assemble_sequence for dataset round-trips."""
    vocab = vocab or Vocabulary.default()
    decoded = codec.decode_sequence(tokens, paradigm, h, vocab, strict=True)
    return FutureRecord(
        paradigm=paradigm,
        h=h,
        s0=decoded.s0,
        actions=tuple(decoded.actions),
        states=tuple(decoded.states),
        values=tuple(decoded.values),
    )
