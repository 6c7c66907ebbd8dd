"""Token codec: board states, moves and engine values <-> fixed-layout sequences.

A position is a fixed 77-character string (board expanded to 64 chars plus
padded FEN fields), every move is a single vocabulary token out of the 1968
geometrically possible UCI moves, and engine evaluations are discretized into
128 win-probability bins. Training sequences concatenate a conditioning state
with a paradigm-specific future layout.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Optional

import numpy as np

from . import chessboard as chess
from .chessboard import BoardState, Move

if TYPE_CHECKING:  # pragma: no cover
    from .data import FutureRecord

VOCAB_VERSION = 1
STATE_LEN = 77
VALUE_BIN_COUNT = 128
ACTION_COUNT = 1968

# Lichess centipawn -> win probability conversion constant.
WINPROB_CP_SCALE = 0.00368208
# Engine mate scores saturate to this sentinel before binning.
MATE_SCORE_CP = 32_000

PAD_TOKEN = "<pad>"
MASK_TOKEN = "<mask>"

PARADIGMS = ("s-a", "s-v", "sa-v", "s-aa", "s-asa", "s-ass", "s-avav", "s-avsav")


class UnknownAction(KeyError):
    """UCI text outside the 1968-entry action table."""


class LayoutError(ValueError):
    """Record components inconsistent with the (paradigm, horizon) layout."""


class DecodeError(ValueError):
    """Token span does not decode to a valid domain object."""


def _state_alphabet() -> list[str]:
    chars = set(chess.PIECE_CHARS) | set("0123456789") | set(chess.FILES)
    chars.update({".", "w", "-"})
    return sorted(chars)


def _enumerate_actions() -> list[str]:
    """All (from, to) pairs reachable by queen or knight geometry, plus promotions."""
    moves: set[str] = set()
    for from_sq in range(64):
        f, r = from_sq & 7, from_sq >> 3
        for df, dr in (
            (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
        ):
            nf, nr = f + df, r + dr
            while 0 <= nf < 8 and 0 <= nr < 8:
                moves.add(chess.square_name(from_sq) + chess.square_name(nr * 8 + nf))
                nf += df
                nr += dr
        for df, dr in ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2)):
            nf, nr = f + df, r + dr
            if 0 <= nf < 8 and 0 <= nr < 8:
                moves.add(chess.square_name(from_sq) + chess.square_name(nr * 8 + nf))
    for f in range(8):
        for from_rank, to_rank in ((6, 7), (1, 0)):
            origin = chess.square_name(chess.square(f, from_rank))
            for df in (-1, 0, 1):
                nf = f + df
                if 0 <= nf < 8:
                    target = chess.square_name(chess.square(nf, to_rank))
                    for promo in chess.PROMOTION_PIECES:
                        moves.add(origin + target + promo)
    table = sorted(moves)
    if len(table) != ACTION_COUNT:
        raise AssertionError(f"action enumeration drifted: {len(table)} != {ACTION_COUNT}")
    return table


def centipawn_to_bin(cp: float) -> int:
    """Discretize a centipawn score into one of 128 win-probability bins."""
    cp = max(-MATE_SCORE_CP, min(MATE_SCORE_CP, cp))
    win = 1.0 / (1.0 + math.exp(-WINPROB_CP_SCALE * cp))
    return min(int(win * VALUE_BIN_COUNT), VALUE_BIN_COUNT - 1)


def bin_win_probability(bin_index: int) -> float:
    """Midpoint win probability of a value bin."""
    return (bin_index + 0.5) / VALUE_BIN_COUNT


def bin_to_value(bin_index: int) -> float:
    """Map a value bin to a scalar in (-1, 1) via its win-probability midpoint."""
    return 2.0 * bin_win_probability(bin_index) - 1.0


def encode_state_chars(state: BoardState) -> str:
    """Fixed 77-character encoding of a position ('.'-padded FEN fields)."""
    if state.halfmove > 999 or state.fullmove > 999:
        raise ValueError("move clocks above 999 do not fit the fixed layout")
    board = "".join(
        state.squares[rank * 8 + file] for rank in range(7, -1, -1) for file in range(8)
    )
    castling = (state.castling or "-").ljust(4, ".")
    ep = (chess.square_name(state.ep) if state.ep is not None else "-").ljust(2, ".")
    text = (
        board
        + state.turn
        + castling
        + ep
        + str(state.halfmove).ljust(3, ".")
        + str(state.fullmove).ljust(3, ".")
    )
    assert len(text) == STATE_LEN
    return text


def decode_state_chars(text: str) -> BoardState:
    """Inverse of encode_state_chars. Raises DecodeError on any malformation."""
    if len(text) != STATE_LEN:
        raise DecodeError(f"state text must be {STATE_LEN} chars, got {len(text)}")
    rows = []
    for rank in range(8):
        row = ""
        empties = 0
        for ch in text[rank * 8 : rank * 8 + 8]:
            if ch == ".":
                empties += 1
            else:
                if empties:
                    row += str(empties)
                    empties = 0
                row += ch
        if empties:
            row += str(empties)
        rows.append(row)
    placement = "/".join(rows)
    side = text[64]
    castling = text[65:69].rstrip(".")
    ep = text[69:71].rstrip(".")
    halfmove = text[71:74].rstrip(".")
    fullmove = text[74:77].rstrip(".")
    fen = f"{placement} {side} {castling or '-'} {ep or '-'} {halfmove} {fullmove}"
    try:
        return BoardState.from_fen(fen)
    except (ValueError, IndexError) as exc:
        raise DecodeError(f"not a valid state encoding: {exc}") from exc


def future_layout(paradigm: str, h: int) -> list[tuple[str, int]]:
    """Future spans after the conditioning state, as (kind, step) pairs.

    Kinds are 'action', 'state', 'value'; step j refers to a_j / v_j / s_j
    (future states start at s_1, the successor of the conditioning state).
    """
    if paradigm not in PARADIGMS:
        raise LayoutError(f"unknown paradigm {paradigm!r}")
    if h < 1:
        raise LayoutError("horizon must be >= 1")
    if paradigm in ("s-a", "s-v", "sa-v") and h != 1:
        raise LayoutError(f"{paradigm} requires horizon 1, got {h}")

    if paradigm == "s-a":
        return [("action", 0)]
    if paradigm == "s-v":
        return [("value", 0)]
    if paradigm == "sa-v":
        return [("action", 0), ("value", 0)]
    if paradigm == "s-aa":
        return [("action", j) for j in range(h)]
    if paradigm == "s-ass":
        return [("action", 0)] + [("state", j) for j in range(1, h)]

    spans: list[tuple[str, int]] = []
    for j in range(h):
        spans.append(("action", j))
        if paradigm in ("s-avav", "s-avsav"):
            spans.append(("value", j))
        if paradigm in ("s-asa", "s-avsav") and j + 1 < h:
            spans.append(("state", j + 1))
    return spans


def span_length(kind: str) -> int:
    return STATE_LEN if kind == "state" else 1


def sequence_length(paradigm: str, h: int) -> int:
    return STATE_LEN + sum(span_length(kind) for kind, _ in future_layout(paradigm, h))


@dataclass(frozen=True)
class TokenSequence:
    """A laid-out token sequence x0 = state || future spans."""

    tokens: np.ndarray
    paradigm: str
    h: int
    state_len: int = STATE_LEN

    def __post_init__(self) -> None:
        expected = sequence_length(self.paradigm, self.h)
        if len(self.tokens) != expected:
            raise LayoutError(
                f"sequence for ({self.paradigm}, h={self.h}) must have {expected} tokens,"
                f" got {len(self.tokens)}"
            )

    def __len__(self) -> int:
        return len(self.tokens)


class Vocabulary:
    """Immutable unified token vocabulary: specials, state chars, actions, value bins."""

    _default: Optional["Vocabulary"] = None

    def __init__(self, tokens: list[str], version: int = VOCAB_VERSION):
        self.version = version
        self.tokens = list(tokens)
        self.token_to_id = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.token_to_id) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.pad_id = self.token_to_id[PAD_TOKEN]
        self.mask_id = self.token_to_id[MASK_TOKEN]
        self.state_alphabet = _state_alphabet()
        self.state_base = self.token_to_id[self.state_alphabet[0]]
        self.action_table = [t for t in self.tokens if _looks_like_action(t)]
        self.action_base = self.token_to_id[self.action_table[0]]
        self.value_base = self.token_to_id["v000"]
        self._action_index = {uci: i for i, uci in enumerate(self.action_table)}
        self.size = len(self.tokens)

    # --- construction / persistence ---

    @classmethod
    def build(cls) -> "Vocabulary":
        tokens = [PAD_TOKEN, MASK_TOKEN]
        tokens += _state_alphabet()
        tokens += _enumerate_actions()
        tokens += [f"v{b:03d}" for b in range(VALUE_BIN_COUNT)]
        return cls(tokens)

    def to_json(self) -> str:
        return json.dumps({"version": self.version, "tokens": self.tokens}, indent=0)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        payload = json.loads(text)
        return cls(payload["tokens"], version=payload["version"])

    @classmethod
    def default(cls) -> "Vocabulary":
        if cls._default is None:
            golden = Path(__file__).with_name("vocab.json")
            if golden.exists():
                cls._default = cls.from_json(golden.read_text())
            else:  # pragma: no cover - golden file is checked in
                cls._default = cls.build()
        return cls._default

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    # --- lookups ---

    def action_index(self, move_text: str) -> int:
        """Stable index of a UCI move in the sorted 1968-entry table."""
        try:
            return self._action_index[move_text]
        except KeyError:
            raise UnknownAction(move_text) from None

    def action_id(self, move_text: str) -> int:
        return self.action_base + self.action_index(move_text)

    def action_from_id(self, token_id: int) -> str:
        if not self.is_action_id(token_id):
            raise UnknownAction(f"token id {token_id} is not an action")
        return self.action_table[token_id - self.action_base]

    def is_action_id(self, token_id: int) -> bool:
        return self.action_base <= token_id < self.action_base + ACTION_COUNT

    def value_id(self, bin_index: int) -> int:
        if not 0 <= bin_index < VALUE_BIN_COUNT:
            raise ValueError(f"value bin out of range: {bin_index}")
        return self.value_base + bin_index

    def value_bin_from_id(self, token_id: int) -> int:
        if not self.is_value_id(token_id):
            raise DecodeError(f"token id {token_id} is not a value bin")
        return token_id - self.value_base

    def is_value_id(self, token_id: int) -> bool:
        return self.value_base <= token_id < self.value_base + VALUE_BIN_COUNT

    # --- state encoding ---

    def encode_state(self, state: BoardState) -> np.ndarray:
        chars = encode_state_chars(state)
        return np.array([self.token_to_id[c] for c in chars], dtype=np.int64)

    def decode_state(self, tokens: np.ndarray) -> BoardState:
        try:
            chars = "".join(self.tokens[int(t)] for t in tokens)
        except IndexError as exc:
            raise DecodeError("token id out of range") from exc
        if len(chars) != STATE_LEN:
            raise DecodeError("state span contains multi-character tokens")
        return decode_state_chars(chars)


def _looks_like_action(token: str) -> bool:
    if len(token) not in (4, 5):
        return False
    return (
        token[0] in chess.FILES
        and token[1] in chess.RANKS
        and token[2] in chess.FILES
        and token[3] in chess.RANKS
        and (len(token) == 4 or token[4] in chess.PROMOTION_PIECES)
    )


def assemble_sequence(record: "FutureRecord", vocab: Vocabulary) -> TokenSequence:
    """Lay out a training record as tokens: state first, then the future spans.

    Missing components (futures truncated at a terminal state) fill their span
    with the pad token.
    """
    spans = future_layout(record.paradigm, record.h)
    out = np.empty(sequence_length(record.paradigm, record.h), dtype=np.int64)
    out[:STATE_LEN] = vocab.encode_state(record.s0)
    pos = STATE_LEN
    for kind, step in spans:
        width = span_length(kind)
        component = record.component(kind, step)
        if component is None:
            out[pos : pos + width] = vocab.pad_id
        elif kind == "state":
            out[pos : pos + width] = vocab.encode_state(component)
        elif kind == "action":
            out[pos] = vocab.action_id(component.uci())
        else:
            out[pos] = vocab.value_id(component)
        pos += width
    return TokenSequence(tokens=out, paradigm=record.paradigm, h=record.h)


@dataclass
class DecodedSequence:
    """Best-effort decode of a token sequence; undecodable spans come back None."""

    s0: Optional[BoardState]
    actions: list[Optional[Move]]
    states: list[Optional[BoardState]]  # states[j] is s_{j+1}
    values: list[Optional[int]]
    paradigm: str
    h: int
    errors: list[str] = field(default_factory=list)


def decode_sequence(
    tokens: np.ndarray, paradigm: str, h: int, vocab: Vocabulary, strict: bool = False
) -> DecodedSequence:
    """Parse a laid-out sequence back into domain objects.

    With strict=True any undecodable span raises DecodeError; otherwise it is
    recorded as None plus an error note (pad-filled spans are None, no error).
    """
    expected = sequence_length(paradigm, h)
    if len(tokens) != expected:
        raise LayoutError(f"expected {expected} tokens, got {len(tokens)}")
    result = DecodedSequence(
        s0=None,
        actions=[None] * h,
        states=[None] * max(h - 1, 0),
        values=[None] * h,
        paradigm=paradigm,
        h=h,
    )

    def attempt(label: str, fn):
        try:
            return fn()
        except (DecodeError, UnknownAction, ValueError) as exc:
            if strict:
                raise DecodeError(f"{label}: {exc}") from exc
            result.errors.append(f"{label}: {exc}")
            return None

    result.s0 = attempt("s0", lambda: vocab.decode_state(tokens[:STATE_LEN]))
    pos = STATE_LEN
    for kind, step in future_layout(paradigm, h):
        width = span_length(kind)
        span = tokens[pos : pos + width]
        pos += width
        if all(int(t) == vocab.pad_id for t in span):
            continue
        if kind == "state":
            result.states[step - 1] = attempt(
                f"s{step}", lambda s=span: vocab.decode_state(s)
            )
        elif kind == "action":
            result.actions[step] = attempt(
                f"a{step}", lambda t=int(span[0]): Move.from_uci(vocab.action_from_id(t))
            )
        else:
            result.values[step] = attempt(
                f"v{step}", lambda t=int(span[0]): vocab.value_bin_from_id(t)
            )
    return result
