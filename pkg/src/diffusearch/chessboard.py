"""Rules-complete chess: positions, legal move generation, transitions, outcomes.

Board squares are indexed 0..63 with a1=0, b1=1, ..., h8=63 (rank-major from
White's side). All public operations are pure functions on immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

WHITE = "w"
BLACK = "b"

PIECE_CHARS = "PNBRQKpnbrqk"
PROMOTION_PIECES = ("q", "r", "b", "n")

FILES = "abcdefgh"
RANKS = "12345678"

STARTING_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1"

# (file delta, rank delta)
_KNIGHT_STEPS = ((1, 2), (2, 1), (2, -1), (1, -2), (-1, -2), (-2, -1), (-2, 1), (-1, 2))
_KING_STEPS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
_BISHOP_DIRS = ((1, 1), (-1, 1), (-1, -1), (1, -1))
_ROOK_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))
_QUEEN_DIRS = _BISHOP_DIRS + _ROOK_DIRS


class MalformedState(ValueError):
    """The state violates a structural invariant (bad FEN, missing king, ...)."""


class IllegalMoveError(ValueError):
    """The move is not legal in the given position."""


def square(file: int, rank: int) -> int:
    return rank * 8 + file


def square_file(sq: int) -> int:
    return sq & 7


def square_rank(sq: int) -> int:
    return sq >> 3


def square_name(sq: int) -> str:
    return FILES[sq & 7] + RANKS[sq >> 3]


def parse_square(name: str) -> int:
    if len(name) != 2 or name[0] not in FILES or name[1] not in RANKS:
        raise ValueError(f"bad square name: {name!r}")
    return square(FILES.index(name[0]), RANKS.index(name[1]))


def piece_color(piece: str) -> str:
    return WHITE if piece.isupper() else BLACK


def opponent(color: str) -> str:
    return BLACK if color == WHITE else WHITE


@dataclass(frozen=True, slots=True)
class Move:
    """A move in coordinate form: from-square, to-square, optional promotion."""

    from_sq: int
    to_sq: int
    promotion: Optional[str] = None

    def __post_init__(self) -> None:
        if self.from_sq == self.to_sq:
            raise ValueError("from and to squares must differ")
        if self.promotion is not None and self.promotion not in PROMOTION_PIECES:
            raise ValueError(f"bad promotion piece: {self.promotion!r}")

    def uci(self) -> str:
        text = square_name(self.from_sq) + square_name(self.to_sq)
        return text + self.promotion if self.promotion else text

    @classmethod
    def from_uci(cls, text: str) -> "Move":
        if len(text) not in (4, 5):
            raise ValueError(f"bad UCI move: {text!r}")
        promotion = text[4] if len(text) == 5 else None
        return cls(parse_square(text[:2]), parse_square(text[2:4]), promotion)

    def __str__(self) -> str:  # pragma: no cover - convenience
        return self.uci()


@dataclass(frozen=True, slots=True)
class GameOutcome:
    """Terminal game result. `white_value` is +1/-1/0 from White's perspective."""

    white_value: int
    reason: str  # "checkmate" | "stalemate" | "draw-rule"

    def value_for(self, color: str) -> int:
        return self.white_value if color == WHITE else -self.white_value


@dataclass(frozen=True, slots=True)
class BoardState:
    """Immutable chess position.

    `squares` holds 64 one-character entries ('.', or a piece from PIECE_CHARS),
    `castling` is the canonical subset of "KQkq" still available ('' if none),
    `ep` is the en-passant target square or None.
    """

    squares: tuple
    turn: str
    castling: str
    ep: Optional[int]
    halfmove: int
    fullmove: int

    @classmethod
    def initial(cls) -> "BoardState":
        return cls.from_fen(STARTING_FEN)

    @classmethod
    def from_fen(cls, fen: str) -> "BoardState":
        parts = fen.split()
        if len(parts) != 6:
            raise MalformedState(f"FEN must have 6 fields, got {len(parts)}")
        placement, turn, castling, ep_text, halfmove, fullmove = parts

        rows = placement.split("/")
        if len(rows) != 8:
            raise MalformedState("FEN placement must have 8 ranks")
        squares = ["."] * 64
        for rank_idx, row in enumerate(rows):
            rank = 7 - rank_idx
            file = 0
            for ch in row:
                if ch.isdigit():
                    file += int(ch)
                elif ch in PIECE_CHARS:
                    if file > 7:
                        raise MalformedState(f"rank overflow in FEN row {row!r}")
                    squares[square(file, rank)] = ch
                    file += 1
                else:
                    raise MalformedState(f"bad placement char {ch!r}")
            if file != 8:
                raise MalformedState(f"rank {row!r} does not cover 8 files")

        if turn not in (WHITE, BLACK):
            raise MalformedState(f"bad side to move {turn!r}")
        if castling != "-" and (not castling or any(c not in "KQkq" for c in castling)):
            raise MalformedState(f"bad castling field {castling!r}")
        canonical = "".join(c for c in "KQkq" if c in castling)
        ep = None if ep_text == "-" else parse_square(ep_text)

        state = cls(
            squares=tuple(squares),
            turn=turn,
            castling=canonical,
            ep=ep,
            halfmove=int(halfmove),
            fullmove=int(fullmove),
        )
        state.validate()
        return state

    def to_fen(self) -> str:
        rows = []
        for rank in range(7, -1, -1):
            row = ""
            empties = 0
            for file in range(8):
                piece = self.squares[square(file, rank)]
                if piece == ".":
                    empties += 1
                else:
                    if empties:
                        row += str(empties)
                        empties = 0
                    row += piece
            if empties:
                row += str(empties)
            rows.append(row)
        castling = self.castling if self.castling else "-"
        ep_text = square_name(self.ep) if self.ep is not None else "-"
        return " ".join(
            ["/".join(rows), self.turn, castling, ep_text, str(self.halfmove), str(self.fullmove)]
        )

    def validate(self) -> None:
        if len(self.squares) != 64:
            raise MalformedState("board must have 64 squares")
        for piece in self.squares:
            if piece != "." and piece not in PIECE_CHARS:
                raise MalformedState(f"bad piece char {piece!r}")
        if self.squares.count("K") != 1 or self.squares.count("k") != 1:
            raise MalformedState("each side must have exactly one king")
        if self.ep is not None and square_rank(self.ep) not in (2, 5):
            raise MalformedState("en-passant square must lie on rank 3 or 6")
        if self.halfmove < 0 or self.fullmove < 1:
            raise MalformedState("bad move clocks")
        # The side that just moved must not have left its king in check.
        other = opponent(self.turn)
        if _attacked(self.squares, _king_square(self.squares, other), self.turn):
            raise MalformedState("side not to move is in check")

    def piece_at(self, sq: int) -> str:
        return self.squares[sq]

    def king_square(self, color: str) -> int:
        return _king_square(self.squares, color)

    def repetition_key(self) -> tuple:
        """Position identity for repetition counting (clocks excluded)."""
        return (self.squares, self.turn, self.castling, self.ep)


def _king_square(squares: tuple, color: str) -> int:
    king = "K" if color == WHITE else "k"
    return squares.index(king)


def _attacked(squares: tuple, sq: int, by: str) -> bool:
    """Is `sq` attacked by any piece of color `by`?"""
    f, r = sq & 7, sq >> 3
    pawn, knight, bishop, rook, queen, king = (
        ("P", "N", "B", "R", "Q", "K") if by == WHITE else ("p", "n", "b", "r", "q", "k")
    )
    # Pawns attack towards higher ranks for White, lower for Black.
    dr = -1 if by == WHITE else 1
    for df in (-1, 1):
        nf, nr = f + df, r + dr
        if 0 <= nf < 8 and 0 <= nr < 8 and squares[nr * 8 + nf] == pawn:
            return True
    for df, dr in _KNIGHT_STEPS:
        nf, nr = f + df, r + dr
        if 0 <= nf < 8 and 0 <= nr < 8 and squares[nr * 8 + nf] == knight:
            return True
    for df, dr in _KING_STEPS:
        nf, nr = f + df, r + dr
        if 0 <= nf < 8 and 0 <= nr < 8 and squares[nr * 8 + nf] == king:
            return True
    for df, dr in _BISHOP_DIRS:
        nf, nr = f + df, r + dr
        while 0 <= nf < 8 and 0 <= nr < 8:
            piece = squares[nr * 8 + nf]
            if piece != ".":
                if piece == bishop or piece == queen:
                    return True
                break
            nf += df
            nr += dr
    for df, dr in _ROOK_DIRS:
        nf, nr = f + df, r + dr
        while 0 <= nf < 8 and 0 <= nr < 8:
            piece = squares[nr * 8 + nf]
            if piece != ".":
                if piece == rook or piece == queen:
                    return True
                break
            nf += df
            nr += dr
    return False


def is_check(state: BoardState) -> bool:
    """True if the side to move is in check."""
    return _attacked(state.squares, state.king_square(state.turn), opponent(state.turn))


def _pseudo_moves_from(state: BoardState, sq: int) -> Iterator[Move]:
    """Pseudo-legal moves of the piece on `sq` (king safety not yet checked)."""
    squares = state.squares
    piece = squares[sq]
    color = piece_color(piece)
    f, r = sq & 7, sq >> 3
    kind = piece.upper()

    if kind == "P":
        forward = 1 if color == WHITE else -1
        start_rank = 1 if color == WHITE else 6
        last_rank = 7 if color == WHITE else 0
        one = sq + 8 * forward
        if squares[one] == ".":
            if square_rank(one) == last_rank:
                for promo in PROMOTION_PIECES:
                    yield Move(sq, one, promo)
            else:
                yield Move(sq, one)
            two = sq + 16 * forward
            if r == start_rank and squares[two] == ".":
                yield Move(sq, two)
        for df in (-1, 1):
            nf = f + df
            if not 0 <= nf < 8:
                continue
            target = square(nf, r + forward)
            victim = squares[target]
            if victim != "." and piece_color(victim) != color:
                if square_rank(target) == last_rank:
                    for promo in PROMOTION_PIECES:
                        yield Move(sq, target, promo)
                else:
                    yield Move(sq, target)
            elif state.ep is not None and target == state.ep:
                yield Move(sq, target)
        return

    if kind == "N" or kind == "K":
        steps = _KNIGHT_STEPS if kind == "N" else _KING_STEPS
        for df, dr in steps:
            nf, nr = f + df, r + dr
            if 0 <= nf < 8 and 0 <= nr < 8:
                target = nr * 8 + nf
                victim = squares[target]
                if victim == "." or piece_color(victim) != color:
                    yield Move(sq, target)
        if kind == "K":
            yield from _castling_moves(state, sq, color)
        return

    dirs = {"B": _BISHOP_DIRS, "R": _ROOK_DIRS, "Q": _QUEEN_DIRS}[kind]
    for df, dr in dirs:
        nf, nr = f + df, r + dr
        while 0 <= nf < 8 and 0 <= nr < 8:
            target = nr * 8 + nf
            victim = squares[target]
            if victim == ".":
                yield Move(sq, target)
            else:
                if piece_color(victim) != color:
                    yield Move(sq, target)
                break
            nf += df
            nr += dr


def _castling_moves(state: BoardState, king_sq: int, color: str) -> Iterator[Move]:
    squares = state.squares
    enemy = opponent(color)
    home = 0 if color == WHITE else 56
    if king_sq != home + 4:
        return
    kingside, queenside = ("K", "Q") if color == WHITE else ("k", "q")
    rook = "R" if color == WHITE else "r"
    if (
        kingside in state.castling
        and squares[home + 7] == rook
        and squares[home + 5] == "."
        and squares[home + 6] == "."
        and not _attacked(squares, home + 4, enemy)
        and not _attacked(squares, home + 5, enemy)
        and not _attacked(squares, home + 6, enemy)
    ):
        yield Move(home + 4, home + 6)
    if (
        queenside in state.castling
        and squares[home] == rook
        and squares[home + 1] == "."
        and squares[home + 2] == "."
        and squares[home + 3] == "."
        and not _attacked(squares, home + 4, enemy)
        and not _attacked(squares, home + 3, enemy)
        and not _attacked(squares, home + 2, enemy)
    ):
        yield Move(home + 4, home + 2)


def _apply_unchecked(state: BoardState, move: Move) -> BoardState:
    """Apply a pseudo-legal move without any legality verification."""
    squares = list(state.squares)
    piece = squares[move.from_sq]
    color = state.turn
    kind = piece.upper()
    captured = squares[move.to_sq]

    squares[move.from_sq] = "."
    squares[move.to_sq] = piece

    # En-passant capture removes the pawn behind the target square.
    if kind == "P" and state.ep is not None and move.to_sq == state.ep and captured == ".":
        behind = move.to_sq - 8 if color == WHITE else move.to_sq + 8
        captured = squares[behind]
        squares[behind] = "."

    if move.promotion:
        squares[move.to_sq] = move.promotion.upper() if color == WHITE else move.promotion

    # Castling: king moved two files, bring the rook across.
    if kind == "K" and abs((move.to_sq & 7) - (move.from_sq & 7)) == 2:
        home = 0 if color == WHITE else 56
        if move.to_sq == home + 6:
            squares[home + 5] = squares[home + 7]
            squares[home + 7] = "."
        else:
            squares[home + 3] = squares[home]
            squares[home] = "."

    castling = state.castling
    if castling:
        drop = ""
        if kind == "K":
            drop = "KQ" if color == WHITE else "kq"
        elif kind == "R":
            drop += {0: "Q", 7: "K", 56: "q", 63: "k"}.get(move.from_sq, "")
        drop += {0: "Q", 7: "K", 56: "q", 63: "k"}.get(move.to_sq, "")
        if drop:
            castling = "".join(c for c in castling if c not in drop)

    ep = None
    if kind == "P" and abs(move.to_sq - move.from_sq) == 16:
        ep = (move.from_sq + move.to_sq) // 2

    is_capture = captured != "."
    halfmove = 0 if (kind == "P" or is_capture) else state.halfmove + 1
    fullmove = state.fullmove + (1 if color == BLACK else 0)

    return BoardState(
        squares=tuple(squares),
        turn=opponent(color),
        castling=castling,
        ep=ep,
        halfmove=halfmove,
        fullmove=fullmove,
    )


def legal_moves(state: BoardState) -> list[Move]:
    """All legal moves in `state`, sorted by UCI text (deterministic order)."""
    moves = []
    mover = state.turn
    for sq, piece in enumerate(state.squares):
        if piece == "." or piece_color(piece) != mover:
            continue
        for move in _pseudo_moves_from(state, sq):
            after = _apply_unchecked(state, move)
            if not _attacked(after.squares, _king_square(after.squares, mover), after.turn):
                moves.append(move)
    moves.sort(key=Move.uci)
    return moves


def apply(state: BoardState, move: Move) -> BoardState:
    """Successor of `state` after `move`. Raises IllegalMoveError, never corrupts."""
    piece = state.squares[move.from_sq]
    if piece == "." or piece_color(piece) != state.turn:
        raise IllegalMoveError(f"{move.uci()}: no {state.turn} piece on {square_name(move.from_sq)}")
    for candidate in _pseudo_moves_from(state, move.from_sq):
        if candidate == move:
            after = _apply_unchecked(state, move)
            if _attacked(after.squares, _king_square(after.squares, state.turn), after.turn):
                raise IllegalMoveError(f"{move.uci()} leaves the king in check")
            return after
    raise IllegalMoveError(f"{move.uci()} is not a legal move")


def apply_legal(state: BoardState, move: Move) -> BoardState:
    """Fast path for moves already known legal (e.g. drawn from legal_moves)."""
    return _apply_unchecked(state, move)


def _insufficient_material(squares: tuple) -> bool:
    minors = []
    for sq, piece in enumerate(squares):
        if piece == "." or piece.upper() == "K":
            continue
        if piece.upper() in ("P", "R", "Q"):
            return False
        minors.append((piece, sq))
    if len(minors) <= 1:
        return True
    # Only bishops, all on the same square color, cannot ever mate.
    if all(p.upper() == "B" for p, _ in minors):
        colors = {(square_file(sq) + square_rank(sq)) & 1 for _, sq in minors}
        return len(colors) == 1
    return False


def outcome(state: BoardState) -> Optional[GameOutcome]:
    """Terminal result of `state`, or None if the game continues."""
    if not legal_moves(state):
        if is_check(state):
            return GameOutcome(white_value=1 if state.turn == BLACK else -1, reason="checkmate")
        return GameOutcome(white_value=0, reason="stalemate")
    if state.halfmove >= 100:
        return GameOutcome(white_value=0, reason="draw-rule")
    if _insufficient_material(state.squares):
        return GameOutcome(white_value=0, reason="draw-rule")
    return None


def perft(state: BoardState, depth: int) -> int:
    """Exhaustive legal-move leaf count to `depth` (move-generator certification)."""
    if depth == 0:
        return 1
    total = 0
    for move in legal_moves(state):
        child = _apply_unchecked(state, move)
        total += perft(child, depth - 1) if depth > 1 else 1
    return total


def san(state: BoardState, move: Move) -> str:
    """Standard algebraic notation for a legal move (with +/# suffix)."""
    piece = state.squares[move.from_sq]
    kind = piece.upper()
    after = apply_legal(state, move)
    suffix = ""
    if is_check(after):
        suffix = "#" if not legal_moves(after) else "+"

    if kind == "K" and abs((move.to_sq & 7) - (move.from_sq & 7)) == 2:
        base = "O-O" if move.to_sq > move.from_sq else "O-O-O"
        return base + suffix

    capture = state.squares[move.to_sq] != "." or (
        kind == "P" and state.ep is not None and move.to_sq == state.ep
    )
    dest = square_name(move.to_sq)

    if kind == "P":
        text = (square_name(move.from_sq)[0] + "x" + dest) if capture else dest
        if move.promotion:
            text += "=" + move.promotion.upper()
        return text + suffix

    # Disambiguate among same-kind pieces that can also reach the target.
    rivals = [
        m
        for m in legal_moves(state)
        if m.to_sq == move.to_sq
        and m.from_sq != move.from_sq
        and state.squares[m.from_sq].upper() == kind
    ]
    disambig = ""
    if rivals:
        same_file = any((m.from_sq & 7) == (move.from_sq & 7) for m in rivals)
        same_rank = any((m.from_sq >> 3) == (move.from_sq >> 3) for m in rivals)
        if not same_file:
            disambig = square_name(move.from_sq)[0]
        elif not same_rank:
            disambig = square_name(move.from_sq)[1]
        else:
            disambig = square_name(move.from_sq)
    return kind + disambig + ("x" if capture else "") + dest + suffix


def parse_san(state: BoardState, text: str) -> Move:
    """Resolve a SAN token (annotations tolerated) to a legal move."""
    cleaned = text.rstrip("+#!?").replace("0-0-0", "O-O-O").replace("0-0", "O-O")
    for move in legal_moves(state):
        if san(state, move).rstrip("+#") == cleaned:
            return move
    raise IllegalMoveError(f"SAN {text!r} matches no legal move")
