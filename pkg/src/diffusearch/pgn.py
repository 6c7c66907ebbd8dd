"""Minimal PGN reader: tag pairs + movetext with comments, variations and NAGs
stripped. SAN tokens are resolved against the move generator.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import chessboard as chess
from .chessboard import BoardState, Move

_TAG_RE = re.compile(r'^\[(\w+)\s+"(.*)"\]\s*$')
_RESULTS = ("1-0", "0-1", "1/2-1/2", "*")


class PgnError(ValueError):
    pass


@dataclass
class Game:
    tags: dict = field(default_factory=dict)
    moves: list = field(default_factory=list)
    result: str = "*"

    def initial_state(self) -> BoardState:
        if "FEN" in self.tags:
            return BoardState.from_fen(self.tags["FEN"])
        return BoardState.initial()

    def positions(self) -> list[BoardState]:
        """Every position visited, including the final one."""
        states = [self.initial_state()]
        for move in self.moves:
            states.append(chess.apply_legal(states[-1], move))
        return states


def _strip_braces(text: str) -> str:
    out, depth = [], 0
    for ch in text:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth = max(depth - 1, 0)
        elif depth == 0:
            out.append(ch)
    return "".join(out)


def _strip_variations(text: str) -> str:
    out, depth = [], 0
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth = max(depth - 1, 0)
        elif depth == 0:
            out.append(ch)
    return "".join(out)


def _parse_movetext(text: str, start: BoardState) -> tuple[list[Move], str]:
    text = _strip_variations(_strip_braces(text))
    moves: list[Move] = []
    state = start
    result = "*"
    for token in text.split():
        if token in _RESULTS:
            result = token
            break
        if token.startswith("$"):
            continue
        token = re.sub(r"^\d+\.+", "", token)
        if not token:
            continue
        move = chess.parse_san(state, token)
        moves.append(move)
        state = chess.apply_legal(state, move)
    return moves, result


def parse_games(text: str) -> list[Game]:
    """Parse every game in a PGN document. Raises PgnError on bad movetext."""
    games: list[Game] = []
    tags: dict = {}
    movetext_lines: list[str] = []

    def flush() -> None:
        nonlocal tags, movetext_lines
        if not tags and not movetext_lines:
            return
        game = Game(tags=tags)
        body = " ".join(movetext_lines)
        try:
            game.moves, game.result = _parse_movetext(body, game.initial_state())
        except (chess.IllegalMoveError, chess.MalformedState, ValueError) as exc:
            raise PgnError(f"bad movetext: {exc}") from exc
        games.append(game)
        tags, movetext_lines = {}, []

    in_movetext = False
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        match = _TAG_RE.match(stripped)
        if match:
            if in_movetext:
                flush()
                in_movetext = False
            tags[match.group(1)] = match.group(2)
        else:
            in_movetext = True
            movetext_lines.append(stripped)
    flush()
    return games


def parse_games_lenient(text: str) -> tuple[list[Game], int]:
    """Parse games one movetext block at a time, skipping malformed ones.

    Returns (games, skipped_count).
    """
    blocks: list[str] = []
    current: list[str] = []
    saw_movetext = False
    for line in text.splitlines():
        stripped = line.strip()
        if _TAG_RE.match(stripped) and saw_movetext:
            blocks.append("\n".join(current))
            current, saw_movetext = [], False
        if stripped and not _TAG_RE.match(stripped):
            saw_movetext = True
        current.append(line)
    if any(l.strip() for l in current):
        blocks.append("\n".join(current))

    games, skipped = [], 0
    for block in blocks:
        try:
            games.extend(parse_games(block))
        except PgnError:
            skipped += 1
    return games, skipped


def game_to_pgn(game: Game) -> str:
    """Render a game back to PGN text (seven-tag roster not enforced)."""
    lines = [f'[{key} "{value}"]' for key, value in game.tags.items()]
    lines.append("")
    state = game.initial_state()
    tokens = []
    for i, move in enumerate(game.moves):
        if state.turn == chess.WHITE:
            tokens.append(f"{state.fullmove}.")
        elif i == 0:
            tokens.append(f"{state.fullmove}...")
        tokens.append(chess.san(state, move))
        state = chess.apply_legal(state, move)
    tokens.append(game.result)
    lines.append(" ".join(tokens))
    return "\n".join(lines) + "\n"
