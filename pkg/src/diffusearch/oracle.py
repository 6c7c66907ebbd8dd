"""Engine oracles that label positions: a builtin depth-limited negamax with
material evaluation (hermetic, used by CI and desk-scale runs) and a UCI
subprocess client for external engines.

Scores are centipawns from the side-to-move perspective; mate collapses to the
+/- sentinel consumed by the value-bin codec.
"""

from __future__ import annotations

import os
import select
import subprocess
import time
from typing import Optional

from . import chessboard as chess
from .chessboard import BoardState, Move
from .codec import MATE_SCORE_CP

MATERIAL = {"P": 100, "N": 320, "B": 330, "R": 500, "Q": 900, "K": 0}

_MATE = 1_000_000


class OracleError(RuntimeError):
    pass


def material_eval(state: BoardState) -> int:
    """Static material balance in centipawns for the side to move."""
    score = 0
    for piece in state.squares:
        if piece == ".":
            continue
        value = MATERIAL[piece.upper()]
        score += value if piece.isupper() else -value
    return score if state.turn == chess.WHITE else -score


class ToyOracle:
    """Deterministic depth-limited negamax over material. Pure function of the
    position; lets the whole pipeline run with zero external dependencies."""

    kind = "builtin-toy"

    def __init__(self, depth: int = 2):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        self.depth = depth

    def identity(self) -> str:
        return f"toy-negamax-d{self.depth}-material"

    def _negamax(self, state: BoardState, depth: int, ply: int, alpha: int, beta: int) -> int:
        moves = chess.legal_moves(state)
        if not moves:
            return -(_MATE - ply) if chess.is_check(state) else 0
        if state.halfmove >= 100 or chess._insufficient_material(state.squares):
            return 0
        if depth == 0:
            return material_eval(state)
        best = -_MATE
        for move in moves:
            child = chess.apply_legal(state, move)
            score = -self._negamax(child, depth - 1, ply + 1, -beta, -alpha)
            if score > best:
                best = score
            if best > alpha:
                alpha = best
            if alpha >= beta:
                break
        return best

    def _clamp(self, score: int) -> int:
        return max(-MATE_SCORE_CP, min(MATE_SCORE_CP, score))

    def evaluate(self, state: BoardState) -> int:
        """Search value of the position (side to move)."""
        return self._clamp(self._negamax(state, self.depth, 0, -_MATE, _MATE))

    def evaluate_move(self, state: BoardState, move: Move) -> int:
        """Q(s, a) for the mover: value after playing `move`."""
        child = chess.apply(state, move)
        return self._clamp(-self._negamax(child, self.depth - 1, 1, -_MATE, _MATE))

    def best_move_and_eval(self, state: BoardState) -> tuple[Move, int]:
        moves = chess.legal_moves(state)
        if not moves:
            raise OracleError("terminal position has no best move")
        best_move, best_score = None, -_MATE - 1
        alpha, beta = -_MATE, _MATE
        for move in moves:
            child = chess.apply_legal(state, move)
            score = -self._negamax(child, self.depth - 1, 1, -beta, -alpha)
            if score > best_score:
                best_move, best_score = move, score
            if best_score > alpha:
                alpha = best_score
        return best_move, self._clamp(best_score)

    def best_move(self, state: BoardState) -> Move:
        return self.best_move_and_eval(state)[0]


class UciOracle:
    """UCI wire-protocol client speaking to an engine subprocess over stdio.

    Command framing: "uci" -> "uciok", "isready" -> "readyok", then per query
    "position fen ..." + "go movetime ..." -> "info ... score (cp|mate) ..."
    lines followed by "bestmove ...".
    """

    kind = "external-uci"

    def __init__(self, command: list[str] | str, movetime: float = 0.05, timeout: float = 30.0):
        if isinstance(command, str):
            command = [command]
        self.command = command
        self.movetime = movetime
        self.timeout = timeout
        self.name = "unknown"
        self._buffer = b""
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
        )
        self._send("uci")
        for line in self._read_until(("uciok",)):
            if line.startswith("id name "):
                self.name = line[len("id name ") :].strip()
        self._send("isready")
        self._read_until(("readyok",))

    def identity(self) -> str:
        return f"uci:{self.name}@{self.movetime}s"

    def _send(self, line: str) -> None:
        if self._proc.poll() is not None:
            raise OracleError("engine process exited")
        self._proc.stdin.write((line + "\n").encode())
        self._proc.stdin.flush()

    def _read_line(self, deadline: float) -> str:
        # Raw fd reads with our own line buffer: select + buffered readline
        # would block on a drained pipe while lines sit in the buffer.
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise OracleError("engine read timeout")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise OracleError("engine read timeout")
            chunk = os.read(fd, 4096)
            if not chunk:
                raise OracleError("engine closed its output")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line.decode(errors="replace").strip()

    def _read_until(self, sentinels: tuple[str, ...]) -> list[str]:
        lines = []
        deadline = time.monotonic() + self.timeout
        while True:
            line = self._read_line(deadline)
            lines.append(line)
            if any(line == s or line.startswith(s + " ") for s in sentinels):
                return lines

    def new_game(self) -> None:
        self._send("ucinewgame")
        self._send("isready")
        self._read_until(("readyok",))

    def _query(self, state: BoardState) -> tuple[str, int]:
        self._send(f"position fen {state.to_fen()}")
        self._send(f"go movetime {int(self.movetime * 1000)}")
        score: Optional[int] = None
        lines = self._read_until(("bestmove",))
        for line in lines:
            if not line.startswith("info "):
                continue
            parts = line.split()
            if "score" in parts:
                i = parts.index("score")
                kind, raw = parts[i + 1], int(parts[i + 2])
                if kind == "cp":
                    score = max(-MATE_SCORE_CP, min(MATE_SCORE_CP, raw))
                elif kind == "mate":
                    score = MATE_SCORE_CP if raw > 0 else -MATE_SCORE_CP
        best = lines[-1].split()
        if len(best) < 2 or best[1] in ("(none)", "0000"):
            raise OracleError("engine returned no best move")
        return best[1], score if score is not None else 0

    def best_move_and_eval(self, state: BoardState) -> tuple[Move, int]:
        uci, score = self._query(state)
        move = Move.from_uci(uci)
        if move not in chess.legal_moves(state):
            raise OracleError(f"engine suggested illegal move {uci}")
        return move, score

    def best_move(self, state: BoardState) -> Move:
        return self.best_move_and_eval(state)[0]

    def evaluate(self, state: BoardState) -> int:
        return self.best_move_and_eval(state)[1]

    def evaluate_move(self, state: BoardState, move: Move) -> int:
        child = chess.apply(state, move)
        if chess.outcome(child) is not None:
            result = chess.outcome(child)
            mover_value = result.value_for(state.turn)
            return mover_value * MATE_SCORE_CP
        return -self.evaluate(child)

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._send("quit")
                self._proc.wait(timeout=2)
            except (OracleError, subprocess.TimeoutExpired):
                self._proc.kill()

    def __enter__(self) -> "UciOracle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def make_oracle(spec: str, movetime: float = 0.05) -> ToyOracle | UciOracle:
    """Build an oracle from a CLI spec: 'toy', 'toy:<depth>' or 'uci:<command>'."""
    if spec == "toy":
        return ToyOracle()
    if spec.startswith("toy:"):
        return ToyOracle(depth=int(spec.split(":", 1)[1]))
    if spec.startswith("uci:"):
        return UciOracle(spec.split(":", 1)[1].split(), movetime=movetime)
    raise ValueError(f"unknown oracle spec {spec!r}")
