"""A minimal deterministic UCI engine for wire-protocol tests: picks the first
legal move in UCI-sorted order and reports a fixed centipawn score (or a mate
score when the flag file asks for it).
"""

import importlib.util
import sys
from pathlib import Path

# Load the board module directly; the package __init__ would pull in torch.
_spec = importlib.util.spec_from_file_location(
    "chessboard",
    Path(__file__).resolve().parents[1] / "src" / "diffusearch" / "chessboard.py",
)
chess = importlib.util.module_from_spec(_spec)
sys.modules["chessboard"] = chess
_spec.loader.exec_module(chess)
BoardState = chess.BoardState


def main() -> None:
    state = BoardState.initial()
    mate_mode = "--mate" in sys.argv
    for line in sys.stdin:
        line = line.strip()
        if line == "uci":
            print("id name FakeFish 1.0")
            print("id author nobody")
            print("uciok", flush=True)
        elif line == "isready":
            print("readyok", flush=True)
        elif line == "ucinewgame":
            state = BoardState.initial()
        elif line.startswith("position fen "):
            state = BoardState.from_fen(line[len("position fen ") :])
        elif line.startswith("go"):
            moves = chess.legal_moves(state)
            best = moves[0].uci() if moves else "(none)"
            if mate_mode:
                print("info depth 1 seldepth 1 score mate 3 nodes 1 pv " + best)
            else:
                print("info depth 1 seldepth 1 score cp 42 nodes 1 pv " + best)
            print(f"bestmove {best}", flush=True)
        elif line == "quit":
            return


if __name__ == "__main__":
    main()
