"""Chess policies with implicit search via discrete diffusion, plus the
one-step and MCTS baselines, data pipeline, evaluation harness and play server.
"""

from .chessboard import (
    BoardState,
    GameOutcome,
    IllegalMoveError,
    MalformedState,
    Move,
    apply,
    legal_moves,
    outcome,
    perft,
)
from .codec import TokenSequence, Vocabulary, centipawn_to_bin
from .diffusion import DiffusionSchedule, corrupt, cumulative_transition, posterior
from .model import Denoiser, ModelConfig, load_checkpoint, save_checkpoint
from .sampler import SampleConfig, Sampler, easy_first_mask, legality_guard

__version__ = "0.1.0"

__all__ = [
    "BoardState",
    "Move",
    "GameOutcome",
    "IllegalMoveError",
    "MalformedState",
    "legal_moves",
    "apply",
    "outcome",
    "perft",
    "Vocabulary",
    "TokenSequence",
    "centipawn_to_bin",
    "DiffusionSchedule",
    "cumulative_transition",
    "corrupt",
    "posterior",
    "ModelConfig",
    "Denoiser",
    "save_checkpoint",
    "load_checkpoint",
    "SampleConfig",
    "Sampler",
    "easy_first_mask",
    "legality_guard",
    "__version__",
]
