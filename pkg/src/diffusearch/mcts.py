"""Explicit-search baseline: PUCT Monte Carlo Tree Search over chess states
driven by a one-step policy network for priors and a state-value network for
leaf evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import chessboard as chess
from .agents import Agent, PolicyAgent, StateValueModel
from .chessboard import BoardState, Move


@dataclass
class SearchConfig:
    simulations: int = 100
    c_puct: float = 0.1
    tau: float = 1.0
    tree_reuse: bool = True

    def __post_init__(self) -> None:
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")


@dataclass
class EdgeStats:
    prior: float
    visit_count: int = 0
    total_value: float = 0.0

    @property
    def mean_value(self) -> float:
        return self.total_value / self.visit_count if self.visit_count else 0.0


class Node:
    __slots__ = ("state", "edges", "children", "terminal_value")

    def __init__(self, state: BoardState):
        self.state = state
        self.edges: dict[Move, EdgeStats] = {}
        self.children: dict[Move, Node] = {}
        result = chess.outcome(state)
        self.terminal_value = (
            float(result.value_for(state.turn)) if result is not None else None
        )

    @property
    def expanded(self) -> bool:
        return bool(self.edges)

    def visit_total(self) -> int:
        return sum(e.visit_count for e in self.edges.values())


def select(node: Node, c_puct: float) -> Move:
    """argmax over edges of Q + c_puct * P * sqrt(sum_b N_b) / (1 + N).

    Exact score ties (e.g. a fresh node where every U is zero) fall back to
    the prior, then to the lowest action index (edges are kept in sorted UCI
    order, matching the action table).
    """
    if not node.expanded:
        raise ValueError("select on an unexpanded node")
    sqrt_total = np.sqrt(node.visit_total())
    best_move, best_key = None, (-np.inf, -np.inf)
    for move, edge in node.edges.items():
        u = c_puct * edge.prior * sqrt_total / (1 + edge.visit_count)
        key = (edge.mean_value + u, edge.prior)
        if key > best_key:
            best_move, best_key = move, key
    return best_move


def expand_evaluate(node: Node, policy: PolicyAgent, values: StateValueModel) -> float:
    """Create edges for all legal actions with network priors; return the value
    of the node for its player (game outcome at terminal leaves)."""
    if node.terminal_value is not None:
        return node.terminal_value
    priors = policy.legal_priors(node.state)
    for move in chess.legal_moves(node.state):
        node.edges[move] = EdgeStats(prior=priors[move])
    return values.value(node.state)


def backup(path: list[tuple[Node, Move]], leaf_value: float) -> None:
    """Update N/W/Q along the path; the value sign alternates per ply since the
    leaf value is from the leaf player's perspective."""
    sign = -1.0
    for node, move in reversed(path):
        edge = node.edges[move]
        edge.visit_count += 1
        edge.total_value += sign * leaf_value
        sign = -sign


def visit_distribution(node: Node, tau: float) -> dict[Move, float]:
    """pi(a) proportional to N(a)^(1/tau)."""
    counts = np.array([e.visit_count for e in node.edges.values()], dtype=np.float64)
    if counts.sum() == 0:
        weights = np.ones_like(counts)
    else:
        weights = counts ** (1.0 / tau)
    weights /= weights.sum()
    return {move: float(w) for move, w in zip(node.edges.keys(), weights)}


def play(
    node: Node,
    tau: float,
    rng: Optional[np.random.Generator] = None,
    deterministic: bool = True,
) -> tuple[Move, dict[Move, float]]:
    """Pick the move to play from completed root statistics.

    Deterministic play takes the max-visit action (the tau -> 0 limit);
    otherwise samples from the exponentiated visit distribution.
    """
    pi = visit_distribution(node, tau)
    moves = list(node.edges.keys())
    if deterministic or rng is None:
        counts = [node.edges[m].visit_count for m in moves]
        return moves[int(np.argmax(counts))], pi
    probs = np.array([pi[m] for m in moves])
    return moves[int(rng.choice(len(moves), p=probs))], pi


@dataclass
class SearchInfo:
    simulations: int = 0
    depths: list[int] = field(default_factory=list)

    @property
    def average_depth(self) -> float:
        return float(np.mean(self.depths)) if self.depths else 0.0


class MCTS:
    """One search tree owned by one worker; not shared across threads."""

    def __init__(self, policy: PolicyAgent, values: StateValueModel, config: SearchConfig):
        self.policy = policy
        self.values = values
        self.config = config

    def run(self, root: Node) -> SearchInfo:
        if not root.expanded and root.terminal_value is None:
            expand_evaluate(root, self.policy, self.values)
        info = SearchInfo()
        for _ in range(self.config.simulations):
            node = root
            path: list[tuple[Node, Move]] = []
            while node.expanded and node.terminal_value is None:
                move = select(node, self.config.c_puct)
                path.append((node, move))
                child = node.children.get(move)
                if child is None:
                    child = Node(chess.apply_legal(node.state, move))
                    node.children[move] = child
                node = child
                if not node.expanded:
                    break
            value = expand_evaluate(node, self.policy, self.values)
            backup(path, value)
            info.simulations += 1
            info.depths.append(len(path))
        return info


class MCTSAgent(Agent):
    """Search-enhanced policy exposing the common agent interface. Plays the
    max-visit action by default; tau-sampling is used in tournaments."""

    name = "mcts"

    def __init__(
        self,
        policy: PolicyAgent,
        values: StateValueModel,
        config: Optional[SearchConfig] = None,
        stochastic_play: bool = False,
    ):
        self.policy = policy
        self.values = values
        self.config = config or SearchConfig()
        self.stochastic_play = stochastic_play
        self._root: Optional[Node] = None
        self.last_info: Optional[SearchInfo] = None
        self.search = MCTS(policy, values, self.config)

    def reset(self) -> None:
        self._root = None

    def _root_for(self, state: BoardState) -> Node:
        if self.config.tree_reuse and self._root is not None:
            if self._root.state == state:
                return self._root
            # After our move and the opponent's reply, the matching grandchild
            # becomes the new root; its subtree is retained.
            frontier = list(self._root.children.values())
            for node in frontier:
                if node.state == state:
                    return node
                for grandchild in node.children.values():
                    if grandchild.state == state:
                        return grandchild
        return Node(state)

    def select_move(self, state, rng=None):
        root = self._root_for(state)
        self.last_info = self.search.run(root)
        move, _ = play(
            root,
            self.config.tau,
            rng=rng,
            deterministic=not self.stochastic_play,
        )
        if self.config.tree_reuse:
            self._root = root.children.get(move)
        return move
