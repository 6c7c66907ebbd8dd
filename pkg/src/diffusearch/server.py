"""Live play server: HTTP/JSON sessions against any loaded agent, with events
pushed over a WebSocket for the browser UI.

Checkpoints are loaded once and shared read-only across sessions; each session
gets its own agent instance (search trees are per-session) and rng stream.
"""

from __future__ import annotations

import asyncio
import uuid
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from . import chessboard as chess
from .agents import Agent, DiffuSearchAgent
from .chessboard import BoardState, Move

MAX_SESSION_PLIES = 512


class NewSessionRequest(BaseModel):
    agent: str = "diffusearch"
    color: str = "white"  # the human's color


class MoveRequest(BaseModel):
    move: str


@dataclass
class GameSession:
    session_id: str
    agent_name: str
    agent: Agent
    human_color: str
    config: dict
    state: BoardState = field(default_factory=BoardState.initial)
    history: list = field(default_factory=list)
    repetitions: dict = field(default_factory=dict)
    outcome: Optional[dict] = None
    rng: np.random.Generator = field(default_factory=np.random.default_rng)
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)
    listeners: list = field(default_factory=list)

    def legal_uci(self) -> list[str]:
        return [m.uci() for m in chess.legal_moves(self.state)]

    def _bump_repetition(self) -> int:
        key = self.state.repetition_key()
        self.repetitions[key] = self.repetitions.get(key, 0) + 1
        return self.repetitions[key]

    def check_game_over(self) -> Optional[dict]:
        if self.outcome is not None:
            return self.outcome
        result = chess.outcome(self.state)
        if result is not None:
            self.outcome = {"value_white": result.white_value, "reason": result.reason}
        elif self._bump_repetition() >= 3 or len(self.history) >= MAX_SESSION_PLIES:
            self.outcome = {"value_white": 0, "reason": "draw-rule"}
        return self.outcome

    def push_move(self, move: Move) -> None:
        self.state = chess.apply(self.state, move)
        self.history.append(move.uci())

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "agent": self.agent_name,
            "human_color": self.human_color,
            "fen": self.state.to_fen(),
            "turn": self.state.turn,
            "history": list(self.history),
            "legal": [] if self.outcome else self.legal_uci(),
            "outcome": self.outcome,
            "config": self.config,
        }


def _agent_reply(session: GameSession) -> dict:
    """Let the bound agent move; returns the reply fragment for responses."""
    move = session.agent.select_move(session.state, session.rng)
    session.push_move(move)
    session.check_game_over()
    fragment: dict = {"agent_move": move.uci(), "future": [], "confidences": []}
    if isinstance(session.agent, DiffuSearchAgent) and session.agent.last_result:
        result = session.agent.last_result
        fragment["future"] = [{"move": m, "fen": f} for m, f in result.future]
        fragment["confidences"] = result.confidences
        fragment["guard_tripped"] = result.guard_tripped
    return fragment


def create_app(agent_factories: dict[str, Callable[[], Agent]], seed: int = 0) -> FastAPI:
    """agent_factories maps an agent name to a zero-arg factory returning a
    fresh agent instance bound to shared read-only model weights."""
    app = FastAPI(title="diffusearch-play")
    sessions: dict[str, GameSession] = {}
    seed_counter = {"next": seed}

    def get_session(session_id: str) -> GameSession:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    async def broadcast(session: GameSession, event: dict) -> None:
        for queue in list(session.listeners):
            await queue.put(event)

    @app.get("/agents")
    async def list_agents() -> dict:
        return {"agents": sorted(agent_factories.keys())}

    @app.post("/session")
    async def new_session(request: NewSessionRequest) -> dict:
        if request.agent not in agent_factories:
            raise HTTPException(status_code=422, detail=f"unknown agent {request.agent!r}")
        if request.color not in (chess.WHITE, chess.BLACK, "white", "black"):
            raise HTTPException(status_code=422, detail=f"bad color {request.color!r}")
        human_color = request.color[0]
        agent = agent_factories[request.agent]()
        seed_counter["next"] += 1
        session = GameSession(
            session_id=uuid.uuid4().hex,
            agent_name=request.agent,
            agent=agent,
            human_color=human_color,
            config={"agent": request.agent, "human_color": human_color},
            rng=np.random.default_rng(seed_counter["next"]),
        )
        sessions[session.session_id] = session
        session._bump_repetition()
        payload = session.snapshot()
        if session.state.turn != human_color:
            async with session.lock:
                payload.update(_agent_reply(session))
                payload.update(session.snapshot())
        return payload

    @app.post("/session/{session_id}/move")
    async def play_move(session_id: str, request: MoveRequest) -> dict:
        session = get_session(session_id)
        async with session.lock:
            payload = _handle_human_move(session, request.move)
        await broadcast(session, {"type": "move", **payload})
        return payload

    def _handle_human_move(session: GameSession, move_text: str) -> dict:
        if session.outcome is not None:
            raise HTTPException(status_code=409, detail="game is over")
        if session.state.turn != session.human_color:
            raise HTTPException(status_code=409, detail="not your turn")
        try:
            move = Move.from_uci(move_text)
        except ValueError:
            raise HTTPException(
                status_code=422,
                detail={"error": f"bad move syntax {move_text!r}", "legal": session.legal_uci()},
            )
        if move not in chess.legal_moves(session.state):
            raise HTTPException(
                status_code=422,
                detail={"error": f"illegal move {move_text}", "legal": session.legal_uci()},
            )
        session.push_move(move)
        payload: dict = {"human_move": move.uci()}
        if session.check_game_over() is None:
            payload.update(_agent_reply(session))
        payload.update(session.snapshot())
        return payload

    @app.get("/session/{session_id}")
    async def session_state(session_id: str) -> dict:
        return get_session(session_id).snapshot()

    @app.websocket("/session/{session_id}/events")
    async def session_events(websocket: WebSocket, session_id: str) -> None:
        session = sessions.get(session_id)
        if session is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        session.listeners.append(queue)
        await websocket.send_json({"type": "state", **session.snapshot()})

        async def pump() -> None:
            while True:
                event = await queue.get()
                await websocket.send_json(event)

        pump_task = asyncio.create_task(pump())
        try:
            while True:
                message = await websocket.receive_json()
                if "move" in message:
                    try:
                        async with session.lock:
                            payload = _handle_human_move(session, message["move"])
                        await broadcast(session, {"type": "move", **payload})
                    except HTTPException as exc:
                        await websocket.send_json({"type": "error", "detail": exc.detail})
        except WebSocketDisconnect:
            pass
        finally:
            pump_task.cancel()
            session.listeners.remove(queue)

    return app
