import numpy as np
import pytest
from fastapi.testclient import TestClient

from diffusearch import chessboard as chess
from diffusearch.agents import Agent, RandomAgent
from diffusearch.chessboard import BoardState, Move
from diffusearch.server import create_app


class ScriptedAgent(Agent):
    name = "scripted"

    def __init__(self, moves):
        self.moves = list(moves)
        self.i = 0

    def select_move(self, state, rng=None):
        move = Move.from_uci(self.moves[self.i])
        self.i += 1
        return move

    def reset(self):
        self.i = 0


@pytest.fixture()
def client():
    app = create_app(
        {
            "random": lambda: RandomAgent(),
            # Black side of a scholar's mate: the human can mate in 4.
            "victim": lambda: ScriptedAgent(["e7e5", "b8c6", "g8f6"]),
        },
        seed=0,
    )
    return TestClient(app)


def new_session(client, agent="random", color="white"):
    response = client.post("/session", json={"agent": agent, "color": color})
    assert response.status_code == 200
    return response.json()


class TestSessionLifecycle:
    def test_create_session_white(self, client):
        payload = new_session(client)
        assert payload["fen"] == BoardState.initial().to_fen()
        assert payload["turn"] == "w"
        assert len(payload["legal"]) == 20
        assert payload["outcome"] is None
        assert "agent_move" not in payload

    def test_create_session_black_agent_moves_first(self, client):
        payload = new_session(client, color="black")
        assert payload["agent_move"] is not None
        assert payload["turn"] == "b"
        assert len(payload["history"]) == 1

    def test_unknown_agent_rejected(self, client):
        response = client.post("/session", json={"agent": "stockfish"})
        assert response.status_code == 422

    def test_unknown_session_404(self, client):
        assert client.get("/session/nope").status_code == 404
        assert client.post("/session/nope/move", json={"move": "e2e4"}).status_code == 404

    def test_agents_listing(self, client):
        assert client.get("/agents").json() == {"agents": ["random", "victim"]}


class TestMoves:
    def test_legal_move_gets_agent_reply(self, client):
        session = new_session(client)
        response = client.post(
            f"/session/{session['session_id']}/move", json={"move": "e2e4"}
        )
        assert response.status_code == 200
        payload = response.json()
        assert payload["human_move"] == "e2e4"
        assert payload["agent_move"] in payload["history"]
        assert len(payload["history"]) == 2
        assert payload["turn"] == "w"
        assert "future" in payload and "confidences" in payload

    def test_illegal_move_422_with_legal_list(self, client):
        session = new_session(client)
        response = client.post(
            f"/session/{session['session_id']}/move", json={"move": "e2e5"}
        )
        assert response.status_code == 422
        detail = response.json()["detail"]
        assert "e2e4" in detail["legal"]
        assert len(detail["legal"]) == 20

    def test_bad_syntax_422(self, client):
        session = new_session(client)
        response = client.post(
            f"/session/{session['session_id']}/move", json={"move": "castle!"}
        )
        assert response.status_code == 422

    def test_server_state_never_corrupted_by_rejected_move(self, client):
        session = new_session(client)
        sid = session["session_id"]
        client.post(f"/session/{sid}/move", json={"move": "a1a4"})
        state = client.get(f"/session/{sid}").json()
        assert state["fen"] == BoardState.initial().to_fen()
        assert state["history"] == []

    def test_game_over_response_has_outcome_and_no_agent_move(self, client):
        session = new_session(client, agent="victim")
        sid = session["session_id"]
        for move in ["e2e4", "d1h5", "f1c4"]:
            response = client.post(f"/session/{sid}/move", json={"move": move})
            assert response.status_code == 200
        final = client.post(f"/session/{sid}/move", json={"move": "h5f7"})
        payload = final.json()
        assert payload["outcome"] == {"value_white": 1, "reason": "checkmate"}
        assert "agent_move" not in payload
        assert payload["legal"] == []

    def test_move_after_game_over_conflict(self, client):
        session = new_session(client, agent="victim")
        sid = session["session_id"]
        for move in ["e2e4", "d1h5", "f1c4", "h5f7"]:
            client.post(f"/session/{sid}/move", json={"move": move})
        response = client.post(f"/session/{sid}/move", json={"move": "e2e4"})
        assert response.status_code == 409

    def test_sessions_are_isolated(self, client):
        a = new_session(client)
        b = new_session(client)
        client.post(f"/session/{a['session_id']}/move", json={"move": "e2e4"})
        state_b = client.get(f"/session/{b['session_id']}").json()
        assert state_b["history"] == []

    def test_history_replays_to_current_fen(self, client):
        session = new_session(client)
        sid = session["session_id"]
        client.post(f"/session/{sid}/move", json={"move": "e2e4"})
        client.post(f"/session/{sid}/move", json={"move": "d2d4"})
        state = client.get(f"/session/{sid}").json()
        board = BoardState.initial()
        for uci in state["history"]:
            board = chess.apply(board, Move.from_uci(uci))
        assert board.to_fen() == state["fen"]


class TestWebSocket:
    def test_events_pushed_and_bidirectional_moves(self, client):
        session = new_session(client)
        sid = session["session_id"]
        with client.websocket_connect(f"/session/{sid}/events") as ws:
            first = ws.receive_json()
            assert first["type"] == "state"
            ws.send_json({"move": "e2e4"})
            event = ws.receive_json()
            assert event["type"] == "move"
            assert event["human_move"] == "e2e4"
            assert "agent_move" in event

    def test_ws_illegal_move_error_event(self, client):
        session = new_session(client)
        sid = session["session_id"]
        with client.websocket_connect(f"/session/{sid}/events") as ws:
            ws.receive_json()
            ws.send_json({"move": "e2e5"})
            event = ws.receive_json()
            assert event["type"] == "error"

    def test_ws_unknown_session_closed(self, client):
        with pytest.raises(Exception):
            with client.websocket_connect("/session/nope/events") as ws:
                ws.receive_json()
