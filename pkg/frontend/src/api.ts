import type { MoveReply, SessionState } from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`api error ${status}`);
  }

  /** Legal-move list attached to 422 rejections. */
  legalMoves(): string[] {
    if (this.detail && typeof this.detail === "object" && "legal" in this.detail) {
      return (this.detail as { legal: string[] }).legal;
    }
    return [];
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "content-type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, (body as { detail?: unknown }).detail ?? body);
  }
  return body as T;
}

export class GameApi {
  constructor(public base: string = "") {}

  listAgents(): Promise<{ agents: string[] }> {
    return request(this.base, "/agents");
  }

  newSession(agent: string, color: "white" | "black"): Promise<MoveReply> {
    return request(this.base, "/session", {
      method: "POST",
      body: JSON.stringify({ agent, color }),
    });
  }

  submitMove(sessionId: string, move: string): Promise<MoveReply> {
    return request(this.base, `/session/${sessionId}/move`, {
      method: "POST",
      body: JSON.stringify({ move }),
    });
  }

  sessionState(sessionId: string): Promise<SessionState> {
    return request(this.base, `/session/${sessionId}`);
  }

  /** Server push channel; returns null where WebSocket is unavailable. */
  openEvents(sessionId: string, onEvent: (event: Record<string, unknown>) => void): WebSocket | null {
    if (typeof WebSocket === "undefined") return null;
    const wsBase = this.base.replace(/^http/, "ws") || `ws://${location.host}`;
    const socket = new WebSocket(`${wsBase}/session/${sessionId}/events`);
    socket.onmessage = (message) => {
      try {
        onEvent(JSON.parse(message.data as string));
      } catch {
        /* malformed push frames are dropped */
      }
    };
    return socket;
  }
}
