export type Color = "w" | "b";

export interface FutureStep {
  move: string;
  fen: string;
}

export interface SessionState {
  session_id: string;
  agent: string;
  human_color: Color;
  fen: string;
  turn: Color;
  history: string[];
  legal: string[];
  outcome: { value_white: number; reason: string } | null;
  config: Record<string, unknown>;
}

export interface MoveReply extends SessionState {
  human_move?: string;
  agent_move?: string;
  future?: FutureStep[];
  confidences?: number[];
  guard_tripped?: boolean;
}

/** Client-side mirror of the server session plus UI concerns. */
export interface UiGameState {
  session: SessionState;
  orientation: Color;
  selectedSquare: string | null;
  /** Legal target squares for the current selection. */
  targets: string[];
  lastAgentMove: string | null;
  futureLine: FutureStep[];
  confidences: number[];
  overlayVisible: boolean;
  status: "idle" | "waiting" | "over" | "error";
  message: string;
}
