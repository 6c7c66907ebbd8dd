import { ApiError, GameApi } from "./api";
import { Board } from "./board";
import { FutureOverlay } from "./overlay";
import type { Color, MoveReply, UiGameState } from "./types";
import { isLegalDrop, isUciMove, makeUci, needsPromotion, targetsFor } from "./uci";

export interface AppElements {
  board: HTMLElement;
  status: HTMLElement;
  result: HTMLElement;
  moves: HTMLElement;
  overlayToggle?: HTMLElement;
}

/** One game session per app instance: wires the board, the overlay and the
 * HTTP/WS API together. All outgoing moves are validated client-side first. */
export class App {
  api: GameApi;
  board: Board;
  overlay: FutureOverlay;
  state: UiGameState | null = null;
  promotionChoice: () => string = () => "q";
  private elements: AppElements;
  private socket: WebSocket | null = null;
  private inFlight = false;

  constructor(api: GameApi, elements: AppElements) {
    this.api = api;
    this.elements = elements;
    this.board = new Board(elements.board, {
      onDrop: (from, to) => void this.submitMove(from, to),
      onSelect: (square) => this.handleSelect(square),
    });
    this.overlay = new FutureOverlay(elements.board);
    elements.overlayToggle?.addEventListener("click", () => {
      const visible = this.overlay.toggle();
      if (visible && this.state) {
        this.overlay.render(this.state.futureLine, this.state.session.turn);
      }
    });
  }

  async newGame(agent: string, color: "white" | "black"): Promise<void> {
    const reply = await this.api.newSession(agent, color);
    this.state = {
      session: reply,
      orientation: color === "white" ? "w" : "b",
      selectedSquare: null,
      targets: [],
      lastAgentMove: reply.agent_move ?? null,
      futureLine: reply.future ?? [],
      confidences: reply.confidences ?? [],
      overlayVisible: this.overlay.visible,
      status: reply.outcome ? "over" : "idle",
      message: "",
    };
    this.board.setOrientation(this.state.orientation);
    this.applyReply(reply);
    this.socket = this.api.openEvents(reply.session_id, (event) => {
      if (event.type === "move") this.applyReply(event as unknown as MoveReply);
    });
  }

  /** Client-side gate: syntax and the server-provided legal list. */
  validateMove(move: string): boolean {
    if (!this.state || this.state.status === "over") return false;
    if (!isUciMove(move)) return false;
    return this.state.session.legal.includes(move);
  }

  async submitMove(from: string, to: string): Promise<boolean> {
    if (!this.state || this.inFlight || this.state.status === "over") return false;
    const legal = this.state.session.legal;
    if (!isLegalDrop(from, to, legal)) {
      this.rejectDrop(from);
      return false;
    }
    const move = needsPromotion(from, to, legal)
      ? makeUci(from, to, this.promotionChoice())
      : makeUci(from, to);
    if (!this.validateMove(move)) {
      this.rejectDrop(from);
      return false;
    }

    const before = this.state.session.fen;
    this.inFlight = true;
    this.setStatus("waiting", "thinking...");
    this.overlay.clear();
    try {
      const reply = await this.api.submitMove(this.state.session.session_id, move);
      this.applyReply(reply);
      return true;
    } catch (error) {
      if (error instanceof ApiError && error.status === 422) {
        // Rollback and show what was legal instead.
        this.board.setPosition(before);
        this.board.snapBack();
        this.setStatus("error", "illegal move");
      } else {
        // Network trouble: board unchanged, offer a retry.
        this.setStatus("error", "connection lost - retry");
      }
      return false;
    } finally {
      this.inFlight = false;
    }
  }

  applyReply(reply: MoveReply): void {
    if (!this.state) return;
    this.state.session = reply;
    this.state.lastAgentMove = reply.agent_move ?? this.state.lastAgentMove;
    this.state.futureLine = reply.future ?? [];
    this.state.confidences = reply.confidences ?? [];
    this.board.setPosition(reply.fen);
    this.overlay.render(this.state.futureLine, reply.turn);
    this.renderMoveLog(reply.history);
    if (reply.outcome) {
      this.state.status = "over";
      const verdict =
        reply.outcome.value_white === 0
          ? "draw"
          : reply.outcome.value_white > 0
            ? "white wins"
            : "black wins";
      this.elements.result.textContent = `${verdict} (${reply.outcome.reason})`;
      this.elements.result.classList.add("visible");
      this.setStatus("over", "game over");
    } else {
      this.state.status = "idle";
      this.setStatus("idle", reply.turn === this.state.orientation ? "your move" : "agent to move");
    }
  }

  private handleSelect(square: string | null): void {
    if (!this.state) return;
    this.state.selectedSquare = square;
    this.state.targets = square ? targetsFor(square, this.state.session.legal) : [];
    this.board.setTargets(this.state.targets);
  }

  private rejectDrop(from: string): void {
    if (!this.state) return;
    this.board.snapBack();
    this.state.targets = targetsFor(from, this.state.session.legal);
    this.board.setTargets(this.state.targets);
    this.setStatus("error", "illegal move");
  }

  private renderMoveLog(history: string[]): void {
    this.elements.moves.textContent = history.join(" ");
  }

  private setStatus(status: UiGameState["status"], message: string): void {
    if (this.state) {
      this.state.status = status;
      this.state.message = message;
    }
    this.elements.status.textContent = message;
    this.elements.status.dataset.state = status;
  }

  dispose(): void {
    this.socket?.close();
  }
}
