import { PIECE_GLYPHS, parseFen } from "./fen";
import { squareName } from "./uci";

export interface BoardCallbacks {
  /** Fired when the user tries (from, to); promotion handled by the caller. */
  onDrop: (from: string, to: string) => void;
  onSelect?: (square: string | null) => void;
}

/** Plain-DOM chessboard: 8x8 grid, unicode pieces, click-to-move and HTML5
 * drag and drop sharing one validation path. */
export class Board {
  readonly root: HTMLElement;
  private orientation: "w" | "b" = "w";
  private selected: string | null = null;
  private targets: string[] = [];
  private fen = "8/8/8/8/8/8/8/8 w - - 0 1";
  private callbacks: BoardCallbacks;

  constructor(root: HTMLElement, callbacks: BoardCallbacks) {
    this.root = root;
    this.callbacks = callbacks;
    root.classList.add("board");
    this.renderGrid();
  }

  setOrientation(color: "w" | "b"): void {
    this.orientation = color;
    this.renderGrid();
    this.renderPieces();
  }

  /** Squares the selected piece may move to (server legal list). */
  setTargets(targets: string[]): void {
    this.targets = targets;
    this.refreshHighlights();
  }

  setPosition(fen: string): void {
    this.fen = fen;
    this.clearSelection();
    this.renderPieces();
  }

  clearSelection(): void {
    this.selected = null;
    this.targets = [];
    this.refreshHighlights();
    this.callbacks.onSelect?.(null);
  }

  /** Visual cue for a rejected drop. */
  snapBack(): void {
    this.root.classList.remove("snap-back");
    // Force a reflow so repeated rejections retrigger the animation.
    void (this.root as HTMLElement).offsetWidth;
    this.root.classList.add("snap-back");
  }

  squareElement(name: string): HTMLElement {
    const el = this.root.querySelector<HTMLElement>(`[data-square="${name}"]`);
    if (!el) throw new Error(`no square ${name}`);
    return el;
  }

  private renderGrid(): void {
    this.root.textContent = "";
    for (let row = 0; row < 8; row++) {
      for (let col = 0; col < 8; col++) {
        const rank = this.orientation === "w" ? 7 - row : row;
        const file = this.orientation === "w" ? col : 7 - col;
        const square = document.createElement("div");
        const name = squareName(file, rank);
        square.className = `square ${(file + rank) % 2 ? "light" : "dark"}`;
        square.dataset.square = name;
        square.addEventListener("click", () => this.handleClick(name));
        square.addEventListener("dragover", (event) => event.preventDefault());
        square.addEventListener("drop", (event) => {
          event.preventDefault();
          const from = (event as DragEvent).dataTransfer?.getData("text/plain");
          if (from && from !== name) this.attempt(from, name);
        });
        this.root.appendChild(square);
      }
    }
  }

  private renderPieces(): void {
    const parsed = parseFen(this.fen);
    for (let i = 0; i < 64; i++) {
      const name = squareName(i % 8, Math.floor(i / 8));
      const square = this.squareElement(name);
      square.querySelector(".piece")?.remove();
      const piece = parsed.squares[i];
      if (piece) {
        const glyph = document.createElement("span");
        glyph.className = `piece ${piece === piece.toUpperCase() ? "white" : "black"}`;
        glyph.textContent = PIECE_GLYPHS[piece];
        glyph.dataset.piece = piece;
        glyph.draggable = true;
        glyph.addEventListener("dragstart", (event) => {
          this.handleClick(name);
          (event as DragEvent).dataTransfer?.setData("text/plain", name);
        });
        square.appendChild(glyph);
      }
    }
    this.refreshHighlights();
  }

  private handleClick(name: string): void {
    if (this.selected && this.targets.includes(name)) {
      this.attempt(this.selected, name);
      return;
    }
    const hasPiece = !!this.squareElement(name).querySelector(".piece");
    this.selected = hasPiece && this.selected !== name ? name : null;
    this.targets = [];
    this.refreshHighlights();
    this.callbacks.onSelect?.(this.selected);
  }

  private attempt(from: string, to: string): void {
    this.callbacks.onDrop(from, to);
  }

  private refreshHighlights(): void {
    for (const el of this.root.querySelectorAll<HTMLElement>(".square")) {
      el.classList.toggle("selected", el.dataset.square === this.selected);
      el.classList.toggle("target", this.targets.includes(el.dataset.square ?? ""));
    }
  }
}
