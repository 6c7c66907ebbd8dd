import type { Color, FutureStep } from "./types";

/** The agent's predicted line: numbered badges on the destination squares,
 * alternating colors for the two players (step 1 is the side to move after
 * the agent's reply). Toggleable; cleared on the next human move. */
export class FutureOverlay {
  private board: HTMLElement;
  visible = true;

  constructor(board: HTMLElement) {
    this.board = board;
  }

  render(line: FutureStep[], firstMover: Color): void {
    this.clear();
    if (!this.visible) return;
    let mover: Color = firstMover;
    line.forEach((step, index) => {
      const to = step.move.slice(2, 4);
      const square = this.board.querySelector<HTMLElement>(`[data-square="${to}"]`);
      if (square) {
        const badge = document.createElement("span");
        badge.className = `future-badge ${mover === "w" ? "side-a" : "side-b"}`;
        badge.dataset.step = String(index + 1);
        badge.dataset.move = step.move;
        badge.textContent = String(index + 1);
        badge.title = `${index + 1}. ${step.move}`;
        square.appendChild(badge);
      }
      mover = mover === "w" ? "b" : "w";
    });
  }

  clear(): void {
    for (const badge of this.board.querySelectorAll(".future-badge")) {
      badge.remove();
    }
  }

  toggle(): boolean {
    this.visible = !this.visible;
    if (!this.visible) this.clear();
    return this.visible;
  }

  count(): number {
    return this.board.querySelectorAll(".future-badge").length;
  }
}
