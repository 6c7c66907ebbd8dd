// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { Board } from "../src/board";
import { parseFen } from "../src/fen";
import { FutureOverlay } from "../src/overlay";

const START_FEN = "rnbqkbnr/pppppppp/8/8/8/8/PPPPPPPP/RNBQKBNR w KQkq - 0 1";

function setup() {
  document.body.innerHTML = '<div id="board"></div>';
  const onDrop = vi.fn();
  const board = new Board(document.getElementById("board")!, { onDrop });
  board.setPosition(START_FEN);
  return { board, onDrop };
}

describe("fen parsing", () => {
  it("reads the initial position", () => {
    const parsed = parseFen(START_FEN);
    expect(parsed.turn).toBe("w");
    expect(parsed.squares[0]).toBe("R"); // a1
    expect(parsed.squares[4]).toBe("K"); // e1
    expect(parsed.squares[63]).toBe("r"); // h8
    expect(parsed.squares[27]).toBeNull(); // d4
  });

  it("rejects malformed fens", () => {
    expect(() => parseFen("8/8/8 w")).toThrow();
    expect(() => parseFen("9/8/8/8/8/8/8/8 w - - 0 1")).toThrow();
  });
});

describe("board rendering", () => {
  it("renders 64 squares and 32 pieces", () => {
    const { board } = setup();
    expect(board.root.querySelectorAll(".square").length).toBe(64);
    expect(board.root.querySelectorAll(".piece").length).toBe(32);
  });

  it("board always reflects the given fen", () => {
    const { board } = setup();
    board.setPosition("rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq e3 0 1");
    expect(board.squareElement("e4").querySelector(".piece")?.textContent).toBe("♙");
    expect(board.squareElement("e2").querySelector(".piece")).toBeNull();
  });

  it("click select then target click fires onDrop", () => {
    const { board, onDrop } = setup();
    board.squareElement("e2").dispatchEvent(new MouseEvent("click", { bubbles: true }));
    board.setTargets(["e3", "e4"]);
    board.squareElement("e4").dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(onDrop).toHaveBeenCalledWith("e2", "e4");
  });

  it("clicking a non-target square does not fire onDrop", () => {
    const { board, onDrop } = setup();
    board.squareElement("e2").dispatchEvent(new MouseEvent("click", { bubbles: true }));
    board.setTargets(["e3", "e4"]);
    board.squareElement("e5").dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(onDrop).not.toHaveBeenCalled();
  });

  it("orientation flip keeps square identity", () => {
    const { board } = setup();
    board.setOrientation("b");
    const squares = board.root.querySelectorAll<HTMLElement>(".square");
    // From Black's seat the top-left corner is h1.
    expect(squares[0]?.dataset.square).toBe("h1");
    expect(board.squareElement("e2").querySelector(".piece")?.textContent).toBe("♙");
  });

  it("snap-back animation class toggles", () => {
    const { board } = setup();
    board.snapBack();
    expect(board.root.classList.contains("snap-back")).toBe(true);
  });
});

describe("future overlay", () => {
  function overlaySetup() {
    const { board } = setup();
    return { board, overlay: new FutureOverlay(board.root) };
  }

  it("renders numbered badges with alternating colors", () => {
    const { overlay, board } = overlaySetup();
    overlay.render(
      [
        { move: "e7e5", fen: "" },
        { move: "g1f3", fen: "" },
        { move: "b8c6", fen: "" },
      ],
      "b",
    );
    expect(overlay.count()).toBe(3);
    // querySelectorAll returns DOM order; index badges by their step.
    const byStep = new Map(
      [...board.root.querySelectorAll<HTMLElement>(".future-badge")].map((b) => [
        b.dataset.step,
        b,
      ]),
    );
    expect([...byStep.keys()].sort()).toEqual(["1", "2", "3"]);
    expect(byStep.get("1")?.textContent).toBe("1");
    expect(byStep.get("1")?.classList.contains("side-b")).toBe(true);
    expect(byStep.get("2")?.classList.contains("side-a")).toBe(true);
    expect(byStep.get("3")?.classList.contains("side-b")).toBe(true);
  });

  it("empty future renders no overlay", () => {
    const { overlay } = overlaySetup();
    overlay.render([], "w");
    expect(overlay.count()).toBe(0);
  });

  it("clear removes badges", () => {
    const { overlay } = overlaySetup();
    overlay.render([{ move: "e7e5", fen: "" }], "b");
    overlay.clear();
    expect(overlay.count()).toBe(0);
  });

  it("toggle hides and restores", () => {
    const { overlay } = overlaySetup();
    overlay.render([{ move: "e7e5", fen: "" }], "b");
    expect(overlay.toggle()).toBe(false);
    expect(overlay.count()).toBe(0);
    expect(overlay.toggle()).toBe(true);
    overlay.render([{ move: "e7e5", fen: "" }], "b");
    expect(overlay.count()).toBe(1);
  });
});
