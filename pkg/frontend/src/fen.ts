/** Just enough FEN to render a board: placement grid + side to move. */

export type Piece =
  | "P" | "N" | "B" | "R" | "Q" | "K"
  | "p" | "n" | "b" | "r" | "q" | "k";

export const PIECE_GLYPHS: Record<Piece, string> = {
  K: "♔", Q: "♕", R: "♖", B: "♗", N: "♘", P: "♙",
  k: "♚", q: "♛", r: "♜", b: "♝", n: "♞", p: "♟",
};

export interface ParsedFen {
  /** squares[0] = a1 ... squares[63] = h8; null for empty. */
  squares: (Piece | null)[];
  turn: "w" | "b";
}

export function parseFen(fen: string): ParsedFen {
  const [placement, turn] = fen.split(" ");
  if (!placement || (turn !== "w" && turn !== "b")) {
    throw new Error(`bad FEN: ${fen}`);
  }
  const rows = placement.split("/");
  if (rows.length !== 8) throw new Error(`bad FEN placement: ${placement}`);
  const squares: (Piece | null)[] = new Array(64).fill(null);
  rows.forEach((row, i) => {
    const rank = 7 - i;
    let file = 0;
    for (const ch of row) {
      if (/\d/.test(ch)) {
        file += Number(ch);
      } else {
        squares[rank * 8 + file] = ch as Piece;
        file += 1;
      }
    }
    if (file !== 8) throw new Error(`bad FEN row: ${row}`);
  });
  return { squares, turn };
}
