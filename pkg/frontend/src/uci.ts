/** Move-text helpers: the client never sends a syntactically invalid UCI
 * string, and drops are validated against the server-provided legal list
 * before any network call. */

const FILES = "abcdefgh";
const RANKS = "12345678";
const PROMOTIONS = new Set(["q", "r", "b", "n"]);

export function isSquare(name: string): boolean {
  return (
    name.length === 2 && FILES.includes(name[0] ?? "") && RANKS.includes(name[1] ?? "")
  );
}

export function isUciMove(text: string): boolean {
  if (text.length !== 4 && text.length !== 5) return false;
  if (!isSquare(text.slice(0, 2)) || !isSquare(text.slice(2, 4))) return false;
  if (text.slice(0, 2) === text.slice(2, 4)) return false;
  if (text.length === 5 && !PROMOTIONS.has(text[4] ?? "")) return false;
  return true;
}

export function makeUci(from: string, to: string, promotion?: string): string {
  const text = from + to + (promotion ?? "");
  if (!isUciMove(text)) {
    throw new Error(`not a UCI move: ${text}`);
  }
  return text;
}

/** Legal moves from `from` according to the server's legal list. */
export function targetsFor(from: string, legal: string[]): string[] {
  const out = new Set<string>();
  for (const move of legal) {
    if (move.startsWith(from)) out.add(move.slice(2, 4));
  }
  return [...out];
}

/** Whether (from, to) is playable; promotion letters are checked separately. */
export function isLegalDrop(from: string, to: string, legal: string[]): boolean {
  return legal.some((m) => m.startsWith(from + to));
}

/** A pawn drop onto the last rank needs a promotion piece. */
export function needsPromotion(from: string, to: string, legal: string[]): boolean {
  return legal.some((m) => m.length === 5 && m.startsWith(from + to));
}

export function squareIndex(name: string): number {
  return FILES.indexOf(name[0] ?? "") + 8 * RANKS.indexOf(name[1] ?? "");
}

export function squareName(file: number, rank: number): string {
  return `${FILES[file]}${RANKS[rank]}`;
}
