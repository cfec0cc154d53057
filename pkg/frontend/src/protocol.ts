/** Wire protocol spoken by the live session server (WebSocket, JSON text). */

export const PHASES = [
  "practice",
  "pre_session",
  "adapting",
  "first_half",
  "break",
  "second_half",
  "finished",
] as const;

export type Phase = (typeof PHASES)[number];

export interface StateMessage {
  type: "state";
  tick: number;
  phase: Phase;
  /** [x, y, vx, vy] in rink units (table is 1.2 x 2.0, you defend y = 0). */
  puck: [number, number, number, number];
  /** Your striker position [x, y]. */
  you: [number, number];
  /** Opponent striker position [x, y]. */
  opp: [number, number];
  /** [your goals, opponent goals]. */
  score: [number, number];
}

export interface PhaseMessage {
  type: "phase";
  phase: Phase;
  tick: number;
  ticks: number;
}

export interface ScoreMessage {
  type: "score";
  tick: number;
  score: [number, number];
}

export interface ReportMessage {
  type: "report";
  method: string;
  score: [number, number];
  possession: number;
  ticks: number;
}

export type ServerMessage =
  | StateMessage
  | PhaseMessage
  | ScoreMessage
  | ReportMessage;

export interface HelloMessage {
  type: "hello";
  method: string;
  seed: number;
}

export interface InputMessage {
  type: "input";
  target: [number, number];
}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isNumberTuple(v: unknown, n: number): boolean {
  return Array.isArray(v) && v.length === n && v.every(isFiniteNumber);
}

export function isPhase(v: unknown): v is Phase {
  return typeof v === "string" && (PHASES as readonly string[]).includes(v);
}

export function validateStateMessage(msg: unknown): msg is StateMessage {
  if (typeof msg !== "object" || msg === null) return false;
  const m = msg as Record<string, unknown>;
  return (
    m.type === "state" &&
    isFiniteNumber(m.tick) &&
    m.tick >= 0 &&
    isPhase(m.phase) &&
    isNumberTuple(m.puck, 4) &&
    isNumberTuple(m.you, 2) &&
    isNumberTuple(m.opp, 2) &&
    isNumberTuple(m.score, 2) &&
    (m.score as number[]).every((s) => Number.isInteger(s) && s >= 0)
  );
}

/** Parse one raw server frame; returns null for anything malformed. */
export function parseServerMessage(raw: string): ServerMessage | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const m = msg as Record<string, unknown>;
  switch (m.type) {
    case "state":
      return validateStateMessage(m) ? (m as unknown as StateMessage) : null;
    case "phase":
      return isPhase(m.phase) && isFiniteNumber(m.tick) && isFiniteNumber(m.ticks)
        ? (m as unknown as PhaseMessage)
        : null;
    case "score":
      return isFiniteNumber(m.tick) && isNumberTuple(m.score, 2)
        ? (m as unknown as ScoreMessage)
        : null;
    case "report":
      return typeof m.method === "string" &&
        isNumberTuple(m.score, 2) &&
        isFiniteNumber(m.possession) &&
        isFiniteNumber(m.ticks)
        ? (m as unknown as ReportMessage)
        : null;
    default:
      return null;
  }
}

export function helloMessage(method: string, seed: number): string {
  return JSON.stringify({ type: "hello", method, seed } satisfies HelloMessage);
}

export function inputMessage(target: [number, number]): string {
  return JSON.stringify({ type: "input", target } satisfies InputMessage);
}
