/** Client-side view state: server-authoritative, interpolation only. */

import type {
  Phase,
  ReportMessage,
  ServerMessage,
  StateMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface ClientView {
  /** Most recent state message, if any. */
  latest: StateMessage | null;
  /** Last up-to-3 state messages, oldest first (interpolation buffer). */
  buffer: StateMessage[];
  phase: Phase;
  /** Remaining ticks in the current phase, from the last phase message. */
  phaseTicks: number;
  score: [number, number];
  report: ReportMessage | null;
  status: ConnectionStatus;
}

export function emptyView(): ClientView {
  return {
    latest: null,
    buffer: [],
    phase: "practice",
    phaseTicks: 0,
    score: [0, 0],
    report: null,
    status: "connecting",
  };
}

const BANNERS: Record<Phase, string> = {
  practice: "Practice — warm up freely",
  pre_session: "Pre-session — play normally, the opponent is watching",
  adapting: "Adapting to your style…",
  first_half: "First half",
  break: "Break — catch your breath",
  second_half: "Second half",
  finished: "Session finished",
};

export function phaseBanner(phase: Phase): string {
  return BANNERS[phase];
}

/** Fold one server message into the view (pure: returns a new view). */
export function applyMessage(view: ClientView, msg: ServerMessage): ClientView {
  switch (msg.type) {
    case "state": {
      const buffer = [...view.buffer, msg].slice(-3);
      return {
        ...view,
        latest: msg,
        buffer,
        phase: msg.phase,
        score: msg.score,
      };
    }
    case "phase":
      return { ...view, phase: msg.phase, phaseTicks: msg.ticks };
    case "score":
      return { ...view, score: msg.score };
    case "report":
      return { ...view, report: msg };
  }
}

export interface Snapshot {
  puck: [number, number];
  you: [number, number];
  opp: [number, number];
}

const lerp = (a: number, b: number, t: number) => a + (b - a) * t;

/**
 * Interpolate between the two most recent states (never extrapolates).
 * `t` in [0, 1]: 0 = previous state, 1 = latest state.
 */
export function interpolate(view: ClientView, t: number): Snapshot | null {
  const n = view.buffer.length;
  if (n === 0) return null;
  const latest = view.buffer[n - 1]!;
  const prev = n >= 2 ? view.buffer[n - 2]! : latest;
  const u = Math.max(0, Math.min(1, t));
  const pair = (a: readonly number[], b: readonly number[]): [number, number] => [
    lerp(a[0]!, b[0]!, u),
    lerp(a[1]!, b[1]!, u),
  ];
  return {
    puck: pair(prev.puck, latest.puck),
    you: pair(prev.you, latest.you),
    opp: pair(prev.opp, latest.opp),
  };
}
