/**
 * Scripted headless client: completes a full session against a live server,
 * validating every state message. Used for protocol-conformance testing and
 * as a smoke tool (`node dist/headless.js ws://host:port/ws`).
 */

import WebSocket from "ws";

import {
  helloMessage,
  inputMessage,
  parseServerMessage,
  validateStateMessage,
} from "./protocol.js";
import type { Phase, ReportMessage, StateMessage } from "./protocol.js";

export interface HeadlessResult {
  states: number;
  invalidStates: number;
  malformed: number;
  phasesSeen: Phase[];
  report: ReportMessage | null;
  closeCode: number | null;
}

/** Simple scripted behavior: move toward the puck, biased to stay deep. */
export function chaseAction(state: StateMessage): [number, number] {
  const clamp = (v: number) => Math.max(-1, Math.min(1, v));
  const ax = clamp((state.puck[0] - state.you[0]) * 6);
  const ay = clamp((Math.min(state.puck[1], 0.9) - state.you[1]) * 6);
  return [ax, ay];
}

export function runHeadlessSession(
  url: string,
  method: string,
  seed: number,
  timeoutMs = 120_000,
): Promise<HeadlessResult> {
  return new Promise((resolve, reject) => {
    const result: HeadlessResult = {
      states: 0,
      invalidStates: 0,
      malformed: 0,
      phasesSeen: [],
      report: null,
      closeCode: null,
    };
    const ws = new WebSocket(url);
    const timer = setTimeout(() => {
      ws.terminate();
      reject(new Error(`headless session timed out after ${timeoutMs} ms`));
    }, timeoutMs);

    ws.on("open", () => ws.send(helloMessage(method, seed)));
    ws.on("error", (err) => {
      clearTimeout(timer);
      reject(err);
    });
    ws.on("close", (code) => {
      clearTimeout(timer);
      result.closeCode = code;
      resolve(result);
    });
    ws.on("message", (data) => {
      const raw = data.toString();
      const msg = parseServerMessage(raw);
      if (msg === null) {
        result.malformed += 1;
        return;
      }
      if (msg.type === "phase") {
        result.phasesSeen.push(msg.phase);
      } else if (msg.type === "report") {
        result.report = msg;
      } else if (msg.type === "state") {
        result.states += 1;
        if (!validateStateMessage(msg)) {
          result.invalidStates += 1;
        }
        if (msg.phase !== "finished") {
          ws.send(inputMessage(chaseAction(msg)));
        }
      }
    });
  });
}

const invokedDirectly =
  typeof process !== "undefined" && process.argv[1]?.endsWith("headless.js");

if (invokedDirectly) {
  const url = process.argv[2] ?? "ws://127.0.0.1:8765/ws";
  const method = process.argv[3] ?? "ladder";
  runHeadlessSession(url, method, 0)
    .then((r) => {
      console.log(JSON.stringify(r, null, 2));
      process.exit(r.invalidStates === 0 && r.report !== null ? 0 : 1);
    })
    .catch((err) => {
      console.error(String(err));
      process.exit(1);
    });
}
