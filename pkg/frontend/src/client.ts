/**
 * Session client: connects, folds server messages into a ClientView, and
 * sends at most one input per received state message.
 *
 * Transport-agnostic: pass any WebSocket-like object factory so the same
 * code drives a browser WebSocket or the `ws` package under node.
 */

import { helloMessage, inputMessage, parseServerMessage } from "./protocol.js";
import type { ServerMessage, StateMessage } from "./protocol.js";
import { applyMessage, emptyView } from "./view.js";
import type { ClientView } from "./view.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(
    type: "open" | "message" | "close" | "error",
    handler: (event: { data?: unknown }) => void,
  ): void;
}

export interface SessionHandle {
  view(): ClientView;
  /** Set the action sent on the next state message ([-1,1] components). */
  setTarget(target: [number, number]): void;
  close(): void;
  /** True once the server closed or the connection failed (reconnect prompt). */
  needsReconnect(): boolean;
  /** Messages that failed to parse (logged and ignored). */
  malformedCount(): number;
}

export interface ConnectOptions {
  method: string;
  seed?: number;
  /** Called after each applied message (e.g. to schedule a render). */
  onUpdate?: (view: ClientView) => void;
  onLog?: (line: string) => void;
}

export function connect(
  socket: SocketLike,
  options: ConnectOptions,
): SessionHandle {
  let view = emptyView();
  let target: [number, number] = [0, 0];
  let reconnect = false;
  let malformed = 0;
  const log = options.onLog ?? (() => undefined);

  socket.addEventListener("open", () => {
    socket.send(helloMessage(options.method, options.seed ?? 0));
    view = { ...view, status: "open" };
    options.onUpdate?.(view);
  });

  socket.addEventListener("message", (event) => {
    const msg: ServerMessage | null = parseServerMessage(String(event.data));
    if (msg === null) {
      malformed += 1;
      log("ignoring malformed server message");
      return;
    }
    view = applyMessage(view, msg);
    if (msg.type === "state") {
      // Rate coupling: exactly one input per received state.
      if ((msg as StateMessage).phase !== "finished") {
        socket.send(inputMessage(target));
      }
    }
    options.onUpdate?.(view);
  });

  const onGone = () => {
    reconnect = true;
    view = { ...view, status: "closed" };
    options.onUpdate?.(view);
  };
  socket.addEventListener("close", onGone);
  socket.addEventListener("error", onGone);

  return {
    view: () => view,
    setTarget: (t) => {
      target = t;
    },
    close: () => socket.close(),
    needsReconnect: () => reconnect,
    malformedCount: () => malformed,
  };
}
