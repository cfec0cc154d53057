/** Browser entry point: wires the canvas, pointer, and WebSocket together. */

import { connect } from "./client.js";
import type { SocketLike } from "./client.js";
import { pointerToAction } from "./control.js";
import { renderFrame } from "./render.js";
import type { Draw2D } from "./render.js";

export function start(doc: Document, win: Window): void {
  const params = new URLSearchParams(win.location.search);
  const server = params.get("server") ?? `ws://${win.location.hostname}:8765/ws`;
  const method = params.get("method") ?? "fast_adapt";
  const seed = Number(params.get("seed") ?? "0");

  const canvas = doc.getElementById("rink") as HTMLCanvasElement;
  const banner = doc.getElementById("status") as HTMLElement;
  const ctx = canvas.getContext("2d") as unknown as Draw2D;
  const pixelsPerUnit = canvas.width; // rink is 1 unit wide

  const open = () => {
    const socket = new WebSocket(server) as unknown as SocketLike;
    const handle = connect(socket, {
      method,
      seed,
      onLog: (line) => console.warn(line),
      onUpdate: () => undefined,
    });

    canvas.addEventListener("pointermove", (ev: PointerEvent) => {
      const view = handle.view();
      if (view.latest === null) return;
      const rect = canvas.getBoundingClientRect();
      const pointer: [number, number] = [
        ev.clientX - rect.left,
        canvas.height - (ev.clientY - rect.top), // rink y grows away from you
      ];
      const striker: [number, number] = [
        view.latest.you[0] * pixelsPerUnit,
        view.latest.you[1] * pixelsPerUnit,
      ];
      handle.setTarget(pointerToAction(pointer, striker, { pixelsPerUnit }));
    });

    const frame = () => {
      renderFrame(
        { ctx, width: canvas.width, height: canvas.height },
        handle.view(),
        1.0,
      );
      if (handle.needsReconnect()) {
        banner.textContent = "Connection lost — click to reconnect";
        banner.onclick = () => {
          banner.textContent = "";
          open();
        };
        return;
      }
      win.requestAnimationFrame(frame);
    };
    win.requestAnimationFrame(frame);
  };

  open();
}
