/** Canvas renderer. Draws only server-authoritative state (plus interpolation). */

import type { ClientView } from "./view.js";
import { interpolate, phaseBanner } from "./view.js";

/** Rink extent in server units: x in [0, 1], y in [0, 2]; you defend y = 0. */
export const RINK_WIDTH = 1.0;
export const RINK_LENGTH = 2.0;
export const GOAL_WIDTH = 0.4;

/** The subset of CanvasRenderingContext2D the renderer uses (stubbable). */
export interface Draw2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  font: string;
  textAlign: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface RenderTarget {
  ctx: Draw2D;
  width: number;
  height: number;
}

export function renderFrame(
  target: RenderTarget,
  view: ClientView,
  interpT: number,
): void {
  const { ctx, width, height } = target;
  const sx = width / RINK_WIDTH;
  const sy = height / RINK_LENGTH;
  // Your side is at y = 0 on the rink but at the bottom of the screen.
  const px = (x: number) => x * sx;
  const py = (y: number) => height - y * sy;

  // Table and midline.
  ctx.fillStyle = "#0b3d91";
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = "#ffffff";
  ctx.lineWidth = 2;
  ctx.strokeRect(0, 0, width, height);
  ctx.beginPath();
  ctx.moveTo(0, py(RINK_LENGTH / 2));
  ctx.lineTo(width, py(RINK_LENGTH / 2));
  ctx.stroke();

  // Goal mouths.
  const gx0 = px((RINK_WIDTH - GOAL_WIDTH) / 2);
  const gw = GOAL_WIDTH * sx;
  ctx.fillStyle = "#222222";
  ctx.fillRect(gx0, py(0) - 4, gw, 4);
  ctx.fillRect(gx0, py(RINK_LENGTH), 4, 0);
  ctx.fillRect(gx0, py(RINK_LENGTH), gw, 4);

  const snap = interpolate(view, interpT);
  if (snap !== null) {
    ctx.fillStyle = "#f4f4f4";
    ctx.beginPath();
    ctx.arc(px(snap.puck[0]), py(snap.puck[1]), 0.03 * sx, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#2ecc71";
    ctx.beginPath();
    ctx.arc(px(snap.you[0]), py(snap.you[1]), 0.05 * sx, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#e74c3c";
    ctx.beginPath();
    ctx.arc(px(snap.opp[0]), py(snap.opp[1]), 0.05 * sx, 0, 2 * Math.PI);
    ctx.fill();
  }

  // Scoreboard and phase banner.
  ctx.fillStyle = "#ffffff";
  ctx.font = "16px sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(`${view.score[0]} : ${view.score[1]}`, width / 2, 24);
  ctx.fillText(phaseBanner(view.phase), width / 2, 48);

  if (view.phase === "break" || view.phase === "adapting") {
    const seconds = Math.ceil(view.phaseTicks / 60);
    ctx.fillText(`resuming in ~${seconds}s`, width / 2, height / 2);
  }
  if (view.phase === "finished" && view.report !== null) {
    const r = view.report;
    ctx.fillText(
      `final ${r.score[0]} : ${r.score[1]} — possession ${(
        r.possession * 100
      ).toFixed(1)}%`,
      width / 2,
      height / 2,
    );
  }
}
