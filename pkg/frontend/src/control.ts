/** Pointer-to-action mapping: proportional control toward the pointer. */

export interface CanvasMetrics {
  /** Canvas pixels per rink unit. */
  pixelsPerUnit: number;
}

/** Proportional gain in action units per rink unit of pointer offset. */
export const POINTER_GAIN = 8.0;

const clamp = (v: number) => Math.max(-1, Math.min(1, v));

/**
 * Convert a pointer position (rink pixels) and the striker position (rink
 * pixels) into an [ax, ay] action, each component clamped to [-1, 1].
 */
export function pointerToAction(
  pointerPx: [number, number],
  strikerPx: [number, number],
  metrics: CanvasMetrics,
): [number, number] {
  const scale = POINTER_GAIN / metrics.pixelsPerUnit;
  const ax = clamp((pointerPx[0] - strikerPx[0]) * scale);
  const ay = clamp((pointerPx[1] - strikerPx[1]) * scale);
  return [ax, ay];
}
