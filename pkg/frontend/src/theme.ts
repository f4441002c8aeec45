// Layout proportions and interaction constants. Zones hug the edges of
// the viewport and keep the center clear for the real world; the ring
// takes the center only while derivative keywords are shown.

export interface Theme {
  /** Minimum hit-area edge for any gaze-selectable element, px. */
  minTargetPx: number;
  /** Hover dwell before a pointer target counts as gazed-at, ms. */
  hoverSettleMs: number;
  /** Two presses on the same target within this window form a double click. */
  doubleClickMs: number;
  /** Ring radius as a fraction of the shorter viewport edge. */
  ringRadiusFraction: number;
  /** Zone thickness (top/bottom strips, side columns), px. */
  stripPx: number;
  sidePx: number;
}

export const defaultTheme: Theme = {
  minTargetPx: 56,
  hoverSettleMs: 100,
  doubleClickMs: 500,
  ringRadiusFraction: 0.22,
  stripPx: 88,
  sidePx: 150,
};

export interface RingSlot {
  x: number;
  y: number;
}

/** Center slot plus up to four positions around it. */
export function ringSlots(
  width: number,
  height: number,
  theme: Theme,
): { center: RingSlot; around: RingSlot[] } {
  const cx = width / 2;
  const cy = height / 2;
  const radius = Math.min(width, height) * theme.ringRadiusFraction;
  const around = [0, 1, 2, 3].map((i) => {
    const angle = -Math.PI / 2 + (i * Math.PI) / 2; // top, right, bottom, left
    return { x: cx + radius * Math.cos(angle), y: cy + radius * Math.sin(angle) };
  });
  return { center: { x: cx, y: cy }, around };
}
