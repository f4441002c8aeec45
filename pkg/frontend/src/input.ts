// Input mapping: pointer hover stands in for gaze, a press key for the
// confirmation click, a held modifier for the touch sensor.
//
// Discrimination happens here, client-side: two presses on the same
// target strictly within the double-click window collapse into one
// dblclick command; a press on a different target flushes the pending
// one immediately. The server never sees raw press pairs.

export interface InputSink {
  sendClick(target: string): void;
  sendDoubleClick(target: string): void;
  sendTouch(on: boolean): void;
}

type TimerFn = (fn: () => void, ms: number) => unknown;
type CancelFn = (handle: unknown) => void;

export class PressDiscriminator {
  private pending: { target: string; at: number; handle: unknown } | null = null;

  constructor(
    private sink: InputSink,
    private windowMs = 500,
    private setTimer: TimerFn = (fn, ms) => setTimeout(fn, ms),
    private cancelTimer: CancelFn = (h) => clearTimeout(h as number),
    private now: () => number = () => performance.now(),
  ) {}

  press(target: string): void {
    const at = this.now();
    if (this.pending) {
      const { target: prevTarget, at: prevAt, handle } = this.pending;
      if (target === prevTarget && at - prevAt < this.windowMs) {
        this.cancelTimer(handle);
        this.pending = null;
        this.sink.sendDoubleClick(target);
        return;
      }
      this.cancelTimer(handle);
      this.pending = null;
      this.sink.sendClick(prevTarget);
    }
    const handle = this.setTimer(() => this.flush(), this.windowMs);
    this.pending = { target, at, handle };
  }

  flush(): void {
    if (this.pending) {
      const { target, handle } = this.pending;
      this.cancelTimer(handle);
      this.pending = null;
      this.sink.sendClick(target);
    }
  }
}

/** Pointer hover with a settle delay: the gaze target binds only after
 * the pointer rests on an element for `settleMs`. */
export class GazeTracker {
  private candidate: string | null = null;
  private settled: string | null = null;
  private handle: unknown = null;

  constructor(
    private settleMs = 100,
    private setTimer: TimerFn = (fn, ms) => setTimeout(fn, ms),
    private cancelTimer: CancelFn = (h) => clearTimeout(h as number),
    private onSettle: (target: string | null) => void = () => {},
  ) {}

  hover(target: string | null): void {
    if (target === this.candidate) return;
    if (this.handle !== null) {
      this.cancelTimer(this.handle);
      this.handle = null;
    }
    this.candidate = target;
    if (target === null) {
      this.settled = null;
      this.onSettle(null);
      return;
    }
    this.handle = this.setTimer(() => {
      this.settled = target;
      this.onSettle(target);
    }, this.settleMs);
  }

  current(): string | null {
    return this.settled;
  }
}

export interface BindOptions {
  touchKey?: string; // held modifier = touch-on
  pressKey?: string; // confirmation press
}

/** Wire DOM events: hover via `data-target` attributes, Space to touch,
 * Enter to press the gazed target, direct mouse clicks as presses. */
export function bindDom(
  root: HTMLElement,
  gaze: GazeTracker,
  presses: PressDiscriminator,
  sink: InputSink,
  options: BindOptions = {},
): void {
  const touchKey = options.touchKey ?? " ";
  const pressKey = options.pressKey ?? "Enter";
  let touching = false;

  root.addEventListener("mouseover", (event) => {
    const el = (event.target as HTMLElement).closest<HTMLElement>("[data-target]");
    gaze.hover(el ? el.dataset.target ?? null : null);
  });
  root.addEventListener("mouseleave", () => gaze.hover(null));
  root.addEventListener("click", (event) => {
    const el = (event.target as HTMLElement).closest<HTMLElement>("[data-target]");
    if (el?.dataset.target) presses.press(el.dataset.target);
  });
  window.addEventListener("keydown", (event) => {
    if (event.key === touchKey && !event.repeat) {
      touching = true;
      sink.sendTouch(true);
      event.preventDefault();
    } else if (event.key === pressKey && !event.repeat) {
      const target = gaze.current();
      if (target) presses.press(target);
      event.preventDefault();
    }
  });
  window.addEventListener("keyup", (event) => {
    if (event.key === touchKey && touching) {
      touching = false;
      sink.sendTouch(false);
      event.preventDefault();
    }
  });
}
