// Fixed-interval polling driver. The queue endpoint carries an ETag, so
// unchanged polls cost a 304 and no re-render.

export interface Poller {
  stop(): void;
  /** Run one cycle immediately without waiting for the interval. */
  kick(): Promise<void>;
}

export const DEFAULT_POLL_MS = 3000;

export function startPolling(
  tick: () => Promise<void>,
  intervalMs: number = DEFAULT_POLL_MS,
): Poller {
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | null = null;

  async function cycle(): Promise<void> {
    if (stopped) return;
    try {
      await tick();
    } catch {
      // transient failure: keep polling, the next cycle may succeed
    }
    if (!stopped) timer = setTimeout(cycle, intervalMs);
  }

  timer = setTimeout(cycle, intervalMs);
  return {
    stop() {
      stopped = true;
      if (timer) clearTimeout(timer);
    },
    async kick() {
      await tick();
    },
  };
}
