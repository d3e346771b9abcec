import type { ApiClient } from "./api.js";
import type { PipelineEvent } from "./types.js";

export const DEFAULT_POLL_MS = 2000;

/** Live pipeline events: server-sent events when the browser supports them,
 * with a polling fallback (default 2 s) so the console still converges
 * behind proxies that buffer streams. */
export class EventFeed {
  private source: EventSource | null = null;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private lastStatus = new Map<string, string>();
  private stopped = false;

  constructor(
    private readonly api: ApiClient,
    private readonly onEvent: (event: PipelineEvent) => void,
    private readonly pollMs: number = DEFAULT_POLL_MS,
  ) {}

  start(): void {
    this.stopped = false;
    const EventSourceCtor = (globalThis as { EventSource?: typeof EventSource }).EventSource;
    if (EventSourceCtor) {
      this.source = new EventSourceCtor(`${this.api.baseUrl}/events`);
      this.source.onmessage = (message) => {
        this.onEvent(JSON.parse(message.data) as PipelineEvent);
      };
      this.source.onerror = () => {
        // stream broke (proxy, restart): fall back to polling
        this.source?.close();
        this.source = null;
        this.startPolling();
      };
    } else {
      this.startPolling();
    }
  }

  private startPolling(): void {
    if (this.stopped || this.pollTimer !== null) return;
    this.pollTimer = setInterval(() => void this.pollOnce(), this.pollMs);
  }

  async pollOnce(): Promise<void> {
    try {
      const { runs } = await this.api.listRuns();
      for (const run of runs) {
        if (this.lastStatus.get(run.run_id) !== run.status) {
          this.lastStatus.set(run.run_id, run.status);
          this.onEvent({ run_id: run.run_id, status: run.status, batch: null, command: null });
        }
      }
    } catch {
      // transient polling errors are retried on the next tick
    }
  }

  stop(): void {
    this.stopped = true;
    this.source?.close();
    this.source = null;
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }
}
