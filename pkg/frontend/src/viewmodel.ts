import { ApiClient, ApiError } from "./api.js";
import {
  TERMINAL_STATUSES,
  type PipelineEvent,
  type RunRecordDto,
  type RunStatus,
  type RunSummaryDto,
  type SceneResponseDto,
} from "./types.js";

export interface ProgressGauge {
  batch: number;
  command: number;
  events: number;
}

export interface ConsoleState {
  runId: string | null;
  status: RunStatus | null;
  banner: string | null;
  record: RunRecordDto | null;
  scene: SceneResponseDto | null;
  progress: ProgressGauge | null;
  history: RunSummaryDto[];
}

export interface PlanRow {
  action: string;
  params: string;
  scores: string;
  sourceLine: number;
}

export interface OverlayMarker {
  u: number;
  v: number;
  label: string;
}

type Listener = (state: ConsoleState) => void;

/** State machine behind the console's three panels (submit, review, execute).
 * All server mutations go through submit/approve/reject; everything else is
 * read-only tracking of the active run. */
export class ConsoleViewModel {
  readonly state: ConsoleState = {
    runId: null,
    status: null,
    banner: null,
    record: null,
    scene: null,
    progress: null,
    history: [],
  };

  private listeners: Listener[] = [];

  constructor(private readonly api: ApiClient) {}

  onChange(listener: Listener): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener(this.state);
  }

  /** Submit an instruction against the current frame. Client-side validation:
   * both inputs must be present, otherwise no request is issued. */
  async submit(imageBase64: string, instruction: string): Promise<boolean> {
    if (!imageBase64 || !instruction.trim()) {
      this.state.banner = "Both an image and an instruction are required.";
      this.notify();
      return false;
    }
    try {
      const { run_id } = await this.api.submitRun(imageBase64, instruction);
      this.state.runId = run_id;
      this.state.status = null;
      this.state.record = null;
      this.state.scene = null;
      this.state.progress = null;
      this.state.banner = null;
      this.notify();
      return true;
    } catch (error) {
      this.state.banner =
        error instanceof ApiError && error.status === 409
          ? "A run is already in flight; wait for it to finish."
          : `Submission failed: ${String(error)}`;
      this.notify();
      return false;
    }
  }

  /** Approve/reject controls are valid only while the run awaits approval. */
  canDecide(): boolean {
    return this.state.status === "awaiting-approval";
  }

  async decide(approve: boolean): Promise<boolean> {
    if (!this.state.runId || !this.canDecide()) {
      this.state.banner = "No plan is awaiting approval.";
      this.notify();
      return false;
    }
    try {
      if (approve) {
        await this.api.approve(this.state.runId);
      } else {
        await this.api.reject(this.state.runId);
      }
      this.state.banner = null;
      this.notify();
      return true;
    } catch (error) {
      this.state.banner =
        error instanceof ApiError && error.status === 409
          ? "Stale decision: the run moved on."
          : `Decision failed: ${String(error)}`;
      this.notify();
      return false;
    }
  }

  /** Feed one pipeline event; pulls the full record/scene on milestones. */
  async ingestEvent(event: PipelineEvent): Promise<void> {
    if (this.state.runId && event.run_id !== this.state.runId) return;
    this.state.runId = this.state.runId ?? event.run_id;
    const statusChanged = event.status !== this.state.status;
    this.state.status = event.status;
    if (event.batch !== null && event.command !== null) {
      this.state.progress = {
        batch: event.batch,
        command: event.command,
        events: (this.state.progress?.events ?? 0) + 1,
      };
    }
    if (statusChanged) {
      await this.refresh();
    }
    this.notify();
  }

  /** Converge on the server's view of the active run. */
  async refresh(): Promise<void> {
    if (!this.state.runId) return;
    try {
      this.state.record = await this.api.getRun(this.state.runId);
      this.state.status = this.state.record.status;
      if (this.state.record.scene.length > 0 && !this.state.scene) {
        this.state.scene = await this.api.getScene();
      }
      if (TERMINAL_STATUSES.includes(this.state.record.status)) {
        this.state.history = (await this.api.listRuns()).runs;
      }
    } catch {
      // keep the last known state; the next event retries
    }
    this.notify();
  }

  isFinished(): boolean {
    return this.state.status !== null && TERMINAL_STATUSES.includes(this.state.status);
  }

  /** Plan table rows: action, params, match scores, source line. */
  planRows(): PlanRow[] {
    const record = this.state.record;
    if (!record) return [];
    return record.resolved.map((action, index) => ({
      action: action.task,
      params: action.params.join(", "),
      scores: action.matches
        .map((m) => `${m.query} -> ${m.candidate} (${m.score.toFixed(2)})`)
        .join("; "),
      sourceLine: record.plan[index]?.source_line ?? 0,
    }));
  }

  /** Marker per detected object, at its exact pixel centroid. */
  overlayMarkers(): OverlayMarker[] {
    const scene = this.state.scene;
    if (!scene) return [];
    return scene.objects.map((object) => ({
      u: object.pixel_centroid.u,
      v: object.pixel_centroid.v,
      label: object.label,
    }));
  }
}
