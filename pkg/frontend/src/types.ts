/** Wire types mirroring the orchestrator's HTTP API. */

export type RunStatus =
  | "perceiving"
  | "planning"
  | "awaiting-approval"
  | "executing"
  | "done"
  | "failed"
  | "rejected";

export const TERMINAL_STATUSES: readonly RunStatus[] = ["done", "failed", "rejected"];

export interface PoseDto {
  x: number;
  y: number;
  z: number;
  roll: number;
  pitch: number;
  yaw: number;
}

export interface SceneObjectDto {
  label: string;
  pixel_centroid: { u: number; v: number };
  world_pose: PoseDto;
  region_area: number;
  region_median_intensity: number;
}

export interface MatchDto {
  query: string;
  candidate: string;
  candidate_index: number;
  score: number;
}

export interface ResolvedActionDto {
  task: string;
  program_id: string;
  params: string[];
  matches: MatchDto[];
}

export interface PlanLineDto {
  raw_action: string;
  raw_params: string[];
  source_line: number;
}

export interface ControllerOutcomeDto {
  ok: boolean;
  final_pose: PoseDto | null;
  progress_events: number;
  error: string | null;
}

export interface RunRecordDto {
  run_id: string;
  instruction: string;
  status: RunStatus;
  error: string | null;
  scene: SceneObjectDto[];
  plan: PlanLineDto[];
  plan_text: string;
  resolved: ResolvedActionDto[];
  batches: unknown[];
  controller_outcome: ControllerOutcomeDto | null;
  warnings: string[];
  timestamps: Record<string, number>;
}

export interface RunSummaryDto {
  run_id: string;
  instruction: string;
  status: RunStatus;
  timestamps: Record<string, number>;
}

export interface SceneResponseDto {
  run_id: string | null;
  image: string | null;
  width: number | null;
  height: number | null;
  objects: SceneObjectDto[];
}

export interface PipelineEvent {
  run_id: string;
  status: RunStatus;
  batch: number | null;
  command: number | null;
}
