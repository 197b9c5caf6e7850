/** Payload shapes served by the burn assessment API. */

export interface QcVerdict {
  resolution_ok: boolean;
  laplacian_variance: number;
  mean_intensity: number;
  exposure_status: "under" | "ok" | "over";
  accepted: boolean;
  reasons: string[];
}

export interface UploadedView {
  view_id: string;
  verdict: QcVerdict;
}

export interface BurnMetrics {
  area_cm2: number;
  perimeter_cm: number;
  d_max_mm: number;
  d_avg_mm: number;
  volume_proxy_cm3: number;
  tbsa_percent: number | null;
  computed_at: string;
}

export interface MetricsResponse extends BurnMetrics {
  confidence: {
    n_images: number;
    inlier_ratio: number;
    mean_reprojection_error: number;
    coverage: number;
    weights: number[];
    score: number | null;
  } | null;
  fluids: {
    total_ml: number;
    rate_first8h_ml_per_h: number;
    rate_next16h_ml_per_h: number;
  } | null;
}

export interface SessionCard {
  session_id: string;
  captured_at: string;
  has_metrics: boolean;
  metrics: BurnMetrics | null;
}

export interface HealingPointPayload {
  day: number;
  metrics: BurnMetrics;
  delta_area_cm2: number;
  delta_d_max_mm: number;
  delta_volume_cm3: number;
  percent_area_change: number | null;
}

export interface HealingSeriesPayload {
  points: HealingPointPayload[];
  healing_rate_cm2_per_day: number | null;
  projected_recovery_days: number | null;
  baseline_zero_warning: boolean;
}

export interface TimelineResponse {
  patient_id: string;
  sessions: SessionCard[];
  series: HealingSeriesPayload | null;
}

export type JobState = "queued" | "running" | "done" | "failed";
export type StageState = "pending" | "running" | "done" | "failed" | "skipped";

export const STAGE_ORDER = [
  "qc",
  "features",
  "sfm",
  "scale",
  "paint",
  "metrics",
  "align",
  "report",
] as const;

export interface JobSnapshot {
  job_id: string;
  session_id: string;
  state: JobState;
  submitted_at: string | null;
  finished_at: string | null;
  stages: Record<string, StageState>;
  error_stage: string | null;
  error_detail: string | null;
}

export interface ServiceConfigPayload {
  min_images: number;
  min_width: number;
  min_height: number;
  blur_threshold: number;
  ratio_threshold: number;
}
