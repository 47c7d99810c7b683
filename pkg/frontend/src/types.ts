/** Wire types for the lakekeeper mission service HTTP/SSE interface. */

export type Phase =
  | "Idle"
  | "PreScan"
  | "Processing"
  | "Planning"
  | "AwaitingApproval"
  | "Harvesting"
  | "PostScan"
  | "Reporting"
  | "Done";

export const PHASES: readonly Phase[] = [
  "Idle",
  "PreScan",
  "Processing",
  "Planning",
  "AwaitingApproval",
  "Harvesting",
  "PostScan",
  "Reporting",
  "Done",
];

export type Command =
  | "start"
  | "approve_plan"
  | "reject_plan"
  | "mark_area"
  | "request_rescan"
  | "set_unload_station";

export const COMMANDS: readonly Command[] = [
  "start",
  "approve_plan",
  "reject_plan",
  "mark_area",
  "request_rescan",
  "set_unload_station",
];

/** [east, north, heading_rad] */
export type Pose = [number, number, number];

/** [min_e, min_n, max_e, max_n] */
export type Bounds = [number, number, number, number];

export interface MissionReport {
  [key: string]: number;
}

export interface StateSnapshot {
  phase: Phase;
  clock: number;
  seq: number;
  usv: Pose;
  harvester: Pose;
  load: number;
  capacity: number;
  plan_version: number;
  cluster_count: number;
  area: Bounds;
  cell_size: number;
  rasters: string[];
  report: MissionReport | null;
  dt: number;
  rtf: number;
  auto_approve: boolean;
}

export type EventKind =
  | "phase_changed"
  | "pose_update"
  | "new_soundings_summary"
  | "raster_updated"
  | "clusters_updated"
  | "plan_updated"
  | "report_ready";

export interface MissionEvent {
  seq: number;
  clock: number;
  kind: EventKind;
  payload: Record<string, unknown>;
}

export interface PhaseChangedPayload {
  from: Phase;
  to: Phase;
}

export interface PoseUpdatePayload {
  usv: Pose;
  harvester: Pose;
  load: number;
}

export interface SoundingsSummaryPayload {
  count: number;
  total: number;
  scan: number;
}

export interface RasterUpdatedPayload {
  name: string;
}

export interface ClustersUpdatedPayload {
  count: number;
}

export interface PlanUpdatedPayload {
  version: number;
  n_legs: number;
  executed_prefix: number;
  total_distance: number;
  total_time: number;
}

export type LegKind = "transit" | "harvest_lane" | "unload";

export interface PlanLeg {
  kind: LegKind;
  start: [number, number];
  end: [number, number];
  cluster_id: number;
  expected_load_delta: number;
}

export interface PlanDoc {
  version: number;
  legs: PlanLeg[];
  total_distance: number;
  total_time: number;
  load_profile: number[];
  executed_prefix: number;
}

export interface ClusterProperties {
  id: number;
  area_m2: number;
  mean_height_m: number;
  volume_m3: number;
  load_volume_m3: number;
  centroid: [number, number];
  cell_size: number;
}

export interface ClusterFeature {
  type: "Feature";
  properties: ClusterProperties;
  geometry: {
    type: "Polygon";
    coordinates: number[][][];
  };
}

export interface ClusterCollection {
  type: "FeatureCollection";
  features: ClusterFeature[];
}

export interface CommandResult {
  applied: boolean;
  reason: string;
  seq: number;
}
