/**
 * View model for the console.
 *
 * The model is derived purely from the last /state snapshot plus the event
 * suffix applied since: applying the same events to the same snapshot always
 * yields the same model, so a full replay after a reconnect converges on the
 * identical view. Nothing here is extrapolated locally; the load gauge, the
 * phase chip and the plan version all come straight from server messages.
 */

import type {
  Bounds,
  ClustersUpdatedPayload,
  MissionEvent,
  MissionReport,
  PhaseChangedPayload,
  Phase,
  PlanUpdatedPayload,
  Pose,
  PoseUpdatePayload,
  RasterUpdatedPayload,
  SoundingsSummaryPayload,
  StateSnapshot,
} from "./types.js";

export interface ScanProgress {
  count: number;
  total: number;
  scan: number;
}

export interface ViewModel {
  phase: Phase;
  clock: number;
  /** Sequence number of the last applied event (or of the snapshot). */
  seq: number;
  usv: Pose;
  harvester: Pose;
  load: number;
  capacity: number;
  planVersion: number;
  clusterCount: number;
  area: Bounds;
  cellSize: number;
  rasterNames: string[];
  report: MissionReport | null;
  scan: ScanProgress | null;
  /** USV positions seen so far, for the track overlay. */
  usvTrack: Array<[number, number]>;
}

/** Side effects the console should run after applying an event. */
export type Effect =
  | { kind: "fetch_raster"; name: string }
  | { kind: "fetch_clusters" }
  | { kind: "fetch_plan" }
  | { kind: "fetch_state" };

export interface Applied {
  vm: ViewModel;
  effects: Effect[];
}

export function initViewModel(snap: StateSnapshot): ViewModel {
  return {
    phase: snap.phase,
    clock: snap.clock,
    seq: snap.seq,
    usv: [...snap.usv],
    harvester: [...snap.harvester],
    load: snap.load,
    capacity: snap.capacity,
    planVersion: snap.plan_version,
    clusterCount: snap.cluster_count,
    area: [...snap.area],
    cellSize: snap.cell_size,
    rasterNames: [...snap.rasters],
    report: snap.report === null ? null : { ...snap.report },
    scan: null,
    usvTrack: [[snap.usv[0], snap.usv[1]]],
  };
}

/**
 * Apply one event, returning a new model plus any fetches it implies.
 * Events at or below the model's sequence are stale and ignored.
 */
export function applyEvent(vm: ViewModel, event: MissionEvent): Applied {
  if (event.seq <= vm.seq) {
    return { vm, effects: [] };
  }

  const next: ViewModel = { ...vm, seq: event.seq, clock: event.clock };
  const effects: Effect[] = [];

  switch (event.kind) {
    case "phase_changed": {
      const p = event.payload as unknown as PhaseChangedPayload;
      next.phase = p.to;
      break;
    }
    case "pose_update": {
      const p = event.payload as unknown as PoseUpdatePayload;
      next.usv = [...p.usv];
      next.harvester = [...p.harvester];
      next.load = p.load;
      const last = vm.usvTrack[vm.usvTrack.length - 1];
      if (last === undefined || last[0] !== p.usv[0] || last[1] !== p.usv[1]) {
        next.usvTrack = [...vm.usvTrack, [p.usv[0], p.usv[1]]];
      }
      break;
    }
    case "new_soundings_summary": {
      const p = event.payload as unknown as SoundingsSummaryPayload;
      next.scan = { count: p.count, total: p.total, scan: p.scan };
      break;
    }
    case "raster_updated": {
      const p = event.payload as unknown as RasterUpdatedPayload;
      if (!vm.rasterNames.includes(p.name)) {
        next.rasterNames = [...vm.rasterNames, p.name].sort();
      }
      effects.push({ kind: "fetch_raster", name: p.name });
      break;
    }
    case "clusters_updated": {
      const p = event.payload as unknown as ClustersUpdatedPayload;
      next.clusterCount = p.count;
      effects.push({ kind: "fetch_clusters" });
      break;
    }
    case "plan_updated": {
      const p = event.payload as unknown as PlanUpdatedPayload;
      next.planVersion = p.version;
      effects.push({ kind: "fetch_plan" });
      break;
    }
    case "report_ready": {
      // The payload is a teaser; the full report comes from /state.
      effects.push({ kind: "fetch_state" });
      break;
    }
    default:
      // Unknown kinds still advance seq/clock so resume stays gapless.
      break;
  }

  return { vm: next, effects };
}

/** Fold a whole event list into a model, discarding effects. */
export function replay(snap: StateSnapshot, events: readonly MissionEvent[]): ViewModel {
  let vm = initViewModel(snap);
  for (const event of events) {
    vm = applyEvent(vm, event).vm;
  }
  return vm;
}
