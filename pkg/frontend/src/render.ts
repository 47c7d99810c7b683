/** Canvas painters for the map view. All drawing is in ENU metres. */

import { valueRange, type AscGrid } from "./asc.js";
import { classColor, cssColor, depthColor, heightColor, loadColor, type Rgba } from "./colormap.js";
import type { Bounds, ClusterCollection, PlanDoc, Pose } from "./types.js";

export interface Transform {
  /** Pixels per metre. */
  scale: number;
  /** Canvas pixel offsets so the survey area fills the canvas with a margin. */
  offsetX: number;
  offsetY: number;
  canvasHeight: number;
}

export function makeTransform(area: Bounds, width: number, height: number, margin = 12): Transform {
  const [minE, minN, maxE, maxN] = area;
  const spanE = Math.max(maxE - minE, 1e-9);
  const spanN = Math.max(maxN - minN, 1e-9);
  const scale = Math.min((width - 2 * margin) / spanE, (height - 2 * margin) / spanN);
  return {
    scale,
    offsetX: margin - minE * scale + ((width - 2 * margin) - spanE * scale) / 2,
    offsetY: margin - minN * scale + ((height - 2 * margin) - spanN * scale) / 2,
    canvasHeight: height,
  };
}

/** World (east, north) to canvas pixels; north is up. */
export function toCanvas(t: Transform, east: number, north: number): [number, number] {
  return [east * t.scale + t.offsetX, t.canvasHeight - (north * t.scale + t.offsetY)];
}

/** Canvas pixels back to world (east, north). */
export function toWorld(t: Transform, x: number, y: number): [number, number] {
  return [(x - t.offsetX) / t.scale, (t.canvasHeight - y - t.offsetY) / t.scale];
}

export type RasterStyle = "depth" | "height" | "classification";

export function rasterStyleFor(name: string): RasterStyle {
  if (name === "classification") {
    return "classification";
  }
  if (name.includes("height") || name.includes("canopy")) {
    return "height";
  }
  return "depth";
}

/** Colour one grid into RGBA bytes at native resolution, row 0 = north. */
export function rasterizeGrid(grid: AscGrid, style: RasterStyle): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(grid.nCols * grid.nRows * 4);
  let lo = 0;
  let hi = 1;
  if (style === "depth") {
    const range = valueRange(grid);
    if (range !== null) {
      [lo, hi] = range;
    }
  }
  for (let i = 0; i < grid.values.length; i++) {
    const v = grid.values[i]!;
    let c: Rgba;
    if (style === "classification") {
      c = classColor(v);
    } else if (style === "height") {
      c = heightColor(v);
    } else {
      c = depthColor(v, lo, hi);
    }
    out[i * 4] = c[0];
    out[i * 4 + 1] = c[1];
    out[i * 4 + 2] = c[2];
    out[i * 4 + 3] = c[3];
  }
  return out;
}

export function paintRaster(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  grid: AscGrid,
  style: RasterStyle,
): void {
  const pixels = rasterizeGrid(grid, style);
  const image = new ImageData(pixels, grid.nCols, grid.nRows);
  const scratch = document.createElement("canvas");
  scratch.width = grid.nCols;
  scratch.height = grid.nRows;
  const sctx = scratch.getContext("2d");
  if (sctx === null) {
    return;
  }
  sctx.putImageData(image, 0, 0);

  const [x0, y0] = toCanvas(t, grid.xll, grid.yll + grid.nRows * grid.cellSize);
  const w = grid.nCols * grid.cellSize * t.scale;
  const h = grid.nRows * grid.cellSize * t.scale;
  ctx.save();
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(scratch, x0, y0, w, h);
  ctx.restore();
}

export function paintAreaOutline(ctx: CanvasRenderingContext2D, t: Transform, area: Bounds): void {
  const [x0, y0] = toCanvas(t, area[0], area[3]);
  const [x1, y1] = toCanvas(t, area[2], area[1]);
  ctx.save();
  ctx.strokeStyle = "rgba(160, 170, 190, 0.8)";
  ctx.lineWidth = 1;
  ctx.setLineDash([6, 4]);
  ctx.strokeRect(x0, y0, x1 - x0, y1 - y0);
  ctx.restore();
}

export function paintClusters(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  clusters: ClusterCollection,
): void {
  ctx.save();
  ctx.lineWidth = 1.5;
  for (const feature of clusters.features) {
    const ring = feature.geometry.coordinates[0];
    if (!ring || ring.length < 3) {
      continue;
    }
    ctx.beginPath();
    ring.forEach(([e, n], i) => {
      const [x, y] = toCanvas(t, e!, n!);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.closePath();
    ctx.fillStyle = "rgba(46, 160, 67, 0.15)";
    ctx.strokeStyle = "rgba(46, 160, 67, 0.9)";
    ctx.fill();
    ctx.stroke();

    const [cx, cy] = toCanvas(t, ...feature.properties.centroid);
    ctx.fillStyle = "rgba(230, 240, 230, 0.95)";
    ctx.font = "11px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(`#${feature.properties.id}`, cx, cy);
  }
  ctx.restore();
}

export function paintPlan(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  plan: PlanDoc,
  capacity: number,
): void {
  ctx.save();
  plan.legs.forEach((leg, i) => {
    const [x0, y0] = toCanvas(t, leg.start[0], leg.start[1]);
    const [x1, y1] = toCanvas(t, leg.end[0], leg.end[1]);
    const executed = i < plan.executed_prefix;
    const load = plan.load_profile[i] ?? 0;
    ctx.beginPath();
    ctx.moveTo(x0, y0);
    ctx.lineTo(x1, y1);
    if (leg.kind === "harvest_lane") {
      ctx.lineWidth = 3;
      ctx.setLineDash([]);
      const c = loadColor(capacity > 0 ? load / capacity : 0);
      ctx.strokeStyle = executed ? "rgba(110, 110, 120, 0.7)" : cssColor(c);
    } else {
      ctx.lineWidth = 1.2;
      ctx.setLineDash(leg.kind === "unload" ? [2, 3] : [5, 4]);
      ctx.strokeStyle = executed ? "rgba(110, 110, 120, 0.5)" : "rgba(170, 180, 200, 0.8)";
    }
    ctx.stroke();
    if (leg.kind === "unload" && !executed) {
      ctx.setLineDash([]);
      ctx.fillStyle = "rgba(170, 180, 200, 0.9)";
      ctx.fillRect(x1 - 3, y1 - 3, 6, 6);
    }
  });
  ctx.restore();
}

export function paintTrack(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  track: ReadonlyArray<[number, number]>,
): void {
  if (track.length < 2) {
    return;
  }
  ctx.save();
  ctx.beginPath();
  track.forEach(([e, n], i) => {
    const [x, y] = toCanvas(t, e, n);
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.strokeStyle = "rgba(120, 180, 255, 0.45)";
  ctx.lineWidth = 1;
  ctx.stroke();
  ctx.restore();
}

function paintVehicle(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  pose: Pose,
  color: string,
  size: number,
): void {
  const [x, y] = toCanvas(t, pose[0], pose[1]);
  ctx.save();
  ctx.translate(x, y);
  // Canvas y grows downward, so a CCW-from-east heading rotates clockwise.
  ctx.rotate(-pose[2]);
  ctx.beginPath();
  ctx.moveTo(size, 0);
  ctx.lineTo(-size * 0.7, size * 0.55);
  ctx.lineTo(-size * 0.7, -size * 0.55);
  ctx.closePath();
  ctx.fillStyle = color;
  ctx.fill();
  ctx.strokeStyle = "rgba(15, 18, 24, 0.9)";
  ctx.lineWidth = 1;
  ctx.stroke();
  ctx.restore();
}

export function paintVehicles(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  usv: Pose,
  harvester: Pose,
): void {
  paintVehicle(ctx, t, usv, "rgba(90, 170, 255, 0.95)", 7);
  paintVehicle(ctx, t, harvester, "rgba(255, 170, 60, 0.95)", 9);
}

/** The polygon an operator is currently sketching for mark_area/rescan. */
export function paintDraft(
  ctx: CanvasRenderingContext2D,
  t: Transform,
  vertices: ReadonlyArray<[number, number]>,
  color: string,
): void {
  if (vertices.length === 0) {
    return;
  }
  ctx.save();
  ctx.beginPath();
  vertices.forEach(([e, n], i) => {
    const [x, y] = toCanvas(t, e, n);
    if (i === 0) {
      ctx.moveTo(x, y);
    } else {
      ctx.lineTo(x, y);
    }
  });
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.setLineDash([4, 3]);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.fillStyle = color;
  for (const [e, n] of vertices) {
    const [x, y] = toCanvas(t, e, n);
    ctx.fillRect(x - 2, y - 2, 4, 4);
  }
  ctx.restore();
}
