/**
 * Console bootstrap: wires the HTTP/SSE client, the reducer and the canvas
 * painters to the page. The service base URL defaults to the page origin and
 * can be overridden with ?server=http://host:port for a console served from
 * a file or another host (the service answers CORS preflights).
 */

import type { AscGrid } from "./asc.js";
import { fetchClusters, fetchPlan, fetchRaster, fetchState, postCommand } from "./api.js";
import { cssColor, loadColor } from "./colormap.js";
import { guardCommand, isCommandEnabled } from "./controls.js";
import { EventStream, type StreamStatus } from "./events.js";
import {
  makeTransform,
  paintAreaOutline,
  paintClusters,
  paintDraft,
  paintPlan,
  paintRaster,
  paintTrack,
  paintVehicles,
  rasterStyleFor,
  toWorld,
  type Transform,
} from "./render.js";
import { applyEvent, initViewModel, type Effect, type ViewModel } from "./store.js";
import type { ClusterCollection, Command, PlanDoc } from "./types.js";

type DraftMode = "mark_area" | "request_rescan" | "set_unload_station" | null;

interface ConsoleState {
  vm: ViewModel | null;
  rasters: Map<string, AscGrid>;
  clusters: ClusterCollection | null;
  plan: PlanDoc | null;
  activeRaster: string | null;
  showClusters: boolean;
  showPlan: boolean;
  showTrack: boolean;
  draftMode: DraftMode;
  draft: Array<[number, number]>;
}

const state: ConsoleState = {
  vm: null,
  rasters: new Map(),
  clusters: null,
  plan: null,
  activeRaster: null,
  showClusters: true,
  showPlan: true,
  showTrack: true,
  draftMode: null,
  draft: [],
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

const baseUrl = (() => {
  const override = new URLSearchParams(window.location.search).get("server");
  return (override ?? window.location.origin).replace(/\/$/, "");
})();

const canvas = el<HTMLCanvasElement>("map");
const ctx = canvas.getContext("2d");

function toast(message: string, kind: "info" | "error" = "info"): void {
  const host = el<HTMLDivElement>("toasts");
  const node = document.createElement("div");
  node.className = `toast ${kind}`;
  node.textContent = message;
  host.appendChild(node);
  setTimeout(() => node.remove(), 5000);
}

function setStatus(status: StreamStatus, detail?: string): void {
  const banner = el<HTMLSpanElement>("conn");
  banner.dataset["state"] = status;
  banner.textContent =
    status === "open"
      ? "live"
      : status === "ended"
        ? "stream ended"
        : detail
          ? `${status} (${detail})`
          : status;
}

function transform(): Transform | null {
  if (state.vm === null) {
    return null;
  }
  return makeTransform(state.vm.area, canvas.width, canvas.height);
}

function render(): void {
  if (ctx === null || state.vm === null) {
    return;
  }
  const t = transform();
  if (t === null) {
    return;
  }
  ctx.fillStyle = "#14161c";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  if (state.activeRaster !== null) {
    const grid = state.rasters.get(state.activeRaster);
    if (grid !== undefined) {
      paintRaster(ctx, t, grid, rasterStyleFor(state.activeRaster));
    }
  }
  paintAreaOutline(ctx, t, state.vm.area);
  if (state.showClusters && state.clusters !== null) {
    paintClusters(ctx, t, state.clusters);
  }
  if (state.showPlan && state.plan !== null) {
    paintPlan(ctx, t, state.plan, state.vm.capacity);
  }
  if (state.showTrack) {
    paintTrack(ctx, t, state.vm.usvTrack);
  }
  paintVehicles(ctx, t, state.vm.usv, state.vm.harvester);
  if (state.draft.length > 0) {
    const color = state.draftMode === "request_rescan" ? "rgba(90, 170, 255, 0.95)" : "rgba(255, 120, 120, 0.95)";
    paintDraft(ctx, t, state.draft, color);
  }
}

function renderSidebar(): void {
  const vm = state.vm;
  if (vm === null) {
    return;
  }
  const chip = el<HTMLSpanElement>("phase");
  chip.textContent = vm.phase;
  chip.dataset["phase"] = vm.phase;
  el<HTMLSpanElement>("clock").textContent = `${vm.clock.toFixed(1)} s`;
  el<HTMLSpanElement>("seq").textContent = `#${vm.seq}`;

  const fill = el<HTMLDivElement>("load-fill");
  const frac = vm.capacity > 0 ? vm.load / vm.capacity : 0;
  fill.style.width = `${Math.min(100, frac * 100).toFixed(1)}%`;
  fill.style.background = cssColor(loadColor(frac));
  el<HTMLSpanElement>("load-text").textContent = `${vm.load.toFixed(2)} / ${vm.capacity.toFixed(1)} m³`;

  el<HTMLSpanElement>("clusters-n").textContent = String(vm.clusterCount);
  el<HTMLSpanElement>("plan-v").textContent = vm.planVersion > 0 ? `v${vm.planVersion}` : "none";
  el<HTMLSpanElement>("scan-progress").textContent = vm.scan
    ? `scan ${vm.scan.scan}: ${vm.scan.total} soundings`
    : "idle";

  const report = el<HTMLPreElement>("report");
  report.textContent = vm.report
    ? Object.entries(vm.report)
        .map(([k, v]) => `${k}: ${typeof v === "number" ? v.toFixed(3) : v}`)
        .join("\n")
    : "(no report yet)";

  for (const command of ["start", "approve_plan", "reject_plan"] as Command[]) {
    el<HTMLButtonElement>(`btn-${command}`).disabled = !isCommandEnabled(command, vm.phase);
  }
  el<HTMLButtonElement>("btn-mark_area").disabled = !isCommandEnabled("mark_area", vm.phase);
  el<HTMLButtonElement>("btn-request_rescan").disabled = !isCommandEnabled("request_rescan", vm.phase);
  el<HTMLButtonElement>("btn-set_unload_station").disabled = !isCommandEnabled("set_unload_station", vm.phase);

  renderLayerPicker();
}

function renderLayerPicker(): void {
  const vm = state.vm;
  if (vm === null) {
    return;
  }
  const picker = el<HTMLSelectElement>("raster-pick");
  const current = new Set(Array.from(picker.options).map((o) => o.value));
  for (const name of vm.rasterNames) {
    if (!current.has(name)) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      picker.appendChild(opt);
    }
  }
  if (state.activeRaster === null && vm.rasterNames.length > 0) {
    state.activeRaster = vm.rasterNames.includes("canopy") ? "canopy" : vm.rasterNames[0]!;
    picker.value = state.activeRaster;
    void loadRaster(state.activeRaster);
  }
}

async function loadRaster(name: string): Promise<void> {
  try {
    state.rasters.set(name, await fetchRaster(baseUrl, name));
    render();
  } catch (err) {
    toast(`raster ${name}: ${String(err)}`, "error");
  }
}

async function runEffects(effects: Effect[]): Promise<void> {
  for (const effect of effects) {
    try {
      if (effect.kind === "fetch_raster") {
        if (state.activeRaster === effect.name || !state.rasters.has(effect.name)) {
          state.rasters.set(effect.name, await fetchRaster(baseUrl, effect.name));
        }
      } else if (effect.kind === "fetch_clusters") {
        state.clusters = await fetchClusters(baseUrl);
      } else if (effect.kind === "fetch_plan") {
        state.plan = await fetchPlan(baseUrl);
      } else if (effect.kind === "fetch_state") {
        const snap = await fetchState(baseUrl);
        if (state.vm !== null && snap.report !== null) {
          state.vm = { ...state.vm, report: snap.report };
        }
      }
    } catch (err) {
      toast(String(err), "error");
    }
  }
}

async function sendCommand(command: Command, payload: Record<string, unknown> = {}): Promise<void> {
  const vm = state.vm;
  if (vm === null) {
    return;
  }
  const guarded = guardCommand(command, vm.phase, payload);
  if (guarded === null) {
    return;
  }
  try {
    const result = await postCommand(baseUrl, guarded.command, guarded.payload);
    if (!result.applied) {
      toast(`${command} refused: ${result.reason}`, "error");
    } else {
      toast(`${command} accepted`);
    }
  } catch (err) {
    toast(`${command} failed: ${String(err)}`, "error");
  }
}

function finishDraft(): void {
  const mode = state.draftMode;
  if (mode === null) {
    return;
  }
  if (mode === "set_unload_station") {
    state.draftMode = null;
    state.draft = [];
    render();
    return;
  }
  if (state.draft.length >= 3) {
    const polygon = state.draft.map(([e, n]) => [e, n]);
    void sendCommand(mode, { polygon });
  } else {
    toast("polygon needs at least 3 vertices", "error");
  }
  state.draftMode = null;
  state.draft = [];
  render();
}

function onCanvasClick(evt: MouseEvent): void {
  const t = transform();
  if (t === null || state.draftMode === null) {
    return;
  }
  const rect = canvas.getBoundingClientRect();
  const [e, n] = toWorld(
    t,
    ((evt.clientX - rect.left) / rect.width) * canvas.width,
    ((evt.clientY - rect.top) / rect.height) * canvas.height,
  );
  if (state.draftMode === "set_unload_station") {
    void sendCommand("set_unload_station", { station: [e, n] });
    state.draftMode = null;
    state.draft = [];
    render();
    return;
  }
  state.draft.push([e, n]);
  render();
}

function armDraft(mode: Exclude<DraftMode, null>): void {
  if (state.vm === null || !isCommandEnabled(mode, state.vm.phase)) {
    return;
  }
  state.draftMode = state.draftMode === mode ? null : mode;
  state.draft = [];
  toast(
    mode === "set_unload_station"
      ? "click the map to place the unload station"
      : "click vertices, double-click to send",
  );
}

async function connect(): Promise<void> {
  setStatus("connecting");
  const snap = await fetchState(baseUrl);
  state.vm = initViewModel(snap);
  renderSidebar();
  render();

  await runEffects([{ kind: "fetch_clusters" }]);
  if (snap.plan_version > 0) {
    await runEffects([{ kind: "fetch_plan" }]);
  }
  render();

  const stream = new EventStream({
    baseUrl,
    since: snap.seq,
    shouldReconnect: () => state.vm?.phase !== "Done",
    onStatus: setStatus,
    onEvent: (event) => {
      if (state.vm === null) {
        return;
      }
      const { vm, effects } = applyEvent(state.vm, event);
      state.vm = vm;
      renderSidebar();
      render();
      if (effects.length > 0) {
        void runEffects(effects).then(render);
      }
    },
  });
  stream.start();
}

function wireControls(): void {
  el<HTMLButtonElement>("btn-start").addEventListener("click", () => void sendCommand("start"));
  el<HTMLButtonElement>("btn-approve_plan").addEventListener("click", () => void sendCommand("approve_plan"));
  el<HTMLButtonElement>("btn-reject_plan").addEventListener("click", () => void sendCommand("reject_plan"));
  el<HTMLButtonElement>("btn-mark_area").addEventListener("click", () => armDraft("mark_area"));
  el<HTMLButtonElement>("btn-request_rescan").addEventListener("click", () => armDraft("request_rescan"));
  el<HTMLButtonElement>("btn-set_unload_station").addEventListener("click", () => armDraft("set_unload_station"));
  canvas.addEventListener("click", onCanvasClick);
  canvas.addEventListener("dblclick", (evt) => {
    evt.preventDefault();
    finishDraft();
  });
  el<HTMLSelectElement>("raster-pick").addEventListener("change", (evt) => {
    const name = (evt.target as HTMLSelectElement).value;
    state.activeRaster = name;
    if (!state.rasters.has(name)) {
      void loadRaster(name);
    } else {
      render();
    }
  });
  el<HTMLInputElement>("show-clusters").addEventListener("change", (evt) => {
    state.showClusters = (evt.target as HTMLInputElement).checked;
    render();
  });
  el<HTMLInputElement>("show-plan").addEventListener("change", (evt) => {
    state.showPlan = (evt.target as HTMLInputElement).checked;
    render();
  });
  el<HTMLInputElement>("show-track").addEventListener("change", (evt) => {
    state.showTrack = (evt.target as HTMLInputElement).checked;
    render();
  });
}

wireControls();
connect().catch((err) => {
  setStatus("retrying", String(err));
  toast(`cannot reach service at ${baseUrl}: ${String(err)}`, "error");
});
