/** Typed wrappers for the mission service HTTP endpoints. */

import { parseAsc, type AscGrid } from "./asc.js";
import type {
  ClusterCollection,
  Command,
  CommandResult,
  PlanDoc,
  StateSnapshot,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function getJson<T>(url: string, fetchImpl: typeof fetch): Promise<T> {
  const resp = await fetchImpl(url);
  if (!resp.ok) {
    throw new ApiError(resp.status, `GET ${url} -> ${resp.status}`);
  }
  return (await resp.json()) as T;
}

export function fetchState(baseUrl: string, fetchImpl: typeof fetch = fetch): Promise<StateSnapshot> {
  return getJson<StateSnapshot>(`${baseUrl}/state`, fetchImpl);
}

export function fetchPlan(baseUrl: string, fetchImpl: typeof fetch = fetch): Promise<PlanDoc> {
  return getJson<PlanDoc>(`${baseUrl}/plan`, fetchImpl);
}

export function fetchClusters(
  baseUrl: string,
  fetchImpl: typeof fetch = fetch,
): Promise<ClusterCollection> {
  return getJson<ClusterCollection>(`${baseUrl}/clusters`, fetchImpl);
}

export async function fetchRaster(
  baseUrl: string,
  name: string,
  fetchImpl: typeof fetch = fetch,
): Promise<AscGrid> {
  const url = `${baseUrl}/rasters/${encodeURIComponent(name)}`;
  const resp = await fetchImpl(url);
  if (!resp.ok) {
    throw new ApiError(resp.status, `GET ${url} -> ${resp.status}`);
  }
  return parseAsc(await resp.text());
}

/**
 * POST a command. Both 200 (applied) and 409 (refused in this phase) carry
 * a result body; other statuses raise.
 */
export async function postCommand(
  baseUrl: string,
  command: Command,
  payload: Record<string, unknown> = {},
  fetchImpl: typeof fetch = fetch,
): Promise<CommandResult> {
  const resp = await fetchImpl(`${baseUrl}/command`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ command, payload }),
  });
  if (resp.status !== 200 && resp.status !== 409) {
    let detail = `POST /command -> ${resp.status}`;
    try {
      const body = (await resp.json()) as { error?: string };
      if (body.error) {
        detail = `${detail}: ${body.error}`;
      }
    } catch {
      // Non-JSON error body; keep the status-only message.
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as CommandResult;
}
