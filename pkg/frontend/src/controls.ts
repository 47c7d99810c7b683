/**
 * Phase gating for operator controls.
 *
 * This table mirrors the server's own command admission rules so that a
 * control is greyed out exactly when the command would be refused with 409.
 * A disabled control emits nothing; the server stays authoritative either
 * way, and a race (phase change in flight) surfaces as a refused-command
 * toast rather than a local state change.
 */

import type { Command, Phase } from "./types.js";

const ALL: readonly Phase[] = [
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

function allExcept(...excluded: Phase[]): readonly Phase[] {
  return ALL.filter((p) => !excluded.includes(p));
}

export const COMMAND_PHASES: Record<Command, readonly Phase[]> = {
  start: ["Idle"],
  approve_plan: ["AwaitingApproval"],
  reject_plan: ["AwaitingApproval"],
  mark_area: allExcept("Idle", "Done"),
  request_rescan: ["AwaitingApproval", "Harvesting"],
  set_unload_station: allExcept("Done"),
};

export function isCommandEnabled(command: Command, phase: Phase): boolean {
  return COMMAND_PHASES[command].includes(phase);
}

/**
 * Build the command payload a control would send, or null when the control
 * is disabled in the given phase. Callers must not POST when this is null.
 */
export function guardCommand(
  command: Command,
  phase: Phase,
  payload: Record<string, unknown> = {},
): { command: Command; payload: Record<string, unknown> } | null {
  if (!isCommandEnabled(command, phase)) {
    return null;
  }
  return { command, payload };
}
