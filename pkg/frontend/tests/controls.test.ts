import { describe, expect, it } from "vitest";
import { COMMAND_PHASES, guardCommand, isCommandEnabled } from "../src/controls.js";
import { COMMANDS, PHASES, type Command, type Phase } from "../src/types.js";

// The admission rules the service enforces, written out long-hand so a trim
// of the table in controls.ts fails loudly.
const EXPECTED: Array<[Command, Phase, boolean]> = [];
for (const phase of PHASES) {
  EXPECTED.push(["start", phase, phase === "Idle"]);
  EXPECTED.push(["approve_plan", phase, phase === "AwaitingApproval"]);
  EXPECTED.push(["reject_plan", phase, phase === "AwaitingApproval"]);
  EXPECTED.push(["mark_area", phase, phase !== "Idle" && phase !== "Done"]);
  EXPECTED.push(["request_rescan", phase, phase === "AwaitingApproval" || phase === "Harvesting"]);
  EXPECTED.push(["set_unload_station", phase, phase !== "Done"]);
}

describe("isCommandEnabled", () => {
  it("matches the service admission rules for every command and phase", () => {
    for (const [command, phase, enabled] of EXPECTED) {
      expect(isCommandEnabled(command, phase), `${command} in ${phase}`).toBe(enabled);
    }
  });

  it("covers every command", () => {
    expect(Object.keys(COMMAND_PHASES).sort()).toEqual([...COMMANDS].sort());
  });
});

describe("guardCommand", () => {
  it("emits nothing from a disabled control", () => {
    expect(guardCommand("approve_plan", "PreScan")).toBeNull();
    expect(guardCommand("start", "Harvesting")).toBeNull();
    expect(guardCommand("mark_area", "Done", { polygon: [] })).toBeNull();
  });

  it("passes the payload through when enabled", () => {
    const polygon = [
      [1, 1],
      [2, 1],
      [2, 2],
    ];
    expect(guardCommand("mark_area", "Harvesting", { polygon })).toEqual({
      command: "mark_area",
      payload: { polygon },
    });
    expect(guardCommand("approve_plan", "AwaitingApproval")).toEqual({
      command: "approve_plan",
      payload: {},
    });
  });
});
