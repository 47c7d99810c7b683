import { describe, expect, it } from "vitest";
import { classColor, depthColor, heightColor, loadColor, NODATA_COLOR } from "../src/colormap.js";

describe("depthColor", () => {
  it("is light at the shallow end and dark at the deep end", () => {
    const shallow = depthColor(1.0, 1.0, 5.0);
    const deep = depthColor(5.0, 1.0, 5.0);
    expect(shallow[2]).toBeGreaterThan(deep[2] - 1);
    expect(shallow[0]).toBeGreaterThan(deep[0]);
  });

  it("clamps outside the range and handles NaN", () => {
    expect(depthColor(-10, 1, 5)).toEqual(depthColor(1, 1, 5));
    expect(depthColor(99, 1, 5)).toEqual(depthColor(5, 1, 5));
    expect(depthColor(NaN, 1, 5)).toEqual(NODATA_COLOR);
  });
});

describe("heightColor", () => {
  it("hits the fixed stops at 0, 0.5 and 1.0 m", () => {
    expect(heightColor(0.0)).toEqual([34, 120, 52, 255]);
    expect(heightColor(0.5)).toEqual([222, 203, 46, 255]);
    expect(heightColor(1.0)).toEqual([201, 42, 42, 255]);
  });

  it("saturates above 1.0 m", () => {
    expect(heightColor(2.5)).toEqual(heightColor(1.0));
  });

  it("interpolates between stops", () => {
    const c = heightColor(0.25);
    expect(c[0]).toBeGreaterThan(34);
    expect(c[0]).toBeLessThan(222);
  });
});

describe("classColor", () => {
  it("gives each code a distinct fixed colour", () => {
    const seen = new Set([0, 1, 2, 3].map((k) => classColor(k).join(",")));
    expect(seen.size).toBe(4);
  });

  it("falls back to the NODATA colour for unknown codes", () => {
    expect(classColor(42)).toEqual(NODATA_COLOR);
    expect(classColor(NaN)).toEqual(NODATA_COLOR);
  });
});

describe("loadColor", () => {
  it("runs green to red as the hopper fills", () => {
    const empty = loadColor(0);
    const full = loadColor(1);
    expect(empty[1]).toBeGreaterThan(empty[0]);
    expect(full[0]).toBeGreaterThan(full[1]);
  });
});
