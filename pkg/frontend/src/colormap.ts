/** Fixed colour ramps for the map layers. */

export type Rgba = [number, number, number, number];

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

function mix(a: Rgba, b: Rgba, t: number): Rgba {
  return [
    Math.round(lerp(a[0], b[0], t)),
    Math.round(lerp(a[1], b[1], t)),
    Math.round(lerp(a[2], b[2], t)),
    Math.round(lerp(a[3], b[3], t)),
  ];
}

export const NODATA_COLOR: Rgba = [40, 40, 46, 255];

const DEPTH_SHALLOW: Rgba = [198, 227, 255, 255];
const DEPTH_DEEP: Rgba = [8, 48, 107, 255];

/**
 * Blue ramp for depth grids: light at the shallow end of [min, max],
 * dark navy at the deep end.
 */
export function depthColor(depth: number, min: number, max: number): Rgba {
  if (Number.isNaN(depth)) {
    return NODATA_COLOR;
  }
  const span = max - min;
  const t = span > 0 ? Math.min(1, Math.max(0, (depth - min) / span)) : 0;
  return mix(DEPTH_SHALLOW, DEPTH_DEEP, t);
}

const HEIGHT_STOPS: Array<[number, Rgba]> = [
  [0.0, [34, 120, 52, 255]],
  [0.5, [222, 203, 46, 255]],
  [1.0, [201, 42, 42, 255]],
];

/**
 * Weed-height heat ramp with fixed stops: green at 0 m, yellow at 0.5 m,
 * red at 1.0 m and above.
 */
export function heightColor(height: number): Rgba {
  if (Number.isNaN(height)) {
    return NODATA_COLOR;
  }
  const stops = HEIGHT_STOPS;
  if (height <= stops[0]![0]) {
    return stops[0]![1];
  }
  for (let i = 1; i < stops.length; i++) {
    const [x1, c1] = stops[i]!;
    const [x0, c0] = stops[i - 1]!;
    if (height <= x1) {
      return mix(c0, c1, (height - x0) / (x1 - x0));
    }
  }
  return stops[stops.length - 1]![1];
}

const CLASS_COLORS: Record<number, Rgba> = {
  0: [90, 90, 98, 255],
  1: [194, 178, 128, 255],
  2: [46, 160, 67, 255],
  3: [214, 93, 14, 255],
};

/** Fixed colours for classification codes: unknown, seabed, weed, object. */
export function classColor(code: number): Rgba {
  if (Number.isNaN(code)) {
    return NODATA_COLOR;
  }
  return CLASS_COLORS[Math.round(code)] ?? NODATA_COLOR;
}

/** Green-to-red ramp for the load fraction along plan legs and the gauge. */
export function loadColor(fraction: number): Rgba {
  const t = Math.min(1, Math.max(0, fraction));
  if (t <= 0.5) {
    return mix([46, 160, 67, 255], [222, 203, 46, 255], t / 0.5);
  }
  return mix([222, 203, 46, 255], [201, 42, 42, 255], (t - 0.5) / 0.5);
}

export function cssColor(c: Rgba): string {
  return `rgba(${c[0]}, ${c[1]}, ${c[2]}, ${c[3] / 255})`;
}
