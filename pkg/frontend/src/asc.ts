/** Parser for the ESRI ASCII grids served by the raster endpoint. */

export interface AscGrid {
  nCols: number;
  nRows: number;
  /** South-west corner of the grid, metres east/north of the local origin. */
  xll: number;
  yll: number;
  cellSize: number;
  /**
   * Row-major values with row 0 at the TOP (northernmost row), matching the
   * file layout. NODATA cells are NaN.
   */
  values: Float64Array;
}

const HEADER_KEYS = [
  "ncols",
  "nrows",
  "xllcorner",
  "yllcorner",
  "cellsize",
  "nodata_value",
] as const;

export function parseAsc(text: string): AscGrid {
  const lines = text.split("\n");
  if (lines.length < 7) {
    throw new Error("ASCII grid too short: expected 6 header lines plus data");
  }

  const header: Record<string, number> = {};
  for (let i = 0; i < 6; i++) {
    const line = lines[i]!.trim();
    const m = line.match(/^(\S+)\s+(\S+)$/);
    if (!m) {
      throw new Error(`bad ASCII grid header line ${i + 1}: ${JSON.stringify(line)}`);
    }
    const key = m[1]!.toLowerCase();
    const value = Number(m[2]);
    if (!HEADER_KEYS.includes(key as (typeof HEADER_KEYS)[number])) {
      throw new Error(`unexpected ASCII grid header key ${JSON.stringify(m[1])}`);
    }
    if (!Number.isFinite(value)) {
      throw new Error(`non-numeric ASCII grid header value for ${key}`);
    }
    header[key] = value;
  }
  for (const key of HEADER_KEYS) {
    if (!(key in header)) {
      throw new Error(`ASCII grid header is missing ${key}`);
    }
  }

  const nCols = header["ncols"]!;
  const nRows = header["nrows"]!;
  if (!Number.isInteger(nCols) || !Number.isInteger(nRows) || nCols <= 0 || nRows <= 0) {
    throw new Error(`bad ASCII grid shape ${nCols}x${nRows}`);
  }
  const nodata = header["nodata_value"]!;

  const values = new Float64Array(nCols * nRows);
  let row = 0;
  for (let i = 6; i < lines.length; i++) {
    const line = lines[i]!.trim();
    if (line === "") {
      continue;
    }
    if (row >= nRows) {
      throw new Error(`ASCII grid has more than ${nRows} data rows`);
    }
    const parts = line.split(/\s+/);
    if (parts.length !== nCols) {
      throw new Error(`ASCII grid row ${row} has ${parts.length} values, expected ${nCols}`);
    }
    const base = row * nCols;
    for (let c = 0; c < nCols; c++) {
      const v = Number(parts[c]);
      if (!Number.isFinite(v)) {
        throw new Error(`non-numeric value in ASCII grid row ${row}`);
      }
      values[base + c] = v === nodata ? NaN : v;
    }
    row++;
  }
  if (row !== nRows) {
    throw new Error(`ASCII grid has ${row} data rows, expected ${nRows}`);
  }

  return {
    nCols,
    nRows,
    xll: header["xllcorner"]!,
    yll: header["yllcorner"]!,
    cellSize: header["cellsize"]!,
    values,
  };
}

/** Value at (col, rowFromTop); NaN outside the grid. */
export function gridValue(grid: AscGrid, col: number, rowFromTop: number): number {
  if (col < 0 || col >= grid.nCols || rowFromTop < 0 || rowFromTop >= grid.nRows) {
    return NaN;
  }
  return grid.values[rowFromTop * grid.nCols + col]!;
}

/** Value at a world position (metres east/north); NaN outside or NODATA. */
export function sampleAt(grid: AscGrid, east: number, north: number): number {
  const col = Math.floor((east - grid.xll) / grid.cellSize);
  const rowFromBottom = Math.floor((north - grid.yll) / grid.cellSize);
  const rowFromTop = grid.nRows - 1 - rowFromBottom;
  return gridValue(grid, col, rowFromTop);
}

/** Ignoring NaN; [min, max] or null when the grid is all NODATA. */
export function valueRange(grid: AscGrid): [number, number] | null {
  let lo = Infinity;
  let hi = -Infinity;
  for (let i = 0; i < grid.values.length; i++) {
    const v = grid.values[i]!;
    if (Number.isNaN(v)) {
      continue;
    }
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return lo <= hi ? [lo, hi] : null;
}
