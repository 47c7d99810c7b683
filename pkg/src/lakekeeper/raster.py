"""Regular grids over the local frame and their ESRI ASCII serialization.

Grid convention: origin is the lower-left (south-west) corner, row index
grows northward, column index grows eastward, so ``values[row, col]`` with
row 0 being the southernmost row. ESRI ASCII files store the northernmost
row first; the writer flips accordingly.

NODATA is carried internally as NaN. NaN already propagates through
arithmetic the way NODATA must, and every reducer in the pipeline masks it
explicitly before aggregating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError
from .geo import EnuPoint

NODATA_OUT = -9999.0


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a raster: lower-left origin, square cells, col/row counts."""

    origin: EnuPoint
    cell_size: float
    n_cols: int
    n_rows: int

    def __post_init__(self) -> None:
        if self.cell_size <= 0:
            raise ConfigError(f"cell_size must be positive, got {self.cell_size}")
        if self.n_cols < 1 or self.n_rows < 1:
            raise ConfigError(f"grid must be at least 1x1, got {self.n_cols}x{self.n_rows}")

    @property
    def cell_area(self) -> float:
        return self.cell_size * self.cell_size

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(east_min, north_min, east_max, north_max)."""
        return (
            self.origin.east,
            self.origin.north,
            self.origin.east + self.n_cols * self.cell_size,
            self.origin.north + self.n_rows * self.cell_size,
        )

    def cell_center(self, col: int, row: int) -> EnuPoint:
        return EnuPoint(
            self.origin.east + (col + 0.5) * self.cell_size,
            self.origin.north + (row + 0.5) * self.cell_size,
        )

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized centers: (easts[n_cols], norths[n_rows])."""
        easts = self.origin.east + (np.arange(self.n_cols) + 0.5) * self.cell_size
        norths = self.origin.north + (np.arange(self.n_rows) + 0.5) * self.cell_size
        return easts, norths

    def contains(self, point: EnuPoint) -> bool:
        e0, n0, e1, n1 = self.extent
        return e0 <= point.east < e1 and n0 <= point.north < n1


def cell_of(point: EnuPoint, spec: GridSpec) -> tuple[int, int] | None:
    """Cell (col, row) containing the point, or None when outside.

    Membership is half-open: a point on the left/bottom edge of a cell is
    inside it, a point on the grid's upper or right boundary is outside.
    """
    col = math.floor((point.east - spec.origin.east) / spec.cell_size)
    row = math.floor((point.north - spec.origin.north) / spec.cell_size)
    if 0 <= col < spec.n_cols and 0 <= row < spec.n_rows:
        return col, row
    return None


def cells_of(easts: np.ndarray, norths: np.ndarray, spec: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized cell_of. Returns (cols, rows, valid mask); indices are
    meaningless where valid is False."""
    cols = np.floor((np.asarray(easts) - spec.origin.east) / spec.cell_size).astype(np.int64)
    rows = np.floor((np.asarray(norths) - spec.origin.north) / spec.cell_size).astype(np.int64)
    valid = (cols >= 0) & (cols < spec.n_cols) & (rows >= 0) & (rows < spec.n_rows)
    return cols, rows, valid


class Raster:
    """A GridSpec plus a float64 value plane. NaN marks NODATA."""

    def __init__(self, spec: GridSpec, values: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (spec.n_rows, spec.n_cols):
            raise ConfigError(
                f"value shape {values.shape} does not match grid {spec.n_rows}x{spec.n_cols}"
            )
        self.spec = spec
        self.values = values

    @classmethod
    def full(cls, spec: GridSpec, fill: float) -> "Raster":
        return cls(spec, np.full((spec.n_rows, spec.n_cols), fill, dtype=np.float64))

    @classmethod
    def nodata(cls, spec: GridSpec) -> "Raster":
        return cls.full(spec, np.nan)

    def copy(self) -> "Raster":
        return Raster(self.spec, self.values.copy())

    @property
    def data_mask(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def get(self, col: int, row: int) -> float | None:
        """Value at (col, row); None for NODATA or out-of-range indices."""
        if not (0 <= col < self.spec.n_cols and 0 <= row < self.spec.n_rows):
            return None
        v = float(self.values[row, col])
        return None if math.isnan(v) else v

    def set(self, col: int, row: int, value: float) -> None:
        if not (0 <= col < self.spec.n_cols and 0 <= row < self.spec.n_rows):
            raise IndexError(f"cell ({col}, {row}) outside grid")
        self.values[row, col] = value

    def value_at(self, point: EnuPoint) -> float | None:
        cell = cell_of(point, self.spec)
        if cell is None:
            return None
        return self.get(*cell)


def _fmt(value: float) -> str:
    # repr of a native float is the shortest form that round-trips exactly
    return repr(float(value))


def asc_dumps(raster: Raster, integer: bool = False) -> str:
    """Serialize to ESRI ASCII grid text. Northernmost row first, NODATA as
    -9999. ``integer`` formats values as ints (for code rasters)."""
    spec = raster.spec
    fmt = (lambda v: str(int(v))) if integer else _fmt
    lines = [
        f"ncols {spec.n_cols}",
        f"nrows {spec.n_rows}",
        f"xllcorner {_fmt(spec.origin.east)}",
        f"yllcorner {_fmt(spec.origin.north)}",
        f"cellsize {_fmt(spec.cell_size)}",
        f"NODATA_value {int(NODATA_OUT)}",
    ]
    for row in range(spec.n_rows - 1, -1, -1):
        vals = raster.values[row]
        lines.append(" ".join(str(int(NODATA_OUT)) if math.isnan(v) else fmt(v) for v in vals))
    return "\n".join(lines) + "\n"


def write_asc(raster: Raster, path: str, integer: bool = False) -> None:
    """Write an ESRI ASCII grid file; see :func:`asc_dumps`."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(asc_dumps(raster, integer=integer))


def read_asc(path: str) -> Raster:
    """Read an ESRI ASCII grid written by :func:`write_asc` (or compatible)."""
    with open(path, "r", encoding="ascii") as fh:
        tokens_by_line = [line.split() for line in fh if line.strip()]
    header: dict[str, float] = {}
    i = 0
    while i < len(tokens_by_line) and len(tokens_by_line[i]) == 2 and not _is_number(tokens_by_line[i][0]):
        key, value = tokens_by_line[i]
        header[key.lower()] = float(value)
        i += 1
    for required in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if required not in header:
            raise FormatError(f"{path}: missing header field {required}")
    n_cols = int(header["ncols"])
    n_rows = int(header["nrows"])
    nodata = header.get("nodata_value", NODATA_OUT)
    spec = GridSpec(
        origin=EnuPoint(header["xllcorner"], header["yllcorner"]),
        cell_size=header["cellsize"],
        n_cols=n_cols,
        n_rows=n_rows,
    )
    flat = [tok for line in tokens_by_line[i:] for tok in line]
    if len(flat) != n_cols * n_rows:
        raise FormatError(f"{path}: expected {n_cols * n_rows} values, found {len(flat)}")
    values = np.array([float(tok) for tok in flat], dtype=np.float64).reshape(n_rows, n_cols)
    values = values[::-1].copy()  # file is north-first, memory is south-first
    values[values == nodata] = np.nan
    return Raster(spec, values)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False
