"""Ground-truth lake model: bed, weed canopy, submerged objects.

The truth is what the sonar simulator samples and what the harvester
mutates. Depths are metres, positive down from the water surface. The
canopy raster holds plant height above the bed, so the first acoustic
return over weed sits at bed - canopy.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import shapely

from .errors import ConfigError, DomainError, QueryError
from .geo import EnuPoint
from .raster import GridSpec, Raster, cells_of, read_asc, write_asc

# material codes used in vectorized sampling; 0 is "no surface" (outside extent)
MAT_NONE = 0
MAT_SEABED = 1
MAT_WEED = 2
MAT_OBJECT = 3

MATERIAL_NAMES = {MAT_SEABED: "seabed", MAT_WEED: "weed", MAT_OBJECT: "object"}
MATERIAL_CODES = {name: code for code, name in MATERIAL_NAMES.items()}

DEFAULT_WEED_DENSITY = 0.2  # conveyor-load m3 per geometric m3 of canopy


@dataclass(frozen=True)
class BedParams:
    """Smooth bed: base depth plus a low-frequency sinusoidal undulation."""

    base_depth: float = 3.0
    undulation_amp: float = 0.0
    undulation_wavelength: float = 40.0

    def __post_init__(self) -> None:
        if self.base_depth <= 0:
            raise ConfigError(f"base depth must be positive, got {self.base_depth}")
        if self.undulation_amp < 0 or self.undulation_amp >= self.base_depth:
            raise ConfigError("undulation amplitude must be in [0, base_depth)")
        if self.undulation_wavelength <= 0:
            raise ConfigError("undulation wavelength must be positive")


@dataclass(frozen=True)
class WeedPatchSpec:
    """Radially tapered canopy patch. mean_height is the canopy at the patch
    center; height falls off as 1 - (r/radius)^2 and reaches zero at the rim,
    so the spatial average over the footprint is half the center value."""

    center: EnuPoint
    radius: float
    mean_height: float
    density: float = DEFAULT_WEED_DENSITY
    height_jitter: float = 0.0

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ConfigError(f"patch radius must be positive, got {self.radius}")
        if self.mean_height < 0 or self.density < 0 or self.height_jitter < 0:
            raise ConfigError("patch height, density and jitter must be non-negative")


@dataclass(frozen=True)
class ObjectSpec:
    """Hard object standing proud of the bed, axis-aligned footprint."""

    kind: str
    east_min: float
    north_min: float
    east_max: float
    north_max: float
    top_depth: float

    def __post_init__(self) -> None:
        if self.east_min >= self.east_max or self.north_min >= self.north_max:
            raise ConfigError("object footprint must have positive extent")
        if self.top_depth <= 0:
            raise ConfigError("object top depth must be positive (below the surface)")


@dataclass
class LakeTruth:
    spec: GridSpec
    bed: Raster
    canopy: Raster
    density: Raster
    objects: list[ObjectSpec]
    seed: int

    def canopy_volume(self) -> float:
        """Geometric canopy volume in m3."""
        return float(np.sum(self.canopy.values) * self.spec.cell_area)

    def canopy_load_volume(self) -> float:
        """Conveyor-load volume of the standing canopy in m3."""
        return float(np.sum(self.density.values * self.canopy.values) * self.spec.cell_area)


def synth_lake(
    spec: GridSpec,
    bed: BedParams = BedParams(),
    patches: list[WeedPatchSpec] = (),
    objects: list[ObjectSpec] = (),
    seed: int = 0,
) -> LakeTruth:
    """Generate a deterministic synthetic lake on the given grid."""
    e0, n0, e1, n1 = spec.extent
    rng = np.random.default_rng(seed)
    easts, norths = spec.cell_centers()
    ee, nn = np.meshgrid(easts, norths)  # shape (n_rows, n_cols)

    k = 2 * math.pi / bed.undulation_wavelength
    bed_vals = bed.base_depth + bed.undulation_amp * np.sin(k * (ee - e0)) * np.cos(k * (nn - n0))

    canopy_vals = np.zeros_like(bed_vals)
    density_vals = np.zeros_like(bed_vals)
    for patch in patches:
        ce, cn = patch.center.east, patch.center.north
        if not (
            e0 <= ce - patch.radius
            and ce + patch.radius <= e1
            and n0 <= cn - patch.radius
            and cn + patch.radius <= n1
        ):
            raise ConfigError(f"patch at ({ce}, {cn}) sticks out of the extent")
        r2 = (ee - ce) ** 2 + (nn - cn) ** 2
        taper = np.maximum(0.0, 1.0 - r2 / patch.radius**2)
        h = patch.mean_height * taper
        if patch.height_jitter > 0:
            jitter = rng.normal(0.0, patch.height_jitter, h.shape)
            h = np.where(taper > 0, np.maximum(0.0, h + jitter), 0.0)
        # overlapping patches: the taller canopy wins, and brings its density
        takes = h > canopy_vals
        density_vals = np.where(takes, patch.density, density_vals)
        canopy_vals = np.where(takes, h, canopy_vals)

    canopy_vals = np.minimum(canopy_vals, bed_vals)  # plants cannot outgrow the column

    truth = LakeTruth(
        spec=spec,
        bed=Raster(spec, bed_vals),
        canopy=Raster(spec, canopy_vals),
        density=Raster(spec, density_vals),
        objects=list(objects),
        seed=seed,
    )
    for obj in truth.objects:
        _validate_object(obj, truth)
    return truth


def _validate_object(obj: ObjectSpec, truth: LakeTruth) -> None:
    e0, n0, e1, n1 = truth.spec.extent
    if not (e0 <= obj.east_min and obj.east_max <= e1 and n0 <= obj.north_min and obj.north_max <= n1):
        raise ConfigError(f"object {obj.kind} footprint sticks out of the extent")
    cols, rows, valid = _footprint_cells(obj, truth.spec)
    if valid.size and np.any(truth.bed.values[rows, cols] <= obj.top_depth):
        raise ConfigError(f"object {obj.kind} top at {obj.top_depth} m does not stand proud of the bed")


def _footprint_cells(obj: ObjectSpec, spec: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    easts, norths = spec.cell_centers()
    cmask = (easts >= obj.east_min) & (easts < obj.east_max)
    rmask = (norths >= obj.north_min) & (norths < obj.north_max)
    cols, rows = np.meshgrid(np.flatnonzero(cmask), np.flatnonzero(rmask))
    cols, rows = cols.ravel(), rows.ravel()
    return cols, rows, np.ones(cols.shape, dtype=bool)


def first_return_grid(
    easts: np.ndarray, norths: np.ndarray, truth: LakeTruth
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized first acoustic surface under each (east, north).

    Returns (depth, material_code); points outside the extent get +inf depth
    and material 0.
    """
    easts = np.asarray(easts, dtype=np.float64)
    norths = np.asarray(norths, dtype=np.float64)
    cols, rows, valid = cells_of(easts, norths, truth.spec)
    cols = np.clip(cols, 0, truth.spec.n_cols - 1)
    rows = np.clip(rows, 0, truth.spec.n_rows - 1)

    bed = truth.bed.values[rows, cols]
    canopy = truth.canopy.values[rows, cols]
    depth = bed - canopy
    material = np.where(canopy > 0, MAT_WEED, MAT_SEABED).astype(np.uint8)

    for obj in truth.objects:
        hit = (
            valid
            & (easts >= obj.east_min)
            & (easts < obj.east_max)
            & (norths >= obj.north_min)
            & (norths < obj.north_max)
            & (obj.top_depth < depth)
        )
        depth = np.where(hit, obj.top_depth, depth)
        material = np.where(hit, np.uint8(MAT_OBJECT), material)

    depth = np.where(valid, depth, np.inf)
    material = np.where(valid, material, np.uint8(MAT_NONE))
    return depth, material


def first_return_depth(east: float, north: float, truth: LakeTruth) -> tuple[float, str]:
    """Depth and material of the first surface at a point. QueryError outside."""
    depth, material = first_return_grid(np.array([east]), np.array([north]), truth)
    if material[0] == MAT_NONE:
        raise QueryError(f"({east}, {north}) outside the lake extent")
    return float(depth[0]), MATERIAL_NAMES[int(material[0])]


def mow(truth: LakeTruth, polygon, cut_height: float = 0.0) -> float:
    """Cut the canopy to ``cut_height`` for every cell whose center lies in
    the polygon. Returns the harvested conveyor-load volume in m3.

    Mowing an already-cut area removes nothing; a degenerate polygon removes
    nothing. The truth canopy is mutated in place.
    """
    if cut_height < 0:
        raise DomainError(f"cut height must be non-negative, got {cut_height}")
    poly = shapely.Polygon([(p.east, p.north) if isinstance(p, EnuPoint) else tuple(p) for p in polygon])
    if poly.area <= 0:
        return 0.0

    spec = truth.spec
    e_min, n_min, e_max, n_max = poly.bounds
    easts, norths = spec.cell_centers()
    c0 = max(0, int(np.searchsorted(easts, e_min, side="left")))
    c1 = min(spec.n_cols, int(np.searchsorted(easts, e_max, side="right")))
    r0 = max(0, int(np.searchsorted(norths, n_min, side="left")))
    r1 = min(spec.n_rows, int(np.searchsorted(norths, n_max, side="right")))
    if c0 >= c1 or r0 >= r1:
        return 0.0

    ee, nn = np.meshgrid(easts[c0:c1], norths[r0:r1])
    inside = shapely.intersects_xy(poly, ee.ravel(), nn.ravel()).reshape(ee.shape)
    if not np.any(inside):
        return 0.0

    window = truth.canopy.values[r0:r1, c0:c1]
    old = window[inside]
    new = np.minimum(old, cut_height)
    removed = truth.density.values[r0:r1, c0:c1][inside] * (old - new) * spec.cell_area
    window[inside] = new
    return float(np.sum(removed))


def save_truth(truth: LakeTruth, directory: str) -> None:
    os.makedirs(directory, exist_ok=True)
    write_asc(truth.bed, os.path.join(directory, "bed.asc"))
    write_asc(truth.canopy, os.path.join(directory, "canopy.asc"))
    write_asc(truth.density, os.path.join(directory, "density.asc"))
    objs = [
        {
            "kind": o.kind,
            "footprint": [o.east_min, o.north_min, o.east_max, o.north_max],
            "top_depth": o.top_depth,
        }
        for o in truth.objects
    ]
    with open(os.path.join(directory, "objects.json"), "w", encoding="ascii") as fh:
        json.dump(objs, fh, sort_keys=True, indent=1)
        fh.write("\n")
    with open(os.path.join(directory, "meta.json"), "w", encoding="ascii") as fh:
        json.dump({"seed": truth.seed, "version": 1}, fh, sort_keys=True)
        fh.write("\n")


def load_truth(directory: str) -> LakeTruth:
    bed = read_asc(os.path.join(directory, "bed.asc"))
    canopy = read_asc(os.path.join(directory, "canopy.asc"))
    density = read_asc(os.path.join(directory, "density.asc"))
    with open(os.path.join(directory, "objects.json"), "r", encoding="ascii") as fh:
        objs = [
            ObjectSpec(
                kind=o["kind"],
                east_min=o["footprint"][0],
                north_min=o["footprint"][1],
                east_max=o["footprint"][2],
                north_max=o["footprint"][3],
                top_depth=o["top_depth"],
            )
            for o in json.load(fh)
        ]
    with open(os.path.join(directory, "meta.json"), "r", encoding="ascii") as fh:
        meta = json.load(fh)
    return LakeTruth(
        spec=bed.spec,
        bed=bed,
        canopy=canopy,
        density=density,
        objects=objs,
        seed=meta["seed"],
    )
