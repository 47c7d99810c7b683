"""Material classification from backscatter intensity and height cues.

A mosaic averages angle-compensated intensities per cell; a three-way
threshold cascade then labels each cell object, weed, or seabed. The height
cue comes from the pre/post difference map when one exists, otherwise from
the canopy proxy (local depth deficit against the neighborhood maximum).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .lake import LakeTruth, first_return_grid
from .pipeline import SoundingSet
from .raster import GridSpec, Raster, cells_of, write_asc

CODE_UNKNOWN = 0
CODE_SEABED = 1
CODE_WEED = 2
CODE_OBJECT = 3
CODE_NAMES = {CODE_UNKNOWN: "unknown", CODE_SEABED: "seabed", CODE_WEED: "weed", CODE_OBJECT: "object"}


@dataclass(frozen=True)
class ClassifierThresholds:
    object_thresh_db: float = -8.0
    weed_thresh_db: float = -20.0
    height_thresh_m: float = 0.3

    def __post_init__(self) -> None:
        if self.weed_thresh_db >= self.object_thresh_db:
            raise ConfigError("weed threshold must sit below the object threshold")
        if self.height_thresh_m < 0:
            raise ConfigError("height threshold must be non-negative")


@dataclass
class IntensityMosaic:
    intensity: Raster  # mean angle-compensated dB; NODATA where no samples
    counts: Raster


def mosaic(soundings: SoundingSet, spec: GridSpec) -> IntensityMosaic:
    """Per-cell mean intensity with the Lambertian angle term removed, so a
    flat target reads its base level regardless of beam angle."""
    compensated = soundings.intensity - 10.0 * np.log10(np.cos(soundings.angle))
    cols, rows, valid = cells_of(soundings.east, soundings.north, spec)
    flat = (rows * spec.n_cols + cols)[valid]

    sums = np.zeros(spec.n_rows * spec.n_cols)
    counts = np.zeros(spec.n_rows * spec.n_cols)
    np.add.at(sums, flat, compensated[valid])
    np.add.at(counts, flat, 1.0)

    with np.errstate(invalid="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1.0), np.nan)
    shape = (spec.n_rows, spec.n_cols)
    return IntensityMosaic(
        intensity=Raster(spec, mean.reshape(shape)),
        counts=Raster(spec, counts.reshape(shape)),
    )


def classify(
    mosaic_: IntensityMosaic,
    height: Raster,
    thresholds: ClassifierThresholds = ClassifierThresholds(),
) -> Raster:
    """Threshold cascade: bright cells are objects; tall, quiet cells are
    weed; the rest is seabed. Unknown where the mosaic has no data."""
    if mosaic_.intensity.spec != height.spec:
        raise ConfigError("mosaic and height map must share a grid")
    db = mosaic_.intensity.values
    h = np.nan_to_num(height.values, nan=0.0)

    codes = np.full(db.shape, float(CODE_SEABED))
    codes[(h > thresholds.height_thresh_m) & (db < thresholds.weed_thresh_db)] = CODE_WEED
    codes[db > thresholds.object_thresh_db] = CODE_OBJECT
    codes[np.isnan(db)] = np.nan  # unknown rides the NODATA channel
    return Raster(mosaic_.intensity.spec, codes)


def _axis_running_max(a: np.ndarray, half: int, axis: int) -> np.ndarray:
    out = a.copy()
    for shift in range(1, half + 1):
        for sign in (shift, -shift):
            moved = np.full_like(a, -np.inf)
            src = [slice(None)] * a.ndim
            dst = [slice(None)] * a.ndim
            if sign > 0:
                dst[axis], src[axis] = slice(sign, None), slice(None, -sign)
            else:
                dst[axis], src[axis] = slice(None, sign), slice(-sign, None)
            moved[tuple(dst)] = a[tuple(src)]
            out = np.maximum(out, moved)
    return out


def canopy_proxy(bathy: Raster, window: int = 25) -> Raster:
    """Stand-in height map when only one scan exists: how far each cell sits
    above (shallower than) the deepest cell in its window x window
    neighborhood. Weed tops pop out against the surrounding bed; flat bed
    reads zero. Lower confidence than a pre/post difference."""
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"window must be odd and positive, got {window}")
    half = window // 2
    depth = np.where(np.isnan(bathy.values), -np.inf, bathy.values)
    neighborhood = _axis_running_max(_axis_running_max(depth, half, 0), half, 1)
    proxy = neighborhood - bathy.values  # NaN cells stay NaN
    proxy[np.isinf(proxy)] = np.nan
    return Raster(bathy.spec, proxy)


def confusion(classified: Raster, truth: LakeTruth, min_canopy: float = 0.0) -> dict:
    """Per-class precision/recall of a classification raster against the
    ground-truth first-return material at cell centers.

    min_canopy restricts scoring to cells whose true canopy is either zero
    or at least that tall, so a detector with a height cue is not graded on
    canopy physically below its resolution.
    """
    easts, norths = classified.spec.cell_centers()
    ee, nn = np.meshgrid(easts, norths)
    _, true_mat = first_return_grid(ee.ravel(), nn.ravel(), truth)
    true_mat = true_mat.reshape(ee.shape)

    pred = np.where(np.isnan(classified.values), CODE_UNKNOWN, classified.values).astype(int)
    scored = pred != CODE_UNKNOWN
    if min_canopy > 0:
        canopy = _sample_raster(truth.canopy, ee, nn)
        scored &= (canopy == 0.0) | (canopy >= min_canopy)

    out = {}
    for code, name in CODE_NAMES.items():
        if code == CODE_UNKNOWN:
            continue
        tp = int(np.count_nonzero(scored & (pred == code) & (true_mat == code)))
        n_pred = int(np.count_nonzero(scored & (pred == code)))
        n_true = int(np.count_nonzero(scored & (true_mat == code)))
        out[name] = {
            "precision": tp / n_pred if n_pred else 1.0,
            "recall": tp / n_true if n_true else 1.0,
            "n_true": n_true,
            "n_pred": n_pred,
        }
    return out


def _sample_raster(raster: Raster, ee: np.ndarray, nn: np.ndarray) -> np.ndarray:
    cols, rows, valid = cells_of(ee.ravel(), nn.ravel(), raster.spec)
    vals = np.zeros(ee.size)
    vals[valid] = raster.values[rows[valid], cols[valid]]
    return np.nan_to_num(vals.reshape(ee.shape), nan=0.0)


def write_classification(classified: Raster, path: str) -> None:
    """Code raster as integer ESRI ASCII plus a JSON legend sidecar."""
    write_asc(classified, path, integer=True)
    legend = {str(code): name for code, name in CODE_NAMES.items()}
    with open(path + ".legend.json", "w", encoding="ascii") as fh:
        json.dump(legend, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
