"""Sounding reduction: pings -> georeferenced soundings -> depth grids ->
weed height map -> weed clusters.

Soundings are kept as a struct-of-arrays batch (SoundingSet) so gridding a
scan stays a handful of numpy passes; iterating a set yields per-sounding
records when object granularity is more convenient.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
import shapely

from .errors import ConfigError, DomainError, FormatError
from .geo import EnuPoint
from .raster import GridSpec, Raster, cells_of
from .sonar import SonarPing
from .svp import SvpCast, effective_speed_vec

MAD_SCALE = 1.4826  # consistent with a Gaussian sigma
DEFAULT_NOISE_FLOOR_M = 0.15
WEED_CODE = 2  # classification code shared with the backscatter module


class Sounding(NamedTuple):
    east: float
    north: float
    depth: float
    intensity: float
    angle: float
    ping_id: int
    beam: int


@dataclass
class SoundingSet:
    """Columnar batch of georeferenced soundings."""

    east: np.ndarray
    north: np.ndarray
    depth: np.ndarray
    intensity: np.ndarray
    angle: np.ndarray
    ping_id: np.ndarray
    beam: np.ndarray

    def __len__(self) -> int:
        return len(self.east)

    def __iter__(self) -> Iterator[Sounding]:
        for i in range(len(self)):
            yield Sounding(
                float(self.east[i]),
                float(self.north[i]),
                float(self.depth[i]),
                float(self.intensity[i]),
                float(self.angle[i]),
                int(self.ping_id[i]),
                int(self.beam[i]),
            )

    @classmethod
    def empty(cls) -> "SoundingSet":
        z = np.empty(0)
        return cls(z, z, z, z, z, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))

    @classmethod
    def concat(cls, batches: list["SoundingSet"]) -> "SoundingSet":
        if not batches:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, f) for b in batches]) for f in
                     ("east", "north", "depth", "intensity", "angle", "ping_id", "beam")))


def georeference(
    ping: SonarPing, cast: SvpCast | float, ping_id: int = 0
) -> SoundingSet:
    """Turn a ping's returns into positioned soundings.

    Slant range comes from the travel time through the cast with one
    fixed-point refinement of the nominal depth; the beam's nominal angle
    rotated by the vehicle heading places the footprint across track.
    The simulator's material debug channel is deliberately not read.
    """
    live = ~np.isnan(ping.two_way_time)
    if not np.any(live):
        return SoundingSet.empty()
    twt = ping.two_way_time[live]
    theta = ping.angles[live]
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    if isinstance(cast, SvpCast):
        r = twt * effective_speed_vec(cast, np.zeros(len(twt))) / 2.0
        nominal_depth = np.maximum(r * cos_t, 0.0)
        r = twt * effective_speed_vec(cast, nominal_depth) / 2.0
    else:
        r = twt * float(cast) / 2.0

    depth = r * cos_t
    across = r * sin_t
    sb_e, sb_n = math.sin(ping.pose.heading), -math.cos(ping.pose.heading)
    east = ping.pose.position.east + across * sb_e
    north = ping.pose.position.north + across * sb_n
    beams = np.flatnonzero(live)
    return SoundingSet(
        east=east,
        north=north,
        depth=depth,
        intensity=ping.intensity[live],
        angle=theta.copy(),
        ping_id=np.full(len(beams), ping_id, dtype=np.int64),
        beam=beams,
    )


def georeference_many(pings: list[SonarPing], cast: SvpCast | float) -> SoundingSet:
    return SoundingSet.concat([georeference(p, cast, ping_id=i) for i, p in enumerate(pings)])


def _grouped_median(group_ids: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Median of values per group. Inputs must be sorted by (group, value).
    Returns (unique group ids, medians, group sizes)."""
    starts = np.flatnonzero(np.r_[True, group_ids[1:] != group_ids[:-1]])
    sizes = np.diff(np.r_[starts, len(group_ids)])
    lo = starts + (sizes - 1) // 2
    hi = starts + sizes // 2
    return group_ids[starts], (values[lo] + values[hi]) / 2.0, sizes


def grid_soundings(soundings: SoundingSet, spec: GridSpec, min_count: int = 3) -> Raster:
    """Robust per-cell depth: reject soundings more than 3 scaled-MAD from
    the cell median, then take the median of the survivors. Cells with fewer
    than ``min_count`` raw soundings stay NODATA."""
    cols, rows, valid = cells_of(soundings.east, soundings.north, spec)
    cell = (rows * spec.n_cols + cols)[valid]
    depth = soundings.depth[valid]
    values = np.full((spec.n_rows, spec.n_cols), np.nan)
    if len(cell) == 0:
        return Raster(spec, values)

    order = np.lexsort((depth, cell))
    cell_s, depth_s = cell[order], depth[order]
    ids, med, sizes = _grouped_median(cell_s, depth_s)

    group_ix = np.repeat(np.arange(len(ids)), sizes)
    dev = np.abs(depth_s - med[group_ix])
    order2 = np.lexsort((dev, cell_s))
    _, mad, _ = _grouped_median(cell_s[order2], dev[order2])

    keep = (dev <= 3.0 * MAD_SCALE * mad[group_ix]) & (sizes[group_ix] >= min_count)
    cell_k, depth_k = cell_s[keep], depth_s[keep]
    if len(cell_k):
        ids_k, med_k, _ = _grouped_median(cell_k, depth_k)
        values.ravel()[ids_k] = med_k
    return Raster(spec, values)


def diff_grids(pre: Raster, post: Raster, noise_floor: float = DEFAULT_NOISE_FLOOR_M) -> Raster:
    """Weed height map: post-harvest depth minus pre-harvest depth, with
    everything below the noise floor (negatives included) zeroed. NODATA in
    either input propagates."""
    if pre.spec != post.spec:
        raise ConfigError("grids to difference must share a GridSpec")
    if noise_floor < 0:
        raise ConfigError(f"noise floor must be non-negative, got {noise_floor}")
    h = post.values - pre.values
    h[h < noise_floor] = 0.0  # NaN stays NaN: the comparison is False
    return Raster(pre.spec, h)


def mean_height(height: Raster, mask_polygon=None) -> float:
    """Mean of positive heights, optionally restricted to cells whose
    centers fall inside the polygon."""
    mask = height.data_mask & (height.values > 0)
    if mask_polygon is not None:
        poly = shapely.Polygon(
            [(p.east, p.north) if isinstance(p, EnuPoint) else tuple(p) for p in mask_polygon]
        )
        easts, norths = height.spec.cell_centers()
        ee, nn = np.meshgrid(easts, norths)
        mask &= shapely.intersects_xy(poly, ee, nn)
    if not np.any(mask):
        raise DomainError("no positive heights in the requested region")
    return float(np.mean(height.values[mask]))


@dataclass
class WeedCluster:
    """Connected patch of weed cells with its harvest bookkeeping.

    polygon is the exterior boundary of the cell union (holes dropped);
    cells/cell loads keep the exact per-cell partition the planner needs.
    """

    id: int
    polygon: list[tuple[float, float]]
    area: float
    mean_height: float
    volume: float
    load_volume: float
    centroid: EnuPoint
    cell_size: float
    cell_east: np.ndarray
    cell_north: np.ndarray
    cell_loads: np.ndarray

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        xs = [p[0] for p in self.polygon]
        ys = [p[1] for p in self.polygon]
        return min(xs), min(ys), max(xs), max(ys)


def _components(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    """4-connected components of a boolean grid, flood fill, scan order
    row-major from the south-west corner so cluster ordering is
    reproducible."""
    n_rows, n_cols = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    components = []
    for row in range(n_rows):
        for col in range(n_cols):
            if not mask[row, col] or seen[row, col]:
                continue
            queue = [(row, col)]
            seen[row, col] = True
            cells = []
            while queue:
                r, c = queue.pop()
                cells.append((r, c))
                for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                    if 0 <= rr < n_rows and 0 <= cc < n_cols and mask[rr, cc] and not seen[rr, cc]:
                        seen[rr, cc] = True
                        queue.append((rr, cc))
            cells.sort()
            components.append(cells)
    return components


def _cell_union_boundary(cells: list[tuple[int, int]], spec: GridSpec) -> list[tuple[float, float]]:
    cs = spec.cell_size
    e0, n0 = spec.origin.east, spec.origin.north
    boxes = [
        shapely.box(e0 + c * cs, n0 + r * cs, e0 + (c + 1) * cs, n0 + (r + 1) * cs)
        for r, c in cells
    ]
    merged = shapely.unary_union(boxes)
    if isinstance(merged, shapely.MultiPolygon):  # defensive: 4-connected unions are single
        merged = max(merged.geoms, key=lambda g: g.area)
    merged = shapely.simplify(merged, 0.0)  # drop collinear vertices along cell edges
    ring = list(merged.exterior.coords)
    return [(float(x), float(y)) for x, y in ring[:-1]]  # drop the closing duplicate


def extract_clusters(
    source: Raster,
    density: Raster,
    min_area: float = 1.0,
    height: Raster | None = None,
) -> list[WeedCluster]:
    """Weed clusters from a height map (source > 0) or a classification
    raster (source == weed code, with heights supplied separately).

    Clusters come back ordered by the (row, col) of their first cell in
    south-west scan order; ids are sequential over the kept clusters.
    """
    if height is None:
        heights = np.nan_to_num(source.values, nan=0.0)
        mask = heights > 0
    else:
        if height.spec != source.spec:
            raise ConfigError("height raster must share the classification grid")
        mask = source.values == WEED_CODE
        heights = np.nan_to_num(height.values, nan=0.0)
    if density.spec != source.spec:
        raise ConfigError("density raster must share the source grid")
    dens = np.nan_to_num(density.values, nan=0.0)

    spec = source.spec
    clusters = []
    for cells in _components(mask):
        area = len(cells) * spec.cell_area
        if area < min_area:
            continue
        rows = np.array([r for r, _ in cells])
        cols = np.array([c for _, c in cells])
        h = heights[rows, cols]
        loads = h * dens[rows, cols] * spec.cell_area
        east = spec.origin.east + (cols + 0.5) * spec.cell_size
        north = spec.origin.north + (rows + 0.5) * spec.cell_size
        clusters.append(
            WeedCluster(
                id=len(clusters),
                polygon=_cell_union_boundary(cells, spec),
                area=area,
                mean_height=float(np.mean(h)),
                volume=float(math.fsum(h) * spec.cell_area),
                load_volume=float(math.fsum(loads)),
                centroid=EnuPoint(float(np.mean(east)), float(np.mean(north))),
                cell_size=spec.cell_size,
                cell_east=east,
                cell_north=north,
                cell_loads=loads,
            )
        )
    return clusters


def clusters_to_geojson(clusters: list[WeedCluster]) -> dict:
    features = []
    for c in clusters:
        ring = [[e, n] for e, n in c.polygon]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "id": c.id,
                    "area_m2": c.area,
                    "mean_height_m": c.mean_height,
                    "volume_m3": c.volume,
                    "load_volume_m3": c.load_volume,
                    "centroid": [c.centroid.east, c.centroid.north],
                    "cell_size": c.cell_size,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}


def clusters_from_geojson(doc: dict) -> list[WeedCluster]:
    """Rebuild clusters from GeoJSON. Member cells are recovered by
    rasterizing the polygon at its stored cell size; the load volume is
    split uniformly across them (per-cell heights are not serialized)."""
    if doc.get("type") != "FeatureCollection":
        raise FormatError("expected a FeatureCollection")
    clusters = []
    for feature in doc.get("features", []):
        props = feature["properties"]
        ring = feature["geometry"]["coordinates"][0]
        polygon = [(float(e), float(n)) for e, n in ring[:-1]]
        cs = float(props["cell_size"])
        poly = shapely.Polygon(ring)
        e_min, n_min, e_max, n_max = poly.bounds
        n_cols = max(1, round((e_max - e_min) / cs))
        n_rows = max(1, round((n_max - n_min) / cs))
        ee = e_min + (np.arange(n_cols) + 0.5) * cs
        nn = n_min + (np.arange(n_rows) + 0.5) * cs
        gee, gnn = np.meshgrid(ee, nn)
        inside = shapely.contains_xy(poly, gee.ravel(), gnn.ravel())
        east = gee.ravel()[inside]
        north = gnn.ravel()[inside]
        centroid = EnuPoint(*props["centroid"])
        if len(east) == 0:  # degenerate sliver: fall back to one cell at the centroid
            east = np.array([centroid.east])
            north = np.array([centroid.north])
        load = float(props["load_volume_m3"])
        clusters.append(
            WeedCluster(
                id=int(props["id"]),
                polygon=polygon,
                area=float(props["area_m2"]),
                mean_height=float(props["mean_height_m"]),
                volume=float(props["volume_m3"]),
                load_volume=load,
                centroid=centroid,
                cell_size=cs,
                cell_east=east,
                cell_north=north,
                cell_loads=np.full(len(east), load / len(east)),
            )
        )
    return clusters


def write_clusters(clusters: list[WeedCluster], path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(clusters_to_geojson(clusters), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_clusters(path: str) -> list[WeedCluster]:
    with open(path, "r", encoding="ascii") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON") from exc
    return clusters_from_geojson(doc)
