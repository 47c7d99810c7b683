"""Mission orchestration: survey, detect, plan, harvest, verify.

A mission owns the synthetic lake truth, a survey vehicle, and a harvester,
and drives them through a fixed phase sequence:

    Idle -> PreScan -> Processing -> Planning -> AwaitingApproval
         -> Harvesting -> PostScan -> Reporting -> Done

``step`` advances the simulation clock; ``operator_command`` injects skipper
decisions between steps. Every observable change lands in the event log
exactly once, so the mission can be replayed from the log alone. Runs are
deterministic: the same config produces byte-identical output files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np
import shapely

from . import events as ev
from . import planner as pl
from .backscatter import (
    ClassifierThresholds,
    canopy_proxy,
    classify,
    mosaic,
    write_classification,
)
from .errors import ConfigError, StateError
from .geo import EnuPoint, Pose2D
from .lake import BedParams, LakeTruth, ObjectSpec, WeedPatchSpec, mow, synth_lake
from .pipeline import (
    WeedCluster,
    diff_grids,
    extract_clusters,
    georeference_many,
    grid_soundings,
    write_clusters,
)
from .raster import GridSpec, Raster, write_asc
from .sonar import SonarPing, SonarSpec, lawnmower_path, survey_leg, write_pings
from .svp import SvpCast

PHASE_IDLE = "Idle"
PHASE_PRE_SCAN = "PreScan"
PHASE_PROCESSING = "Processing"
PHASE_PLANNING = "Planning"
PHASE_AWAITING_APPROVAL = "AwaitingApproval"
PHASE_HARVESTING = "Harvesting"
PHASE_POST_SCAN = "PostScan"
PHASE_REPORTING = "Reporting"
PHASE_DONE = "Done"

PHASES = (
    PHASE_IDLE,
    PHASE_PRE_SCAN,
    PHASE_PROCESSING,
    PHASE_PLANNING,
    PHASE_AWAITING_APPROVAL,
    PHASE_HARVESTING,
    PHASE_POST_SCAN,
    PHASE_REPORTING,
    PHASE_DONE,
)

COMMANDS = (
    "start",
    "approve_plan",
    "reject_plan",
    "mark_area",
    "request_rescan",
    "set_unload_station",
)

_EPS = 1e-9


@dataclass(frozen=True)
class DetectionParams:
    """Knobs for turning soundings into weed clusters."""

    noise_floor: float = 0.15
    min_area: float = 1.0
    object_thresh_db: float = -8.0
    weed_thresh_db: float = -20.0
    height_thresh_m: float = 0.3
    proxy_window: int = 25
    assumed_density: float = 0.2

    def __post_init__(self) -> None:
        if self.noise_floor < 0:
            raise ConfigError(f"noise floor must be non-negative, got {self.noise_floor}")
        if self.min_area < 0:
            raise ConfigError(f"min cluster area must be non-negative, got {self.min_area}")
        if self.proxy_window < 1 or self.proxy_window % 2 == 0:
            raise ConfigError(f"proxy window must be a positive odd int, got {self.proxy_window}")
        if not 0 < self.assumed_density <= 1:
            raise ConfigError(f"assumed density must be in (0, 1], got {self.assumed_density}")

    def thresholds(self) -> ClassifierThresholds:
        return ClassifierThresholds(
            object_thresh_db=self.object_thresh_db,
            weed_thresh_db=self.weed_thresh_db,
            height_thresh_m=self.height_thresh_m,
        )


@dataclass(frozen=True)
class HarvestParams:
    """Execution-side harvest knobs.

    ``headroom_factor`` scales the next lane's expected load when deciding
    whether to divert to the unload station first; it covers the gap between
    estimated and actual cut volume so the conveyor never overfills.
    """

    cut_height: float = 0.0
    follow_usv_track: bool = False
    headroom_factor: float = 1.5

    def __post_init__(self) -> None:
        if self.cut_height < 0:
            raise ConfigError(f"cut height must be non-negative, got {self.cut_height}")
        if self.headroom_factor < 1:
            raise ConfigError(f"headroom factor must be >= 1, got {self.headroom_factor}")


@dataclass(frozen=True)
class LakeParams:
    """Synthetic lake recipe: bed shape, weed patches, hard objects."""

    bed: BedParams = field(default_factory=BedParams)
    patches: tuple = ()
    objects: tuple = ()


@dataclass(frozen=True)
class MissionConfig:
    """Everything a mission needs; JSON round-trippable and validated."""

    area: tuple[float, float, float, float] = (0.0, 0.0, 60.0, 40.0)
    cell_size: float = 0.5
    truth_cell_size: float = 0.25
    line_spacing: float = 6.0
    survey_speed: float = 1.5433
    dt: float = 0.5
    seed: int = 11
    sound_speed: float = 1500.0
    svp_samples: tuple = ()
    sonar: SonarSpec = field(default_factory=SonarSpec)
    planner: pl.PlannerConfig = field(default_factory=pl.PlannerConfig)
    detection: DetectionParams = field(default_factory=DetectionParams)
    harvest: HarvestParams = field(default_factory=HarvestParams)
    lake: LakeParams = field(default_factory=LakeParams)

    def __post_init__(self) -> None:
        e0, n0, e1, n1 = self.area
        if e1 <= e0 or n1 <= n0:
            raise ConfigError(f"degenerate mission area {self.area}")
        for name, value in (
            ("cell_size", self.cell_size),
            ("truth_cell_size", self.truth_cell_size),
            ("line_spacing", self.line_spacing),
            ("survey_speed", self.survey_speed),
            ("dt", self.dt),
        ):
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative int, got {self.seed!r}")
        if self.sound_speed <= 0:
            raise ConfigError(f"sound speed must be positive, got {self.sound_speed}")
        _grid_for(self.area, self.cell_size)
        _grid_for(self.area, self.truth_cell_size)

    def cast(self) -> SvpCast | float:
        """Sound-speed model: a cast when samples are given, else constant."""
        if self.svp_samples:
            return SvpCast([tuple(s) for s in self.svp_samples])
        return self.sound_speed


def _grid_for(area, cell_size: float) -> GridSpec:
    e0, n0, e1, n1 = area
    n_cols = (e1 - e0) / cell_size
    n_rows = (n1 - n0) / cell_size
    if abs(n_cols - round(n_cols)) > 1e-6 or abs(n_rows - round(n_rows)) > 1e-6:
        raise ConfigError(
            f"area {area} is not a whole number of {cell_size} m cells"
        )
    return GridSpec(EnuPoint(e0, n0), cell_size, int(round(n_cols)), int(round(n_rows)))


def config_to_json(config: MissionConfig) -> dict:
    return {
        "area": list(config.area),
        "cell_size": config.cell_size,
        "truth_cell_size": config.truth_cell_size,
        "line_spacing": config.line_spacing,
        "survey_speed": config.survey_speed,
        "dt": config.dt,
        "seed": config.seed,
        "sound_speed": config.sound_speed,
        "svp_samples": [list(s) for s in config.svp_samples],
        "sonar": {
            "mean_frequency_hz": config.sonar.mean_frequency_hz,
            "chirp_bandwidth_hz": config.sonar.chirp_bandwidth_hz,
            "n_beams": config.sonar.n_beams,
            "beam_width_deg": config.sonar.beam_width_deg,
            "swath_deg": config.sonar.swath_deg,
            "upper_gate_m": config.sonar.upper_gate_m,
            "lower_gate_m": config.sonar.lower_gate_m,
            "ping_rate_hz": config.sonar.ping_rate_hz,
            "range_noise_std_m": config.sonar.range_noise_std_m,
            "intensity_noise_std_db": config.sonar.intensity_noise_std_db,
        },
        "planner": {
            "capacity": config.planner.capacity,
            "cutter_width": config.planner.cutter_width,
            "lane_overlap": config.planner.lane_overlap,
            "harvester_speed": config.planner.harvester_speed,
            "unload_station": [
                config.planner.unload_station.east,
                config.planner.unload_station.north,
            ],
            "unload_time": config.planner.unload_time,
        },
        "detection": {
            "noise_floor": config.detection.noise_floor,
            "min_area": config.detection.min_area,
            "object_thresh_db": config.detection.object_thresh_db,
            "weed_thresh_db": config.detection.weed_thresh_db,
            "height_thresh_m": config.detection.height_thresh_m,
            "proxy_window": config.detection.proxy_window,
            "assumed_density": config.detection.assumed_density,
        },
        "harvest": {
            "cut_height": config.harvest.cut_height,
            "follow_usv_track": config.harvest.follow_usv_track,
            "headroom_factor": config.harvest.headroom_factor,
        },
        "lake": {
            "bed": {
                "base_depth": config.lake.bed.base_depth,
                "undulation_amp": config.lake.bed.undulation_amp,
                "undulation_wavelength": config.lake.bed.undulation_wavelength,
            },
            "patches": [
                {
                    "center": [p.center.east, p.center.north],
                    "radius": p.radius,
                    "mean_height": p.mean_height,
                    "density": p.density,
                    "height_jitter": p.height_jitter,
                }
                for p in config.lake.patches
            ],
            "objects": [
                {
                    "kind": o.kind,
                    "east_min": o.east_min,
                    "north_min": o.north_min,
                    "east_max": o.east_max,
                    "north_max": o.north_max,
                    "top_depth": o.top_depth,
                }
                for o in config.lake.objects
            ],
        },
    }


def _take(obj: dict, where: str, known: tuple) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(obj).__name__}")
    unknown = sorted(set(obj) - set(known))
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")
    return obj


def config_from_json(obj: dict) -> MissionConfig:
    top = _take(
        obj,
        "config",
        (
            "area", "cell_size", "truth_cell_size", "line_spacing", "survey_speed",
            "dt", "seed", "sound_speed", "svp_samples", "sonar", "planner",
            "detection", "harvest", "lake",
        ),
    )
    try:
        kwargs: dict = {}
        for key in ("cell_size", "truth_cell_size", "line_spacing", "survey_speed",
                    "dt", "sound_speed"):
            if key in top:
                kwargs[key] = float(top[key])
        if "area" in top:
            kwargs["area"] = tuple(float(v) for v in top["area"])
            if len(kwargs["area"]) != 4:
                raise ConfigError(f"area must have 4 numbers, got {top['area']!r}")
        if "seed" in top:
            kwargs["seed"] = int(top["seed"])
        if "svp_samples" in top:
            kwargs["svp_samples"] = tuple(
                (float(d), float(c)) for d, c in top["svp_samples"]
            )
        if "sonar" in top:
            kwargs["sonar"] = SonarSpec(**_take(top["sonar"], "sonar", (
                "mean_frequency_hz", "chirp_bandwidth_hz", "n_beams", "beam_width_deg",
                "swath_deg", "upper_gate_m", "lower_gate_m", "ping_rate_hz",
                "range_noise_std_m", "intensity_noise_std_db",
            )))
        if "planner" in top:
            sub = dict(_take(top["planner"], "planner", (
                "capacity", "cutter_width", "lane_overlap", "harvester_speed",
                "unload_station", "unload_time",
            )))
            if "unload_station" in sub:
                e, n = sub["unload_station"]
                sub["unload_station"] = EnuPoint(float(e), float(n))
            kwargs["planner"] = pl.PlannerConfig(**sub)
        if "detection" in top:
            kwargs["detection"] = DetectionParams(**_take(top["detection"], "detection", (
                "noise_floor", "min_area", "object_thresh_db", "weed_thresh_db",
                "height_thresh_m", "proxy_window", "assumed_density",
            )))
        if "harvest" in top:
            kwargs["harvest"] = HarvestParams(**_take(top["harvest"], "harvest", (
                "cut_height", "follow_usv_track", "headroom_factor",
            )))
        if "lake" in top:
            sub = _take(top["lake"], "lake", ("bed", "patches", "objects"))
            bed = BedParams(**_take(sub.get("bed", {}), "lake.bed", (
                "base_depth", "undulation_amp", "undulation_wavelength",
            )))
            patches = []
            for p in sub.get("patches", []):
                fields = dict(_take(p, "lake.patches[]", (
                    "center", "radius", "mean_height", "density", "height_jitter",
                )))
                for req in ("center", "radius", "mean_height"):
                    if req not in fields:
                        raise ConfigError(f"lake.patches[] entry is missing {req!r}")
                patches.append(WeedPatchSpec(
                    center=EnuPoint(float(fields["center"][0]), float(fields["center"][1])),
                    radius=float(fields["radius"]),
                    mean_height=float(fields["mean_height"]),
                    density=float(fields.get("density", 0.2)),
                    height_jitter=float(fields.get("height_jitter", 0.0)),
                ))
            patches = tuple(patches)
            objects = tuple(
                ObjectSpec(**_take(o, "lake.objects[]", (
                    "kind", "east_min", "north_min", "east_max", "north_max", "top_depth",
                )))
                for o in sub.get("objects", [])
            )
            kwargs["lake"] = LakeParams(bed=bed, patches=patches, objects=objects)
        return MissionConfig(**kwargs)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad mission config: {exc}") from exc


def read_config(path: str) -> MissionConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_json(obj)


def write_config(config: MissionConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_json(config), fh, sort_keys=True, indent=2)
        fh.write("\n")


@dataclass
class _Segment:
    """One straight piece of a survey route; ``leg_index`` is None on the
    connecting transits between sounding lanes."""

    start: EnuPoint
    end: EnuPoint
    leg_index: int | None

    @property
    def length(self) -> float:
        return self.start.distance_to(self.end)


@dataclass
class MissionState:
    """Full mutable state of one mission run."""

    config: MissionConfig
    truth: LakeTruth
    planner_config: pl.PlannerConfig
    phase: str = PHASE_IDLE
    clock: float = 0.0
    usv_pose: Pose2D = field(default_factory=lambda: Pose2D(EnuPoint(0.0, 0.0)))
    harvester_pose: Pose2D = field(default_factory=lambda: Pose2D(EnuPoint(0.0, 0.0)))
    current_load: float = 0.0
    plan: pl.HarvestPlan | None = None
    plan_version: int = 0
    clusters: list[WeedCluster] = field(default_factory=list)
    events: ev.EventLog = field(default_factory=ev.EventLog)
    rasters: dict[str, Raster] = field(default_factory=dict)
    pings_pre: list[SonarPing] = field(default_factory=list)
    pings_post: list[SonarPing] = field(default_factory=list)
    exclusions: list[list[tuple[float, float]]] = field(default_factory=list)
    report: dict | None = None
    initial_canopy_load: float = 0.0
    usv_distance: float = 0.0
    harvester_distance: float = 0.0
    # execution cursors
    scan_index: int = 0
    segments: list[_Segment] = field(default_factory=list)
    seg_index: int = 0
    seg_progress: float = 0.0
    seg_pings: list[SonarPing] = field(default_factory=list)
    seg_released: int = 0
    leg_index: int = 0
    leg_progress: float = 0.0
    leg_elapsed: float = 0.0
    mow_volumes: list[float] = field(default_factory=list)
    mow_polygons: list[list[tuple[float, float]]] = field(default_factory=list)
    unloads_executed: int = 0
    rescan_count: int = 0
    pose_mark: tuple | None = None


def new_mission(config: MissionConfig) -> MissionState:
    truth_grid = _grid_for(config.area, config.truth_cell_size)
    truth = synth_lake(
        truth_grid,
        bed=config.lake.bed,
        patches=list(config.lake.patches),
        objects=list(config.lake.objects),
        seed=config.seed,
    )
    first_leg = lawnmower_path(config.area, config.line_spacing)[0]
    state = MissionState(
        config=config,
        truth=truth,
        planner_config=config.planner,
        usv_pose=Pose2D(first_leg[0], _heading(first_leg[0], first_leg[1])),
        harvester_pose=Pose2D(config.planner.unload_station),
    )
    state.initial_canopy_load = truth.canopy_load_volume()
    return state


def _heading(a: EnuPoint, b: EnuPoint) -> float:
    if a.distance_to(b) < _EPS:
        return 0.0
    return math.atan2(b.north - a.north, b.east - a.east)


def _emit(state: MissionState, kind: str, payload: dict | None = None) -> None:
    state.events.append(state.clock, kind, payload or {})


def _flush_motion(state: MissionState) -> None:
    """Emit pending movement events so they land before any phase change."""
    if state.seg_released:
        _emit(
            state,
            ev.NEW_SOUNDINGS_SUMMARY,
            {
                "count": state.seg_released,
                "total": len(state.pings_pre) + len(state.pings_post),
                "scan": state.scan_index,
            },
        )
        state.seg_released = 0
    snapshot = (state.usv_pose, state.harvester_pose, state.current_load)
    if state.pose_mark is not None and snapshot != state.pose_mark:
        _emit(
            state,
            ev.POSE_UPDATE,
            {
                "usv": [state.usv_pose.position.east, state.usv_pose.position.north,
                        state.usv_pose.heading],
                "harvester": [state.harvester_pose.position.east,
                              state.harvester_pose.position.north,
                              state.harvester_pose.heading],
                "load": state.current_load,
            },
        )
        state.pose_mark = snapshot


def _set_phase(state: MissionState, to: str) -> None:
    _flush_motion(state)
    old = state.phase
    state.phase = to
    _emit(state, ev.PHASE_CHANGED, {"from": old, "to": to})


def _processing_grid(config: MissionConfig) -> GridSpec:
    return _grid_for(config.area, config.cell_size)


# --- survey execution -------------------------------------------------------

def _begin_scan(state: MissionState, scan_index: int) -> None:
    legs = lawnmower_path(state.config.area, state.config.line_spacing)
    segments: list[_Segment] = []
    pos = state.usv_pose.position
    for i, (a, b) in enumerate(legs):
        if pos.distance_to(a) > _EPS:
            segments.append(_Segment(pos, a, None))
        segments.append(_Segment(a, b, i))
        pos = b
    state.scan_index = scan_index
    state.segments = segments
    state.seg_index = 0
    state.seg_progress = 0.0
    _enter_segment(state)


def _enter_segment(state: MissionState) -> None:
    seg = state.segments[state.seg_index]
    state.seg_progress = 0.0
    state.usv_pose = Pose2D(seg.start, _heading(seg.start, seg.end))
    if seg.leg_index is None:
        state.seg_pings = []
        return
    rng = np.random.default_rng([state.config.seed, state.scan_index, seg.leg_index])
    state.seg_pings = survey_leg(
        seg.start,
        seg.end,
        state.config.survey_speed,
        state.config.sonar,
        state.truth,
        rng,
        sound_speed=state.config.cast(),
        t0=state.clock,
    )


def _release_pings(state: MissionState, up_to: float) -> None:
    sink = state.pings_pre if state.scan_index == 0 else state.pings_post
    n = 0
    while state.seg_pings and state.seg_pings[0].timestamp <= up_to + _EPS:
        sink.append(state.seg_pings.pop(0))
        n += 1
    state.seg_released += n


def _advance_scan(state: MissionState, remaining: float) -> float:
    seg = state.segments[state.seg_index]
    speed = state.config.survey_speed
    left = seg.length - state.seg_progress
    take = min(remaining, left / speed)
    state.seg_progress += take * speed
    state.clock += take
    state.usv_distance += take * speed
    frac = 1.0 if seg.length < _EPS else min(1.0, state.seg_progress / seg.length)
    state.usv_pose = Pose2D(
        EnuPoint(
            seg.start.east + frac * (seg.end.east - seg.start.east),
            seg.start.north + frac * (seg.end.north - seg.start.north),
        ),
        _heading(seg.start, seg.end),
    )
    _release_pings(state, state.clock)
    if state.seg_progress >= seg.length - _EPS:
        # fp slack could strand the endpoint ping; flush before moving on
        _release_pings(state, float("inf"))
        state.seg_index += 1
        if state.seg_index < len(state.segments):
            _enter_segment(state)
        else:
            _finish_scan(state)
    return take


def _finish_scan(state: MissionState) -> None:
    if state.scan_index == 0:
        _set_phase(state, PHASE_PROCESSING)
        _process_pre(state)
        _detect(state)
        _set_phase(state, PHASE_PLANNING)
        _make_plan(state)
        if state.plan is not None and any(
            leg.kind == pl.KIND_HARVEST for leg in state.plan.legs
        ):
            _set_phase(state, PHASE_AWAITING_APPROVAL)
        else:
            # nothing to harvest: skip approval and verify immediately
            _set_phase(state, PHASE_POST_SCAN)
            _begin_scan(state, 1)
    else:
        _set_phase(state, PHASE_REPORTING)
        _process_post(state)
        _make_report(state)
        _set_phase(state, PHASE_DONE)


# --- processing and planning ------------------------------------------------

def _process_pre(state: MissionState) -> None:
    cfg = state.config
    grid = _processing_grid(cfg)
    soundings = georeference_many(state.pings_pre, cfg.cast())
    bathy = grid_soundings(soundings, grid)
    mos = mosaic(soundings, grid)
    proxy = canopy_proxy(bathy, cfg.detection.proxy_window)
    codes = classify(mos, proxy, cfg.detection.thresholds())
    state.rasters["bathy_pre"] = bathy
    state.rasters["intensity"] = mos.intensity
    state.rasters["canopy"] = proxy
    state.rasters["classification"] = codes
    for name in ("bathy_pre", "intensity", "canopy", "classification"):
        _emit(state, ev.RASTER_UPDATED, {"name": name})


def _excluded(cluster: WeedCluster, exclusions) -> bool:
    point = shapely.Point(cluster.centroid.east, cluster.centroid.north)
    return any(shapely.Polygon(poly).covers(point) for poly in exclusions)


def _detect(state: MissionState) -> None:
    cfg = state.config
    grid = _processing_grid(cfg)
    dens = Raster(grid, np.full((grid.n_rows, grid.n_cols), cfg.detection.assumed_density))
    clusters = extract_clusters(
        state.rasters["classification"],
        dens,
        min_area=cfg.detection.min_area,
        height=state.rasters["canopy"],
    )
    state.clusters = [c for c in clusters if not _excluded(c, state.exclusions)]
    _emit(state, ev.CLUSTERS_UPDATED, {"count": len(state.clusters)})


def _track_plan(state: MissionState) -> pl.HarvestPlan:
    """Blanket coverage: mow along the survey track instead of per cluster.

    Expected lane loads come from the canopy raster under each strip so the
    capacity walk still schedules unload detours.
    """
    cfg = state.config
    grid = _processing_grid(cfg)
    proxy = state.rasters["canopy"]
    codes = state.rasters["classification"].values
    heights = np.where(codes == 2.0, np.nan_to_num(proxy.values, nan=0.0), 0.0)
    easts, norths = grid.cell_centers()
    half = state.planner_config.cutter_width / 2
    visits = []
    for i, (a, b) in enumerate(lawnmower_path(cfg.area, cfg.line_spacing)):
        lo, hi = min(a.north, b.north) - half, max(a.north, b.north) + half
        rows = (norths >= lo) & (norths <= hi)
        load = float(
            np.sum(heights[rows, :]) * cfg.detection.assumed_density * grid.cell_area
        )
        visits.append(
            pl._Visit(i, [pl.Leg(pl.KIND_HARVEST, a, b, cluster_id=i, expected_load_delta=load)])
        )
    legs = pl._build_legs(visits, state.harvester_pose.position, state.current_load, state.planner_config)
    return pl._assemble(legs, state.planner_config)


def _make_plan(state: MissionState) -> None:
    if state.config.harvest.follow_usv_track:
        state.plan = _track_plan(state)
    elif state.clusters:
        state.plan = pl.plan(state.clusters, state.planner_config, state.harvester_pose.position)
    else:
        state.plan = pl._assemble([], state.planner_config)
    state.plan_version += 1
    _emit_plan(state)


def _emit_plan(state: MissionState) -> None:
    plan = state.plan
    _emit(
        state,
        ev.PLAN_UPDATED,
        {
            "version": state.plan_version,
            "n_legs": len(plan.legs),
            "executed_prefix": plan.executed_prefix,
            "total_distance": plan.total_distance,
            "total_time": plan.total_time,
        },
    )


# --- harvest execution ------------------------------------------------------

def _splice_unload(state: MissionState) -> None:
    """Insert an unload detour before the lane at the cursor."""
    plan = state.plan
    idx = state.leg_index
    lane = plan.legs[idx]
    pos = state.harvester_pose.position
    station = state.planner_config.unload_station
    detour = [
        pl.Leg(pl.KIND_TRANSIT, pos, station),
        pl.Leg(pl.KIND_UNLOAD, station, station),
        pl.Leg(pl.KIND_TRANSIT, station, lane.start),
    ]
    legs = list(plan.legs[:idx]) + detour + list(plan.legs[idx:])
    prior = plan.load_profile[idx - 1] if idx > 0 else 0.0
    state.plan = pl._assemble(
        legs,
        state.planner_config,
        executed_prefix=idx,
        prefix_profile=list(plan.load_profile[:idx]),
        suffix_start_load=prior,
    )
    state.plan_version += 1
    _emit_plan(state)


def _mow_leg(state: MissionState, leg: pl.Leg) -> None:
    half = state.planner_config.cutter_width / 2
    dx = leg.end.east - leg.start.east
    dy = leg.end.north - leg.start.north
    length = math.hypot(dx, dy)
    if length < _EPS:
        return
    nx, ny = -dy / length * half, dx / length * half
    poly = [
        (leg.start.east + nx, leg.start.north + ny),
        (leg.end.east + nx, leg.end.north + ny),
        (leg.end.east - nx, leg.end.north - ny),
        (leg.start.east - nx, leg.start.north - ny),
    ]
    removed = mow(state.truth, poly, state.config.harvest.cut_height)
    state.current_load += removed
    state.mow_volumes.append(removed)
    state.mow_polygons.append(poly)
    if state.current_load > state.planner_config.capacity + _EPS:
        raise StateError(
            f"conveyor overfilled: {state.current_load:.3f} m3 against "
            f"capacity {state.planner_config.capacity} m3; expected lane loads "
            "underestimate the actual cut by more than the headroom factor"
        )


def _complete_leg(state: MissionState) -> None:
    state.leg_index += 1
    state.leg_progress = 0.0
    state.leg_elapsed = 0.0
    state.plan.executed_prefix = state.leg_index
    if state.leg_index >= len(state.plan.legs):
        _set_phase(state, PHASE_POST_SCAN)
        _begin_scan(state, 1)


def _advance_harvest(state: MissionState, remaining: float) -> float:
    plan = state.plan
    if state.leg_index >= len(plan.legs):
        # a live replan can empty the remaining suffix entirely
        _set_phase(state, PHASE_POST_SCAN)
        _begin_scan(state, 1)
        return 0.0
    leg = plan.legs[state.leg_index]
    entering = state.leg_progress == 0.0 and state.leg_elapsed == 0.0
    if (
        entering
        and leg.kind == pl.KIND_HARVEST
        and state.current_load > 0
        and state.current_load
        + state.config.harvest.headroom_factor * leg.expected_load_delta
        > state.planner_config.capacity + _EPS
    ):
        _splice_unload(state)
        leg = state.plan.legs[state.leg_index]

    if leg.kind == pl.KIND_UNLOAD:
        left = state.planner_config.unload_time - state.leg_elapsed
        take = min(remaining, left)
        state.leg_elapsed += take
        state.clock += take
        if state.leg_elapsed >= state.planner_config.unload_time - _EPS:
            state.current_load = 0.0
            state.unloads_executed += 1
            _complete_leg(state)
        return take

    speed = state.planner_config.harvester_speed
    length = leg.length
    left = length - state.leg_progress
    take = min(remaining, left / speed) if length > _EPS else 0.0
    state.leg_progress += take * speed
    state.clock += take
    state.harvester_distance += take * speed
    frac = 1.0 if length < _EPS else min(1.0, state.leg_progress / length)
    state.harvester_pose = Pose2D(
        EnuPoint(
            leg.start.east + frac * (leg.end.east - leg.start.east),
            leg.start.north + frac * (leg.end.north - leg.start.north),
        ),
        _heading(leg.start, leg.end),
    )
    if state.leg_progress >= length - _EPS:
        state.harvester_pose = Pose2D(leg.end, _heading(leg.start, leg.end))
        if leg.kind == pl.KIND_HARVEST:
            _mow_leg(state, leg)
        _complete_leg(state)
    return take


# --- verification and reporting ---------------------------------------------

def _process_post(state: MissionState) -> None:
    cfg = state.config
    grid = _processing_grid(cfg)
    soundings = georeference_many(state.pings_post, cfg.cast())
    bathy = grid_soundings(soundings, grid)
    height = diff_grids(state.rasters["bathy_pre"], bathy, cfg.detection.noise_floor)
    state.rasters["bathy_post"] = bathy
    state.rasters["height"] = height
    for name in ("bathy_post", "height"):
        _emit(state, ev.RASTER_UPDATED, {"name": name})


def _mowed_mean_height(state: MissionState) -> float | None:
    """Mean recovered cut height over cells inside the mowed strips."""
    if not state.mow_polygons:
        return None
    height = state.rasters["height"]
    union = shapely.unary_union([shapely.Polygon(p) for p in state.mow_polygons])
    easts, norths = height.spec.cell_centers()
    ee, nn = np.meshgrid(easts, norths)
    inside = shapely.intersects_xy(union, ee.ravel(), nn.ravel()).reshape(ee.shape)
    vals = np.nan_to_num(height.values, nan=0.0)
    picked = vals[inside & (vals > 0)]
    if picked.size == 0:
        return None
    return float(picked.mean())


def _count_after(state: MissionState) -> int:
    cfg = state.config
    grid = _processing_grid(cfg)
    soundings = georeference_many(state.pings_post, cfg.cast())
    mos = mosaic(soundings, grid)
    proxy = canopy_proxy(state.rasters["bathy_post"], cfg.detection.proxy_window)
    codes = classify(mos, proxy, cfg.detection.thresholds())
    dens = Raster(grid, np.full((grid.n_rows, grid.n_cols), cfg.detection.assumed_density))
    clusters = extract_clusters(codes, dens, min_area=cfg.detection.min_area, height=proxy)
    return len([c for c in clusters if not _excluded(c, state.exclusions)])


def _make_report(state: MissionState) -> None:
    executed = state.plan.legs[: state.plan.executed_prefix] if state.plan else []
    expected = math.fsum(
        leg.expected_load_delta for leg in executed if leg.kind == pl.KIND_HARVEST
    )
    pre = state.rasters["bathy_pre"]
    post = state.rasters["bathy_post"]
    state.report = {
        "clock_s": state.clock,
        "pre_mean_depth_m": float(np.nanmean(pre.values)),
        "post_mean_depth_m": float(np.nanmean(post.values)),
        "mean_weed_height_recovered_m": _mowed_mean_height(state),
        "harvested_load_truth_m3": math.fsum(state.mow_volumes),
        "harvested_load_expected_m3": expected,
        "initial_canopy_load_m3": state.initial_canopy_load,
        "final_canopy_load_m3": state.truth.canopy_load_volume(),
        "usv_distance_m": state.usv_distance,
        "harvester_distance_m": state.harvester_distance,
        "cluster_count_before": len(state.clusters),
        "cluster_count_after": _count_after(state),
        "n_unloads_executed": state.unloads_executed,
        "height_source": "canopy_proxy",
    }
    _emit(
        state,
        ev.REPORT_READY,
        {
            "harvested_load_truth_m3": state.report["harvested_load_truth_m3"],
            "mean_weed_height_recovered_m": state.report["mean_weed_height_recovered_m"],
        },
    )


# --- stepping ----------------------------------------------------------------

def step(state: MissionState, dt: float) -> None:
    """Advance the mission clock by ``dt`` seconds."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if state.phase == PHASE_DONE:
        raise StateError("mission is already complete")

    state.pose_mark = (state.usv_pose, state.harvester_pose, state.current_load)
    state.seg_released = 0
    remaining = dt
    spins = 0
    while remaining > _EPS and state.phase != PHASE_DONE:
        spins += 1
        if spins > 100000:
            raise StateError(f"mission stalled in phase {state.phase}")
        if state.phase in (PHASE_PRE_SCAN, PHASE_POST_SCAN):
            consumed = _advance_scan(state, remaining)
        elif state.phase == PHASE_HARVESTING:
            consumed = _advance_harvest(state, remaining)
        elif state.phase in (PHASE_IDLE, PHASE_AWAITING_APPROVAL):
            # idle phases absorb time; the clock only runs on a started mission
            if state.phase == PHASE_AWAITING_APPROVAL:
                state.clock += remaining
            consumed = remaining
        else:
            # Processing/Planning/Reporting are instantaneous and only ever
            # entered (and left) inside a single advance call
            raise StateError(f"cannot step a mission in phase {state.phase}")
        remaining -= consumed

    _flush_motion(state)
    state.pose_mark = None


# --- operator commands --------------------------------------------------------

def _refilter_clusters(state: MissionState) -> None:
    state.clusters = [c for c in state.clusters if not _excluded(c, state.exclusions)]
    _emit(state, ev.CLUSTERS_UPDATED, {"count": len(state.clusters)})


def _replan_live(state: MissionState, new_clusters: list[WeedCluster]) -> None:
    """Rebuild the un-executed plan suffix around the harvester's position."""
    plan = state.plan
    live_ids = {c.id for c in state.clusters}
    prefix = list(plan.legs[: plan.executed_prefix])
    suffix = [
        leg
        for leg in plan.legs[plan.executed_prefix:]
        if leg.kind != pl.KIND_HARVEST or leg.cluster_id in live_ids
    ]
    filtered = pl._assemble(
        prefix + suffix,
        state.planner_config,
        executed_prefix=plan.executed_prefix,
        prefix_profile=list(plan.load_profile[: plan.executed_prefix]),
        suffix_start_load=plan.load_profile[plan.executed_prefix - 1]
        if plan.executed_prefix > 0
        else 0.0,
    )
    state.plan = pl.replan(
        filtered,
        new_clusters,
        state.harvester_pose.position,
        state.current_load,
        state.planner_config,
    )
    state.plan_version += 1
    state.leg_index = state.plan.executed_prefix
    state.leg_progress = 0.0
    state.leg_elapsed = 0.0
    _emit_plan(state)


def _run_rescan(state: MissionState, area: tuple[float, float, float, float]) -> list[WeedCluster]:
    """Auxiliary survey sortie over a sub-area, merged into the pre grid.

    Modeled as instantaneous: the sounding craft does not block the
    harvester and its track is not simulated. New soundings re-drive the
    whole detection pass; only clusters that do not overlap already-known
    ones are adopted, with ids continuing after the existing set.
    """
    cfg = state.config
    state.rescan_count += 1
    scan_id = 1 + state.rescan_count
    for i, (a, b) in enumerate(lawnmower_path(area, cfg.line_spacing)):
        rng = np.random.default_rng([cfg.seed, scan_id, i])
        state.pings_pre.extend(
            survey_leg(a, b, cfg.survey_speed, cfg.sonar, state.truth, rng,
                       sound_speed=cfg.cast(), t0=state.clock)
        )
    _process_pre(state)

    grid = _processing_grid(cfg)
    dens = Raster(grid, np.full((grid.n_rows, grid.n_cols), cfg.detection.assumed_density))
    detected = extract_clusters(
        state.rasters["classification"],
        dens,
        min_area=cfg.detection.min_area,
        height=state.rasters["canopy"],
    )
    known = set()
    for c in state.clusters:
        known.update(zip(c.cell_east.tolist(), c.cell_north.tolist()))
    next_id = max((c.id for c in state.clusters), default=-1) + 1
    fresh = []
    for cand in detected:
        if _excluded(cand, state.exclusions):
            continue
        cells = set(zip(cand.cell_east.tolist(), cand.cell_north.tolist()))
        if cells & known:
            continue
        fresh.append(replace(cand, id=next_id))
        next_id += 1
    if fresh:
        state.clusters = state.clusters + fresh
    _emit(state, ev.CLUSTERS_UPDATED, {"count": len(state.clusters)})
    return fresh


def _polygon_from_payload(payload: dict) -> list[tuple[float, float]]:
    poly = payload.get("polygon")
    if not isinstance(poly, list) or len(poly) < 3:
        raise ConfigError("polygon must be a list of at least 3 [east, north] pairs")
    try:
        return [(float(e), float(n)) for e, n in poly]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad polygon vertex: {exc}") from exc


def operator_command(state: MissionState, command: str, payload: dict | None = None) -> tuple[bool, str]:
    """Apply a skipper command. Returns (applied, reason).

    A command that is structurally valid but not allowed in the current
    phase is rejected without touching the state. A malformed command
    raises ConfigError.
    """
    payload = payload or {}
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}")

    if command == "start":
        if state.phase != PHASE_IDLE:
            return False, f"start is only valid in {PHASE_IDLE}, mission is in {state.phase}"
        _set_phase(state, PHASE_PRE_SCAN)
        _begin_scan(state, 0)
        return True, "survey started"

    if command == "approve_plan":
        if state.phase != PHASE_AWAITING_APPROVAL:
            return False, f"no plan awaiting approval in {state.phase}"
        _set_phase(state, PHASE_HARVESTING)
        state.leg_index = state.plan.executed_prefix
        state.leg_progress = 0.0
        state.leg_elapsed = 0.0
        return True, "plan approved"

    if command == "reject_plan":
        if state.phase != PHASE_AWAITING_APPROVAL:
            return False, f"no plan awaiting approval in {state.phase}"
        ids = payload.get("exclude_cluster_ids", [])
        if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
            raise ConfigError("exclude_cluster_ids must be a list of ints")
        _set_phase(state, PHASE_PLANNING)
        if ids:
            drop = set(ids)
            state.clusters = [c for c in state.clusters if c.id not in drop]
            _emit(state, ev.CLUSTERS_UPDATED, {"count": len(state.clusters)})
        _make_plan(state)
        if any(leg.kind == pl.KIND_HARVEST for leg in state.plan.legs):
            _set_phase(state, PHASE_AWAITING_APPROVAL)
        else:
            _set_phase(state, PHASE_POST_SCAN)
            _begin_scan(state, 1)
        return True, "plan rejected, replanned"

    if command == "mark_area":
        polygon = _polygon_from_payload(payload)
        if state.phase in (PHASE_IDLE, PHASE_DONE):
            return False, f"mark_area is not valid in {state.phase}"
        state.exclusions.append(polygon)
        if state.phase == PHASE_AWAITING_APPROVAL:
            _refilter_clusters(state)
            _make_plan(state)
            if not any(leg.kind == pl.KIND_HARVEST for leg in state.plan.legs):
                _set_phase(state, PHASE_POST_SCAN)
                _begin_scan(state, 1)
        elif state.phase == PHASE_HARVESTING:
            _refilter_clusters(state)
            _replan_live(state, [])
        return True, "area excluded"

    if command == "request_rescan":
        if state.phase not in (PHASE_AWAITING_APPROVAL, PHASE_HARVESTING):
            return False, f"rescan is not valid in {state.phase}"
        polygon = _polygon_from_payload(payload)
        e0 = max(min(e for e, _ in polygon), state.config.area[0])
        n0 = max(min(n for _, n in polygon), state.config.area[1])
        e1 = min(max(e for e, _ in polygon), state.config.area[2])
        n1 = min(max(n for _, n in polygon), state.config.area[3])
        if e1 <= e0 or n1 <= n0:
            raise ConfigError("rescan polygon lies outside the mission area")
        fresh = _run_rescan(state, (e0, n0, e1, n1))
        if state.phase == PHASE_AWAITING_APPROVAL:
            _make_plan(state)
        else:
            _replan_live(state, fresh)
        return True, f"rescan complete, {len(fresh)} new cluster(s)"

    # set_unload_station
    station = payload.get("station")
    if (
        not isinstance(station, (list, tuple))
        or len(station) != 2
        or not all(isinstance(v, (int, float)) for v in station)
    ):
        raise ConfigError("station must be [east, north]")
    if state.phase == PHASE_DONE:
        return False, "mission is complete"
    state.planner_config = replace(
        state.planner_config, unload_station=EnuPoint(float(station[0]), float(station[1]))
    )
    if state.phase == PHASE_AWAITING_APPROVAL:
        _make_plan(state)
    elif state.phase == PHASE_HARVESTING:
        _replan_live(state, [])
    return True, "unload station moved"


# --- headless runner and run directory ---------------------------------------

def run_headless(config: MissionConfig, run_dir: str | None = None) -> MissionState:
    """Run a full mission with automatic plan approval; optionally write the
    run directory. Returns the finished state."""
    state = new_mission(config)
    operator_command(state, "start")
    spins = 0
    while state.phase != PHASE_DONE:
        if state.phase == PHASE_AWAITING_APPROVAL:
            operator_command(state, "approve_plan")
        step(state, config.dt)
        spins += 1
        if spins > 10_000_000:
            raise StateError("headless mission did not terminate")
    if run_dir is not None:
        write_run_dir(state, run_dir)
    return state


_RASTER_FILES = ("bathy_pre", "bathy_post", "intensity", "canopy", "height")


def write_run_dir(state: MissionState, path: str) -> None:
    """Write the full mission record: config, raw pings, rasters, clusters,
    plan, event log, and report."""
    os.makedirs(path, exist_ok=True)
    raster_dir = os.path.join(path, "rasters")
    os.makedirs(raster_dir, exist_ok=True)
    write_config(state.config, os.path.join(path, "config.json"))
    write_pings(state.pings_pre, os.path.join(path, "pings_pre.ndjson"))
    write_pings(state.pings_post, os.path.join(path, "pings_post.ndjson"))
    for name in _RASTER_FILES:
        if name in state.rasters:
            write_asc(state.rasters[name], os.path.join(raster_dir, name + ".asc"))
    if "classification" in state.rasters:
        write_classification(
            state.rasters["classification"], os.path.join(raster_dir, "classification.asc")
        )
    write_clusters(state.clusters, os.path.join(path, "clusters.geojson"))
    if state.plan is not None:
        pl.write_plan(state.plan, os.path.join(path, "plan.json"))
    ev.write_events(state.events, os.path.join(path, "events.ndjson"))
    if state.report is not None:
        with open(os.path.join(path, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(state.report, fh, sort_keys=True, indent=2)
            fh.write("\n")
