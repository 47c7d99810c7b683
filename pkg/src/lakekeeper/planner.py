"""Capacity-constrained harvest routing over weed clusters.

A plan is a flat list of legs: transits, boustrophedon harvest lanes, and
unload stops at the station. Construction is greedy nearest-neighbor with
unloads forced in whenever the next lane would overflow the conveyor;
improvement is 2-opt over the cluster visit order. An exhaustive oracle
(permutations times optimal unload placement) keeps the heuristic honest on
small instances.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, PlanError, StateError
from .geo import EnuPoint
from .pipeline import WeedCluster

KIND_TRANSIT = "transit"
KIND_HARVEST = "harvest_lane"
KIND_UNLOAD = "unload"
_KINDS = (KIND_TRANSIT, KIND_HARVEST, KIND_UNLOAD)

_EPS = 1e-9


@dataclass(frozen=True)
class PlannerConfig:
    capacity: float = 15.0
    cutter_width: float = 2.0
    lane_overlap: float = 0.0
    harvester_speed: float = 1.0
    unload_station: EnuPoint = EnuPoint(0.0, 0.0)
    unload_time: float = 120.0

    def __post_init__(self) -> None:
        if self.capacity <= 0:
            raise PlanError(f"capacity must be positive, got {self.capacity}")
        if self.cutter_width <= 0:
            raise PlanError(f"cutter width must be positive, got {self.cutter_width}")
        if not 0.0 <= self.lane_overlap < 1.0:
            raise PlanError(f"lane overlap must be in [0, 1), got {self.lane_overlap}")
        if self.harvester_speed <= 0 or self.unload_time < 0:
            raise PlanError("harvester speed must be positive and unload time non-negative")

    @property
    def lane_spacing(self) -> float:
        return self.cutter_width * (1.0 - self.lane_overlap)


@dataclass(frozen=True)
class Leg:
    kind: str
    start: EnuPoint
    end: EnuPoint
    cluster_id: int | None = None
    expected_load_delta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise PlanError(f"unknown leg kind {self.kind!r}")
        if self.kind == KIND_HARVEST and self.cluster_id is None:
            raise PlanError("harvest lanes need a cluster id")
        if self.expected_load_delta < 0:
            raise PlanError("load delta cannot be negative")

    @property
    def length(self) -> float:
        return self.start.distance_to(self.end)


@dataclass
class HarvestPlan:
    legs: list[Leg]
    total_distance: float
    total_time: float
    load_profile: list[float]
    executed_prefix: int = 0

    @property
    def n_unloads(self) -> int:
        return sum(1 for leg in self.legs if leg.kind == KIND_UNLOAD)


@dataclass
class _Visit:
    """One cluster's (remaining) lanes, the planner's sequencing unit."""

    cluster_id: int
    lanes: list[Leg]

    @property
    def centroid(self) -> tuple[float, float]:
        es = [0.5 * (l.start.east + l.end.east) for l in self.lanes]
        ns = [0.5 * (l.start.north + l.end.north) for l in self.lanes]
        return sum(es) / len(es), sum(ns) / len(ns)


def lanes_for_cluster(cluster: WeedCluster, config: PlannerConfig) -> list[Leg]:
    """Boustrophedon lanes over the cluster's cells.

    Lanes run along the longer side of the bounding box (east on ties) and
    are stacked ``lane_spacing`` apart. Each member cell belongs to exactly
    one strip, so the lane load deltas partition the cluster's load volume.
    Strips with gaps wider than a cell emit one lane per contiguous run so
    the harvester never mows open water between arms of a cluster.
    """
    if len(cluster.cell_east) == 0 or cluster.area <= 0:
        raise PlanError(f"cluster {cluster.id} has no cells to mow")
    half = cluster.cell_size / 2.0
    e_lo, e_hi = float(np.min(cluster.cell_east)) - half, float(np.max(cluster.cell_east)) + half
    n_lo, n_hi = float(np.min(cluster.cell_north)) - half, float(np.max(cluster.cell_north)) + half
    along_east = (e_hi - e_lo) >= (n_hi - n_lo)
    if along_east:
        along, across, across_lo = cluster.cell_east, cluster.cell_north, n_lo
        extent_across = n_hi - n_lo
    else:
        along, across, across_lo = cluster.cell_north, cluster.cell_east, e_lo
        extent_across = e_hi - e_lo

    spacing = config.lane_spacing
    n_lanes = max(1, math.ceil(extent_across / spacing - _EPS))
    strip = np.clip(((across - across_lo) / spacing).astype(int), 0, n_lanes - 1)

    legs: list[Leg] = []
    for k in range(n_lanes):
        member = strip == k
        if not np.any(member):
            continue
        center = across_lo + (k + 0.5) * spacing
        order = np.argsort(along[member], kind="stable")
        a = along[member][order]
        loads = cluster.cell_loads[member][order]
        breaks = np.flatnonzero(np.diff(a) > cluster.cell_size * 1.5) + 1
        runs = np.split(np.arange(len(a)), breaks)
        forward = k % 2 == 0
        for run in runs if forward else reversed(runs):
            lo, hi = a[run[0]] - half, a[run[-1]] + half
            delta = float(math.fsum(loads[run]))
            if delta > config.capacity + _EPS:
                raise PlanError(
                    f"one lane of cluster {cluster.id} carries {delta:.2f} m3, over capacity"
                )
            p_lo = EnuPoint(lo, center) if along_east else EnuPoint(center, lo)
            p_hi = EnuPoint(hi, center) if along_east else EnuPoint(center, hi)
            start, end = (p_lo, p_hi) if forward else (p_hi, p_lo)
            legs.append(
                Leg(KIND_HARVEST, start, end, cluster_id=cluster.id, expected_load_delta=delta)
            )
    return legs


def _build_legs(
    visits: list[_Visit], start: EnuPoint, start_load: float, config: PlannerConfig
) -> list[Leg]:
    """Materialize a visit order into legs, forcing an unload detour before
    any lane that would push the load over capacity."""
    legs: list[Leg] = []
    pos, load = start, start_load
    station = config.unload_station
    for visit in visits:
        for lane in visit.lanes:
            if load + lane.expected_load_delta > config.capacity + _EPS:
                legs.append(Leg(KIND_TRANSIT, pos, station))
                legs.append(Leg(KIND_UNLOAD, station, station))
                pos, load = station, 0.0
            legs.append(Leg(KIND_TRANSIT, pos, lane.start))
            legs.append(lane)
            pos, load = lane.end, load + lane.expected_load_delta
    if load > 0:
        legs.append(Leg(KIND_TRANSIT, pos, station))
        legs.append(Leg(KIND_UNLOAD, station, station))
    return legs


def _profile(legs: list[Leg], start_load: float) -> list[float]:
    out, load = [], start_load
    for leg in legs:
        if leg.kind == KIND_HARVEST:
            load += leg.expected_load_delta
        elif leg.kind == KIND_UNLOAD:
            load = 0.0
        out.append(load)
    return out


def _assemble(
    legs: list[Leg],
    config: PlannerConfig,
    executed_prefix: int = 0,
    prefix_profile: list[float] | None = None,
    suffix_start_load: float = 0.0,
) -> HarvestPlan:
    profile = list(prefix_profile or [])
    profile += _profile(legs[len(profile):], suffix_start_load)
    distance = math.fsum(leg.length for leg in legs)
    unloads = sum(1 for leg in legs if leg.kind == KIND_UNLOAD)
    return HarvestPlan(
        legs=legs,
        total_distance=distance,
        total_time=distance / config.harvester_speed + unloads * config.unload_time,
        load_profile=profile,
        executed_prefix=executed_prefix,
    )


def _cost(visits: list[_Visit], start: EnuPoint, start_load: float, config: PlannerConfig) -> float:
    return math.fsum(leg.length for leg in _build_legs(visits, start, start_load, config))


def _greedy_order(visits: list[_Visit], start: EnuPoint) -> list[_Visit]:
    remaining = list(visits)
    pos = (start.east, start.north)
    out: list[_Visit] = []
    while remaining:
        best = min(
            remaining,
            key=lambda v: (math.dist(pos, v.centroid), v.cluster_id),
        )
        remaining.remove(best)
        out.append(best)
        last = best.lanes[-1].end
        pos = (last.east, last.north)
    return out


def _two_opt(
    visits: list[_Visit], start: EnuPoint, start_load: float, config: PlannerConfig
) -> list[_Visit]:
    """First-improvement 2-opt on the visit order; every accepted move
    strictly shrinks the rebuilt plan's distance, so it terminates."""
    order = list(visits)
    cost = _cost(order, start, start_load, config)
    improved = True
    while improved:
        improved = False
        for i in range(len(order) - 1):
            for j in range(i + 1, len(order)):
                candidate = order[:i] + order[i : j + 1][::-1] + order[j + 1 :]
                c = _cost(candidate, start, start_load, config)
                if c < cost - 1e-12:
                    order, cost = candidate, c
                    improved = True
                    break
            if improved:
                break
    return order


def _plan_visits(
    visits: list[_Visit],
    config: PlannerConfig,
    start: EnuPoint,
    start_load: float = 0.0,
    seed_orders: list[list[_Visit]] | None = None,
) -> list[Leg]:
    candidates = seed_orders or [_greedy_order(visits, start)]
    best_order, best_cost = None, math.inf
    for seed in candidates:
        order = _two_opt(seed, start, start_load, config)
        c = _cost(order, start, start_load, config)
        if c < best_cost - 1e-12:
            best_order, best_cost = order, c
    return _build_legs(best_order, start, start_load, config)


def plan(clusters: list[WeedCluster], config: PlannerConfig, start: EnuPoint) -> HarvestPlan:
    """Route the harvester through every cluster's lanes and back to the
    station empty, keeping the conveyor under capacity throughout."""
    if not clusters:
        raise PlanError("nothing to plan: no clusters")
    visits = [_Visit(c.id, lanes_for_cluster(c, config)) for c in clusters]
    legs = _plan_visits(visits, config, start)
    return _assemble(legs, config)


def brute_force_plan(
    clusters: list[WeedCluster], config: PlannerConfig, start: EnuPoint
) -> HarvestPlan:
    """Exhaustive oracle: every cluster permutation crossed with the optimal
    unload placement for that permutation (dynamic program over lane
    boundaries). Small instances only."""
    if not clusters:
        raise PlanError("nothing to plan: no clusters")
    if len(clusters) > 8:
        raise PlanError("brute force is capped at 8 clusters")
    visits = {c.id: _Visit(c.id, lanes_for_cluster(c, config)) for c in clusters}
    ids = sorted(visits)
    station = np.array([config.unload_station.east, config.unload_station.north])
    origin = np.array([start.east, start.north])

    best_cost = math.inf
    best: tuple[list[_Visit], list[int]] | None = None
    for perm in itertools.permutations(ids):
        order = [visits[i] for i in perm]
        lanes = [lane for v in order for lane in v.lanes]
        m = len(lanes)
        starts = np.array([[l.start.east, l.start.north] for l in lanes])
        ends = np.array([[l.end.east, l.end.north] for l in lanes])
        lane_len = np.linalg.norm(ends - starts, axis=1)
        inter = np.linalg.norm(starts[1:] - ends[:-1], axis=1)  # lane k -> k+1
        inter_prefix = np.concatenate([[0.0], np.cumsum(inter)])  # sum inter[:k]
        cumload = np.concatenate(
            [[0.0], np.cumsum([l.expected_load_delta for l in lanes])]
        )
        to_station = np.linalg.norm(ends - station, axis=1)
        from_station = np.linalg.norm(starts - station, axis=1)
        entry = np.concatenate([[np.linalg.norm(starts[0] - origin)], from_station[1:]])

        if cumload[m] <= _EPS:
            # nothing to unload anywhere: the bare lane chain is optimal
            cost = float(entry[0] + inter_prefix[m - 1] + lane_len.sum())
            if cost < best_cost - 1e-12:
                best_cost, best = cost, (order, [])
            continue

        # dp[j]: best transit distance covering lanes [0, j) ending unloaded
        dp = np.full(m + 1, np.inf)
        dp[0] = 0.0
        back = np.zeros(m + 1, dtype=int)
        for j in range(1, m + 1):
            i = np.arange(j)
            feasible = (cumload[j] - cumload[i]) <= config.capacity + _EPS
            seg = entry[i] + (inter_prefix[j - 1] - inter_prefix[i]) + to_station[j - 1]
            total = np.where(feasible, dp[:j] + seg, np.inf)
            k = int(np.argmin(total))
            dp[j], back[j] = total[k], k
        cost = float(dp[m] + lane_len.sum())
        if math.isfinite(cost) and cost < best_cost - 1e-12:
            breaks = []
            j = m
            while j > 0:
                breaks.append(j)
                j = int(back[j])
            best_cost, best = cost, (order, sorted(breaks))

    if best is None:
        raise PlanError("no feasible unload placement exists")
    order, breaks = best
    lanes = [lane for v in order for lane in v.lanes]
    legs: list[Leg] = []
    pos = start
    for idx, lane in enumerate(lanes):
        legs.append(Leg(KIND_TRANSIT, pos, lane.start))
        legs.append(lane)
        pos = lane.end
        if idx + 1 in breaks:
            legs.append(Leg(KIND_TRANSIT, pos, config.unload_station))
            legs.append(Leg(KIND_UNLOAD, config.unload_station, config.unload_station))
            pos = config.unload_station
    return _assemble(legs, config)


def replan(
    current: HarvestPlan,
    new_clusters: list[WeedCluster],
    current_position: EnuPoint,
    current_load: float,
    config: PlannerConfig,
) -> HarvestPlan:
    """Keep the executed prefix verbatim; re-plan everything still pending
    (remaining lanes grouped by cluster, plus any new clusters) from the
    harvester's actual position and load.

    The inherited visit order seeds the optimizer alongside a fresh greedy
    order, so re-planning with no new information never produces a worse
    suffix than the one it replaces.
    """
    if current_load > config.capacity + _EPS:
        raise StateError(f"current load {current_load} exceeds capacity")
    executed = list(current.legs[: current.executed_prefix])
    prefix_profile = list(current.load_profile[: current.executed_prefix])

    pending: dict[int, _Visit] = {}
    inherited_order: list[int] = []
    for leg in current.legs[current.executed_prefix :]:
        if leg.kind != KIND_HARVEST:
            continue
        if leg.cluster_id not in pending:
            pending[leg.cluster_id] = _Visit(leg.cluster_id, [])
            inherited_order.append(leg.cluster_id)
        pending[leg.cluster_id].lanes.append(leg)
    for cluster in new_clusters:
        if cluster.id in pending:
            raise PlanError(f"cluster id {cluster.id} already present in the plan")
        pending[cluster.id] = _Visit(cluster.id, lanes_for_cluster(cluster, config))

    visits = list(pending.values())
    if not visits:
        suffix = _build_legs([], current_position, current_load, config)
    else:
        seeds = [_greedy_order(visits, current_position)]
        if inherited_order:
            inherited = [pending[i] for i in inherited_order]
            inherited += [v for v in visits if v.cluster_id not in set(inherited_order)]
            seeds.append(inherited)
        suffix = _plan_visits(
            visits, config, current_position, start_load=current_load, seed_orders=seeds
        )
    return _assemble(
        executed + suffix,
        config,
        executed_prefix=len(executed),
        prefix_profile=prefix_profile,
        suffix_start_load=current_load,
    )


def plan_to_json(plan_: HarvestPlan) -> dict:
    return {
        "legs": [
            {
                "kind": leg.kind,
                "start": [leg.start.east, leg.start.north],
                "end": [leg.end.east, leg.end.north],
                "cluster_id": leg.cluster_id,
                "expected_load_delta": leg.expected_load_delta,
            }
            for leg in plan_.legs
        ],
        "total_distance": plan_.total_distance,
        "total_time": plan_.total_time,
        "load_profile": plan_.load_profile,
        "executed_prefix": plan_.executed_prefix,
    }


def plan_from_json(doc: dict) -> HarvestPlan:
    try:
        legs = [
            Leg(
                kind=item["kind"],
                start=EnuPoint(*item["start"]),
                end=EnuPoint(*item["end"]),
                cluster_id=item["cluster_id"],
                expected_load_delta=item["expected_load_delta"],
            )
            for item in doc["legs"]
        ]
        return HarvestPlan(
            legs=legs,
            total_distance=doc["total_distance"],
            total_time=doc["total_time"],
            load_profile=doc["load_profile"],
            executed_prefix=doc["executed_prefix"],
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed plan document: {exc}") from exc


def write_plan(plan_: HarvestPlan, path: str) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(plan_to_json(plan_), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_plan(path: str) -> HarvestPlan:
    with open(path, "r", encoding="ascii") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON") from exc
    return plan_from_json(doc)
