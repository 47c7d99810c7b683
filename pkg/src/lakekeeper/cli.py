"""Command-line entry points.

Each subcommand reads and writes the documented file formats, so the full
chain can be driven from a shell:

    lakekeeper synth   --config cfg.json --out truth/
    lakekeeper survey  --config cfg.json --truth truth/ --out pings.ndjson
    lakekeeper process --config cfg.json --pings pings.ndjson --out work/
    lakekeeper diff    pre.asc post.asc --out height.asc
    lakekeeper plan    work/clusters.geojson --capacity 15 --out plan.json
    lakekeeper mission --config cfg.json --headless --out run/
    lakekeeper serve   --config cfg.json --port 8080

Exit codes: 0 success, 2 configuration or usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import planner as pl
from .backscatter import canopy_proxy, classify, mosaic, write_classification
from .errors import ConfigError, FormatError, LakekeeperError
from .geo import EnuPoint
from .lake import load_truth, save_truth, synth_lake
from .mission import (
    MissionConfig,
    _grid_for,
    read_config,
    run_headless,
    write_config,
)
from .pipeline import (
    diff_grids,
    extract_clusters,
    georeference_many,
    grid_soundings,
    mean_height,
    read_clusters,
    write_clusters,
)
from .raster import Raster, read_asc, write_asc
from .server import serve
from .sonar import lawnmower_path, read_pings, survey_leg, write_pings

DEFAULT_RUN_DIR = "run"


def _load_config(args) -> MissionConfig:
    if getattr(args, "config", None):
        try:
            config = read_config(args.config)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
    else:
        config = MissionConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "dt", None) is not None:
        config = replace(config, dt=args.dt)
    return config


def _run_dir(args) -> str:
    if getattr(args, "out", None):
        return args.out
    return os.environ.get("LAKEKEEPER_RUN_DIR", DEFAULT_RUN_DIR)


def _cmd_synth(args) -> int:
    config = _load_config(args)
    truth = synth_lake(
        _grid_for(config.area, config.truth_cell_size),
        bed=config.lake.bed,
        patches=list(config.lake.patches),
        objects=list(config.lake.objects),
        seed=config.seed,
    )
    save_truth(truth, args.out)
    write_config(config, os.path.join(args.out, "config.json"))
    print(f"lake truth written to {args.out}")
    print(f"canopy load volume {truth.canopy_load_volume():.3f} m3")
    return 0


def _cmd_survey(args) -> int:
    config = _load_config(args)
    truth = load_truth(args.truth)
    pings = []
    clock = 0.0
    pos = None
    for i, (a, b) in enumerate(lawnmower_path(config.area, config.line_spacing)):
        if pos is not None:
            clock += pos.distance_to(a) / config.survey_speed
        rng = np.random.default_rng([config.seed, args.scan, i])
        pings.extend(
            survey_leg(a, b, config.survey_speed, config.sonar, truth, rng,
                       sound_speed=config.cast(), t0=clock)
        )
        clock += a.distance_to(b) / config.survey_speed
        pos = b
    write_pings(pings, args.out)
    print(f"{len(pings)} pings written to {args.out}")
    return 0


def _cmd_process(args) -> int:
    config = _load_config(args)
    grid = _grid_for(config.area, config.cell_size)
    soundings = georeference_many(read_pings(args.pings), config.cast())
    bathy = grid_soundings(soundings, grid)
    mos = mosaic(soundings, grid)
    proxy = canopy_proxy(bathy, config.detection.proxy_window)
    codes = classify(mos, proxy, config.detection.thresholds())
    dens = Raster(grid, np.full((grid.n_rows, grid.n_cols), config.detection.assumed_density))
    clusters = extract_clusters(
        codes, dens, min_area=config.detection.min_area, height=proxy
    )
    os.makedirs(args.out, exist_ok=True)
    write_asc(bathy, os.path.join(args.out, "bathy.asc"))
    write_asc(mos.intensity, os.path.join(args.out, "intensity.asc"))
    write_asc(proxy, os.path.join(args.out, "canopy.asc"))
    write_classification(codes, os.path.join(args.out, "classification.asc"))
    write_clusters(clusters, os.path.join(args.out, "clusters.geojson"))
    print(f"{len(soundings)} soundings gridded, {len(clusters)} cluster(s)")
    print(f"rasters and clusters written to {args.out}")
    return 0


def _cmd_diff(args) -> int:
    pre = read_asc(args.pre)
    post = read_asc(args.post)
    height = diff_grids(pre, post, args.noise_floor)
    if args.out:
        write_asc(height, args.out)
    print(f"mean height {mean_height(height):.3f}")
    return 0


def _cmd_plan(args) -> int:
    clusters = read_clusters(args.clusters)
    station = EnuPoint(args.station[0], args.station[1])
    config = pl.PlannerConfig(
        capacity=args.capacity,
        cutter_width=args.cutter_width,
        harvester_speed=args.speed,
        unload_station=station,
        unload_time=args.unload_time,
    )
    plan = pl.plan(clusters, config, station)
    if args.out:
        pl.write_plan(plan, args.out)
        print(f"plan written to {args.out}")
    lanes = sum(1 for leg in plan.legs if leg.kind == pl.KIND_HARVEST)
    unloads = sum(1 for leg in plan.legs if leg.kind == pl.KIND_UNLOAD)
    peak = max(plan.load_profile, default=0.0)
    print(
        f"{len(plan.legs)} legs ({lanes} lanes, {unloads} unloads), "
        f"{plan.total_distance:.1f} m, {plan.total_time:.0f} s, "
        f"peak load {peak:.2f}/{config.capacity:g} m3"
    )
    return 0


def _cmd_mission(args) -> int:
    config = _load_config(args)
    run_dir = _run_dir(args)
    state = run_headless(config, run_dir=run_dir)
    report = state.report or {}
    print(f"run directory {run_dir}")
    print(f"harvested {report.get('harvested_load_truth_m3', 0.0):.3f} m3 "
          f"in {report.get('clock_s', 0.0):.0f} s simulated")
    return 0


def _cmd_serve(args) -> int:
    config = _load_config(args)
    service = serve(
        config,
        port=args.port,
        rtf=args.rtf,
        auto_approve=args.auto_approve,
        run_dir=_run_dir(args) if (args.out or os.environ.get("LAKEKEEPER_RUN_DIR")) else None,
        host=args.host,
    )
    print(f"serving on {service.url}", flush=True)
    try:
        # Short ticks keep the main thread responsive to Ctrl-C: a signal
        # delivered to another thread only raises KeyboardInterrupt once the
        # main thread re-enters the interpreter loop.
        while not service.wait_done(timeout=0.5):
            pass
        while True:  # finished missions stay up for late clients
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lakekeeper",
        description="Deterministic lake weed-harvesting mission simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p, dt=False):
        p.add_argument("--config", help="mission config JSON (defaults apply if omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")
        if dt:
            p.add_argument("--dt", type=float, help="override the step size in seconds")

    p = sub.add_parser("synth", help="generate a synthetic lake truth directory")
    add_config_args(p)
    p.add_argument("--out", required=True, help="output truth directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("survey", help="run a survey over a saved truth")
    add_config_args(p)
    p.add_argument("--truth", required=True, help="truth directory from synth")
    p.add_argument("--out", required=True, help="output ping NDJSON path")
    p.add_argument("--scan", type=int, default=0, help="scan index (rng stream)")
    p.set_defaults(func=_cmd_survey)

    p = sub.add_parser("process", help="soundings to rasters and clusters")
    add_config_args(p)
    p.add_argument("--pings", required=True, help="ping NDJSON from survey")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_process)

    p = sub.add_parser("diff", help="height map from pre/post bathymetry")
    p.add_argument("pre", help="pre-harvest bathymetry .asc")
    p.add_argument("post", help="post-harvest bathymetry .asc")
    p.add_argument("--out", help="write the height map here")
    p.add_argument("--noise-floor", type=float, default=0.15, dest="noise_floor",
                   help="heights at or below this are zeroed (m)")
    p.set_defaults(func=_cmd_diff)

    p = sub.add_parser("plan", help="capacity-aware harvest plan from clusters")
    p.add_argument("clusters", help="clusters GeoJSON")
    p.add_argument("--capacity", type=float, default=15.0, help="conveyor capacity m3")
    p.add_argument("--cutter-width", type=float, default=2.0, dest="cutter_width")
    p.add_argument("--speed", type=float, default=1.0, help="harvester speed m/s")
    p.add_argument("--unload-time", type=float, default=120.0, dest="unload_time")
    p.add_argument("--station", type=float, nargs=2, default=[0.0, 0.0],
                   metavar=("EAST", "NORTH"), help="unload station position")
    p.add_argument("--out", help="write plan JSON here")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("mission", help="run a full mission headless")
    add_config_args(p, dt=True)
    p.add_argument("--headless", action="store_true",
                   help="accepted for compatibility; missions always run headless")
    p.add_argument("--out", help=f"run directory (default ${{LAKEKEEPER_RUN_DIR}} or ./{DEFAULT_RUN_DIR})")
    p.set_defaults(func=_cmd_mission)

    p = sub.add_parser("serve", help="serve a live mission over HTTP")
    add_config_args(p, dt=True)
    p.add_argument("--port", type=int, default=8080, help="listen port (0 = ephemeral)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--rtf", type=float, default=1.0,
                   help="simulated seconds per wall second (0 = free-run)")
    p.add_argument("--auto-approve", action="store_true", dest="auto_approve",
                   help="approve plans without waiting for the console")
    p.add_argument("--out", help="write the run directory when the mission finishes")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except LakekeeperError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
