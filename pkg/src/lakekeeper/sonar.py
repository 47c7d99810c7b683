"""Multibeam echosounder simulator.

Each ping fans n_beams rays across track and marches every ray through the
truth model to its first surface. Ranges get Gaussian noise, the beam width
smears the footprint sample direction, and the gate window is applied to the
noised measurement: a return is kept only when its measured slant range is
within the lower gate and its vertical depth clears the upper gate. Reported
beam angles are the nominal fan angles, so they stay strictly increasing
regardless of smear.

Intensity model: a per-material base level plus Lambertian falloff
10*log10(cos theta) plus Gaussian noise. Base levels are simulator
constants, not calibrated field values.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .geo import EnuPoint, Pose2D
from .lake import MAT_NONE, MATERIAL_CODES, MATERIAL_NAMES, LakeTruth, first_return_grid
from .svp import SvpCast, effective_speed_vec

# backscatter base levels, dB
BASE_DB = {
    MATERIAL_CODES["seabed"]: -15.0,
    MATERIAL_CODES["weed"]: -25.0,
    MATERIAL_CODES["object"]: -5.0,
}

PING_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SonarSpec:
    """Instrument parameters. Defaults mirror the surveyed configuration:
    400 kHz centre frequency, 80 kHz chirp, 256 beams of 0.9 deg across a
    150 deg swath, gate window 1.0 to 5.0 m."""

    mean_frequency_hz: float = 400e3
    chirp_bandwidth_hz: float = 80e3
    n_beams: int = 256
    beam_width_deg: float = 0.9
    swath_deg: float = 150.0
    upper_gate_m: float = 1.0
    lower_gate_m: float = 5.0
    ping_rate_hz: float = 5.0
    range_noise_std_m: float = 0.075
    intensity_noise_std_db: float = 2.0

    def __post_init__(self) -> None:
        if self.n_beams < 2:
            raise ConfigError("need at least two beams")
        if not (0.0 < self.swath_deg < 180.0):
            raise ConfigError("swath must be in (0, 180) degrees")
        if not (0.0 < self.upper_gate_m < self.lower_gate_m):
            raise ConfigError("gates must satisfy 0 < upper < lower")
        if self.ping_rate_hz <= 0:
            raise ConfigError("ping rate must be positive")
        if self.beam_width_deg < 0 or self.range_noise_std_m < 0 or self.intensity_noise_std_db < 0:
            raise ConfigError("noise parameters must be non-negative")

    def noise_free(self) -> "SonarSpec":
        """Copy with every stochastic term disabled (smear included)."""
        return replace(self, beam_width_deg=0.0, range_noise_std_m=0.0, intensity_noise_std_db=0.0)


@dataclass(frozen=True)
class BeamReturn:
    beam_index: int
    angle: float  # nominal across-track angle, radians, starboard positive
    two_way_time: float | None
    intensity: float | None
    material_truth: str | None


@dataclass
class SonarPing:
    """One ping. Per-beam data is stored as parallel arrays; NaN in
    two_way_time/intensity and material code 0 mark NO_RETURN."""

    timestamp: float
    pose: Pose2D
    angles: np.ndarray
    two_way_time: np.ndarray
    intensity: np.ndarray
    material: np.ndarray

    @property
    def returns(self) -> list[BeamReturn]:
        out = []
        for k in range(len(self.angles)):
            twt = float(self.two_way_time[k])
            has = not math.isnan(twt)
            out.append(
                BeamReturn(
                    beam_index=k,
                    angle=float(self.angles[k]),
                    two_way_time=twt if has else None,
                    intensity=float(self.intensity[k]) if has else None,
                    material_truth=MATERIAL_NAMES.get(int(self.material[k])) if has else None,
                )
            )
        return out

    @property
    def n_returns(self) -> int:
        return int(np.count_nonzero(~np.isnan(self.two_way_time)))


def beam_angles(spec: SonarSpec) -> np.ndarray:
    """Nominal fan angles in radians, nadir-symmetric.

    theta_k = -swath/2 + k * swath/(n-1). Built by mirroring the positive
    half so theta_k == -theta_(n-1-k) holds exactly in floating point.
    """
    n = spec.n_beams
    half = math.radians(spec.swath_deg) / 2.0
    angles = np.empty(n)
    for k in range(n // 2):
        a = half * (n - 1 - 2 * k) / (n - 1)
        angles[k] = -a
        angles[n - 1 - k] = a
    if n % 2 == 1:
        angles[n // 2] = 0.0
    return angles


def _column_speed(sound_speed: SvpCast | float, depths: np.ndarray) -> np.ndarray:
    if isinstance(sound_speed, SvpCast):
        return effective_speed_vec(sound_speed, depths)
    return np.full(depths.shape, float(sound_speed))


def ping(
    pose: Pose2D,
    truth: LakeTruth,
    spec: SonarSpec,
    rng: np.random.Generator,
    sound_speed: SvpCast | float = 1500.0,
    timestamp: float = 0.0,
) -> SonarPing:
    """Simulate one ping of the full fan from the given pose."""
    n = spec.n_beams
    nominal = beam_angles(spec)

    # fixed draw order keeps the rng stream aligned across configurations
    smear = rng.uniform(-math.radians(spec.beam_width_deg) / 2.0, math.radians(spec.beam_width_deg) / 2.0, n)
    range_noise = rng.normal(0.0, spec.range_noise_std_m, n) if spec.range_noise_std_m > 0 else np.zeros(n)
    db_noise = (
        rng.normal(0.0, spec.intensity_noise_std_db, n) if spec.intensity_noise_std_db > 0 else np.zeros(n)
    )

    theta = nominal + smear
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    sb_e, sb_n = math.sin(pose.heading), -math.cos(pose.heading)  # starboard unit vector

    # march in steps of half a cell until past any range the gate could accept
    ds = truth.spec.cell_size / 2.0
    s_max = spec.lower_gate_m + max(5.0 * spec.range_noise_std_m, 0.5)
    steps = np.arange(1, int(math.ceil(s_max / ds)) + 1) * ds
    horiz = steps[:, None] * sin_t[None, :]
    xs = pose.position.east + horiz * sb_e
    ys = pose.position.north + horiz * sb_n
    surf, mat = first_return_grid(xs.ravel(), ys.ravel(), truth)
    surf = surf.reshape(len(steps), n)
    mat = mat.reshape(len(steps), n)

    ray_depth = steps[:, None] * cos_t[None, :]
    crossed = ray_depth >= surf
    hit = crossed.any(axis=0)
    first = np.argmax(crossed, axis=0)
    beam_ix = np.arange(n)
    z_hit = surf[first, beam_ix]
    mat_hit = mat[first, beam_ix].astype(np.uint8)

    # exact crossing range for a locally flat surface, clamped to the step bracket
    with np.errstate(invalid="ignore", divide="ignore"):
        r_true = np.clip(z_hit / cos_t, (first) * ds, (first + 1) * ds)
    r_meas = r_true + range_noise

    # gate the measurement: lower gate on slant range, upper gate on vertical depth
    vertical = r_meas * np.cos(nominal)
    keep = hit & (r_meas <= spec.lower_gate_m) & (vertical >= spec.upper_gate_m)

    c = _column_speed(sound_speed, np.where(keep, np.maximum(z_hit, 0.0), 0.0))
    twt = np.where(keep, 2.0 * r_meas / c, np.nan)
    with np.errstate(invalid="ignore"):
        db = np.where(
            keep,
            np.array([BASE_DB.get(int(m), 0.0) for m in mat_hit]) + 10.0 * np.log10(np.maximum(cos_t, 1e-12)) + db_noise,
            np.nan,
        )
    material = np.where(keep, mat_hit, np.uint8(MAT_NONE)).astype(np.uint8)

    return SonarPing(
        timestamp=timestamp,
        pose=pose,
        angles=nominal,
        two_way_time=twt,
        intensity=db,
        material=material,
    )


def survey_leg(
    start: EnuPoint,
    end: EnuPoint,
    speed: float,
    spec: SonarSpec,
    truth: LakeTruth,
    rng: np.random.Generator,
    sound_speed: SvpCast | float = 1500.0,
    t0: float = 0.0,
) -> list[SonarPing]:
    """Straight survey lane: one ping every speed/ping_rate metres from start,
    plus a final ping at the end point when the grid does not land on it.
    A zero-length leg yields a single ping at start."""
    if speed <= 0:
        raise ConfigError(f"survey speed must be positive, got {speed}")
    length = start.distance_to(end)
    spacing = speed / spec.ping_rate_hz
    distances = [k * spacing for k in range(int(math.floor(length / spacing)) + 1)]
    if length - distances[-1] > 1e-9:
        distances.append(length)
    if length > 0:
        heading = math.atan2(end.north - start.north, end.east - start.east)
        ux, uy = (end.east - start.east) / length, (end.north - start.north) / length
    else:
        heading, ux, uy = 0.0, 0.0, 0.0
    pings = []
    for d in distances:
        pose = Pose2D(EnuPoint(start.east + ux * d, start.north + uy * d), heading)
        pings.append(ping(pose, truth, spec, rng, sound_speed=sound_speed, timestamp=t0 + d / speed))
    return pings


def lawnmower_path(
    area: tuple[float, float, float, float], line_spacing: float
) -> list[tuple[EnuPoint, EnuPoint]]:
    """Boustrophedon legs covering the rectangle (e0, n0, e1, n1).

    Legs run along the east axis and alternate direction; lane offsets are
    centered so the first and last lanes sit half a margin in from the
    edges. ceil(width/spacing) legs; spacing wider than the area collapses
    to a single centerline leg.
    """
    e0, n0, e1, n1 = area
    if line_spacing <= 0:
        raise ConfigError(f"line spacing must be positive, got {line_spacing}")
    if e1 <= e0 or n1 <= n0:
        raise ConfigError(f"degenerate survey area {area}")
    width = n1 - n0
    count = max(1, int(math.ceil(width / line_spacing)))
    margin = (width - (count - 1) * line_spacing) / 2.0
    legs = []
    for k in range(count):
        offset = n0 + margin + k * line_spacing
        a, b = EnuPoint(e0, offset), EnuPoint(e1, offset)
        legs.append((a, b) if k % 2 == 0 else (b, a))
    return legs


def _float_or_none(v: float) -> float | None:
    return None if math.isnan(v) else float(v)


def ping_to_json(p: SonarPing) -> dict:
    return {
        "v": PING_SCHEMA_VERSION,
        "t": p.timestamp,
        "pose": {"east": p.pose.position.east, "north": p.pose.position.north, "heading": p.pose.heading},
        "angles": [float(a) for a in p.angles],
        "twt": [_float_or_none(v) for v in p.two_way_time],
        "db": [_float_or_none(v) for v in p.intensity],
        "mat": [MATERIAL_NAMES.get(int(m)) for m in p.material],
    }


def ping_from_json(obj: dict) -> SonarPing:
    pose = Pose2D(EnuPoint(obj["pose"]["east"], obj["pose"]["north"]), obj["pose"]["heading"])
    twt = np.array([np.nan if v is None else v for v in obj["twt"]], dtype=np.float64)
    db = np.array([np.nan if v is None else v for v in obj["db"]], dtype=np.float64)
    mat = np.array([0 if m is None else MATERIAL_CODES[m] for m in obj["mat"]], dtype=np.uint8)
    return SonarPing(
        timestamp=obj["t"],
        pose=pose,
        angles=np.array(obj["angles"], dtype=np.float64),
        two_way_time=twt,
        intensity=db,
        material=mat,
    )


def write_pings(pings: list[SonarPing], path: str) -> None:
    """NDJSON, one ping object per line. NO_RETURN beams serialize as nulls."""
    with open(path, "w", encoding="ascii") as fh:
        for p in pings:
            fh.write(json.dumps(ping_to_json(p), separators=(",", ":"), sort_keys=True))
            fh.write("\n")


def read_pings(path: str) -> list[SonarPing]:
    pings = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            if line.strip():
                pings.append(ping_from_json(json.loads(line)))
    return pings
