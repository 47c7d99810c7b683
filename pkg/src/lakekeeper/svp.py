"""Sound velocity profiles and slant-range correction.

A cast is a piecewise-linear speed-vs-depth profile. Travel time to depth z
integrates 1/c(z'), so the effective (harmonic mean) speed over a linear
segment from c1 to c2 has the closed form dz * ln(c2/c1) / (c2 - c1).
Above the first sample and below the last the profile extends as constant.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, FormatError

SPEED_MIN = 1400.0
SPEED_MAX = 1600.0

CSV_HEADER = ["depth_m", "sound_speed_mps"]


@dataclass
class SvpCast:
    """Measured profile: sample depths (m, strictly increasing) and speeds (m/s)."""

    depths: np.ndarray
    speeds: np.ndarray
    timestamp: str | None = None
    # cumulative travel-time integral of 1/c from the surface to each sample
    _itime: np.ndarray = field(init=False, repr=False)

    def __init__(self, samples, timestamp: str | None = None):
        pairs = [(float(d), float(c)) for d, c in samples]
        if not pairs:
            raise ConfigError("cast needs at least one sample")
        depths = np.array([d for d, _ in pairs], dtype=np.float64)
        speeds = np.array([c for _, c in pairs], dtype=np.float64)
        if np.any(depths < 0):
            raise ConfigError("sample depths must be non-negative")
        if np.any(np.diff(depths) <= 0):
            raise ConfigError("sample depths must be strictly increasing")
        if np.any((speeds < SPEED_MIN) | (speeds > SPEED_MAX)):
            raise ConfigError(f"speeds must lie in [{SPEED_MIN}, {SPEED_MAX}] m/s")
        self.depths = depths
        self.speeds = speeds
        self.timestamp = timestamp
        self._itime = self._cumulative_itime()

    def _cumulative_itime(self) -> np.ndarray:
        d, c = self.depths, self.speeds
        itime = np.empty(len(d))
        itime[0] = d[0] / c[0]  # constant speed above the first sample
        for i in range(len(d) - 1):
            itime[i + 1] = itime[i] + _segment_itime(d[i], c[i], d[i + 1], c[i + 1])
        return itime


def _segment_itime(d1: float, c1: float, d2: float, c2: float) -> float:
    """Integral of 1/c over a linear speed segment."""
    if c1 == c2:
        return (d2 - d1) / c1
    return (d2 - d1) * math.log(c2 / c1) / (c2 - c1)


def effective_speed(cast: SvpCast, depth: float) -> float:
    """Harmonic-mean speed of the water column from the surface to ``depth``."""
    return float(effective_speed_vec(cast, np.array([depth]))[0])


def effective_speed_vec(cast: SvpCast, depths: np.ndarray) -> np.ndarray:
    depths = np.asarray(depths, dtype=np.float64)
    if np.any(depths < 0):
        raise DomainError("depth must be non-negative")
    d, c, itime = cast.depths, cast.speeds, cast._itime
    out = np.empty(depths.shape)

    shallow = depths <= d[0]
    out[shallow] = c[0]

    deep = depths >= d[-1]
    if np.any(deep):
        z = depths[deep]
        total = itime[-1] + (z - d[-1]) / c[-1]
        out[deep] = z / total

    mid = ~shallow & ~deep
    if np.any(mid):
        z = depths[mid]
        seg = np.searchsorted(d, z, side="right") - 1
        d1, c1 = d[seg], c[seg]
        d2, c2 = d[seg + 1], c[seg + 1]
        slope = (c2 - c1) / (d2 - d1)
        cz = c1 + slope * (z - d1)
        with np.errstate(divide="ignore", invalid="ignore"):
            seg_itime = np.where(
                np.isclose(cz, c1),
                (z - d1) / c1,
                (z - d1) * np.log(cz / c1) / (cz - c1),
            )
        out[mid] = z / (itime[seg] + seg_itime)
    return out


def correct_range(two_way_time: float, cast: SvpCast, nominal_depth: float = 0.0) -> float:
    """One-way slant range for a two-way travel time through the cast.

    Uses the effective speed of the column down to ``nominal_depth``; the
    caller refines once with nominal_depth = r * cos(theta) for oblique beams.
    """
    if two_way_time <= 0:
        raise DomainError(f"two-way time must be positive, got {two_way_time}")
    return two_way_time * effective_speed(cast, nominal_depth) / 2.0


def write_cast(cast: SvpCast, path: str) -> None:
    """CSV with a fixed header plus a JSON sidecar carrying the timestamp."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for d, c in zip(cast.depths, cast.speeds):
            writer.writerow([repr(float(d)), repr(float(c))])
    with open(_sidecar_path(path), "w", encoding="ascii") as fh:
        json.dump({"timestamp": cast.timestamp}, fh, sort_keys=True)
        fh.write("\n")


def read_cast(path: str) -> SvpCast:
    with open(path, "r", newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != CSV_HEADER:
        raise FormatError(f"{path}: expected header {','.join(CSV_HEADER)}")
    try:
        samples = [(float(r[0]), float(r[1])) for r in rows[1:] if r]
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: malformed sample row") from exc
    timestamp = None
    sidecar = _sidecar_path(path)
    if os.path.exists(sidecar):
        with open(sidecar, "r", encoding="ascii") as fh:
            timestamp = json.load(fh).get("timestamp")
    try:
        return SvpCast(samples, timestamp=timestamp)
    except ConfigError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def _sidecar_path(path: str) -> str:
    base, _ = os.path.splitext(path)
    return base + ".json"
