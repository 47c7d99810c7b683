"""Canned desk-scale scenarios used by the CLI demos and the test suites.

The reference harvest scenario is a 60 x 40 m flat-bottomed basin with three
parabolic weed patches. With the parabolic taper, canopy height is uniformly
distributed over [0, center_height] by area, so the mean canopy over the
detectable stand (true height at or above the 0.15 m change-detection floor)
is (center_height + 0.15) / 2. A center height of 1.45 m pins that mean at
exactly 0.80 m, which is what the survey pipeline is expected to recover.
"""

from __future__ import annotations

from .geo import EnuPoint
from .lake import BedParams, LakeTruth, ObjectSpec, WeedPatchSpec, synth_lake
from .raster import GridSpec

REFERENCE_AREA = (0.0, 0.0, 60.0, 40.0)
REFERENCE_CELL_SIZE = 0.5
REFERENCE_LINE_SPACING = 6.0
REFERENCE_PATCH_CENTER_HEIGHT = 1.45
DETECTABLE_MEAN_CANOPY = 0.80


def reference_patches() -> list[WeedPatchSpec]:
    h = REFERENCE_PATCH_CENTER_HEIGHT
    return [
        WeedPatchSpec(EnuPoint(18.0, 12.0), radius=5.0, mean_height=h, density=0.2),
        WeedPatchSpec(EnuPoint(38.0, 26.0), radius=6.0, mean_height=h, density=0.2),
        WeedPatchSpec(EnuPoint(48.0, 11.0), radius=4.5, mean_height=h, density=0.2),
    ]


def reference_truth(seed: int = 11) -> LakeTruth:
    extent = GridSpec(EnuPoint(0.0, 0.0), 0.25, 240, 160)
    return synth_lake(
        extent,
        bed=BedParams(base_depth=3.0),
        patches=reference_patches(),
        seed=seed,
    )


def ladder_truth(seed: int = 5) -> LakeTruth:
    """30 x 20 m flat basin with a single ladder lying proud of the bed."""
    extent = GridSpec(EnuPoint(0.0, 0.0), 0.25, 120, 80)
    ladder = ObjectSpec(
        kind="ladder",
        east_min=14.5,
        north_min=9.75,
        east_max=15.5,
        north_max=10.25,
        top_depth=1.5,
    )
    return synth_lake(
        extent,
        bed=BedParams(base_depth=3.0),
        patches=[],
        objects=[ladder],
        seed=seed,
    )


LADDER_AREA = (0.0, 0.0, 30.0, 20.0)
LADDER_FOOTPRINT = (14.5, 9.75, 15.5, 10.25)
