"""Sounding pipeline: georeferencing, robust gridding, differencing,
cluster extraction, GeoJSON round-trips.

Hand oracles are frozen as module constants before the tests use them.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lakekeeper.errors import ConfigError, DomainError, FormatError
from lakekeeper.geo import EnuPoint, Pose2D
from lakekeeper.lake import BedParams, LakeTruth, WeedPatchSpec, mow, synth_lake
from lakekeeper.pipeline import (
    SoundingSet,
    WeedCluster,
    clusters_from_geojson,
    clusters_to_geojson,
    diff_grids,
    extract_clusters,
    georeference,
    georeference_many,
    grid_soundings,
    mean_height,
    read_clusters,
    write_clusters,
)
from lakekeeper.raster import GridSpec, Raster
from lakekeeper.sonar import SonarPing, SonarSpec, lawnmower_path, survey_leg
from lakekeeper.svp import SvpCast

# A 45 degree beam over a 3 m bed at 1500 m/s: slant 3*sqrt(2), footprint
# 3 m abeam, vertical depth 3 m.
SLANT_45 = 3.0 * math.sqrt(2.0)
TWT_45 = 2.0 * SLANT_45 / 1500.0

# Robust gridding worked example: depths {3.0, 3.1, 3.2, 9.9} in one cell.
# median 3.15; absolute deviations {0.15, 0.05, 0.05, 6.75}; MAD 0.10;
# 3 * 1.4826 * MAD = 0.44478 rejects only 9.9; median of survivors 3.1.
MAD_EXAMPLE_DEPTHS = [3.0, 3.1, 3.2, 9.9]
MAD_EXAMPLE_RESULT = 3.1

GRID = GridSpec(EnuPoint(0.0, 0.0), 0.5, 20, 20)


def manual_ping(heading, angles, slants, speed=1500.0):
    angles = np.asarray(angles, dtype=float)
    slants = np.asarray(slants, dtype=float)
    return SonarPing(
        timestamp=0.0,
        pose=Pose2D(EnuPoint(0.0, 0.0), heading),
        angles=angles,
        two_way_time=2.0 * slants / speed,
        intensity=np.zeros(len(angles)),
        material=np.ones(len(angles), dtype=np.int8),
    )


def set_from_arrays(easts, norths, depths):
    n = len(easts)
    return SoundingSet(
        east=np.asarray(easts, dtype=float),
        north=np.asarray(norths, dtype=float),
        depth=np.asarray(depths, dtype=float),
        intensity=np.zeros(n),
        angle=np.zeros(n),
        ping_id=np.zeros(n, dtype=np.int64),
        beam=np.arange(n, dtype=np.int64),
    )


class TestGeoreference:
    def test_forty_five_degree_starboard_east_heading(self):
        ping = manual_ping(0.0, [math.radians(45.0)], [SLANT_45])
        out = georeference(ping, 1500.0)
        assert len(out) == 1
        s = next(iter(out))
        # heading east puts starboard due south
        assert s.east == pytest.approx(0.0, abs=1e-12)
        assert s.north == pytest.approx(-3.0, abs=1e-9)
        assert s.depth == pytest.approx(3.0, abs=1e-9)
        assert s.angle == pytest.approx(math.radians(45.0))

    def test_port_beam_lands_opposite(self):
        ping = manual_ping(0.0, [math.radians(-45.0)], [SLANT_45])
        s = next(iter(georeference(ping, 1500.0)))
        assert s.north == pytest.approx(3.0, abs=1e-9)
        assert s.depth == pytest.approx(3.0, abs=1e-9)

    def test_heading_rotates_footprint(self):
        # heading north: starboard is east
        ping = manual_ping(math.pi / 2.0, [math.radians(45.0)], [SLANT_45])
        s = next(iter(georeference(ping, 1500.0)))
        assert s.east == pytest.approx(3.0, abs=1e-9)
        assert s.north == pytest.approx(0.0, abs=1e-12)

    def test_no_return_beams_skipped(self):
        ping = manual_ping(0.0, [-0.1, 0.0, 0.1], [2.9, 3.0, 3.1])
        ping.two_way_time[1] = np.nan
        out = georeference(ping, 1500.0)
        assert len(out) == 2
        assert list(out.beam) == [0, 2]

    def test_cast_refinement_beats_surface_speed(self):
        # 1500 m/s above 2 m, 1480 m/s below; nadir beam over a 3 m bed.
        cast = SvpCast(
            [(0.0, 1500.0), (2.0, 1500.0), (2.0 + 1e-9, 1480.0), (10.0, 1480.0)]
        )
        itime = 2.0 / 1500.0 + 1.0 / 1480.0
        twt = 2.0 * 3.0 * (itime / 3.0)  # true two-way time for 3 m
        ping = manual_ping(0.0, [0.0], [1.0])
        ping.two_way_time[0] = twt
        depth = next(iter(georeference(ping, cast))).depth
        naive = twt * 1500.0 / 2.0
        assert abs(depth - 3.0) < 2e-3
        assert abs(depth - 3.0) < abs(naive - 3.0)

    def test_georeference_many_tags_ping_ids(self):
        pings = [manual_ping(0.0, [0.1], [3.0]), manual_ping(0.0, [0.1], [3.0])]
        out = georeference_many(pings, 1500.0)
        assert list(out.ping_id) == [0, 1]


class TestGridSoundings:
    def test_mad_rejection_worked_example(self):
        n = len(MAD_EXAMPLE_DEPTHS)
        soundings = set_from_arrays([1.1] * n, [1.1] * n, MAD_EXAMPLE_DEPTHS)
        grid = grid_soundings(soundings, GRID)
        assert grid.get(2, 2) == pytest.approx(MAD_EXAMPLE_RESULT, abs=1e-12)

    def test_min_count_leaves_nodata(self):
        soundings = set_from_arrays([1.1, 1.2], [1.1, 1.2], [3.0, 3.1])
        grid = grid_soundings(soundings, GRID)
        assert grid.get(2, 2) is None

    def test_outside_grid_ignored(self):
        soundings = set_from_arrays([-5.0, 1.1, 1.1, 1.1], [1.0, 1.1, 1.1, 1.1], [9.0, 3.0, 3.0, 3.0])
        grid = grid_soundings(soundings, GRID)
        assert grid.get(2, 2) == pytest.approx(3.0)
        assert np.count_nonzero(grid.data_mask) == 1

    def test_identical_depths_survive_zero_mad(self):
        soundings = set_from_arrays([0.1] * 5, [0.1] * 5, [2.5] * 5)
        grid = grid_soundings(soundings, GRID)
        assert grid.get(0, 0) == pytest.approx(2.5)

    def test_two_cells_grouped_independently(self):
        easts = [0.1, 0.1, 0.1, 5.1, 5.1, 5.1]
        depths = [2.0, 2.0, 2.0, 4.0, 4.0, 4.0]
        grid = grid_soundings(set_from_arrays(easts, [0.1] * 6, depths), GRID)
        assert grid.get(0, 0) == pytest.approx(2.0)
        assert grid.get(10, 0) == pytest.approx(4.0)

    @given(
        depths=st.lists(
            st.floats(min_value=0.5, max_value=8.0, allow_nan=False), min_size=3, max_size=40
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_gridded_value_within_data_range(self, depths):
        soundings = set_from_arrays([0.2] * len(depths), [0.2] * len(depths), depths)
        value = grid_soundings(soundings, GRID).get(0, 0)
        assert value is not None
        assert min(depths) - 1e-12 <= value <= max(depths) + 1e-12


class TestDiffGrids:
    def make(self, value):
        return Raster(GRID, np.full((20, 20), value, dtype=float))

    def test_height_from_depth_difference(self):
        # pre-harvest bed reads 3.2 m, post-harvest 4.0 m: 0.8 m of weed fell
        h = diff_grids(self.make(3.2), self.make(4.0))
        assert h.get(4, 4) == pytest.approx(0.8, abs=1e-12)

    def test_noise_floor_zeroes_small_differences(self):
        h = diff_grids(self.make(3.0), self.make(3.1), noise_floor=0.15)
        assert h.get(0, 0) == 0.0

    def test_negative_difference_clamped(self):
        h = diff_grids(self.make(3.5), self.make(3.0))
        assert h.get(0, 0) == 0.0

    def test_nodata_propagates(self):
        pre = self.make(3.0)
        post = self.make(4.0)
        pre.values[5, 5] = np.nan
        post.values[6, 6] = np.nan
        h = diff_grids(pre, post)
        assert h.get(5, 5) is None
        assert h.get(6, 6) is None
        assert h.get(0, 0) == pytest.approx(1.0)

    def test_mismatched_specs_rejected(self):
        other = Raster(GridSpec(EnuPoint(0.0, 0.0), 0.5, 10, 10), np.zeros((10, 10)))
        with pytest.raises(ConfigError):
            diff_grids(self.make(3.0), other)
        with pytest.raises(ConfigError):
            diff_grids(self.make(3.0), self.make(3.0), noise_floor=-0.1)


class TestMeanHeight:
    def test_positive_cells_only(self):
        values = np.zeros((20, 20))
        values[0, 0] = 0.5
        values[0, 1] = 1.0
        values[1, 1] = np.nan
        assert mean_height(Raster(GRID, values)) == pytest.approx(0.75)

    def test_mask_polygon_restricts(self):
        values = np.zeros((20, 20))
        values[0, 0] = 0.5  # center (0.25, 0.25)
        values[10, 10] = 1.5  # center (5.25, 5.25)
        poly = [(5.0, 5.0), (6.0, 5.0), (6.0, 6.0), (5.0, 6.0)]
        assert mean_height(Raster(GRID, values), poly) == pytest.approx(1.5)

    def test_no_positive_heights_raises(self):
        with pytest.raises(DomainError):
            mean_height(Raster(GRID, np.zeros((20, 20))))


def block_height_map(h=0.8):
    """10x10 cell block of uniform height in the 20x20 test grid, covering
    east 2.5..7.5, north 2.5..7.5. Area 25 m2, volume 25 h."""
    values = np.zeros((20, 20))
    values[5:15, 5:15] = h
    return Raster(GRID, values)


def uniform_density(value=0.2):
    return Raster(GRID, np.full((20, 20), value))


class TestExtractClusters:
    def test_block_bookkeeping(self):
        clusters = extract_clusters(block_height_map(), uniform_density())
        assert len(clusters) == 1
        c = clusters[0]
        assert c.id == 0
        assert c.area == pytest.approx(25.0, abs=1e-12)
        assert c.mean_height == pytest.approx(0.8, abs=1e-12)
        assert c.volume == pytest.approx(20.0, abs=1e-12)
        assert c.load_volume == pytest.approx(4.0, abs=1e-12)
        assert c.centroid.east == pytest.approx(5.0)
        assert c.centroid.north == pytest.approx(5.0)
        assert len(c.cell_east) == 100
        assert math.fsum(c.cell_loads) == pytest.approx(c.load_volume, abs=1e-9)

    def test_block_polygon_is_square(self):
        c = extract_clusters(block_height_map(), uniform_density())[0]
        assert set(c.polygon) == {(2.5, 2.5), (7.5, 2.5), (7.5, 7.5), (2.5, 7.5)}

    def test_l_shape_polygon_corners(self):
        values = np.zeros((20, 20))
        values[0:4, 0:8] = 0.5  # east 0..4, north 0..2
        values[4:8, 0:4] = 0.5  # east 0..2, north 2..4
        c = extract_clusters(Raster(GRID, values), uniform_density())[0]
        assert set(c.polygon) == {
            (0.0, 0.0), (4.0, 0.0), (4.0, 2.0), (2.0, 2.0), (2.0, 4.0), (0.0, 4.0),
        }

    def test_min_area_filters_and_ids_stay_sequential(self):
        values = np.zeros((20, 20))
        values[0, 0] = 0.9  # 0.25 m2, dropped at min_area=1
        values[4:8, 4:8] = 0.5
        values[12:16, 12:16] = 0.6
        clusters = extract_clusters(Raster(GRID, values), uniform_density(), min_area=1.0)
        assert [c.id for c in clusters] == [0, 1]
        assert clusters[0].mean_height == pytest.approx(0.5)
        assert clusters[1].mean_height == pytest.approx(0.6)

    def test_diagonal_cells_are_separate_clusters(self):
        values = np.zeros((20, 20))
        values[2:4, 2:4] = 0.5
        values[4:6, 4:6] = 0.5  # touches only at a corner
        clusters = extract_clusters(Raster(GRID, values), uniform_density(), min_area=0.5)
        assert len(clusters) == 2

    def test_scan_order_south_west_first(self):
        values = np.zeros((20, 20))
        values[14:18, 2:6] = 0.4  # north-west blob
        values[2:6, 14:18] = 0.7  # south-east blob: first by row scan
        clusters = extract_clusters(Raster(GRID, values), uniform_density(), min_area=0.5)
        assert clusters[0].mean_height == pytest.approx(0.7)
        assert clusters[1].mean_height == pytest.approx(0.4)

    def test_classification_source_with_height_raster(self):
        codes = np.zeros((20, 20))
        codes[5:15, 5:15] = 2.0
        codes[0:3, 0:3] = 3.0  # object cells must not become a cluster
        clusters = extract_clusters(
            Raster(GRID, codes), uniform_density(), height=block_height_map()
        )
        assert len(clusters) == 1
        assert clusters[0].volume == pytest.approx(20.0, abs=1e-12)

    def test_mismatched_density_grid_rejected(self):
        bad = Raster(GridSpec(EnuPoint(0, 0), 1.0, 5, 5), np.zeros((5, 5)))
        with pytest.raises(ConfigError):
            extract_clusters(block_height_map(), bad)


class TestClusterGeojson:
    def test_round_trip_preserves_bookkeeping(self, tmp_path):
        clusters = extract_clusters(block_height_map(), uniform_density())
        path = str(tmp_path / "clusters.geojson")
        write_clusters(clusters, path)
        back = read_clusters(path)
        assert len(back) == 1
        b, c = back[0], clusters[0]
        assert b.id == c.id
        assert b.area == pytest.approx(c.area)
        assert b.volume == pytest.approx(c.volume)
        assert b.load_volume == pytest.approx(c.load_volume)
        assert b.mean_height == pytest.approx(c.mean_height)
        assert set(b.polygon) == set(c.polygon)
        assert len(b.cell_east) == len(c.cell_east)
        assert math.fsum(b.cell_loads) == pytest.approx(b.load_volume, abs=1e-9)

    def test_geojson_shape(self):
        doc = clusters_to_geojson(extract_clusters(block_height_map(), uniform_density()))
        assert doc["type"] == "FeatureCollection"
        feature = doc["features"][0]
        assert feature["geometry"]["type"] == "Polygon"
        ring = feature["geometry"]["coordinates"][0]
        assert ring[0] == ring[-1]
        assert feature["properties"]["volume_m3"] == pytest.approx(20.0)

    def test_write_is_byte_deterministic(self, tmp_path):
        clusters = extract_clusters(block_height_map(), uniform_density())
        p1, p2 = str(tmp_path / "a.geojson"), str(tmp_path / "b.geojson")
        write_clusters(clusters, p1)
        write_clusters(clusters, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_bad_documents_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            clusters_from_geojson({"type": "Feature"})
        path = tmp_path / "junk.geojson"
        path.write_text("{not json")
        with pytest.raises(FormatError):
            read_clusters(str(path))


class TestEndToEndVolume:
    """Noise-free survey of a rectangular canopy block must recover its
    volume from the pre/post difference to within two percent."""

    def build_truth(self):
        spec = GridSpec(EnuPoint(0.0, 0.0), 0.25, 120, 120)  # 30 x 30 m
        bed = Raster(spec, np.full((120, 120), 3.0))
        canopy = Raster(spec, np.zeros((120, 120)))
        density = Raster(spec, np.zeros((120, 120)))
        ee, nn = np.meshgrid(*spec.cell_centers())
        block = (ee > 10.0) & (ee < 15.0) & (nn > 12.0) & (nn < 14.5)
        canopy.values[block] = 0.8
        density.values[block] = 0.2
        return LakeTruth(spec=spec, bed=bed, canopy=canopy, density=density, objects=[], seed=0)

    def survey(self, truth, sonar):
        rng = np.random.default_rng(7)
        pings = []
        for start, end in lawnmower_path((0.0, 0.0, 30.0, 30.0), 2.0):
            pings.extend(survey_leg(start, end, 1.5433, sonar, truth, rng))
        return pings

    def test_recovers_block_volume(self):
        truth = self.build_truth()
        true_volume = truth.canopy_volume()
        assert true_volume == pytest.approx(10.0, abs=1e-9)

        sonar = SonarSpec().noise_free()
        grid = GridSpec(EnuPoint(0.0, 0.0), 0.5, 60, 60)
        pre = grid_soundings(georeference_many(self.survey(truth, sonar), 1500.0), grid)

        # mow reports the conveyor load: canopy volume times plant density
        mowed = mow(truth, [(10.0, 12.0), (15.0, 12.0), (15.0, 14.5), (10.0, 14.5)])
        assert mowed == pytest.approx(true_volume * 0.2, abs=1e-9)

        post = grid_soundings(georeference_many(self.survey(truth, sonar), 1500.0), grid)
        height = diff_grids(pre, post)
        clusters = extract_clusters(height, uniform_density_like(grid, 0.2), min_area=1.0)
        recovered = sum(c.volume for c in clusters)
        assert recovered == pytest.approx(true_volume, rel=0.02)
        assert clusters[0].mean_height == pytest.approx(0.8, abs=0.05)


def uniform_density_like(spec, value):
    return Raster(spec, np.full((spec.n_rows, spec.n_cols), value))
